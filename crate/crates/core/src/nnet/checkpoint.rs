use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::mlp::MlpParams;
use crate::dataset::ShotRegions;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON checkpoint: network, optimizer state, and the label discretization
/// and shot regions the model was trained against.
///
/// ```text
/// { "format_version": 1,
///   "params": { "layer_dims", "activation", "weights", "biases",
///               "input_mean", "input_scale", "output_offset", "output_scale" },
///   "optimizer": { "config", "step", "first", "second" },
///   "label_space": { "y_min", "y_max", "delta_y" },
///   "regions": { "scheme", "thresholds", "counts", "regions" },
///   "config": { "<key>": "<value>", ... } }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub params: MlpParams,
    pub optimizer: AdamState,
    pub label_space: (f64, f64, f64),
    pub regions: ShotRegions,
    /// Resolved run configuration that produced the checkpoint.
    #[serde(default)]
    pub config: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        crate::io::write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.format_version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ckpt.format_version
            )));
        }
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{assign_regions, ShotScheme};
    use crate::label_space::LabelSpace;
    use crate::nnet::{AdamConfig, Activation};
    use crate::rng::{stream_rng, Stream};

    fn sample() -> Checkpoint {
        let params = MlpParams::init(&[2, 3, 1], Activation::Tanh, &mut stream_rng(1, Stream::Init)).unwrap();
        let space = LabelSpace::new(0.0, 4.0, 1.0).unwrap();
        let regions = assign_regions(&[0.5, 0.5, 1.5, 3.5], &space, ShotScheme::AbsoluteCounts, (1.0, 2.0)).unwrap();
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            optimizer: AdamState::new(&params, AdamConfig::default()),
            params,
            label_space: (0.0, 4.0, 1.0),
            regions,
            config: BTreeMap::from([("seed".to_string(), "1".to_string())]),
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let ckpt = sample();
        ckpt.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ckpt);
    }

    #[test]
    fn wrong_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let mut ckpt = sample();
        ckpt.format_version = 99;
        ckpt.save(&path).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Config(_))));
    }
}
