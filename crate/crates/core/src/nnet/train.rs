use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::mlp::{Activation, MlpParams};
use crate::dataset::{assign_regions, RegressionDataset, ShotRegions, ShotScheme, Split};
use crate::error::{Error, Result};
use crate::evaluation::{region_metrics, RegionMetrics, DEFAULT_GM_EPS};
use crate::label_space::{kde_density, Bandwidth, LabelSpace};
use crate::loss::{DistLoss, DistLossConfig};
use crate::rng::{stream_rng, Stream};
use crate::softsort::SoftSortConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Epochs at which the learning rate is multiplied by `lr_gamma`.
    pub milestones: Vec<usize>,
    pub lr_gamma: f64,
    pub loss: DistLossConfig,
    pub sort: SoftSortConfig,
    pub bandwidth: Bandwidth,
    pub shot_scheme: ShotScheme,
    pub shot_thresholds: (f64, f64),
    pub gm_eps: f64,
    /// Skip the final short batch instead of training on it.
    pub drop_last: bool,
    /// Train only the output layer (fine-tuning from a warm start).
    pub train_last_layer_only: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            activation: Activation::Relu,
            epochs: 20,
            batch_size: 256,
            adam: AdamConfig::default(),
            milestones: vec![13, 17],
            lr_gamma: 0.1,
            loss: DistLossConfig::default(),
            sort: SoftSortConfig::ascending(),
            bandwidth: Bandwidth::Auto,
            shot_scheme: ShotScheme::AbsoluteCounts,
            shot_thresholds: (20.0, 100.0),
            gm_eps: DEFAULT_GM_EPS,
            drop_last: false,
            train_last_layer_only: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let drops = self.milestones.iter().filter(|&&m| m <= epoch).count();
        self.adam.lr * self.lr_gamma.powi(drops as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_sample_term: f64,
    pub train_dist_term: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val: Option<Vec<RegionMetrics>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_wasserstein1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: MlpParams,
    pub optimizer: AdamState,
    pub regions: ShotRegions,
    pub log: Vec<EpochLog>,
}

/// Sets the fixed input standardization and output scaling from training data.
fn fit_transforms(params: &mut MlpParams, x: &ndarray::Array2<f64>, y: &[f64]) {
    let n = x.nrows() as f64;
    for j in 0..x.ncols() {
        let col = x.column(j);
        let mean = col.sum() / n;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        params.input_mean[j] = mean;
        params.input_scale[j] = if sd > 1e-12 { sd } else { 1.0 };
    }
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    params.output_offset = mean;
    params.output_scale = if sd > 1e-12 { sd } else { 1.0 };
}

/// Mini-batch training against Dist Loss (or its `dist_weight = 0` reduction).
///
/// `warm_start` continues from existing parameters; otherwise the network is
/// initialized from the `Init` stream of `cfg.seed`.
pub fn train(
    dataset: &RegressionDataset,
    space: &LabelSpace,
    cfg: &TrainConfig,
    warm_start: Option<MlpParams>,
) -> Result<TrainOutcome> {
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    let (x_train, y_train) = dataset.split(Split::Train);
    if y_train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (x_val, y_val) = dataset.split(Split::Val);

    let density = kde_density(space, &y_train, cfg.bandwidth)?;
    let regions = assign_regions(&y_train, space, cfg.shot_scheme, cfg.shot_thresholds)?;
    let mut loss = DistLoss::new(density, cfg.sort, cfg.loss)?;

    let mut params = match warm_start {
        Some(p) => p,
        None => {
            let mut dims = vec![dataset.dim()];
            dims.extend(&cfg.hidden);
            dims.push(1);
            let mut p = MlpParams::init(&dims, cfg.activation, &mut stream_rng(cfg.seed, Stream::Init))?;
            fit_transforms(&mut p, &x_train, &y_train);
            p
        }
    };
    if params.input_dim() != dataset.dim() {
        return Err(Error::shape(params.input_dim(), dataset.dim()));
    }
    let mut trainable = vec![true; params.num_layers()];
    if cfg.train_last_layer_only {
        let last = trainable.len() - 1;
        trainable[..last].fill(false);
    }

    let mut optimizer = AdamState::new(&params, cfg.adam);
    let mut shuffle_rng = stream_rng(cfg.seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..y_train.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        optimizer.config.lr = cfg.lr_at(epoch);
        order.shuffle(&mut shuffle_rng);
        let (mut total, mut sample, mut dist, mut seen) = (0.0, 0.0, 0.0, 0usize);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            if cfg.drop_last && batch.len() < cfg.batch_size && seen > 0 {
                continue;
            }
            let xb = x_train.select(ndarray::Axis(0), batch);
            let yb: Vec<f64> = batch.iter().map(|&i| y_train[i]).collect();
            let (pred, tape) = params.forward(xb.view())?;
            let out = loss.evaluate(&pred, &yb).map_err(|e| match e {
                Error::InvalidInput(_) => Error::NonFiniteGradient(format!(" (non-finite prediction) in epoch {epoch}, batch {b}")),
                other => other,
            })?;
            if !out.total.is_finite() {
                return Err(Error::NonFiniteGradient(format!(" (loss {}) in epoch {epoch}, batch {b}", out.total)));
            }
            let grads = params.backward(&tape, &out.grad_predictions)?;
            adam_step(&mut params, &grads, &mut optimizer, &trainable).map_err(|e| match e {
                Error::NonFiniteGradient(msg) => Error::NonFiniteGradient(format!("{msg} in epoch {epoch}, batch {b}")),
                other => other,
            })?;
            let n = batch.len() as f64;
            total += out.total * n;
            sample += out.sample_term * n;
            dist += out.dist_term * n;
            seen += batch.len();
        }
        let seen = seen.max(1) as f64;
        let (val, val_wasserstein1) = if y_val.is_empty() {
            (None, None)
        } else {
            let pred = params.predict(x_val.view())?;
            let report = region_metrics(&pred, &y_val, &regions, space, cfg.gm_eps)?;
            (Some(report.regions), Some(report.wasserstein1))
        };
        log.push(EpochLog {
            epoch,
            lr: optimizer.config.lr,
            train_loss: total / seen,
            train_sample_term: sample / seen,
            train_dist_term: dist / seen,
            val,
            val_wasserstein1,
        });
    }
    Ok(TrainOutcome { params, optimizer, regions, log })
}
