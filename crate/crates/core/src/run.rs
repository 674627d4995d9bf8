//! Run orchestration: a flat `key = value` configuration and the four
//! commands behind the `distloss` binary.
//!
//! Every command writes into `<out_dir>/<tag>/`:
//!
//! | command  | files                                                    |
//! |----------|----------------------------------------------------------|
//! | `gen`    | `dataset.csv`, `train_histogram.csv`                     |
//! | `train`  | `checkpoint.json`, `epochs.json`                         |
//! | `eval`   | `report.json`, `report.csv`, `histograms.csv`            |
//! | `ablate` | `ablate_<axis>.csv`, `ablate_<axis>.json`, one sub-run per point |
//!
//! Each file carries the resolved configuration, either as a `config` object
//! (JSON) or as leading `# key=value` lines (CSV). A run is a pure function
//! of its configuration: the same config gives byte-identical outputs.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::dataset::{load_csv, save_csv, synth_imbalanced, ImbalanceShape, RegressionDataset, ShotScheme, Split, SynthSpec};
use crate::error::{Error, Result};
use crate::evaluation::{emit_report, histograms_to_csv, region_metrics, RegionKey, RegionMetrics, RegionReport, ReportFormat};
use crate::label_space::{Bandwidth, LabelSpace};
use crate::loss::{DistLossConfig, SeqLossKind, Weighting};
use crate::nnet::checkpoint::CHECKPOINT_VERSION;
use crate::nnet::{train, Activation, AdamConfig, Checkpoint, TrainConfig, TrainOutcome};
use crate::softsort::SoftSortConfig;

/// Family of the synthetic training-label law. The exponential family takes
/// its steepness from `imbalance_ratio`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelShape {
    Uniform,
    Exponential,
    LogNormal { mu: f64, sigma: f64 },
    Bimodal { loc1: f64, loc2: f64, sd: f64, weight1: f64 },
}

impl fmt::Display for LabelShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LabelShape::Uniform => f.write_str("uniform"),
            LabelShape::Exponential => f.write_str("exponential"),
            LabelShape::LogNormal { mu, sigma } => write!(f, "lognormal:{mu:?}:{sigma:?}"),
            LabelShape::Bimodal { loc1, loc2, sd, weight1 } => write!(f, "bimodal:{loc1:?}:{loc2:?}:{sd:?}:{weight1:?}"),
        }
    }
}

impl FromStr for LabelShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default();
        let nums = parts.map(|p| p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"))).collect::<Result<Vec<_>, _>>()?;
        match (name, nums.as_slice()) {
            ("uniform", []) => Ok(LabelShape::Uniform),
            ("exponential", []) => Ok(LabelShape::Exponential),
            ("lognormal", &[mu, sigma]) => Ok(LabelShape::LogNormal { mu, sigma }),
            ("bimodal", &[loc1, loc2, sd, weight1]) => Ok(LabelShape::Bimodal { loc1, loc2, sd, weight1 }),
            _ => Err(format!(
                "expected uniform, exponential, lognormal:<mu>:<sigma> or bimodal:<loc1>:<loc2>:<sd>:<weight1>, got {s:?}"
            )),
        }
    }
}

/// Every knob of a run. See [`RunConfig::KEYS`] for the flat key names.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tag: String,
    pub out_dir: PathBuf,
    /// Dataset CSV to use instead of `<run dir>/dataset.csv`.
    pub data: Option<PathBuf>,
    pub seed: u64,

    pub n_train: usize,
    pub n_eval: usize,
    pub dim: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub shape: LabelShape,
    pub imbalance_ratio: f64,
    pub noise_sd: f64,

    pub delta_y: f64,
    pub bandwidth: Bandwidth,
    pub seq_loss_kind: SeqLossKind,
    pub sample_weighting: Weighting,
    pub dist_weight: f64,
    pub weight_floor: f64,
    pub normalize_weights: bool,
    pub epsilon: Option<f64>,

    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub milestones: Vec<usize>,
    pub lr_gamma: f64,
    pub drop_last: bool,

    pub shot_scheme: ShotScheme,
    pub shot_low: f64,
    pub shot_high: f64,
    pub gm_eps: f64,
    /// Worker threads for `ablate`. Does not affect results.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthSpec::default();
        let train = TrainConfig::default();
        let loss = DistLossConfig::default();
        Self {
            tag: "default".into(),
            out_dir: PathBuf::from("runs"),
            data: None,
            seed: 0,
            n_train: synth.n_train,
            n_eval: synth.n_eval,
            dim: synth.d,
            y_min: synth.y_min,
            y_max: synth.y_max,
            shape: LabelShape::Exponential,
            imbalance_ratio: 5f64.exp(),
            noise_sd: synth.noise_sd,
            delta_y: 4.0,
            bandwidth: Bandwidth::Auto,
            seq_loss_kind: loss.kind,
            sample_weighting: loss.sample_weighting,
            dist_weight: loss.dist_weight,
            weight_floor: loss.weight_floor,
            normalize_weights: loss.normalize_weights,
            epsilon: None,
            hidden: train.hidden,
            activation: train.activation,
            epochs: train.epochs,
            batch_size: train.batch_size,
            lr: train.adam.lr,
            beta1: train.adam.beta1,
            beta2: train.adam.beta2,
            adam_eps: train.adam.eps,
            weight_decay: train.adam.weight_decay,
            milestones: train.milestones,
            lr_gamma: train.lr_gamma,
            drop_last: train.drop_last,
            shot_scheme: ShotScheme::NmaxFractions,
            shot_low: 0.15,
            shot_high: 0.5,
            gm_eps: train.gm_eps,
            threads: 1,
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<usize>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}"))).collect()
}

fn fmt_list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn parse_seq_loss_kind(s: &str) -> Result<SeqLossKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "inv-l1" => Ok(SeqLossKind::INV_L1),
        "inv-l2" => Ok(SeqLossKind::INV_L2),
        "l1" => Ok(SeqLossKind::L1),
        "l2" => Ok(SeqLossKind::L2),
        _ => Err(format!("expected inv-l1, inv-l2, l1 or l2, got {s:?}")),
    }
}

fn fmt_seq_loss_kind(k: SeqLossKind) -> String {
    k.to_string().to_ascii_lowercase()
}

fn parse_auto(s: &str) -> Result<Option<f64>, String> {
    if s == "auto" {
        Ok(None)
    } else {
        s.parse::<f64>().map(Some).map_err(|e| format!("expected auto or a number, got {s:?}: {e}"))
    }
}

fn fmt_auto(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".into(), |v| format!("{v:?}"))
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| format!("{s:?}: {e}"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got {s:?}")),
    }
}

impl RunConfig {
    /// Recognized keys, in serialization order.
    pub const KEYS: &'static [&'static str] = &[
        "tag", "out_dir", "data", "seed", "n_train", "n_eval", "dim", "y_min", "y_max", "shape",
        "imbalance_ratio", "noise_sd", "delta_y", "bandwidth", "seq_loss_kind", "sample_weighting",
        "dist_weight", "weight_floor", "normalize_weights", "epsilon", "hidden", "activation", "epochs",
        "batch_size", "lr", "beta1", "beta2", "adam_eps", "weight_decay", "milestones", "lr_gamma",
        "drop_last", "shot_scheme", "shot_low", "shot_high", "gm_eps", "threads",
    ];

    /// Value of `key` in its text form.
    pub fn get(&self, key: &str) -> Result<String> {
        Ok(match key {
            "tag" => self.tag.clone(),
            "out_dir" => self.out_dir.display().to_string(),
            "data" => self.data.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            "seed" => self.seed.to_string(),
            "n_train" => self.n_train.to_string(),
            "n_eval" => self.n_eval.to_string(),
            "dim" => self.dim.to_string(),
            "y_min" => format!("{:?}", self.y_min),
            "y_max" => format!("{:?}", self.y_max),
            "shape" => self.shape.to_string(),
            "imbalance_ratio" => format!("{:?}", self.imbalance_ratio),
            "noise_sd" => format!("{:?}", self.noise_sd),
            "delta_y" => format!("{:?}", self.delta_y),
            "bandwidth" => fmt_auto(match self.bandwidth {
                Bandwidth::Auto => None,
                Bandwidth::Fixed(h) => Some(h),
            }),
            "seq_loss_kind" => fmt_seq_loss_kind(self.seq_loss_kind),
            "sample_weighting" => match self.sample_weighting {
                Weighting::Uniform => "uniform".into(),
                Weighting::InverseProbability => "inverse".into(),
            },
            "dist_weight" => format!("{:?}", self.dist_weight),
            "weight_floor" => format!("{:?}", self.weight_floor),
            "normalize_weights" => self.normalize_weights.to_string(),
            "epsilon" => fmt_auto(self.epsilon),
            "hidden" => fmt_list(&self.hidden),
            "activation" => match self.activation {
                Activation::Relu => "relu".into(),
                Activation::Tanh => "tanh".into(),
            },
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "lr" => format!("{:?}", self.lr),
            "beta1" => format!("{:?}", self.beta1),
            "beta2" => format!("{:?}", self.beta2),
            "adam_eps" => format!("{:?}", self.adam_eps),
            "weight_decay" => format!("{:?}", self.weight_decay),
            "milestones" => fmt_list(&self.milestones),
            "lr_gamma" => format!("{:?}", self.lr_gamma),
            "drop_last" => self.drop_last.to_string(),
            "shot_scheme" => match self.shot_scheme {
                ShotScheme::AbsoluteCounts => "absolute_counts".into(),
                ShotScheme::NmaxFractions => "nmax_fractions".into(),
            },
            "shot_low" => format!("{:?}", self.shot_low),
            "shot_high" => format!("{:?}", self.shot_high),
            "gm_eps" => format!("{:?}", self.gm_eps),
            "threads" => self.threads.to_string(),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        })
    }

    /// Sets `key` from its text form. Unknown keys and unparsable values are
    /// config errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let res: Result<(), String> = (|| {
            match key {
                "tag" => self.tag = value.to_string(),
                "out_dir" => self.out_dir = PathBuf::from(value),
                "data" => self.data = (!value.is_empty()).then(|| PathBuf::from(value)),
                "seed" => self.seed = parse_num(value)?,
                "n_train" => self.n_train = parse_num(value)?,
                "n_eval" => self.n_eval = parse_num(value)?,
                "dim" => self.dim = parse_num(value)?,
                "y_min" => self.y_min = parse_num(value)?,
                "y_max" => self.y_max = parse_num(value)?,
                "shape" => self.shape = value.parse()?,
                "imbalance_ratio" => self.imbalance_ratio = parse_num(value)?,
                "noise_sd" => self.noise_sd = parse_num(value)?,
                "delta_y" => self.delta_y = parse_num(value)?,
                "bandwidth" => self.bandwidth = parse_auto(value)?.map_or(Bandwidth::Auto, Bandwidth::Fixed),
                "seq_loss_kind" => self.seq_loss_kind = parse_seq_loss_kind(value)?,
                "sample_weighting" => {
                    self.sample_weighting = match value {
                        "uniform" => Weighting::Uniform,
                        "inverse" => Weighting::InverseProbability,
                        _ => return Err(format!("expected uniform or inverse, got {value:?}")),
                    }
                }
                "dist_weight" => self.dist_weight = parse_num(value)?,
                "weight_floor" => self.weight_floor = parse_num(value)?,
                "normalize_weights" => self.normalize_weights = parse_bool(value)?,
                "epsilon" => self.epsilon = parse_auto(value)?,
                "hidden" => self.hidden = parse_list(value)?,
                "activation" => {
                    self.activation = match value {
                        "relu" => Activation::Relu,
                        "tanh" => Activation::Tanh,
                        _ => return Err(format!("expected relu or tanh, got {value:?}")),
                    }
                }
                "epochs" => self.epochs = parse_num(value)?,
                "batch_size" => self.batch_size = parse_num(value)?,
                "lr" => self.lr = parse_num(value)?,
                "beta1" => self.beta1 = parse_num(value)?,
                "beta2" => self.beta2 = parse_num(value)?,
                "adam_eps" => self.adam_eps = parse_num(value)?,
                "weight_decay" => self.weight_decay = parse_num(value)?,
                "milestones" => self.milestones = parse_list(value)?,
                "lr_gamma" => self.lr_gamma = parse_num(value)?,
                "drop_last" => self.drop_last = parse_bool(value)?,
                "shot_scheme" => {
                    self.shot_scheme = match value {
                        "absolute_counts" => ShotScheme::AbsoluteCounts,
                        "nmax_fractions" => ShotScheme::NmaxFractions,
                        _ => return Err(format!("expected absolute_counts or nmax_fractions, got {value:?}")),
                    }
                }
                "shot_low" => self.shot_low = parse_num(value)?,
                "shot_high" => self.shot_high = parse_num(value)?,
                "gm_eps" => self.gm_eps = parse_num(value)?,
                "threads" => self.threads = parse_num(value)?,
                _ => return Err("unknown key".into()),
            }
            Ok(())
        })();
        res.map_err(|msg| Error::Config(format!("{key}: {msg}")))
    }

    /// Parses the flat format: one `key = value` per line, `#` comments and
    /// blank lines ignored. Keys not given keep their defaults; repeated or
    /// unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value, got {line:?}", i + 1)));
            };
            let key = key.trim();
            if let Some(prev) = seen.insert(key.to_string(), i + 1) {
                return Err(Error::Config(format!("line {}: {key} already set on line {prev}", i + 1)));
            }
            cfg.set(key, value).map_err(|e| Error::Config(format!("line {}: {}", i + 1, e.to_string().trim_start_matches("config error: "))))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The flat text form; [`RunConfig::parse`] reads it back unchanged.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        self.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        Self::KEYS.iter().map(|&k| (k, self.get(k).expect("listed key"))).collect()
    }

    fn comment_lines(&self) -> Vec<String> {
        self.entries().into_iter().map(|(k, v)| format!("{k}={v}")).collect()
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(&self.tag)
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.data.clone().unwrap_or_else(|| self.run_dir().join("dataset.csv"))
    }

    pub fn synth_spec(&self) -> Result<SynthSpec> {
        let shape = match self.shape {
            LabelShape::Uniform => ImbalanceShape::Uniform,
            LabelShape::Exponential => {
                if !(self.imbalance_ratio.is_finite() && self.imbalance_ratio >= 1.0) {
                    return Err(Error::Config(format!("imbalance_ratio must be >= 1, got {}", self.imbalance_ratio)));
                }
                ImbalanceShape::exponential_with_ratio(self.imbalance_ratio)
            }
            LabelShape::LogNormal { mu, sigma } => ImbalanceShape::LogNormal { mu, sigma },
            LabelShape::Bimodal { loc1, loc2, sd, weight1 } => ImbalanceShape::Bimodal { loc1, loc2, sd, weight1 },
        };
        Ok(SynthSpec {
            n_train: self.n_train,
            n_eval: self.n_eval,
            d: self.dim,
            y_min: self.y_min,
            y_max: self.y_max,
            shape,
            noise_sd: self.noise_sd,
            seed: self.seed,
        })
    }

    pub fn label_space(&self) -> Result<LabelSpace> {
        LabelSpace::new(self.y_min, self.y_max, self.delta_y)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hidden: self.hidden.clone(),
            activation: self.activation,
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.adam_eps,
                weight_decay: self.weight_decay,
            },
            milestones: self.milestones.clone(),
            lr_gamma: self.lr_gamma,
            loss: DistLossConfig {
                kind: self.seq_loss_kind,
                sample_weighting: self.sample_weighting,
                dist_weight: self.dist_weight,
                weight_floor: self.weight_floor,
                normalize_weights: self.normalize_weights,
            },
            sort: SoftSortConfig { epsilon: self.epsilon, ..SoftSortConfig::ascending() },
            bandwidth: self.bandwidth,
            shot_scheme: self.shot_scheme,
            shot_thresholds: (self.shot_low, self.shot_high),
            gm_eps: self.gm_eps,
            drop_last: self.drop_last,
            train_last_layer_only: false,
            seed: self.seed,
        }
    }

    /// Checks cross-field constraints that no single module sees.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.tag.is_empty() {
            return bad("tag must not be empty".into());
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be at least 1".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be at least 1".into());
        }
        if !(self.shot_low < self.shot_high) {
            return bad(format!("shot_low ({}) must be below shot_high ({})", self.shot_low, self.shot_high));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be finite and positive, got {}", self.lr));
        }
        if !(self.gm_eps.is_finite() && self.gm_eps > 0.0) {
            return bad(format!("gm_eps must be finite and positive, got {}", self.gm_eps));
        }
        if let Some(eps) = self.epsilon {
            if !(eps.is_finite() && eps > 0.0) {
                return bad(format!("epsilon must be auto or finite and positive, got {eps}"));
            }
        }
        self.label_space()?;
        self.train_config().loss.validate()
    }
}

fn with_comments(comments: &[String], body: &str) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str(body);
    out
}

/// Per-bin training-label counts as `bin,center,count`.
pub fn train_histogram_csv(dataset: &RegressionDataset, space: &LabelSpace) -> Result<String> {
    let counts = space.counts(&dataset.targets_of(Split::Train))?;
    let mut out = String::from("bin,center,count\n");
    for (i, (c, n)) in space.centers().iter().zip(&counts).enumerate() {
        let _ = writeln!(out, "{i},{c:?},{n}");
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct GenOutput {
    pub dataset: RegressionDataset,
    pub dataset_path: PathBuf,
    /// Same content as the histogram file, without the config lines.
    pub train_histogram: String,
}

/// Synthesizes the dataset and writes it with its train-label histogram.
pub fn cmd_gen(cfg: &RunConfig) -> Result<GenOutput> {
    cfg.validate()?;
    let dataset = synth_imbalanced(&cfg.synth_spec()?)?;
    let space = cfg.label_space()?;
    let comments = cfg.comment_lines();
    let dataset_path = cfg.dataset_path();
    save_csv(&dataset, &dataset_path, &comments)?;
    let train_histogram = train_histogram_csv(&dataset, &space)?;
    crate::io::write_atomic(
        &cfg.run_dir().join("train_histogram.csv"),
        with_comments(&comments, &train_histogram).as_bytes(),
    )?;
    Ok(GenOutput { dataset, dataset_path, train_histogram })
}

/// Keys that determine the synthetic dataset.
const DATA_KEYS: &[&str] = &["seed", "n_train", "n_eval", "dim", "y_min", "y_max", "shape", "imbalance_ratio", "noise_sd"];

/// Loads the configured dataset. An explicit `data` path is read as is. The
/// default `<run dir>/dataset.csv` is (re)generated when it is missing or
/// its header records different data settings.
pub fn load_or_generate(cfg: &RunConfig) -> Result<RegressionDataset> {
    let path = cfg.dataset_path();
    if cfg.data.is_some() {
        return load_csv(&path);
    }
    if path.exists() {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let recorded: BTreeMap<&str, &str> = text
            .lines()
            .map_while(|l| l.strip_prefix("# "))
            .filter_map(|l| l.split_once('='))
            .collect();
        let current = cfg.to_map();
        if DATA_KEYS.iter().all(|k| recorded.get(k).copied() == current.get(*k).map(String::as_str)) {
            return crate::dataset::parse_csv(&text);
        }
    }
    Ok(cmd_gen(cfg)?.dataset)
}

#[derive(Serialize)]
struct EpochFile<'a> {
    config: BTreeMap<String, String>,
    epochs: &'a [crate::nnet::EpochLog],
}

/// Trains from scratch and writes `checkpoint.json` and `epochs.json`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let dataset = load_or_generate(cfg)?;
    let space = cfg.label_space()?;
    let outcome = train(&dataset, &space, &cfg.train_config(), None)?;
    let dir = cfg.run_dir();
    let ckpt = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        params: outcome.params.clone(),
        optimizer: outcome.optimizer.clone(),
        label_space: (space.y_min(), space.y_max(), space.delta_y()),
        regions: outcome.regions.clone(),
        config: cfg.to_map(),
    };
    ckpt.save(&dir.join("checkpoint.json"))?;
    let log = EpochFile { config: cfg.to_map(), epochs: &outcome.log };
    let text = serde_json::to_string_pretty(&log)? + "\n";
    crate::io::write_atomic(&dir.join("epochs.json"), text.as_bytes())?;
    Ok(outcome)
}

/// Evaluates a checkpoint (default `<run dir>/checkpoint.json`) on the test
/// split and writes the report and histogram files.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<RegionReport> {
    cfg.validate()?;
    let dir = cfg.run_dir();
    let ckpt_path = checkpoint.map_or_else(|| dir.join("checkpoint.json"), Path::to_path_buf);
    let ckpt = Checkpoint::load(&ckpt_path)?;
    let (lo, hi, dy) = ckpt.label_space;
    let space = LabelSpace::new(lo, hi, dy)?;
    let dataset = load_or_generate(cfg)?;
    let (x, y) = dataset.split(Split::Test);
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let pred = ckpt.params.predict(x.view())?;
    if let Some(i) = pred.iter().position(|p| !p.is_finite()) {
        return Err(Error::NonFiniteGradient(format!(" (prediction {i} is {}) during evaluation", pred[i])));
    }
    let mut report = region_metrics(&pred, &y, &ckpt.regions, &space, cfg.gm_eps)?;
    report.config = Some(cfg.to_map());
    emit_report(&report, &dir.join("report.json"), ReportFormat::Json)?;
    emit_report(&report, &dir.join("report.csv"), ReportFormat::Csv)?;
    crate::io::write_atomic(
        &dir.join("histograms.csv"),
        with_comments(&cfg.comment_lines(), &histograms_to_csv(&report)).as_bytes(),
    )?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    SeqLossKind,
    BatchSize,
    DistWeight,
    ImbalanceRatio,
}

impl AblationAxis {
    pub fn key(self) -> &'static str {
        match self {
            AblationAxis::SeqLossKind => "seq_loss_kind",
            AblationAxis::BatchSize => "batch_size",
            AblationAxis::DistWeight => "dist_weight",
            AblationAxis::ImbalanceRatio => "imbalance_ratio",
        }
    }

    pub fn default_values(self) -> Vec<String> {
        let v: &[&str] = match self {
            AblationAxis::SeqLossKind => &["inv-l1", "inv-l2"],
            AblationAxis::BatchSize => &["64", "128", "256"],
            AblationAxis::DistWeight => &["0.0", "1.0"],
            AblationAxis::ImbalanceRatio => &["10.0", "100.0", "1000.0"],
        };
        v.iter().map(|s| s.to_string()).collect()
    }
}

impl FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [AblationAxis::SeqLossKind, AblationAxis::BatchSize, AblationAxis::DistWeight, AblationAxis::ImbalanceRatio]
            .into_iter()
            .find(|a| a.key() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation axis {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub value: String,
    pub tag: String,
    pub regions: Vec<RegionMetrics>,
    pub wasserstein1: f64,
}

impl AblationRow {
    pub fn region(&self, key: RegionKey) -> &RegionMetrics {
        self.regions.iter().find(|r| r.region == key).expect("row carries all regions")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub axis: AblationAxis,
    pub rows: Vec<AblationRow>,
    pub config: BTreeMap<String, String>,
}

impl AblationTable {
    /// One row per point: `<axis>,{mae,gm,count}_{all,many,median,few},wasserstein1`.
    pub fn to_csv(&self) -> String {
        let keys = [RegionKey::All, RegionKey::Many, RegionKey::Median, RegionKey::Few];
        let mut out = String::new();
        for (k, v) in &self.config {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(self.axis.key());
        for metric in ["mae", "gm", "count"] {
            for k in keys {
                let _ = write!(out, ",{metric}_{}", k.as_str());
            }
        }
        out.push_str(",wasserstein1\n");
        let opt = |v: Option<f64>| v.map_or_else(|| "null".to_string(), |v| format!("{v:?}"));
        for row in &self.rows {
            out.push_str(&row.value);
            for k in keys {
                let _ = write!(out, ",{}", opt(row.region(k).mae));
            }
            for k in keys {
                let _ = write!(out, ",{}", opt(row.region(k).gm));
            }
            for k in keys {
                let _ = write!(out, ",{}", row.region(k).count);
            }
            let _ = writeln!(out, ",{:?}", row.wasserstein1);
        }
        out
    }
}

/// Configuration of one sweep point; its run directory nests under the
/// parent's as `<tag>/<axis>-<value>`.
pub fn ablation_point(cfg: &RunConfig, axis: AblationAxis, value: &str) -> Result<RunConfig> {
    let mut point = cfg.clone();
    point.set(axis.key(), value)?;
    point.tag = format!("{}/{}-{}", cfg.tag, axis.key(), value);
    if axis != AblationAxis::ImbalanceRatio {
        point.data = Some(cfg.dataset_path());
    }
    point.validate()?;
    Ok(point)
}

/// Runs train + eval for each value of `axis` (the axis defaults when
/// `values` is empty) on up to `cfg.threads` threads, and writes the table.
pub fn cmd_ablate(cfg: &RunConfig, axis: AblationAxis, values: &[String]) -> Result<AblationTable> {
    cfg.validate()?;
    let values = if values.is_empty() { axis.default_values() } else { values.to_vec() };
    let points = values.iter().map(|v| ablation_point(cfg, axis, v)).collect::<Result<Vec<_>>>()?;
    if axis != AblationAxis::ImbalanceRatio && !cfg.dataset_path().exists() {
        cmd_gen(cfg)?;
    }

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RegionReport>>>> = Mutex::new(points.iter().map(|_| None).collect());
    let workers = cfg.threads.clamp(1, points.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(point) = points.get(i) else { break };
                let res = cmd_train(point).and_then(|_| cmd_eval(point, None));
                results.lock().expect("worker panicked")[i] = Some(res);
            });
        }
    });

    let mut rows = Vec::with_capacity(points.len());
    for ((value, point), res) in values.iter().zip(&points).zip(results.into_inner().expect("worker panicked")) {
        let report = res.expect("every point ran")?;
        rows.push(AblationRow { value: value.clone(), tag: point.tag.clone(), regions: report.regions, wasserstein1: report.wasserstein1 });
    }
    let table = AblationTable { axis, rows, config: cfg.to_map() };
    let dir = cfg.run_dir();
    crate::io::write_atomic(&dir.join(format!("ablate_{}.csv", axis.key())), table.to_csv().as_bytes())?;
    let json = serde_json::to_string_pretty(&table)? + "\n";
    crate::io::write_atomic(&dir.join(format!("ablate_{}.json", axis.key())), json.as_bytes())?;
    Ok(table)
}
