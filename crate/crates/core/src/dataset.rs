//! Regression datasets: synthetic imbalanced generation, CSV I/O and
//! many/median/few shot-region assignment.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label_space::LabelSpace;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// `N x d` inputs, `N` targets, and a split tag per row.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    pub inputs: Array2<f64>,
    pub targets: Vec<f64>,
    pub splits: Vec<Split>,
}

impl RegressionDataset {
    pub fn new(inputs: Array2<f64>, targets: Vec<f64>, splits: Vec<Split>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if inputs.nrows() != targets.len() {
            return Err(Error::shape(targets.len(), inputs.nrows()));
        }
        if splits.len() != targets.len() {
            return Err(Error::shape(targets.len(), splits.len()));
        }
        if let Some(i) = inputs.iter().chain(&targets).position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(i));
        }
        Ok(Self { inputs, targets, splits })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn rows(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    /// Inputs and targets of one split.
    pub fn split(&self, split: Split) -> (Array2<f64>, Vec<f64>) {
        let rows = self.rows(split);
        let x = self.inputs.select(Axis(0), &rows);
        let y = rows.iter().map(|&i| self.targets[i]).collect();
        (x, y)
    }

    pub fn targets_of(&self, split: Split) -> Vec<f64> {
        self.rows(split).into_iter().map(|i| self.targets[i]).collect()
    }
}

/// Shape of the training-label law on `[y_min, y_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ImbalanceShape {
    Uniform,
    /// Density proportional to `exp(-rate * u)` with `u` the label rescaled
    /// to `[0, 1)`; the max/min density ratio is `exp(rate)`.
    Exponential { rate: f64 },
    /// `y_min + LogNormal(mu, sigma)`, truncated.
    LogNormal { mu: f64, sigma: f64 },
    /// Two Gaussians at fractions of the range, truncated.
    Bimodal { loc1: f64, loc2: f64, sd: f64, weight1: f64 },
}

impl ImbalanceShape {
    /// Exponential shape whose densest and sparsest labels differ by `ratio`.
    pub fn exponential_with_ratio(ratio: f64) -> Self {
        ImbalanceShape::Exponential { rate: ratio.ln() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_train: usize,
    /// Rows in each of the validation and test splits.
    pub n_eval: usize,
    pub d: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub shape: ImbalanceShape,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_train: 20_000,
            n_eval: 2_000,
            d: 8,
            y_min: 0.0,
            y_max: 100.0,
            shape: ImbalanceShape::Exponential { rate: 5.0 },
            noise_sd: 0.5,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSpec(msg.to_string()));
        if self.n_train == 0 || self.n_eval == 0 {
            return bad("n_train and n_eval must be at least 1");
        }
        if self.d == 0 {
            return bad("d must be at least 1");
        }
        if !(self.y_min.is_finite() && self.y_max.is_finite() && self.y_max > self.y_min) {
            return bad("y_max must exceed y_min");
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return bad("noise_sd must be finite and >= 0");
        }
        match self.shape {
            ImbalanceShape::Uniform => {}
            ImbalanceShape::Exponential { rate } if !(rate.is_finite() && rate >= 0.0) => {
                return bad("exponential rate must be finite and >= 0")
            }
            ImbalanceShape::LogNormal { sigma, mu } if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) => {
                return bad("log-normal needs finite mu and sigma > 0")
            }
            ImbalanceShape::Bimodal { sd, weight1, .. } if !(sd > 0.0 && (0.0..=1.0).contains(&weight1)) => {
                return bad("bimodal needs sd > 0 and weight1 in [0, 1]")
            }
            _ => {}
        }
        Ok(())
    }

    /// Analytic probability of `[a, b)` (in label units) under the training law.
    /// Only available for the uniform and exponential shapes.
    pub fn train_mass(&self, a: f64, b: f64) -> Option<f64> {
        let range = self.y_max - self.y_min;
        let (ua, ub) = (((a - self.y_min) / range).clamp(0.0, 1.0), ((b - self.y_min) / range).clamp(0.0, 1.0));
        match self.shape {
            ImbalanceShape::Uniform => Some(ub - ua),
            ImbalanceShape::Exponential { rate } if rate == 0.0 => Some(ub - ua),
            ImbalanceShape::Exponential { rate } => {
                Some(((-rate * ua).exp() - (-rate * ub).exp()) / (1.0 - (-rate).exp()))
            }
            _ => None,
        }
    }
}

/// Maximum redraws for rejection-sampled shapes before giving up.
const MAX_REJECTIONS: usize = 1_000_000;

fn draw_train_label<R: Rng>(spec: &SynthSpec, rng: &mut R) -> Result<f64> {
    let range = spec.y_max - spec.y_min;
    let from_unit = |u: f64| spec.y_min + range * u.min(1.0 - f64::EPSILON);
    match spec.shape {
        ImbalanceShape::Uniform => Ok(from_unit(rng.random::<f64>())),
        ImbalanceShape::Exponential { rate } if rate == 0.0 => Ok(from_unit(rng.random::<f64>())),
        ImbalanceShape::Exponential { rate } => {
            // inverse CDF of the truncated exponential on [0, 1)
            let v: f64 = rng.random();
            Ok(from_unit(-(1.0 - v * (1.0 - (-rate).exp())).ln() / rate))
        }
        ImbalanceShape::LogNormal { mu, sigma } => {
            let law = LogNormal::new(mu, sigma).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            rejection(rng, spec, |r| spec.y_min + law.sample(r))
        }
        ImbalanceShape::Bimodal { loc1, loc2, sd, weight1 } => {
            let first = Normal::new(spec.y_min + loc1 * range, sd * range).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            let second = Normal::new(spec.y_min + loc2 * range, sd * range).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            rejection(rng, spec, |r| if r.random::<f64>() < weight1 { first.sample(r) } else { second.sample(r) })
        }
    }
}

fn rejection<R: Rng>(rng: &mut R, spec: &SynthSpec, mut draw: impl FnMut(&mut R) -> f64) -> Result<f64> {
    for _ in 0..MAX_REJECTIONS {
        let y = draw(rng);
        if y >= spec.y_min && y < spec.y_max {
            return Ok(y);
        }
    }
    Err(Error::InvalidSpec("label law puts (almost) no mass inside [y_min, y_max)".into()))
}

/// Features `(u, u^2, sin(pi u))` of the rescaled label `u`, each with
/// Gaussian noise, followed by pure-noise columns up to `d`.
fn features<R: Rng>(spec: &SynthSpec, y: f64, noise: &Normal<f64>, rng: &mut R, row: &mut [f64]) {
    let u = (y - spec.y_min) / (spec.y_max - spec.y_min);
    let signal = [u, u * u, (std::f64::consts::PI * u).sin()];
    for (j, slot) in row.iter_mut().enumerate() {
        *slot = match signal.get(j) {
            Some(&s) => s + spec.noise_sd * noise.sample(rng),
            None => noise.sample(rng),
        };
    }
}

/// Imbalanced training split plus balanced (uniform-label) validation and
/// test splits, fully determined by `spec.seed`.
pub fn synth_imbalanced(spec: &SynthSpec) -> Result<RegressionDataset> {
    spec.validate()?;
    let n = spec.n_train + 2 * spec.n_eval;
    let mut inputs = Array2::zeros((n, spec.d));
    let mut targets = Vec::with_capacity(n);
    let mut splits = Vec::with_capacity(n);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let mut label_rng = stream_rng(spec.seed, Stream::Labels);
    let mut feature_rng = stream_rng(spec.seed, Stream::Features);
    let range = spec.y_max - spec.y_min;
    for i in 0..n {
        let (split, y) = if i < spec.n_train {
            (Split::Train, draw_train_label(spec, &mut label_rng)?)
        } else {
            let split = if i < spec.n_train + spec.n_eval { Split::Val } else { Split::Test };
            let u: f64 = label_rng.random();
            (split, spec.y_min + range * u.min(1.0 - f64::EPSILON))
        };
        let mut row = vec![0.0; spec.d];
        features(spec, y, &std_normal, &mut feature_rng, &mut row);
        inputs.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
        targets.push(y);
        splits.push(split);
    }
    RegressionDataset::new(inputs, targets, splits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Many,
    Median,
    Few,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Many, Region::Median, Region::Few];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Many => "many",
            Region::Median => "median",
            Region::Few => "few",
        }
    }
}

/// How bin counts map to regions.
///
/// * `AbsoluteCounts`: `count < low` is few, `low <= count <= high` median,
///   `count > high` many.
/// * `NmaxFractions`: `count > high * n_max` is many, `count < low * n_max`
///   few, median otherwise (boundaries inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotScheme {
    AbsoluteCounts,
    NmaxFractions,
}

impl ShotScheme {
    pub fn default_thresholds(self) -> (f64, f64) {
        match self {
            ShotScheme::AbsoluteCounts => (20.0, 100.0),
            ShotScheme::NmaxFractions => (0.15, 0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRegions {
    pub scheme: ShotScheme,
    pub thresholds: (f64, f64),
    /// Training-split count per bin.
    pub counts: Vec<usize>,
    pub regions: Vec<Region>,
}

impl ShotRegions {
    pub fn region_of_bin(&self, bin: usize) -> Region {
        self.regions[bin]
    }

    pub fn region_of(&self, space: &LabelSpace, y: f64) -> Result<Region> {
        Ok(self.regions[space.bin_index(y)?])
    }
}

/// Labels every bin of `space` from training-split counts.
pub fn assign_regions(
    train_targets: &[f64],
    space: &LabelSpace,
    scheme: ShotScheme,
    thresholds: (f64, f64),
) -> Result<ShotRegions> {
    if train_targets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (low, high) = thresholds;
    if !(low.is_finite() && high.is_finite() && low < high) {
        return Err(Error::InvalidSpec(format!("shot thresholds need low < high, got ({low}, {high})")));
    }
    let counts = space.counts(train_targets)?;
    let n_max = *counts.iter().max().unwrap() as f64;
    let regions = counts
        .iter()
        .map(|&c| {
            let c = c as f64;
            match scheme {
                ShotScheme::AbsoluteCounts if c < low => Region::Few,
                ShotScheme::AbsoluteCounts if c > high => Region::Many,
                ShotScheme::NmaxFractions if c > high * n_max => Region::Many,
                ShotScheme::NmaxFractions if c < low * n_max => Region::Few,
                _ => Region::Median,
            }
        })
        .collect();
    Ok(ShotRegions { scheme, thresholds, counts, regions })
}

/// Writes `x_0..x_{d-1},y,split`. Floats use the shortest representation
/// that parses back to the same bits. `comments` become leading `#` lines.
pub fn save_csv(dataset: &RegressionDataset, path: &Path, comments: &[String]) -> Result<()> {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    for j in 0..dataset.dim() {
        let _ = write!(out, "x_{j},");
    }
    out.push_str("y,split\n");
    for i in 0..dataset.len() {
        for v in dataset.inputs.row(i) {
            let _ = write!(out, "{v:?},");
        }
        let _ = writeln!(out, "{:?},{}", dataset.targets[i], dataset.splits[i].as_str());
    }
    crate::io::write_atomic(path, out.as_bytes())
}

pub fn load_csv(path: &Path) -> Result<RegressionDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<RegressionDataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (header_line, header) = lines.next().ok_or(Error::EmptyDataset)?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let missing = |name: &str| Error::Parse { line: header_line, message: format!("missing column `{name}`") };
    let y_col = columns.iter().position(|c| *c == "y").ok_or_else(|| missing("y"))?;
    let split_col = columns.iter().position(|c| *c == "split").ok_or_else(|| missing("split"))?;
    let mut x_cols = Vec::new();
    for j in 0.. {
        match columns.iter().position(|c| *c == format!("x_{j}")) {
            Some(c) => x_cols.push(c),
            None => break,
        }
    }
    if x_cols.is_empty() {
        return Err(missing("x_0"));
    }
    if x_cols.len() + 2 != columns.len() {
        return Err(Error::Parse { line: header_line, message: format!("unexpected columns in header `{header}`") });
    }

    let d = x_cols.len();
    let mut data = Vec::new();
    let mut targets = Vec::new();
    let mut splits = Vec::new();
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", columns.len(), fields.len()),
            });
        }
        let number = |col: usize| -> Result<f64> {
            let v: f64 = fields[col].parse().map_err(|_| Error::Parse {
                line,
                message: format!("column `{}`: cannot parse `{}`", columns[col], fields[col]),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse { line, message: format!("column `{}` is not finite", columns[col]) })
            }
        };
        for &c in &x_cols {
            data.push(number(c)?);
        }
        targets.push(number(y_col)?);
        splits.push(Split::parse(fields[split_col]).ok_or_else(|| Error::Parse {
            line,
            message: format!("unknown split `{}`", fields[split_col]),
        })?);
    }
    let n = targets.len();
    let inputs = Array2::from_shape_vec((n, d), data).expect("row width checked above");
    RegressionDataset::new(inputs, targets, splits)
}
