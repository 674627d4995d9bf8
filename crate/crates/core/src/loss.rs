//! Dist Loss: a sample-level regression error plus a distribution term that
//! compares the sorted prediction batch against pseudo-labels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label_space::LabelDensity;
use crate::pseudo::{PseudoLabelCache, PseudoSequence};
use crate::softsort::{soft_sort, Direction, SoftSortConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SeqLoss {
    L1,
    #[default]
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Weighting {
    Uniform,
    #[default]
    InverseProbability,
}

/// Base error plus element weighting, e.g. INV-L2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SeqLossKind {
    pub base: SeqLoss,
    pub weighting: Weighting,
}

impl SeqLossKind {
    pub const INV_L1: Self = Self { base: SeqLoss::L1, weighting: Weighting::InverseProbability };
    pub const INV_L2: Self = Self { base: SeqLoss::L2, weighting: Weighting::InverseProbability };
    pub const L1: Self = Self { base: SeqLoss::L1, weighting: Weighting::Uniform };
    pub const L2: Self = Self { base: SeqLoss::L2, weighting: Weighting::Uniform };
}

impl std::fmt::Display for SeqLossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let prefix = match self.weighting {
            Weighting::Uniform => "",
            Weighting::InverseProbability => "INV-",
        };
        let base = match self.base {
            SeqLoss::L1 => "L1",
            SeqLoss::L2 => "L2",
        };
        write!(f, "{prefix}{base}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistLossConfig {
    /// Sequence loss of the distribution term. Its base error is shared with
    /// the sample term.
    pub kind: SeqLossKind,
    /// Weighting of the sample-level term.
    pub sample_weighting: Weighting,
    /// Multiplier on the distribution term.
    pub dist_weight: f64,
    /// Smallest bin probability used in `1 / p` weights.
    pub weight_floor: f64,
    /// Rescale weights to mean 1 within each call.
    pub normalize_weights: bool,
}

impl Default for DistLossConfig {
    fn default() -> Self {
        Self {
            kind: SeqLossKind::INV_L2,
            sample_weighting: Weighting::Uniform,
            dist_weight: 1.0,
            weight_floor: 1e-4,
            normalize_weights: true,
        }
    }
}

impl DistLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.dist_weight.is_finite() || self.dist_weight < 0.0 {
            return Err(Error::Config(format!("dist_weight must be finite and >= 0, got {}", self.dist_weight)));
        }
        if !(self.weight_floor > 0.0 && self.weight_floor <= 1.0) {
            return Err(Error::Config(format!("weight_floor must lie in (0, 1], got {}", self.weight_floor)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub total: f64,
    pub sample_term: f64,
    pub dist_term: f64,
    pub grad_predictions: Vec<f64>,
}

/// Weighted mean error `(1/n) sum w_i e(p_i - t_i)` and its gradient in `pred`.
pub fn weighted_seq_loss(pred: &[f64], target: &[f64], weights: &[f64], base: SeqLoss) -> Result<(f64, Vec<f64>)> {
    let n = pred.len();
    if target.len() != n {
        return Err(Error::shape(n, target.len()));
    }
    if weights.len() != n {
        return Err(Error::shape(n, weights.len()));
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidWeight { index, value });
    }
    let inv_n = 1.0 / n as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(n);
    for ((&p, &t), &w) in pred.iter().zip(target).zip(weights) {
        let r = p - t;
        match base {
            SeqLoss::L1 => {
                value += w * r.abs();
                let sign = if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                grad.push(w * sign * inv_n);
            }
            SeqLoss::L2 => {
                value += w * r * r;
                grad.push(2.0 * w * r * inv_n);
            }
        }
    }
    Ok((value * inv_n, grad))
}

/// `w_i = 1 / max(p(bin(t_i)), floor)`, optionally rescaled to mean 1.
pub fn inverse_weights(density: &LabelDensity, targets: &[f64], floor: f64, normalize: bool) -> Result<Vec<f64>> {
    let mut w = targets
        .iter()
        .map(|&t| Ok(1.0 / density.prob_of(t)?.max(floor)))
        .collect::<Result<Vec<f64>>>()?;
    if normalize && !w.is_empty() {
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        w.iter_mut().for_each(|x| *x /= mean);
    }
    Ok(w)
}

fn weights_for(weighting: Weighting, density: &LabelDensity, targets: &[f64], cfg: &DistLossConfig) -> Result<Vec<f64>> {
    match weighting {
        Weighting::Uniform => Ok(vec![1.0; targets.len()]),
        Weighting::InverseProbability => inverse_weights(density, targets, cfg.weight_floor, cfg.normalize_weights),
    }
}

/// Evaluates the objective and its gradient with respect to `predictions`.
pub fn dist_loss(
    predictions: &[f64],
    labels: &[f64],
    pseudo_labels: &PseudoSequence,
    density: &LabelDensity,
    sort_cfg: &SoftSortConfig,
    cfg: &DistLossConfig,
) -> Result<LossOutput> {
    let m = predictions.len();
    if labels.len() != m {
        return Err(Error::shape(m, labels.len()));
    }
    if pseudo_labels.len() != m {
        return Err(Error::shape(m, pseudo_labels.len()));
    }
    cfg.validate()?;

    let sample_w = weights_for(cfg.sample_weighting, density, labels, cfg)?;
    let (sample_term, mut grad) = weighted_seq_loss(predictions, labels, &sample_w, cfg.kind.base)?;

    // pseudo-predictions are always the ascending order
    let sort_cfg = SoftSortConfig { direction: Direction::Ascending, ..*sort_cfg };
    let sorted = soft_sort(predictions, &sort_cfg)?;
    let dist_w = weights_for(cfg.kind.weighting, density, pseudo_labels.values(), cfg)?;
    let (dist_term, grad_sorted) =
        weighted_seq_loss(&sorted.sorted_values, pseudo_labels.values(), &dist_w, cfg.kind.base)?;
    let grad_dist = sorted.vjp(&grad_sorted)?;
    for (g, d) in grad.iter_mut().zip(grad_dist) {
        *g += cfg.dist_weight * d;
    }

    Ok(LossOutput {
        total: sample_term + cfg.dist_weight * dist_term,
        sample_term,
        dist_term,
        grad_predictions: grad,
    })
}

/// Dist Loss bound to one label density, memoizing pseudo-labels per batch size.
#[derive(Debug, Clone)]
pub struct DistLoss {
    cache: PseudoLabelCache,
    pub sort: SoftSortConfig,
    pub config: DistLossConfig,
}

impl DistLoss {
    pub fn new(density: LabelDensity, sort: SoftSortConfig, config: DistLossConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { cache: PseudoLabelCache::new(density), sort, config })
    }

    pub fn density(&self) -> &LabelDensity {
        self.cache.density()
    }

    pub fn pseudo_labels(&mut self, m: usize) -> Result<&PseudoSequence> {
        self.cache.get(m)
    }

    pub fn evaluate(&mut self, predictions: &[f64], labels: &[f64]) -> Result<LossOutput> {
        let (sort, config) = (self.sort, self.config);
        let pseudo = self.cache.get(predictions.len())?.clone();
        dist_loss(predictions, labels, &pseudo, self.cache.density(), &sort, &config)
    }
}
