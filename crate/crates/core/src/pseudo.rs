//! Pseudo-label construction.
//!
//! A label density over `B` bins is turned into expected frequencies for an
//! `M`-point sample, rounded to integers that still sum to `M`, and expanded
//! into the ascending sequence of bin representatives that realizes them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label_space::{LabelDensity, LabelSpace};

const SUM_TOLERANCE: f64 = 1e-6;
const INTEGER_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Labels,
    Predictions,
}

/// Ascending sequence of values encoding a distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoSequence {
    values: Vec<f64>,
    source: Source,
}

impl PseudoSequence {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sorted copy of a prediction batch.
    pub fn from_predictions(predictions: &[f64]) -> Self {
        let mut values = predictions.to_vec();
        values.sort_by(f64::total_cmp);
        Self { values, source: Source::Predictions }
    }
}

/// Real and rounded expected frequencies for an `m`-point sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyPlan {
    pub m: usize,
    pub real_freqs: Vec<f64>,
    pub int_freqs: Vec<usize>,
}

impl FrequencyPlan {
    pub fn new(density: &LabelDensity, m: usize) -> Result<Self> {
        let real_freqs = expected_frequencies(density, m)?;
        let int_freqs = round_frequencies(&real_freqs, m)?;
        Ok(Self { m, real_freqs, int_freqs })
    }
}

/// `(m * p_1, ..., m * p_B)`.
pub fn expected_frequencies(density: &LabelDensity, m: usize) -> Result<Vec<f64>> {
    if m < 1 {
        return Err(Error::InvalidSampleCount(m));
    }
    Ok(density.probs().iter().map(|p| m as f64 * p).collect())
}

/// Rounds expected frequencies to integers summing to exactly `m`.
///
/// Every entry is floored, and the shortfall `a = m - sum(floors)` is handed
/// out one unit at a time: the first `ceil(a / 2)` bins and the last
/// `floor(a / 2)` bins each receive one.
pub fn round_frequencies(real_freqs: &[f64], m: usize) -> Result<Vec<usize>> {
    for (index, &value) in real_freqs.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidFrequency { index, value });
        }
    }
    let total: f64 = real_freqs.iter().sum();
    if (total - m as f64).abs() > SUM_TOLERANCE {
        return Err(Error::FrequencySumMismatch { expected: m, actual: total });
    }
    // Values like 2.9999999999 come from m * p round-off and count as 3.
    let mut out: Vec<usize> = real_freqs
        .iter()
        .map(|&n| (n + INTEGER_SNAP).floor() as usize)
        .collect();
    let floored: usize = out.iter().sum();
    let bins = out.len();
    if floored > m || m - floored > bins {
        return Err(Error::FrequencySumMismatch { expected: m, actual: total });
    }
    let a = m - floored;
    let head = (a + 1) / 2;
    let tail_start = bins - a / 2;
    for (i, n) in out.iter_mut().enumerate() {
        // i is 0-based here; the 1-based rule is `i <= head || i > B - a/2`.
        if i < head || i >= tail_start {
            *n += 1;
        }
    }
    Ok(out)
}

/// Expands integer frequencies into the ascending sequence where the `j`-th
/// value is the smallest representative whose cumulative count reaches `j`.
pub fn expand_pseudo_labels(space: &LabelSpace, int_freqs: &[usize]) -> Result<PseudoSequence> {
    if int_freqs.len() != space.num_bins() {
        return Err(Error::shape(space.num_bins(), int_freqs.len()));
    }
    let m: usize = int_freqs.iter().sum();
    if m == 0 {
        return Err(Error::EmptySample);
    }
    let mut values = Vec::with_capacity(m);
    for (&n, &c) in int_freqs.iter().zip(space.centers()) {
        values.extend(std::iter::repeat_n(c, n));
    }
    Ok(PseudoSequence { values, source: Source::Labels })
}

/// Pseudo-labels of length `m` for the given density.
pub fn make_pseudo_labels(density: &LabelDensity, m: usize) -> Result<PseudoSequence> {
    let plan = FrequencyPlan::new(density, m)?;
    expand_pseudo_labels(density.space(), &plan.int_freqs)
}

/// Per-size memo of [`make_pseudo_labels`] for one fixed density.
#[derive(Debug, Clone)]
pub struct PseudoLabelCache {
    density: LabelDensity,
    by_size: HashMap<usize, PseudoSequence>,
}

impl PseudoLabelCache {
    pub fn new(density: LabelDensity) -> Self {
        Self { density, by_size: HashMap::new() }
    }

    pub fn density(&self) -> &LabelDensity {
        &self.density
    }

    pub fn get(&mut self, m: usize) -> Result<&PseudoSequence> {
        if !self.by_size.contains_key(&m) {
            let seq = make_pseudo_labels(&self.density, m)?;
            self.by_size.insert(m, seq);
        }
        Ok(&self.by_size[&m])
    }
}
