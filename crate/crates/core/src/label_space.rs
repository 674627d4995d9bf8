//! Equal-width discretization of the label range and label density estimates.
//!
//! Every bin `[c_i, c_i + delta_y)` is represented by its lower bound `c_i`.
//! Densities are length-`B` probability vectors over those bins, produced
//! either by plain counting or by a Gaussian kernel density estimate
//! evaluated at the bin representatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when snapping a ratio onto an integer bin boundary.
const EDGE_SNAP: f64 = 1e-9;

/// Discretization of `[y_min, y_max)` into `num_bins` bins of width `delta_y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSpace {
    y_min: f64,
    y_max: f64,
    delta_y: f64,
    centers: Vec<f64>,
}

impl LabelSpace {
    /// Builds the space. The last bin may extend past `y_max`.
    pub fn new(y_min: f64, y_max: f64, delta_y: f64) -> Result<Self> {
        if !delta_y.is_finite() || delta_y <= 0.0 {
            return Err(Error::InvalidBinWidth(delta_y));
        }
        if !y_min.is_finite() || !y_max.is_finite() || y_max <= y_min {
            return Err(Error::EmptyRange { y_min, y_max });
        }
        let ratio = (y_max - y_min) / delta_y;
        let nearest = ratio.round();
        let num_bins = if (ratio - nearest).abs() <= EDGE_SNAP * nearest.max(1.0) {
            nearest
        } else {
            ratio.ceil()
        } as usize;
        let num_bins = num_bins.max(1);
        let centers = (0..num_bins).map(|i| y_min + i as f64 * delta_y).collect();
        Ok(Self { y_min, y_max, delta_y, centers })
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn delta_y(&self) -> f64 {
        self.delta_y
    }

    pub fn num_bins(&self) -> usize {
        self.centers.len()
    }

    /// Bin representatives (lower bounds), strictly increasing.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Index of the bin containing `y`. Out-of-range values clamp to the
    /// first or last bin.
    pub fn bin_index(&self, y: f64) -> Result<usize> {
        if !y.is_finite() {
            return Err(Error::InvalidLabel(y));
        }
        let pos = ((y - self.y_min) / self.delta_y + EDGE_SNAP).floor();
        if pos <= 0.0 {
            Ok(0)
        } else {
            Ok((pos as usize).min(self.num_bins() - 1))
        }
    }

    /// Per-bin sample counts.
    pub fn counts(&self, labels: &[f64]) -> Result<Vec<usize>> {
        let mut counts = vec![0usize; self.num_bins()];
        for &y in labels {
            counts[self.bin_index(y)?] += 1;
        }
        Ok(counts)
    }
}

/// Probability mass per bin of a [`LabelSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDensity {
    space: LabelSpace,
    probs: Vec<f64>,
}

impl LabelDensity {
    /// Wraps an explicit probability vector, renormalizing it to unit mass.
    pub fn from_probs(space: LabelSpace, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != space.num_bins() {
            return Err(Error::shape(space.num_bins(), probs.len()));
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidFrequency { index, value });
            }
        }
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptyHistogram);
        }
        let probs = probs.into_iter().map(|p| p / total).collect();
        Ok(Self { space, probs })
    }

    pub fn space(&self) -> &LabelSpace {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of the bin that `y` falls into.
    pub fn prob_of(&self, y: f64) -> Result<f64> {
        Ok(self.probs[self.space.bin_index(y)?])
    }
}

/// Kernel bandwidth selection for [`kde_density`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum Bandwidth {
    /// Silverman's rule `1.06 * sd * N^(-1/5)`, floored at `delta_y / 2`.
    #[default]
    Auto,
    Fixed(f64),
}

/// Empirical bin frequencies `count_i / N`.
pub fn histogram_density(space: &LabelSpace, labels: &[f64]) -> Result<LabelDensity> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = labels.len() as f64;
    let probs = space.counts(labels)?.into_iter().map(|c| c as f64 / n).collect();
    Ok(LabelDensity { space: space.clone(), probs })
}

/// Silverman's rule of thumb with the `delta_y / 2` floor.
pub fn silverman_bandwidth(space: &LabelSpace, labels: &[f64]) -> f64 {
    let floor = space.delta_y() / 2.0;
    let n = labels.len();
    if n < 2 {
        return floor;
    }
    let mean = labels.iter().sum::<f64>() / n as f64;
    let var = labels.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let h = 1.06 * var.sqrt() * (n as f64).powf(-0.2);
    if h.is_finite() {
        h.max(floor)
    } else {
        floor
    }
}

/// Gaussian kernel density estimate evaluated at the bin representatives.
///
/// Each label contributes through the representative of its own bin, so the
/// estimate depends only on the bin counts and collapses to
/// [`histogram_density`] as the bandwidth goes to zero.
pub fn kde_density(space: &LabelSpace, labels: &[f64], bandwidth: Bandwidth) -> Result<LabelDensity> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let h = match bandwidth {
        Bandwidth::Fixed(h) if !h.is_finite() || h <= 0.0 => return Err(Error::InvalidBandwidth(h)),
        Bandwidth::Fixed(h) => h,
        Bandwidth::Auto => {
            if let Some(&bad) = labels.iter().find(|y| !y.is_finite()) {
                return Err(Error::InvalidLabel(bad));
            }
            silverman_bandwidth(space, labels)
        }
    };
    let counts = space.counts(labels)?;
    let centers = space.centers();
    let inv_two_h2 = 1.0 / (2.0 * h * h);
    let mut probs: Vec<f64> = centers
        .iter()
        .map(|&c| {
            counts
                .iter()
                .zip(centers)
                .filter(|(&n, _)| n > 0)
                .map(|(&n, &src)| n as f64 * (-(c - src).powi(2) * inv_two_h2).exp())
                .sum()
        })
        .collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(LabelDensity { space: space.clone(), probs })
}
