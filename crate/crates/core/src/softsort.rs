//! Differentiable sorting by quadratic-regularized projection onto the
//! permutation polytope.
//!
//! With regularization strength `eps`, the soft sort of `x` is the Euclidean
//! projection of the anchor `rho / eps`, `rho = (n, n - 1, ..., 1)`, onto the
//! convex hull of all permutations of `x`. After one hard argsort this reduces
//! to a single non-increasing isotonic regression of `rho / eps - sort_desc(x)`,
//! solved by pool-adjacent-violators. The pooled blocks give the Jacobian in
//! closed form: block averaging followed by un-permutation.
//!
//! As `eps -> 0` the operator is the hard sort; it stays exact as long as no
//! adjacent gap of the sorted input exceeds `1 / eps`.

use std::cmp::Ordering;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Direction {
    #[default]
    Ascending,
    Descending,
}

/// Regularization strength and output order.
///
/// `epsilon: None` picks `1e-3 / (max(x) - min(x) + 1e-12)` per call, which
/// keeps every adjacent gap far below `1 / eps`, so the forward pass equals
/// the hard sort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SoftSortConfig {
    pub epsilon: Option<f64>,
    pub direction: Direction,
}

impl SoftSortConfig {
    pub fn ascending() -> Self {
        Self { epsilon: None, direction: Direction::Ascending }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    fn resolve_epsilon(&self, values: &[f64]) -> Result<f64> {
        match self.epsilon {
            Some(eps) if eps.is_finite() && eps > 0.0 => Ok(eps),
            Some(eps) => Err(Error::Config(format!("soft sort epsilon must be finite and positive, got {eps}"))),
            None => {
                let (lo, hi) = values
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                Ok(1e-3 / (hi - lo + 1e-12))
            }
        }
    }
}

/// Forward result of [`soft_sort`], carrying what the backward pass needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSortResult {
    /// Soft-sorted values in the configured direction.
    pub sorted_values: Vec<f64>,
    /// `sorted_values[k]` is attached to input index `permutation[k]`.
    pub permutation: Vec<usize>,
    /// Pooled runs over output positions.
    pub blocks: Vec<Range<usize>>,
    pub epsilon: f64,
}

impl SoftSortResult {
    /// Vector-Jacobian product at the original input.
    pub fn vjp(&self, upstream: &[f64]) -> Result<Vec<f64>> {
        soft_sort_vjp(self, upstream)
    }
}

/// Least-squares non-increasing fit by pool-adjacent-violators.
///
/// Returns the fit and the pooled blocks; inside each block the fit equals
/// the mean of the corresponding inputs.
pub fn isotonic_regression(values: &[f64]) -> Result<(Vec<f64>, Vec<Range<usize>>)> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(i));
    }
    let blocks = pav_blocks(values);
    let mut fitted = vec![0.0; values.len()];
    for block in &blocks {
        let mean = values[block.clone()].iter().sum::<f64>() / block.len() as f64;
        fitted[block.clone()].fill(mean);
    }
    Ok((fitted, blocks))
}

fn pav_blocks(values: &[f64]) -> Vec<Range<usize>> {
    // (start, end, sum)
    let mut stack: Vec<(usize, usize, f64)> = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        let mut cur = (i, i + 1, v);
        while let Some(&(start, end, sum)) = stack.last() {
            let prev_mean = sum / (end - start) as f64;
            let cur_mean = cur.2 / (cur.1 - cur.0) as f64;
            if prev_mean < cur_mean {
                stack.pop();
                cur = (start, cur.1, sum + cur.2);
            } else {
                break;
            }
        }
        stack.push(cur);
    }
    stack.into_iter().map(|(s, e, _)| s..e).collect()
}

/// Soft sort of `values`.
pub fn soft_sort(values: &[f64], config: &SoftSortConfig) -> Result<SoftSortResult> {
    let n = values.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(i));
    }
    let epsilon = config.resolve_epsilon(values)?;

    // Descending order. Ties go by index, reversed for ascending output so
    // the final permutation is stable in the requested direction.
    let mut perm: Vec<usize> = (0..n).collect();
    match config.direction {
        Direction::Descending => {
            perm.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)))
        }
        Direction::Ascending => {
            perm.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(b.cmp(&a)))
        }
    }
    let desc: Vec<f64> = perm.iter().map(|&i| values[i]).collect();

    let inv_eps = 1.0 / epsilon;
    let residual: Vec<f64> = desc
        .iter()
        .enumerate()
        .map(|(k, &x)| (n - k) as f64 * inv_eps - x)
        .collect();
    let mut blocks = pav_blocks(&residual);

    // Inside a block the projection is mean(x) + (anchor_k - mean(anchor)),
    // and the anchor offset is ((s + e - 1) / 2 - k) / eps.
    let mut sorted = vec![0.0; n];
    for block in &blocks {
        let len = block.len() as f64;
        let mean = desc[block.clone()].iter().sum::<f64>() / len;
        let mid = (block.start + block.end - 1) as f64 / 2.0;
        for k in block.clone() {
            sorted[k] = if block.len() == 1 { desc[k] } else { mean + (mid - k as f64) * inv_eps };
        }
    }

    if config.direction == Direction::Ascending {
        sorted.reverse();
        perm.reverse();
        blocks = blocks.into_iter().rev().map(|b| (n - b.end)..(n - b.start)).collect();
    }
    Ok(SoftSortResult { sorted_values: sorted, permutation: perm, blocks, epsilon })
}

/// Vector-Jacobian product of [`soft_sort`]: block-average the upstream
/// gradient, then scatter it back to input order. O(n).
pub fn soft_sort_vjp(result: &SoftSortResult, upstream: &[f64]) -> Result<Vec<f64>> {
    let n = result.sorted_values.len();
    if upstream.len() != n {
        return Err(Error::shape(n, upstream.len()));
    }
    let mut grad = vec![0.0; n];
    for block in &result.blocks {
        let mean = upstream[block.clone()].iter().sum::<f64>() / block.len() as f64;
        for k in block.clone() {
            grad[result.permutation[k]] = if block.len() == 1 { upstream[k] } else { mean };
        }
    }
    Ok(grad)
}

/// Plain comparison sort, used as the hard reference.
pub fn hard_sort(values: &[f64], direction: Direction) -> Vec<f64> {
    let mut out = values.to_vec();
    out.sort_by(|a, b| match direction {
        Direction::Ascending => a.total_cmp(b),
        Direction::Descending => b.total_cmp(a),
    });
    out
}

pub fn is_monotone(values: &[f64], direction: Direction) -> bool {
    values.windows(2).all(|w| match direction {
        Direction::Ascending => w[0].partial_cmp(&w[1]) != Some(Ordering::Greater),
        Direction::Descending => w[0].partial_cmp(&w[1]) != Some(Ordering::Less),
    })
}
