//! Group-decoupled advantages: each reward dimension is standardized within
//! its rollout group, the standardized values are combined with fixed
//! weights, and the combination is rescaled over the whole minibatch. The
//! summed-reward baseline standardizes only the weighted sum.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::math::mean_std;
use crate::rewards::RewardVector;

/// Spread below which a set of values is treated as constant.
const FLAT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub prompt_id: String,
    pub rollouts: Vec<RewardVector>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GdpoError {
    GroupTooSmall { prompt_id: String, size: usize },
}

impl fmt::Display for GdpoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GdpoError::GroupTooSmall { prompt_id, size } => {
                write!(f, "group {prompt_id:?} has {size} rollouts, need at least 2")
            }
        }
    }
}

impl core::error::Error for GdpoError {}

/// `(v - mean) / (std + eps)` with population std; constant input maps to
/// zeros.
pub fn standardize(values: &[f64], eps: f64) -> Vec<f64> {
    let (mu, sigma) = mean_std(values);
    if sigma < FLAT {
        return alloc::vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mu) / (sigma + eps)).collect()
}

fn check(prompt_id: &str, n: usize) -> Result<(), GdpoError> {
    if n < 2 {
        Err(GdpoError::GroupTooSmall {
            prompt_id: String::from(prompt_id),
            size: n,
        })
    } else {
        Ok(())
    }
}

/// Per-dimension standardized advantages for each rollout of one group.
pub fn group_normalize(group: &RolloutGroup, eps: f64) -> Result<Vec<[f64; 4]>, GdpoError> {
    check(&group.prompt_id, group.rollouts.len())?;
    let mut out = alloc::vec![[0.0; 4]; group.rollouts.len()];
    for k in 0..4 {
        let column: Vec<f64> = group.rollouts.iter().map(|r| r.as_array()[k]).collect();
        for (row, a) in out.iter_mut().zip(standardize(&column, eps)) {
            row[k] = a;
        }
    }
    Ok(out)
}

pub fn aggregate(advantages: &[f64; 4], weights: &[f64; 4]) -> f64 {
    advantages.iter().zip(weights).map(|(a, w)| a * w).sum()
}

pub fn batch_rescale(sums: &[f64], eps: f64) -> Vec<f64> {
    standardize(sums, eps)
}

/// Standardizes the weighted reward sum within the group.
pub fn grpo_baseline(group: &RolloutGroup, weights: &[f64; 4], eps: f64) -> Result<Vec<f64>, GdpoError> {
    check(&group.prompt_id, group.rollouts.len())?;
    let sums: Vec<f64> = group.rollouts.iter().map(|r| aggregate(&r.as_array(), weights)).collect();
    Ok(standardize(&sums, eps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutAdvantage {
    pub per_dimension: [f64; 4],
    pub sum: f64,
    pub rescaled: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageBatch {
    /// One entry per group, one advantage per rollout, in input order.
    pub groups: Vec<Vec<RolloutAdvantage>>,
    pub batch_mean: f64,
    pub batch_std: f64,
}

/// Full pipeline over a minibatch. Batch statistics cover every rollout,
/// constant groups included.
pub fn compute_advantages(groups: &[RolloutGroup], weights: &[f64; 4], eps: f64) -> Result<AdvantageBatch, GdpoError> {
    let mut per_group = Vec::with_capacity(groups.len());
    let mut sums = Vec::new();
    for group in groups {
        let dims = group_normalize(group, eps)?;
        let baseline = grpo_baseline(group, weights, eps)?;
        let rows: Vec<RolloutAdvantage> = dims
            .into_iter()
            .zip(baseline)
            .map(|(d, b)| {
                let sum = aggregate(&d, weights);
                sums.push(sum);
                RolloutAdvantage {
                    per_dimension: d,
                    sum,
                    rescaled: 0.0,
                    baseline: b,
                }
            })
            .collect();
        per_group.push(rows);
    }
    let (batch_mean, batch_std) = mean_std(&sums);
    let mut rescaled = batch_rescale(&sums, eps).into_iter();
    for row in per_group.iter_mut().flatten() {
        row.rescaled = rescaled.next().unwrap_or(0.0);
    }
    Ok(AdvantageBatch {
        groups: per_group,
        batch_mean,
        batch_std,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollapseReport {
    /// Rollout pairs with different reward vectors.
    pub distinct_pairs: usize,
    pub grpo_collapsed: usize,
    pub gdpo_collapsed: usize,
}

/// Counts distinct-reward rollout pairs that end up with the same advantage
/// (within 1e-12) under each scheme.
pub fn collapse_report(groups: &[RolloutGroup], weights: &[f64; 4], eps: f64) -> Result<CollapseReport, GdpoError> {
    let batch = compute_advantages(groups, weights, eps)?;
    let mut report = CollapseReport::default();
    for (group, advs) in groups.iter().zip(&batch.groups) {
        let n = group.rollouts.len();
        for i in 0..n {
            for j in i + 1..n {
                if group.rollouts[i].as_array() == group.rollouts[j].as_array() {
                    continue;
                }
                report.distinct_pairs += 1;
                if (advs[i].baseline - advs[j].baseline).abs() <= 1e-12 {
                    report.grpo_collapsed += 1;
                }
                if (advs[i].rescaled - advs[j].rescaled).abs() <= 1e-12 {
                    report.gdpo_collapsed += 1;
                }
            }
        }
    }
    Ok(report)
}
