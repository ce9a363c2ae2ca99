//! Engine-wide tunables. Every threshold used by the cascade, rewards,
//! advantages and diagnostics is read from here.

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::cascade::Modality;
use crate::rewards::RewardConstants;

/// Inclusive RED acceptance interval per modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RedBounds {
    pub text: [f64; 2],
    pub formula: [f64; 2],
    pub table: [f64; 2],
    pub layout: [f64; 2],
}

impl Default for RedBounds {
    fn default() -> Self {
        Self {
            text: [0.0, 0.3],
            formula: [0.0, 0.3],
            table: [0.0, 0.3],
            layout: [0.0, 0.3],
        }
    }
}

impl RedBounds {
    pub fn for_modality(&self, modality: Modality) -> [f64; 2] {
        match modality {
            Modality::Text => self.text,
            Modality::Formula => self.formula,
            Modality::Table => self.table,
            Modality::Layout => self.layout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpcsConfig {
    /// Weights for text, layout, order, structure, format, semantic.
    pub weights: [f64; 6],
    pub high: f64,
    pub low: f64,
}

impl Default for DpcsConfig {
    fn default() -> Self {
        Self {
            weights: [25.0, 15.0, 15.0, 20.0, 15.0, 10.0],
            high: 80.0,
            low: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArbitrationFloors {
    pub pass_floor: f64,
    pub reject_floor: f64,
}

impl Default for ArbitrationFloors {
    fn default() -> Self {
        Self {
            pass_floor: 0.9,
            reject_floor: 0.3,
        }
    }
}

/// Proxies for image-level anomalies at L1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub gibberish_min_chars: usize,
    pub gibberish_alnum_ratio: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            gibberish_min_chars: 200,
            gibberish_alnum_ratio: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticThresholds {
    /// ED above this tags a recognition error.
    pub recognition_ed: f64,
    /// Reading-order score below this tags a relational error.
    pub reading_order: f64,
    /// Layout agreement below this tags a relational error.
    pub layout_agreement: f64,
    /// Normalization violations only count as format errors when ED is at
    /// most this.
    pub format_ed: f64,
    /// Structural divergence D above this tags a structural error.
    pub structural_divergence: f64,
}

impl Default for DiagnosticThresholds {
    fn default() -> Self {
        Self {
            recognition_ed: 0.1,
            reading_order: 0.9,
            layout_agreement: 0.5,
            format_ed: 0.05,
            structural_divergence: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Weights of (1 − ED), IoU and (1 − D) in the consensus score.
    pub consensus_weights: [f64; 3],
    pub consensus_threshold: f64,
    /// Fewest candidates for which L2 consensus is computed.
    pub min_candidates: usize,
    pub rewards: RewardConstants,
    /// Aggregation weights for text, formula, table, struct.
    pub gdpo_weights: [f64; 4],
    pub red_bounds: RedBounds,
    pub dpcs: DpcsConfig,
    pub arbitration: ArbitrationFloors,
    pub filter: FilterConfig,
    pub diagnostics: DiagnosticThresholds,
    /// Compare table structure only, ignoring cell text, in TEDS.
    pub teds_structure_only: bool,
    /// Extra or overriding required-argument counts for LaTeX commands,
    /// keyed with the leading backslash.
    pub latex_arity: BTreeMap<String, u8>,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            consensus_weights: [0.4, 0.3, 0.3],
            consensus_threshold: 0.85,
            min_candidates: 2,
            rewards: RewardConstants::default(),
            gdpo_weights: [1.0, 0.8, 0.8, 0.5],
            red_bounds: RedBounds::default(),
            dpcs: DpcsConfig::default(),
            arbitration: ArbitrationFloors::default(),
            filter: FilterConfig::default(),
            diagnostics: DiagnosticThresholds::default(),
            teds_structure_only: false,
            latex_arity: BTreeMap::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    WeightsDoNotSumToOne(f64),
    NegativeWeight(&'static str),
    OutOfUnitRange { field: &'static str, value: f64 },
    InvertedBounds(&'static str),
    DpcsCutoffs { low: f64, high: f64 },
    NonPositive(&'static str),
    TooFewCandidates(usize),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::WeightsDoNotSumToOne(sum) => {
                write!(f, "consensus_weights must sum to 1 (got {sum})")
            }
            Self::NegativeWeight(field) => write!(f, "{field} must not contain negative weights"),
            Self::OutOfUnitRange { field, value } => {
                write!(f, "{field} must lie in [0, 1] (got {value})")
            }
            Self::InvertedBounds(field) => write!(f, "{field} lower bound exceeds upper bound"),
            Self::DpcsCutoffs { low, high } => {
                write!(f, "dpcs cutoffs need 0 <= low < high <= 100 (got low={low}, high={high})")
            }
            Self::NonPositive(field) => write!(f, "{field} must be positive"),
            Self::TooFewCandidates(n) => write!(f, "min_candidates must be at least 2 (got {n})"),
        }
    }
}

impl core::error::Error for ConfigError {}

fn unit(field: &'static str, value: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ConfigError::OutOfUnitRange { field, value })
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.consensus_weights.iter().any(|w| *w < 0.0) {
            return Err(ConfigError::NegativeWeight("consensus_weights"));
        }
        let sum: f64 = self.consensus_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::WeightsDoNotSumToOne(sum));
        }
        if self.gdpo_weights.iter().any(|w| *w < 0.0) {
            return Err(ConfigError::NegativeWeight("gdpo_weights"));
        }
        if self.dpcs.weights.iter().any(|w| *w < 0.0) {
            return Err(ConfigError::NegativeWeight("dpcs.weights"));
        }
        if self.min_candidates < 2 {
            return Err(ConfigError::TooFewCandidates(self.min_candidates));
        }
        unit("consensus_threshold", self.consensus_threshold)?;
        let r = &self.rewards;
        unit("rewards.alpha", r.alpha)?;
        unit("rewards.beta", r.beta)?;
        unit("rewards.tau_text", r.tau_text)?;
        unit("rewards.epsilon", r.epsilon)?;
        if r.gamma <= 0.0 || r.gamma.is_nan() {
            return Err(ConfigError::NonPositive("rewards.gamma"));
        }
        let bounds = [
            ("red_bounds.text", self.red_bounds.text),
            ("red_bounds.formula", self.red_bounds.formula),
            ("red_bounds.table", self.red_bounds.table),
            ("red_bounds.layout", self.red_bounds.layout),
        ];
        for (field, [lo, hi]) in bounds {
            unit(field, lo)?;
            unit(field, hi)?;
            if lo > hi {
                return Err(ConfigError::InvertedBounds(field));
            }
        }
        let d = &self.dpcs;
        if !(0.0 <= d.low && d.low < d.high && d.high <= 100.0) {
            return Err(ConfigError::DpcsCutoffs {
                low: d.low,
                high: d.high,
            });
        }
        unit("arbitration.pass_floor", self.arbitration.pass_floor)?;
        unit("arbitration.reject_floor", self.arbitration.reject_floor)?;
        unit("filter.gibberish_alnum_ratio", self.filter.gibberish_alnum_ratio)?;
        let t = &self.diagnostics;
        unit("diagnostics.recognition_ed", t.recognition_ed)?;
        unit("diagnostics.reading_order", t.reading_order)?;
        unit("diagnostics.layout_agreement", t.layout_agreement)?;
        unit("diagnostics.format_ed", t.format_ed)?;
        unit("diagnostics.structural_divergence", t.structural_divergence)?;
        Ok(())
    }
}
