use core::fmt;

use serde::{Deserialize, Serialize};

use super::arbitrate::medoid_index;
use super::filter::reference_issues;
use super::prepare;
use crate::config::{DpcsConfig, EngineConfig};
use crate::corpus::SampleRecord;
use crate::math::clamp01;
use crate::metrics::consensus::{mean_layout_agreement, PreparedCandidate};
use crate::metrics::formula::ast_similarity_opt;
use crate::metrics::{layout_agreement, normalized_similarity, numerical_consistency, reading_order_score, teds_with};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    High,
    Medium,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpcsScore {
    pub s_text: f64,
    pub s_layout: f64,
    pub s_order: f64,
    pub s_structure: f64,
    pub s_format: f64,
    pub s_semantic: f64,
    pub total: f64,
    pub tier: Tier,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DpcsError {
    MissingReference(alloc::string::String),
}

impl fmt::Display for DpcsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DpcsError::MissingReference(id) => write!(f, "sample {id:?} has no reference annotation"),
        }
    }
}

impl core::error::Error for DpcsError {}

/// Subscores in the order text, layout, order, structure, format, semantic.
/// Cutoffs are closed below: a total of exactly `high` is high.
pub fn dpcs_from_subscores(s: [f64; 6], config: &DpcsConfig) -> DpcsScore {
    let total: f64 = s.iter().zip(&config.weights).map(|(v, w)| v * w).sum();
    let tier = if total >= config.high {
        Tier::High
    } else if total >= config.low {
        Tier::Medium
    } else {
        Tier::Low
    };
    DpcsScore {
        s_text: s[0],
        s_layout: s[1],
        s_order: s[2],
        s_structure: s[3],
        s_format: s[4],
        s_semantic: s[5],
        total,
        tier,
    }
}

fn structure_agreement(pred: &PreparedCandidate, reference: &PreparedCandidate, structure_only: bool) -> f64 {
    let items = pred.tables.len().max(reference.tables.len()) + pred.formulas.len().max(reference.formulas.len());
    if items == 0 {
        return 1.0;
    }
    let tables: f64 = pred
        .tables
        .iter()
        .zip(&reference.tables)
        .map(|(a, b)| match (&a.grid, &b.grid) {
            (Some(x), Some(y)) => teds_with(x, y, structure_only),
            _ => 0.0,
        })
        .sum();
    let formulas: f64 = pred
        .formulas
        .iter()
        .zip(&reference.formulas)
        .map(|(a, b)| ast_similarity_opt(a.expr.as_ref(), b.expr.as_ref()))
        .sum();
    (tables + formulas) / items as f64
}

/// Scores the medoid candidate against the sample's reference annotation.
/// `external_semantic` replaces the numeric-consistency fallback.
pub fn dpcs(sample: &SampleRecord, external_semantic: Option<f64>, config: &EngineConfig) -> Result<DpcsScore, DpcsError> {
    let reference = sample
        .reference
        .as_ref()
        .ok_or_else(|| DpcsError::MissingReference(sample.id.clone()))?;
    let arity = super::arity_table(config);
    let cands = prepare(sample, &arity);
    let med = &cands[medoid_index(&cands)];
    let refp = PreparedCandidate::new(&reference.markdown, reference.boxes.as_deref(), &arity);

    let s_text = normalized_similarity(&med.plain, &refp.plain);
    let s_layout = match (&med.boxes, &refp.boxes) {
        (Some(a), Some(b)) => layout_agreement(a, b),
        _ => mean_layout_agreement(&cands),
    };
    let s_order = med.boxes.as_deref().map_or(1.0, reading_order_score);
    let s_structure = structure_agreement(med, &refp, config.teds_structure_only);
    let s_format = if reference_issues(&reference.markdown, &arity).is_empty() { 1.0 } else { 0.0 };
    let s_semantic = external_semantic.map_or_else(|| numerical_consistency(&med.plain, &refp.plain), clamp01);
    Ok(dpcs_from_subscores(
        [s_text, s_layout, s_order, s_structure, s_format, s_semantic],
        &config.dpcs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::corpus::CandidateAnnotation;

    #[test]
    fn totals_and_tiers() {
        let cfg = DpcsConfig::default();
        assert_eq!(dpcs_from_subscores([1.0; 6], &cfg).total, 100.0);
        assert_eq!(dpcs_from_subscores([1.0; 6], &cfg).tier, Tier::High);
        assert_eq!(dpcs_from_subscores([0.0; 6], &cfg).tier, Tier::Low);
        let s = dpcs_from_subscores([0.8, 1.0, 1.0, 1.0, 1.0, 1.0], &cfg);
        assert!((s.total - 95.0).abs() < 1e-9);
    }

    #[test]
    fn tier_cutoffs_are_closed_below() {
        let cfg = DpcsConfig::default();
        let at80 = dpcs_from_subscores([1.0, 0.0, 1.0, 1.0, 1.0, 0.5], &cfg);
        assert_eq!(at80.total, 80.0);
        assert_eq!(at80.tier, Tier::High);
        let at60 = dpcs_from_subscores([0.0, 0.0, 1.0, 1.0, 1.0, 1.0], &cfg);
        assert_eq!(at60.total, 60.0);
        assert_eq!(at60.tier, Tier::Medium);
        let below = dpcs_from_subscores([0.0, 0.0, 1.0, 1.0, 1.0, 0.9], &cfg);
        assert_eq!(below.tier, Tier::Low);
    }

    #[test]
    fn perfect_sample_scores_100() {
        let md = "# Title\n\nValue 3.5 in $x^2$\n\n<table><tr><td>1</td></tr></table>";
        let s = SampleRecord::new(
            "p",
            vec![CandidateAnnotation::new("a", md), CandidateAnnotation::new("b", md)],
        )
        .with_reference(md);
        let score = dpcs(&s, None, &EngineConfig::default()).unwrap();
        assert_eq!(score.total, 100.0);
        assert_eq!(score.tier, Tier::High);
    }

    #[test]
    fn missing_reference_is_an_error() {
        let s = SampleRecord::new("x", vec![CandidateAnnotation::new("a", "t")]);
        assert!(dpcs(&s, None, &EngineConfig::default()).is_err());
    }
}
