use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::{arbitrate, consensus, prepare, route, Modality};
use crate::config::EngineConfig;
use crate::corpus::{SampleRecord, VerdictState};
use crate::metrics::consensus::divergence;
use crate::metrics::normalized_distance;

pub const GATE_CONFIDENCE: &str = "confidence-gain";
pub const GATE_RED: &str = "red-bounds";
pub const GATE_ARBITRATION: &str = "arbitration";

/// Normalized edit magnitude of a repair. With a region, only the edited
/// hunk is compared: `region` is a character range of `pre`, and the
/// matching range of `post` is shifted by the length change.
pub fn red(pre: &str, post: &str, region: Option<[usize; 2]>) -> f64 {
    let Some([start, end]) = region else {
        return normalized_distance(pre, post);
    };
    let pre_chars: Vec<char> = pre.chars().collect();
    let post_chars: Vec<char> = post.chars().collect();
    let start_pre = start.min(pre_chars.len());
    let end_pre = end.clamp(start_pre, pre_chars.len());
    let shift = post_chars.len() as isize - pre_chars.len() as isize;
    let start_post = start.min(post_chars.len());
    let end_post = ((end_pre as isize + shift).max(0) as usize).clamp(start_post, post_chars.len());
    let a: String = pre_chars[start_pre..end_pre].iter().collect();
    let b: String = post_chars[start_post..end_post].iter().collect();
    normalized_distance(&a, &b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairSubmission {
    pub sample_id: String,
    pub modality: Modality,
    pub pre_text: String,
    pub post_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<[usize; 2]>,
    /// Candidate being replaced. When absent, the candidate whose markdown
    /// equals `pre_text` is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    #[serde(default)]
    pub no_op: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GateError {
    UnknownSample(String),
    CandidateNotFound(String),
    IdenticalTexts(String),
}

impl fmt::Display for GateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateError::UnknownSample(id) => write!(f, "unknown sample_id {id:?}"),
            GateError::CandidateNotFound(id) => write!(f, "sample {id:?}: no candidate matches the repair"),
            GateError::IdenticalTexts(id) => {
                write!(f, "sample {id:?}: pre_text equals post_text but the repair is not marked no_op")
            }
        }
    }
}

impl core::error::Error for GateError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOutcome {
    pub sample_id: String,
    pub admitted: bool,
    /// Failed gates, in gate order.
    pub reasons: Vec<String>,
    pub red: f64,
    pub delta_confidence: f64,
    pub delta_consensus: Option<f64>,
    pub state_after: VerdictState,
}

struct Snapshot {
    consensus: Option<f64>,
    confidence: f64,
}

fn snapshot(sample: &SampleRecord, modality: Modality, config: &EngineConfig) -> Snapshot {
    let arity = super::arity_table(config);
    let cands = prepare(sample, &arity);
    let breakdown = divergence(&cands, config.teds_structure_only).ok();
    let consensus = if cands.len() >= config.min_candidates.max(2) {
        breakdown.map(|b| consensus::consensus_score(b, &config.consensus_weights).c)
    } else {
        None
    };
    let arb = arbitrate::l3_prepared(sample, &cands, breakdown, config);
    Snapshot {
        consensus,
        confidence: modality.confidence(&arb.confidence),
    }
}

/// Re-verifies a sample with the repaired candidate substituted and checks
/// the three admission gates: a confidence or consensus gain, a bounded
/// edit magnitude, and a Pass on re-arbitration.
pub fn quality_gates(
    sample: &SampleRecord,
    repair: &RepairSubmission,
    config: &EngineConfig,
) -> Result<GateOutcome, GateError> {
    if repair.sample_id != sample.id {
        return Err(GateError::UnknownSample(repair.sample_id.clone()));
    }
    if repair.pre_text == repair.post_text && !repair.no_op {
        return Err(GateError::IdenticalTexts(sample.id.clone()));
    }
    let target = match &repair.source_id {
        Some(src) => sample.candidates.iter().position(|c| &c.source_id == src),
        None => sample.candidates.iter().position(|c| c.markdown == repair.pre_text),
    }
    .ok_or_else(|| GateError::CandidateNotFound(sample.id.clone()))?;

    let mut repaired = sample.clone();
    repaired.candidates[target].markdown = repair.post_text.clone();

    let before = snapshot(sample, repair.modality, config);
    let after = snapshot(&repaired, repair.modality, config);
    let delta_confidence = after.confidence - before.confidence;
    let delta_consensus = match (before.consensus, after.consensus) {
        (Some(b), Some(a)) => Some(a - b),
        _ => None,
    };
    let magnitude = red(&repair.pre_text, &repair.post_text, repair.region);
    let state_after = route(&repaired, config).state;

    let mut reasons = Vec::new();
    if !(delta_confidence > 0.0 || delta_consensus.is_some_and(|d| d > 0.0)) {
        reasons.push(GATE_CONFIDENCE.to_string());
    }
    let [lo, hi] = config.red_bounds.for_modality(repair.modality);
    if !(lo..=hi).contains(&magnitude) {
        reasons.push(GATE_RED.to_string());
    }
    if state_after != VerdictState::Pass {
        reasons.push(GATE_ARBITRATION.to_string());
    }
    Ok(GateOutcome {
        sample_id: sample.id.clone(),
        admitted: reasons.is_empty(),
        reasons,
        red: magnitude,
        delta_confidence,
        delta_consensus,
        state_after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use crate::corpus::CandidateAnnotation;

    fn sample(cands: &[&str]) -> SampleRecord {
        SampleRecord::new(
            "s",
            cands.iter().enumerate().map(|(i, m)| CandidateAnnotation::new(format!("src{i}"), *m)).collect(),
        )
    }

    fn repair(pre: &str, post: &str) -> RepairSubmission {
        RepairSubmission {
            sample_id: "s".into(),
            modality: Modality::Text,
            pre_text: pre.into(),
            post_text: post.into(),
            region: None,
            source_id: None,
            no_op: false,
        }
    }

    #[test]
    fn red_values() {
        assert_eq!(red("same", "same", None), 0.0);
        assert_eq!(red("aaa", "bbb", None), 1.0);
        assert!((red("abc", "abd", None) - 1.0 / 3.0).abs() < 1e-12);
        // Only the hunk counts: "abc" -> "abXYc" over chars 1..2 compares "b" with "bXY".
        assert!((red("abc", "abXYc", Some([1, 2])) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn large_repair_denied_on_red_only() {
        let cfg = EngineConfig::default();
        let s = sample(&["helloworld", "helloworld", "xxxxxxxxxd"]);
        let out = quality_gates(&s, &repair("xxxxxxxxxd", "helloworld"), &cfg).unwrap();
        assert!((out.red - 0.9).abs() < 1e-12);
        assert_eq!(out.reasons, ["red-bounds"]);
        assert_eq!(out.state_after, VerdictState::Pass);
    }

    #[test]
    fn degrading_repair_denied_on_gain() {
        let cfg = EngineConfig::default();
        let s = sample(&["the total is 42", "the total is 42", "the total is 4Z"]);
        let out = quality_gates(&s, &repair("the total is 4Z", "the total is 4ZZ"), &cfg).unwrap();
        assert!(out.delta_confidence < 0.0);
        assert!(out.reasons.contains(&GATE_CONFIDENCE.to_string()));
        assert!(!out.admitted);
    }

    #[test]
    fn restoring_repair_admitted() {
        let cfg = EngineConfig::default();
        let good = "Revenue table\n\n<table><tr><td>q1</td><td>10</td></tr><tr><td>q2</td><td>12</td></tr></table>";
        let bad = "Revenue table\n\n<table><tr><td>q1</td><td>10</td></tr><tr><td>q2<td>12</td></tr></table>";
        let s = sample(&[good, good, bad]);
        let out = quality_gates(&s, &repair(bad, good), &cfg).unwrap();
        assert!(out.admitted, "{out:?}");
    }

    #[test]
    fn errors() {
        let cfg = EngineConfig::default();
        let s = sample(&["a", "b"]);
        let mut r = repair("a", "c");
        r.sample_id = "other".into();
        assert!(matches!(quality_gates(&s, &r, &cfg), Err(GateError::UnknownSample(_))));
        assert!(matches!(
            quality_gates(&s, &repair("zz", "c"), &cfg),
            Err(GateError::CandidateNotFound(_))
        ));
        assert!(matches!(
            quality_gates(&s, &repair("a", "a"), &cfg),
            Err(GateError::IdenticalTexts(_))
        ));
    }
}
