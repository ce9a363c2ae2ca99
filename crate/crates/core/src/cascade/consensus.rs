use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::keys;
use crate::config::EngineConfig;
use crate::corpus::SampleRecord;
use crate::markup::normalize_document;
use crate::metrics::consensus::{divergence, text_distance_matrix, DivergenceBreakdown, PreparedCandidate};
use crate::metrics::reading_order_score;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusScore {
    pub c: f64,
    pub breakdown: DivergenceBreakdown,
}

/// `w1 (1 - ED) + w2 IoU + w3 (1 - D)`.
pub fn consensus_score(breakdown: DivergenceBreakdown, weights: &[f64; 3]) -> ConsensusScore {
    let c = weights[0] * (1.0 - breakdown.ed) + weights[1] * breakdown.iou + weights[2] * (1.0 - breakdown.d);
    ConsensusScore { c, breakdown }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum L2Outcome {
    Pass(ConsensusScore),
    /// Sent to L3. No score when there were too few candidates.
    Escalate(Option<ConsensusScore>),
}

pub fn l2_consensus(sample: &SampleRecord, config: &EngineConfig) -> L2Outcome {
    let cands = super::prepare(sample, &super::arity_table(config));
    l2_prepared(sample, &cands, config, &mut BTreeMap::new())
}

pub(crate) fn l2_prepared(
    sample: &SampleRecord,
    cands: &[PreparedCandidate],
    config: &EngineConfig,
    evidence: &mut BTreeMap<String, f64>,
) -> L2Outcome {
    let n = cands.len();
    evidence.insert(keys::CANDIDATES.into(), n as f64);

    let violations: usize = cands.iter().map(|c| normalize_document(&c.doc).violations.len()).sum();
    evidence.insert(keys::FORMAT_VIOLATIONS.into(), violations as f64);
    let fraction = |f: &dyn Fn(&PreparedCandidate) -> bool| {
        cands.iter().filter(|c| f(c)).count() as f64 / n.max(1) as f64
    };
    evidence.insert(keys::HEADING_VALIDITY.into(), fraction(&|c| c.doc.heading_hierarchy_valid()));
    evidence.insert(keys::LIST_VALIDITY.into(), fraction(&|c| c.doc.list_indentation_valid()));
    let order_min = cands
        .iter()
        .filter_map(|c| c.boxes.as_deref().map(reading_order_score))
        .fold(1.0, f64::min);
    evidence.insert(keys::READING_ORDER_MIN.into(), order_min);

    if n < config.min_candidates.max(2) {
        return L2Outcome::Escalate(None);
    }
    let m = text_distance_matrix(cands);
    for (i, cand) in sample.candidates.iter().enumerate() {
        let mean = m[i].iter().sum::<f64>() / (n - 1) as f64;
        evidence.insert(format!("{}{}", keys::DISSENT_PREFIX, cand.source_id), mean);
    }
    let breakdown = divergence(cands, config.teds_structure_only).expect("at least two candidates");
    let score = consensus_score(breakdown, &config.consensus_weights);
    evidence.insert(keys::ED.into(), breakdown.ed);
    evidence.insert(keys::IOU.into(), breakdown.iou);
    evidence.insert(keys::D.into(), breakdown.d);
    evidence.insert(keys::CONSENSUS.into(), score.c);
    if score.c >= config.consensus_threshold {
        L2Outcome::Pass(score)
    } else {
        L2Outcome::Escalate(Some(score))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CandidateAnnotation;
    use proptest::prelude::*;

    fn sample(cands: &[&str]) -> SampleRecord {
        SampleRecord::new(
            "s",
            cands.iter().enumerate().map(|(i, m)| CandidateAnnotation::new(format!("src{i}"), *m)).collect(),
        )
    }

    #[test]
    fn identical_candidates_pass() {
        let cfg = EngineConfig::default();
        match l2_consensus(&sample(&["a $x$", "a $x$", "a $x$"]), &cfg) {
            L2Outcome::Pass(s) => assert_eq!(s.c, 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn score_arithmetic() {
        let s = consensus_score(DivergenceBreakdown { ed: 0.1, iou: 0.8, d: 0.2 }, &[0.4, 0.3, 0.3]);
        assert!((s.c - 0.84).abs() < 1e-12);
    }

    #[test]
    fn disagreement_escalates() {
        let cfg = EngineConfig::default();
        let out = l2_consensus(&sample(&["<table><tr><td>1</td></tr></table>", "completely different words"]), &cfg);
        match out {
            L2Outcome::Escalate(Some(s)) => assert!(s.c < 0.5, "{s:?}"),
            other => panic!("{other:?}"),
        }
        assert_eq!(l2_consensus(&sample(&["only"]), &cfg), L2Outcome::Escalate(None));
    }

    proptest! {
        #[test]
        fn monotone_in_components(ed in 0.0f64..0.9, iou in 0.0f64..0.9, d in 0.0f64..1.0, step in 0.01f64..0.1) {
            let w = [0.4, 0.3, 0.3];
            let base = consensus_score(DivergenceBreakdown { ed, iou, d }, &w).c;
            let worse_text = consensus_score(DivergenceBreakdown { ed: ed + step, iou, d }, &w).c;
            let better_layout = consensus_score(DivergenceBreakdown { ed, iou: iou + step, d }, &w).c;
            prop_assert!(worse_text < base);
            prop_assert!(better_layout > base);
        }
    }

    #[test]
    fn evidence_recorded() {
        let cfg = EngineConfig::default();
        let s = sample(&["# a\n\n### b", "# a\n\n## b"]);
        let cands = super::super::prepare(&s, &super::super::arity_table(&cfg));
        let mut ev = BTreeMap::new();
        l2_prepared(&s, &cands, &cfg, &mut ev);
        assert_eq!(ev[keys::HEADING_VALIDITY], 0.5);
        assert_eq!(ev[keys::FORMAT_VIOLATIONS], 1.0);
        assert!(ev.contains_key("dissent.src0"));
    }
}
