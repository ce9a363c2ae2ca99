//! The verification funnel. L1 applies cheap rule filters, L2 gates on
//! multi-source consensus, and L3 arbitrates escalated samples into Pass,
//! Pending or Reject with a per-modality confidence vector.

mod arbitrate;
mod consensus;
mod dpcs;
mod filter;
mod gates;
pub mod keys;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use arbitrate::{document_tree, l3_arbitrate, round_trip_exact, Arbitration};
pub use consensus::{consensus_score, l2_consensus, ConsensusScore, L2Outcome};
pub use dpcs::{dpcs, dpcs_from_subscores, DpcsError, DpcsScore, Tier};
pub use filter::{l1_filter, reference_issues, L1Outcome, RejectReason};
pub use gates::{quality_gates, red, GateError, GateOutcome, RepairSubmission};

use crate::config::EngineConfig;
use crate::corpus::{Layer, ModalityConfidence, SampleRecord, VerdictRecord, VerdictState};
use crate::diagnostics::classify_evidence;
use crate::markup::latex::ArityTable;
use crate::metrics::consensus::PreparedCandidate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Formula,
    Table,
    Layout,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::Text, Modality::Formula, Modality::Table, Modality::Layout];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Formula => "formula",
            Modality::Table => "table",
            Modality::Layout => "layout",
        }
    }

    pub fn confidence(self, c: &ModalityConfidence) -> f64 {
        c.as_array()[self as usize]
    }
}

/// Least-confident modality; ties go to the earlier of text, formula,
/// table, layout.
pub fn modality_route(c: &ModalityConfidence) -> Modality {
    let values = c.as_array();
    let mut best = 0;
    for k in 1..4 {
        if values[k] < values[best] {
            best = k;
        }
    }
    Modality::ALL[best]
}

pub(crate) fn arity_table(config: &EngineConfig) -> ArityTable {
    ArityTable::with_overrides(&config.latex_arity)
}

pub(crate) fn prepare(sample: &SampleRecord, arity: &ArityTable) -> Vec<PreparedCandidate> {
    sample
        .candidates
        .iter()
        .map(|c| PreparedCandidate::from_candidate(c, arity))
        .collect()
}

fn verdict(
    sample: &SampleRecord,
    state: VerdictState,
    layer: Layer,
    consensus: Option<f64>,
    modality_confidence: Option<ModalityConfidence>,
    evidence: BTreeMap<String, f64>,
    config: &EngineConfig,
) -> VerdictRecord {
    VerdictRecord {
        sample_id: sample.id.clone(),
        state,
        layer,
        consensus,
        modality_confidence,
        error_tags: classify_evidence(&evidence, &config.diagnostics),
        evidence,
    }
}

/// Runs L1, then L2, then L3 as needed, recording the deciding layer and
/// every metric computed on the way.
pub fn route(sample: &SampleRecord, config: &EngineConfig) -> VerdictRecord {
    let arity = arity_table(config);
    let mut evidence = BTreeMap::new();
    let outcome = l1_filter(sample, config);
    outcome.record(&mut evidence);
    if let L1Outcome::Reject(_) = outcome {
        return verdict(sample, VerdictState::Reject, Layer::L1, None, None, evidence, config);
    }
    let cands = prepare(sample, &arity);
    let l2 = consensus::l2_prepared(sample, &cands, config, &mut evidence);
    let breakdown = match l2 {
        L2Outcome::Pass(score) => {
            return verdict(sample, VerdictState::Pass, Layer::L2, Some(score.c), None, evidence, config);
        }
        L2Outcome::Escalate(score) => score,
    };
    let arb = arbitrate::l3_prepared(sample, &cands, breakdown.map(|s| s.breakdown), config);
    evidence.extend(arb.evidence.iter().map(|(k, v)| (k.clone(), *v)));
    verdict(
        sample,
        arb.state,
        Layer::L3,
        breakdown.map(|s| s.c),
        Some(arb.confidence),
        evidence,
        config,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: [f64; 4]) -> ModalityConfidence {
        ModalityConfidence {
            c_text: v[0],
            c_formula: v[1],
            c_table: v[2],
            c_layout: v[3],
        }
    }

    #[test]
    fn modality_routing() {
        assert_eq!(modality_route(&c([0.9, 0.4, 0.8, 0.7])), Modality::Formula);
        assert_eq!(modality_route(&c([0.5; 4])), Modality::Text);
        assert_eq!(modality_route(&c([0.2, 0.2, 0.9, 0.9])), Modality::Text);
        assert_eq!(modality_route(&c([0.9, 0.9, 0.3, 0.3])), Modality::Table);
    }
}
