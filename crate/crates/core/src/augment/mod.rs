//! Targeted augmentation: seeded perturbation operators that inject one
//! error type into one candidate of a sample, template synthesis of clean
//! samples with known ground truth, and the re-verification step that admits
//! only samples the cascade passes.

mod perturb;
mod templates;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::hash::Hasher;

use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use perturb::{apply_perturbation, confuse_word, PerturbOutcome, CONFUSABLES, PAGE_BREAK};
pub use templates::{synthesize_from_template, Template, TemplateError};

use crate::cascade::route;
use crate::config::EngineConfig;
use crate::corpus::{SampleRecord, VerdictRecord, VerdictState};
use crate::diagnostics::{ErrorCategory, ErrorTag, SubCode, WeaknessProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    CellMergeSplit,
    FormulaAlignDisturb,
    ListRearrange,
    CharConfusion,
    ColumnRearrange,
    CrossPageCut,
    MarkupTransposition,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 7] = [
        PerturbationKind::CellMergeSplit,
        PerturbationKind::FormulaAlignDisturb,
        PerturbationKind::ListRearrange,
        PerturbationKind::CharConfusion,
        PerturbationKind::ColumnRearrange,
        PerturbationKind::CrossPageCut,
        PerturbationKind::MarkupTransposition,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationKind::CellMergeSplit => "cell-merge-split",
            PerturbationKind::FormulaAlignDisturb => "formula-align-disturb",
            PerturbationKind::ListRearrange => "list-rearrange",
            PerturbationKind::CharConfusion => "char-confusion",
            PerturbationKind::ColumnRearrange => "column-rearrange",
            PerturbationKind::CrossPageCut => "cross-page-cut",
            PerturbationKind::MarkupTransposition => "markup-transposition",
        }
    }

    /// The error the operator injects.
    pub fn sub_code(self) -> SubCode {
        match self {
            PerturbationKind::CellMergeSplit => SubCode::TableRowMisalignment,
            PerturbationKind::FormulaAlignDisturb => SubCode::MissingAlignmentToken,
            PerturbationKind::ListRearrange => SubCode::ListHierarchyFragmentation,
            PerturbationKind::CharConfusion => SubCode::ConfusableCharacter,
            PerturbationKind::ColumnRearrange => SubCode::ReadingOrderInversion,
            PerturbationKind::CrossPageCut => SubCode::CrossPageBreak,
            PerturbationKind::MarkupTransposition => SubCode::MarkupVariant,
        }
    }

    pub fn category(self) -> ErrorCategory {
        self.sub_code().category()
    }

    pub fn self_label(self) -> ErrorTag {
        ErrorTag::of(self.sub_code())
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    /// Fraction of eligible elements touched, in `[0, 1]`.
    pub intensity: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityOutOfRange(pub f64);

impl fmt::Display for IntensityOutOfRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "intensity must lie in [0, 1] (got {})", self.0)
    }
}

impl core::error::Error for IntensityOutOfRange {}

impl Perturbation {
    pub fn new(kind: PerturbationKind, intensity: f64, seed: u64) -> Result<Self, IntensityOutOfRange> {
        if !(0.0..=1.0).contains(&intensity) {
            return Err(IntensityOutOfRange(intensity));
        }
        Ok(Self { kind, intensity, seed })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub sample_id: String,
    pub perturbation: Perturbation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentPlan {
    pub seed: u64,
    pub entries: Vec<PlanEntry>,
}

/// Intensities are drawn from this range so every applied operator leaves
/// a measurable trace.
pub const INTENSITY_RANGE: (f64, f64) = (0.5, 1.0);

/// Seed of an independent stream for one `(seed, id, index)` triple, so
/// per-sample work never depends on processing order.
pub fn stream_seed(seed: u64, id: &str, index: u64) -> u64 {
    let mut h = FnvHasher::default();
    h.write_u64(seed);
    h.write(id.as_bytes());
    h.write_u8(0xff);
    h.write_u64(index);
    h.finish()
}

/// Per-kind sampling weights: each kind gets its category's profile weight,
/// and an all-zero profile falls back to uniform.
pub fn kind_weights(profile: &WeaknessProfile) -> [f64; 7] {
    let mut w = PerturbationKind::ALL.map(|k| profile.weight(k.category()).max(0.0));
    if w.iter().sum::<f64>() <= 0.0 {
        w = [1.0; 7];
    }
    w
}

/// Draws `n` (sample, perturbation) pairs. Samples are picked uniformly,
/// kinds with probability proportional to their category weight.
pub fn sample_plan<S: AsRef<str>>(profile: &WeaknessProfile, ids: &[S], n: usize, seed: u64) -> AugmentPlan {
    let mut entries = Vec::with_capacity(n);
    if ids.is_empty() {
        return AugmentPlan { seed, entries };
    }
    let weights = kind_weights(profile);
    let total: f64 = weights.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for index in 0..n {
        let sample_id = ids[rng.random_range(0..ids.len())].as_ref();
        let mut draw = rng.random::<f64>() * total;
        let mut kind = PerturbationKind::ALL[6];
        for (k, w) in PerturbationKind::ALL.iter().zip(weights) {
            if w > 0.0 && draw < w {
                kind = *k;
                break;
            }
            draw -= w;
        }
        if weights[kind as usize] == 0.0 {
            // Rounding left the draw past the last positive weight.
            let last = weights.iter().rposition(|w| *w > 0.0).unwrap_or(6);
            kind = PerturbationKind::ALL[last];
        }
        let (lo, hi) = INTENSITY_RANGE;
        let intensity = lo + (hi - lo) * rng.random::<f64>();
        entries.push(PlanEntry {
            sample_id: String::from(sample_id),
            perturbation: Perturbation {
                kind,
                intensity,
                seed: stream_seed(seed, sample_id, index as u64),
            },
        });
    }
    AugmentPlan { seed, entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProvenanceStatus {
    /// Generated; not yet re-verified.
    Generated,
    NoOp,
    Admitted,
    Rejected,
}

/// Sidecar entry describing how one augmented record was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub record_id: String,
    pub source_sample: String,
    pub plan_index: usize,
    pub kind: PerturbationKind,
    pub intensity: f64,
    pub seed: u64,
    /// Candidate that was perturbed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<String>,
    pub self_label: ErrorTag,
    pub status: ProvenanceStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<VerdictState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub record: Option<SampleRecord>,
    pub provenance: Provenance,
}

pub fn augmented_id(source: &str, plan_index: usize, kind: PerturbationKind) -> String {
    format!("{source}~{kind}-{plan_index}")
}

/// Applies plan entry `plan_index` to `sample`, perturbing exactly one
/// candidate chosen from the entry's own stream.
pub fn augment_sample(sample: &SampleRecord, plan_index: usize, entry: &PlanEntry) -> Generated {
    let p = entry.perturbation;
    let mut provenance = Provenance {
        record_id: augmented_id(&sample.id, plan_index, p.kind),
        source_sample: sample.id.clone(),
        plan_index,
        kind: p.kind,
        intensity: p.intensity,
        seed: p.seed,
        candidate: None,
        self_label: p.kind.self_label(),
        status: ProvenanceStatus::NoOp,
        note: None,
        state: None,
    };
    if sample.candidates.is_empty() {
        provenance.note = Some(String::from("sample has no candidates"));
        return Generated { record: None, provenance };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let target = rng.random_range(0..sample.candidates.len());
    let op = Perturbation { seed: rng.random(), ..p };
    let chosen = &sample.candidates[target];
    provenance.candidate = Some(chosen.source_id.clone());
    match apply_perturbation(chosen, &op) {
        PerturbOutcome::NoOp { reason } => {
            provenance.note = Some(String::from(reason));
            Generated { record: None, provenance }
        }
        PerturbOutcome::Applied { candidate, .. } => {
            let mut record = sample.clone();
            record.id = provenance.record_id.clone();
            record.candidates[target] = candidate;
            record.reference = None;
            record.metadata.insert("augment.source".into(), sample.id.clone());
            record.metadata.insert("augment.kind".into(), String::from(p.kind.as_str()));
            provenance.status = ProvenanceStatus::Generated;
            Generated {
                record: Some(record),
                provenance,
            }
        }
    }
}

/// Runs every plan entry against the pool. Entries naming unknown samples
/// become no-ops with a note.
pub fn augment_pool(pool: &[SampleRecord], plan: &AugmentPlan) -> Vec<Generated> {
    let index: alloc::collections::BTreeMap<&str, &SampleRecord> = pool.iter().map(|s| (s.id.as_str(), s)).collect();
    plan.entries
        .iter()
        .enumerate()
        .map(|(i, entry)| match index.get(entry.sample_id.as_str()) {
            Some(sample) => augment_sample(sample, i, entry),
            None => Generated {
                record: None,
                provenance: Provenance {
                    record_id: augmented_id(&entry.sample_id, i, entry.perturbation.kind),
                    source_sample: entry.sample_id.clone(),
                    plan_index: i,
                    kind: entry.perturbation.kind,
                    intensity: entry.perturbation.intensity,
                    seed: entry.perturbation.seed,
                    candidate: None,
                    self_label: entry.perturbation.kind.self_label(),
                    status: ProvenanceStatus::NoOp,
                    note: Some(String::from("sample not in pool")),
                    state: None,
                },
            },
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Admission {
    pub admitted: Vec<(SampleRecord, VerdictRecord)>,
    /// Dropped records with the verdict that dropped them.
    pub rejected: Vec<(SampleRecord, VerdictRecord)>,
}

/// Routes every sample through the cascade and keeps only Pass verdicts.
pub fn reverify_and_admit(samples: Vec<SampleRecord>, config: &EngineConfig) -> Admission {
    let verdicts: Vec<VerdictRecord> = samples.iter().map(|s| route(s, config)).collect();
    admit_verified(samples.into_iter().zip(verdicts))
}

/// Splits already-routed samples by verdict state.
pub fn admit_verified(routed: impl IntoIterator<Item = (SampleRecord, VerdictRecord)>) -> Admission {
    let mut out = Admission::default();
    for (sample, verdict) in routed {
        if verdict.state == VerdictState::Pass {
            out.admitted.push((sample, verdict));
        } else {
            out.rejected.push((sample, verdict));
        }
    }
    out
}
