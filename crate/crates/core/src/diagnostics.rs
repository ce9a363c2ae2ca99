//! Four-way error taxonomy over verdict evidence, corpus-level weakness
//! profiles, and the batch report.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::cascade::keys;
use crate::config::DiagnosticThresholds;
use crate::corpus::VerdictRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorCategory {
    Structural,
    Recognition,
    Relational,
    Format,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 4] = [
        ErrorCategory::Structural,
        ErrorCategory::Recognition,
        ErrorCategory::Relational,
        ErrorCategory::Format,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Structural => "structural",
            ErrorCategory::Recognition => "recognition",
            ErrorCategory::Relational => "relational",
            ErrorCategory::Format => "format",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubCode {
    TableRowMisalignment,
    GridNotClosed,
    FormulaInvalid,
    MissingAlignmentToken,
    HeadingSkip,
    ListHierarchyFragmentation,
    StructuralDivergence,
    /// Only produced as an augmentation self-label.
    MissingMathOperator,
    OcrMisrecognition,
    ConfusableCharacter,
    TokenOmission,
    ReadingOrderInversion,
    LayoutMismatch,
    /// Only produced as an augmentation self-label.
    CrossPageBreak,
    CaptionPairing,
    MarkupVariant,
    MissingDelimiter,
    InvalidReferenceMarkup,
}

impl SubCode {
    pub fn category(self) -> ErrorCategory {
        use SubCode::*;
        match self {
            TableRowMisalignment | GridNotClosed | FormulaInvalid | MissingAlignmentToken | HeadingSkip
            | ListHierarchyFragmentation | StructuralDivergence | MissingMathOperator => ErrorCategory::Structural,
            OcrMisrecognition | ConfusableCharacter | TokenOmission => ErrorCategory::Recognition,
            ReadingOrderInversion | LayoutMismatch | CrossPageBreak | CaptionPairing => ErrorCategory::Relational,
            MarkupVariant | MissingDelimiter | InvalidReferenceMarkup => ErrorCategory::Format,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubCodeMismatch {
    pub category: ErrorCategory,
    pub sub_code: SubCode,
}

impl fmt::Display for SubCodeMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sub-code {:?} does not belong to category {}", self.sub_code, self.category)
    }
}

impl core::error::Error for SubCodeMismatch {}

#[derive(Deserialize)]
struct RawTag {
    category: ErrorCategory,
    #[serde(default)]
    sub_code: Option<SubCode>,
}

/// A category with an optional finer code; the code always belongs to the
/// category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawTag")]
pub struct ErrorTag {
    pub category: ErrorCategory,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sub_code: Option<SubCode>,
}

impl ErrorTag {
    pub fn of(sub_code: SubCode) -> Self {
        Self {
            category: sub_code.category(),
            sub_code: Some(sub_code),
        }
    }

    pub fn bare(category: ErrorCategory) -> Self {
        Self {
            category,
            sub_code: None,
        }
    }
}

impl TryFrom<RawTag> for ErrorTag {
    type Error = SubCodeMismatch;

    fn try_from(raw: RawTag) -> Result<Self, Self::Error> {
        match raw.sub_code {
            Some(code) if code.category() != raw.category => Err(SubCodeMismatch {
                category: raw.category,
                sub_code: code,
            }),
            sub_code => Ok(Self {
                category: raw.category,
                sub_code,
            }),
        }
    }
}

/// Tags implied by a verdict's evidence. Missing evidence never triggers a
/// tag. Output is sorted and free of duplicates.
pub fn classify_errors(verdict: &VerdictRecord, t: &DiagnosticThresholds) -> Vec<ErrorTag> {
    classify_evidence(&verdict.evidence, t)
}

pub fn classify_evidence(evidence: &BTreeMap<String, f64>, t: &DiagnosticThresholds) -> Vec<ErrorTag> {
    let get = |k: &str| evidence.get(k).copied();
    let below = |k: &str, floor: f64| get(k).is_some_and(|v| v < floor);
    let mut tags = BTreeSet::new();

    if below(keys::GRID_CLOSURE, 1.0) {
        tags.insert(ErrorTag::of(SubCode::GridNotClosed));
    }
    if below(keys::ROW_WIDTH_CONSISTENCY, 1.0) {
        tags.insert(ErrorTag::of(SubCode::TableRowMisalignment));
    }
    if below(keys::AST_VALIDITY, 1.0) {
        tags.insert(ErrorTag::of(SubCode::FormulaInvalid));
    }
    if below(keys::HEADING_VALIDITY, 1.0) {
        tags.insert(ErrorTag::of(SubCode::HeadingSkip));
    }
    if below(keys::LIST_VALIDITY, 1.0) {
        tags.insert(ErrorTag::of(SubCode::ListHierarchyFragmentation));
    }
    if get(keys::D).is_some_and(|d| d > t.structural_divergence) {
        tags.insert(ErrorTag::of(SubCode::StructuralDivergence));
    }

    let ed = get(keys::ED);
    if ed.is_some_and(|e| e > t.recognition_ed) {
        tags.insert(ErrorTag::of(SubCode::OcrMisrecognition));
    }

    if below(keys::READING_ORDER, t.reading_order) || below(keys::READING_ORDER_MIN, t.reading_order) {
        tags.insert(ErrorTag::of(SubCode::ReadingOrderInversion));
    }
    if below(keys::IOU, t.layout_agreement) {
        tags.insert(ErrorTag::of(SubCode::LayoutMismatch));
    }

    if get(keys::REFERENCE_STRIPPED).is_some_and(|v| v > 0.0) {
        tags.insert(ErrorTag::of(SubCode::InvalidReferenceMarkup));
    }
    let violations = get(keys::FORMAT_VIOLATIONS).unwrap_or(0.0);
    if violations > 0.0 && ed.is_none_or(|e| e <= t.format_ed) {
        tags.insert(ErrorTag::of(SubCode::MarkupVariant));
    }
    tags.into_iter().collect()
}

pub fn categories(tags: &[ErrorTag]) -> Vec<ErrorCategory> {
    let set: BTreeSet<ErrorCategory> = tags.iter().map(|t| t.category).collect();
    set.into_iter().collect()
}

/// Sampling weight per error category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeaknessProfile {
    pub structural: f64,
    pub recognition: f64,
    pub relational: f64,
    pub format: f64,
}

impl WeaknessProfile {
    pub fn new(structural: f64, recognition: f64, relational: f64, format: f64) -> Self {
        Self {
            structural,
            recognition,
            relational,
            format,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.structural, self.recognition, self.relational, self.format]
    }

    pub fn weight(&self, category: ErrorCategory) -> f64 {
        self.as_array()[category.index()]
    }

    pub fn total(&self) -> f64 {
        self.as_array().iter().sum()
    }

    /// Scaled to sum to one; an all-zero profile stays zero.
    pub fn normalized(&self) -> Self {
        let total = self.total();
        if total <= 0.0 {
            return Self::default();
        }
        let a = self.as_array().map(|v| v / total);
        Self::new(a[0], a[1], a[2], a[3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyCorpus;

impl fmt::Display for EmptyCorpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("no verdicts to aggregate")
    }
}

impl core::error::Error for EmptyCorpus {}

/// Raw per-category weakness before normalization. Evidence a verdict does
/// not carry counts as passing.
pub fn raw_weakness(verdicts: &[VerdictRecord]) -> Result<WeaknessProfile, EmptyCorpus> {
    if verdicts.is_empty() {
        return Err(EmptyCorpus);
    }
    let n = verdicts.len() as f64;
    let mean_of = |f: &dyn Fn(&VerdictRecord) -> f64| verdicts.iter().map(f).sum::<f64>() / n;
    let ev = |v: &VerdictRecord, k: &str, default: f64| v.evidence(k).unwrap_or(default);

    let structural = 1.0
        - mean_of(&|v| {
            let ok = ev(v, keys::AST_VALIDITY, 1.0) >= 1.0 && ev(v, keys::GRID_CLOSURE, 1.0) >= 1.0;
            if ok { 1.0 } else { 0.0 }
        });
    let recognition = mean_of(&|v| ev(v, keys::ED, 0.0));
    let relational = 1.0
        - mean_of(&|v| {
            v.evidence(keys::READING_ORDER)
                .or_else(|| v.evidence(keys::READING_ORDER_MIN))
                .unwrap_or(1.0)
        });
    let l1_pass = mean_of(&|v| if ev(v, keys::L1_STRUCTURAL_PASS, 1.0) >= 1.0 { 1.0 } else { 0.0 });
    let divergence = mean_of(&|v| ev(v, keys::D, 0.0));
    let format = 0.5 * (1.0 - l1_pass) + 0.5 * divergence;
    let clamp = crate::math::clamp01;
    Ok(WeaknessProfile::new(
        clamp(structural),
        clamp(recognition),
        clamp(relational),
        clamp(format),
    ))
}

pub fn aggregate_weakness(verdicts: &[VerdictRecord]) -> Result<WeaknessProfile, EmptyCorpus> {
    Ok(raw_weakness(verdicts)?.normalized())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceDissent {
    pub source: String,
    /// Mean text distance to the other sources over the verdicts it appears in.
    pub mean_dissent: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub total: usize,
    pub by_state: BTreeMap<String, usize>,
    pub by_layer: BTreeMap<String, usize>,
    pub by_category: BTreeMap<String, usize>,
    pub by_sub_code: BTreeMap<String, usize>,
    /// Most dissenting source first; ties by name.
    pub source_dissent: Vec<SourceDissent>,
}

pub fn report(verdicts: &[VerdictRecord]) -> Report {
    let mut r = Report {
        total: verdicts.len(),
        ..Report::default()
    };
    for state in ["pass", "pending", "reject"] {
        r.by_state.insert(state.to_string(), 0);
    }
    for layer in ["L1", "L2", "L3"] {
        r.by_layer.insert(layer.to_string(), 0);
    }
    for c in ErrorCategory::ALL {
        r.by_category.insert(c.as_str().to_string(), 0);
    }
    let mut dissent: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for v in verdicts {
        *r.by_state.entry(v.state.as_str().to_string()).or_default() += 1;
        *r.by_layer.entry(v.layer.as_str().to_string()).or_default() += 1;
        for c in categories(&v.error_tags) {
            *r.by_category.entry(c.as_str().to_string()).or_default() += 1;
        }
        for tag in &v.error_tags {
            if let Some(code) = tag.sub_code {
                let name = serde_plain_name(code);
                *r.by_sub_code.entry(name).or_default() += 1;
            }
        }
        for (k, value) in &v.evidence {
            if let Some(source) = k.strip_prefix(keys::DISSENT_PREFIX) {
                let e = dissent.entry(source.to_string()).or_default();
                e.0 += value;
                e.1 += 1;
            }
        }
    }
    let mut ranking: Vec<SourceDissent> = dissent
        .into_iter()
        .map(|(source, (sum, count))| SourceDissent {
            source,
            mean_dissent: sum / count as f64,
            samples: count,
        })
        .collect();
    ranking.sort_by(|a, b| b.mean_dissent.total_cmp(&a.mean_dissent).then_with(|| a.source.cmp(&b.source)));
    r.source_dissent = ranking;
    r
}

fn serde_plain_name(code: SubCode) -> String {
    // Mirrors the kebab-case serde names without a JSON dependency.
    let debug = format!("{code:?}");
    let mut out = String::new();
    for (i, ch) in debug.chars().enumerate() {
        if ch.is_ascii_uppercase() {
            if i > 0 {
                out.push('-');
            }
            out.push(ch.to_ascii_lowercase());
        } else {
            out.push(ch);
        }
    }
    out
}

impl Report {
    pub fn render_text(&self) -> String {
        let mut out = format!("verdicts: {}\n", self.total);
        let line = |out: &mut String, title: &str, map: &BTreeMap<String, usize>| {
            out.push_str(title);
            out.push(':');
            for (k, v) in map {
                out.push_str(&format!(" {k}={v}"));
            }
            out.push('\n');
        };
        line(&mut out, "state", &self.by_state);
        line(&mut out, "layer", &self.by_layer);
        line(&mut out, "category", &self.by_category);
        if !self.by_sub_code.is_empty() {
            line(&mut out, "sub-code", &self.by_sub_code);
        }
        if !self.source_dissent.is_empty() {
            out.push_str("source dissent (mean text distance to other sources):\n");
            for s in &self.source_dissent {
                out.push_str(&format!("  {:<16} {:.4} over {} samples\n", s.source, s.mean_dissent, s.samples));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Layer, VerdictState};
    use alloc::vec;

    fn verdict(evidence: &[(&str, f64)]) -> VerdictRecord {
        VerdictRecord {
            sample_id: "s".into(),
            state: VerdictState::Pending,
            layer: Layer::L3,
            consensus: None,
            modality_confidence: None,
            error_tags: vec![],
            evidence: evidence.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    fn t() -> DiagnosticThresholds {
        DiagnosticThresholds::default()
    }

    #[test]
    fn classification_examples() {
        let tags = classify_errors(&verdict(&[(keys::GRID_CLOSURE, 0.0), (keys::ED, 0.0)]), &t());
        assert!(categories(&tags).contains(&ErrorCategory::Structural));
        let tags = classify_errors(
            &verdict(&[(keys::ED, 0.4), (keys::GRID_CLOSURE, 1.0), (keys::AST_VALIDITY, 1.0), (keys::D, 0.0)]),
            &t(),
        );
        assert_eq!(categories(&tags), vec![ErrorCategory::Recognition]);
        let clean = verdict(&[(keys::ED, 0.0), (keys::IOU, 1.0), (keys::D, 0.0), (keys::CONSENSUS, 1.0)]);
        assert!(classify_errors(&clean, &t()).is_empty());
    }

    #[test]
    fn relational_and_format() {
        let tags = classify_errors(&verdict(&[(keys::READING_ORDER_MIN, 0.5), (keys::IOU, 0.3)]), &t());
        assert_eq!(tags, vec![ErrorTag::of(SubCode::ReadingOrderInversion), ErrorTag::of(SubCode::LayoutMismatch)]);
        let tags = classify_errors(&verdict(&[(keys::FORMAT_VIOLATIONS, 2.0), (keys::ED, 0.01)]), &t());
        assert_eq!(tags, vec![ErrorTag::of(SubCode::MarkupVariant)]);
        let tags = classify_errors(&verdict(&[(keys::FORMAT_VIOLATIONS, 2.0), (keys::ED, 0.3)]), &t());
        assert_eq!(categories(&tags), vec![ErrorCategory::Recognition]);
        let tags = classify_errors(&verdict(&[(keys::REFERENCE_STRIPPED, 1.0)]), &t());
        assert_eq!(tags, vec![ErrorTag::of(SubCode::InvalidReferenceMarkup)]);
    }

    #[test]
    fn every_sub_code_maps_consistently() {
        use SubCode::*;
        let all = [
            TableRowMisalignment, GridNotClosed, FormulaInvalid, MissingAlignmentToken, HeadingSkip,
            ListHierarchyFragmentation, StructuralDivergence, MissingMathOperator, OcrMisrecognition,
            ConfusableCharacter, TokenOmission, ReadingOrderInversion, LayoutMismatch, CrossPageBreak,
            CaptionPairing, MarkupVariant, MissingDelimiter, InvalidReferenceMarkup,
        ];
        for code in all {
            let tag = ErrorTag::of(code);
            let json = serde_json::to_string(&tag).unwrap();
            assert!(json.contains(&serde_plain_name(code)), "{json}");
            assert_eq!(serde_json::from_str::<ErrorTag>(&json).unwrap(), tag);
        }
        let bad = r#"{"category":"format","sub_code":"grid-not-closed"}"#;
        assert!(serde_json::from_str::<ErrorTag>(bad).is_err());
    }

    #[test]
    fn weakness_profiles() {
        let perfect = vec![verdict(&[(keys::ED, 0.0), (keys::D, 0.0)]); 3];
        assert_eq!(aggregate_weakness(&perfect).unwrap(), WeaknessProfile::default());
        let grid = vec![verdict(&[(keys::GRID_CLOSURE, 0.5), (keys::ED, 0.0)]); 4];
        assert_eq!(aggregate_weakness(&grid).unwrap(), WeaknessProfile::new(1.0, 0.0, 0.0, 0.0));
        assert_eq!(aggregate_weakness(&[]), Err(EmptyCorpus));
    }

    #[test]
    fn weakness_by_hand() {
        let vs = vec![
            verdict(&[(keys::ED, 0.2), (keys::READING_ORDER, 0.8), (keys::D, 0.4), (keys::L1_STRUCTURAL_PASS, 0.0)]),
            verdict(&[(keys::ED, 0.0), (keys::AST_VALIDITY, 0.0), (keys::D, 0.0)]),
        ];
        let raw = raw_weakness(&vs).unwrap();
        // structural 1/2, recognition 0.1, relational 0.1, format 0.5*0.5 + 0.5*0.2.
        let expected = [0.5, 0.1, 0.1, 0.35];
        for (a, b) in raw.as_array().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let n = aggregate_weakness(&vs).unwrap();
        assert!((n.total() - 1.0).abs() < 1e-9);
        let mut rev = vs.clone();
        rev.reverse();
        assert_eq!(aggregate_weakness(&rev).unwrap(), n);
    }

    #[test]
    fn report_counts() {
        let empty = report(&[]);
        assert_eq!(empty.total, 0);
        assert!(empty.by_state.values().all(|&v| v == 0));
        let mut a = verdict(&[("dissent.x", 0.5), ("dissent.y", 0.1)]);
        a.error_tags = vec![ErrorTag::of(SubCode::GridNotClosed), ErrorTag::of(SubCode::FormulaInvalid)];
        let mut b = verdict(&[("dissent.x", 0.3)]);
        b.state = VerdictState::Pass;
        b.layer = Layer::L2;
        let c = verdict(&[]);
        let r = report(&[a, b, c]);
        assert_eq!(r.by_state.values().sum::<usize>(), 3);
        assert_eq!(r.by_category["structural"], 1);
        assert_eq!(r.by_sub_code["grid-not-closed"], 1);
        assert_eq!(r.source_dissent[0].source, "x");
        assert!((r.source_dissent[0].mean_dissent - 0.4).abs() < 1e-12);
        assert!(r.render_text().contains("state: pass=1 pending=2 reject=0"));
    }
}
