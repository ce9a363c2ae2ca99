//! Canonical records: samples, candidate annotations, boxes and verdicts.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::diagnostics::ErrorTag;

/// Axis-aligned box in page pixel space, `(x1, y1)` top-left and `(x2, y2)`
/// bottom-right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct BoundingBox {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
}

#[derive(Deserialize)]
struct RawBox {
    x1: u32,
    y1: u32,
    x2: u32,
    y2: u32,
}

impl TryFrom<RawBox> for BoundingBox {
    type Error = InvalidBox;

    fn try_from(raw: RawBox) -> Result<Self, Self::Error> {
        BoundingBox::new(raw.x1, raw.y1, raw.x2, raw.y2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvalidBox;

impl fmt::Display for InvalidBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("bounding box requires x1 <= x2 and y1 <= y2")
    }
}

impl core::error::Error for InvalidBox {}

impl BoundingBox {
    pub fn new(x1: u32, y1: u32, x2: u32, y2: u32) -> Result<Self, InvalidBox> {
        if x1 > x2 || y1 > y2 {
            return Err(InvalidBox);
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> u64 {
        u64::from(self.x2 - self.x1)
    }

    pub fn height(&self) -> u64 {
        u64::from(self.y2 - self.y1)
    }

    pub fn area(&self) -> u64 {
        self.width() * self.height()
    }

    pub fn center_x(&self) -> f64 {
        (f64::from(self.x1) + f64::from(self.x2)) / 2.0
    }
}

/// A box together with the text emitted for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxedText {
    pub bbox: BoundingBox,
    pub text: String,
}

/// One source's annotation of a page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateAnnotation {
    pub source_id: String,
    pub markdown: String,
    /// Boxes in emission (reading) order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<BoxedText>>,
}

impl CandidateAnnotation {
    pub fn new(source_id: impl Into<String>, markdown: impl Into<String>) -> Self {
        Self {
            source_id: source_id.into(),
            markdown: markdown.into(),
            boxes: None,
        }
    }

    pub fn with_boxes(mut self, boxes: Vec<BoxedText>) -> Self {
        self.boxes = Some(boxes);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceAnnotation {
    pub markdown: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<BoxedText>>,
}

/// One page: candidate annotations from several sources plus an optional
/// reference. `image_ref` is carried through untouched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    #[serde(default)]
    pub image_ref: String,
    pub candidates: Vec<CandidateAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceAnnotation>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchemaError {
    MissingField(&'static str),
    EmptyField(&'static str),
    NoCandidates,
    EmptySourceId { candidate: usize },
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingField(field) => write!(f, "missing required field '{field}'"),
            Self::EmptyField(field) => write!(f, "field '{field}' must not be empty"),
            Self::NoCandidates => f.write_str("field 'candidates' must hold at least one candidate"),
            Self::EmptySourceId { candidate } => {
                write!(f, "candidate {candidate}: field 'source_id' must not be empty")
            }
        }
    }
}

impl core::error::Error for SchemaError {}

impl SampleRecord {
    pub fn new(id: impl Into<String>, candidates: Vec<CandidateAnnotation>) -> Self {
        Self {
            id: id.into(),
            image_ref: String::new(),
            candidates,
            reference: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_reference(mut self, markdown: impl Into<String>) -> Self {
        self.reference = Some(ReferenceAnnotation {
            markdown: markdown.into(),
            boxes: None,
        });
        self
    }

    /// Checks the record-level invariants that deserialization cannot express.
    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.id.is_empty() {
            return Err(SchemaError::EmptyField("id"));
        }
        if self.candidates.is_empty() {
            return Err(SchemaError::NoCandidates);
        }
        if let Some(i) = self.candidates.iter().position(|c| c.source_id.is_empty()) {
            return Err(SchemaError::EmptySourceId { candidate: i });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictState {
    Pass,
    Pending,
    Reject,
}

impl VerdictState {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Pending => "pending",
            Self::Reject => "reject",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Layer {
    L1,
    L2,
    L3,
}

impl Layer {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::L1 => "L1",
            Self::L2 => "L2",
            Self::L3 => "L3",
        }
    }
}

/// Per-modality reliability emitted by L3 arbitration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalityConfidence {
    pub c_text: f64,
    pub c_formula: f64,
    pub c_table: f64,
    pub c_layout: f64,
}

impl ModalityConfidence {
    pub fn as_array(&self) -> [f64; 4] {
        [self.c_text, self.c_formula, self.c_table, self.c_layout]
    }

    pub fn min(&self) -> f64 {
        self.as_array().into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Outcome of routing one sample through the cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub sample_id: String,
    pub state: VerdictState,
    pub layer: Layer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consensus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality_confidence: Option<ModalityConfidence>,
    #[serde(default)]
    pub error_tags: Vec<ErrorTag>,
    #[serde(default)]
    pub evidence: BTreeMap<String, f64>,
}

impl VerdictRecord {
    pub fn evidence(&self, key: &str) -> Option<f64> {
        self.evidence.get(key).copied()
    }
}

const BOX_START: &str = "<|box_start|>";
const BOX_END: &str = "<|box_end|>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxSpanError {
    /// Byte offset of the offending `<|box_start|>`.
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BoxParse {
    pub spans: Vec<BoxedText>,
    pub errors: Vec<BoxSpanError>,
}

/// Extracts `<|box_start|>(x1,y1),(x2,y2)<|box_end|>content` spans in order.
/// Content runs to the next box start or the end of the text and is trimmed.
/// A malformed span is reported and skipped; parsing resumes at the next
/// box start.
pub fn parse_box_tokens(text: &str) -> BoxParse {
    let starts: Vec<usize> = text.match_indices(BOX_START).map(|(i, _)| i).collect();
    let mut out = BoxParse::default();
    for (k, &start) in starts.iter().enumerate() {
        let end = starts.get(k + 1).copied().unwrap_or(text.len());
        let span = &text[start + BOX_START.len()..end];
        match parse_box_span(span) {
            Ok(boxed) => out.spans.push(boxed),
            Err(message) => out.errors.push(BoxSpanError {
                offset: start,
                message: message.to_string(),
            }),
        }
    }
    out
}

fn parse_box_span(span: &str) -> Result<BoxedText, &'static str> {
    let close = span.find(BOX_END).ok_or("missing <|box_end|>")?;
    let coords = span[..close].trim();
    let content = span[close + BOX_END.len()..].trim();
    let (first, second) = split_pair(coords).ok_or("expected (x1,y1),(x2,y2)")?;
    let (x1, y1) = parse_point(first).ok_or("malformed first coordinate")?;
    let (x2, y2) = parse_point(second).ok_or("malformed second coordinate")?;
    let bbox = BoundingBox::new(x1, y1, x2, y2).map_err(|_| "inverted box corners")?;
    Ok(BoxedText {
        bbox,
        text: content.to_string(),
    })
}

fn split_pair(coords: &str) -> Option<(&str, &str)> {
    let mid = coords.find(')')?;
    let first = &coords[..=mid];
    let rest = coords[mid + 1..].trim_start().strip_prefix(',')?;
    Some((first, rest.trim()))
}

fn parse_point(p: &str) -> Option<(u32, u32)> {
    let inner = p.trim().strip_prefix('(')?.strip_suffix(')')?;
    let (a, b) = inner.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn single_box_span() {
        let parsed = parse_box_tokens("<|box_start|>(0,0),(10,10)<|box_end|>hi");
        assert!(parsed.errors.is_empty());
        assert_eq!(
            parsed.spans,
            vec![BoxedText {
                bbox: BoundingBox::new(0, 0, 10, 10).unwrap(),
                text: "hi".into()
            }]
        );
    }

    #[test]
    fn empty_text_has_no_spans() {
        assert_eq!(parse_box_tokens(""), BoxParse::default());
    }

    #[test]
    fn concatenated_spans_keep_order() {
        let text = "<|box_start|>(1,2),(3,4)<|box_end|>first <|box_start|>(5, 6), (7, 8)<|box_end|>second";
        let parsed = parse_box_tokens(text);
        assert_eq!(parsed.spans.len(), 2);
        assert_eq!(parsed.spans[0].text, "first");
        assert_eq!(parsed.spans[1].bbox, BoundingBox::new(5, 6, 7, 8).unwrap());
        assert_eq!(parsed.spans[1].text, "second");
    }

    #[test]
    fn malformed_span_is_reported_and_rest_parsed() {
        let text = "<|box_start|>(1,x),(3,4)<|box_end|>bad<|box_start|>(0,0),(2,2)<|box_end|>good";
        let parsed = parse_box_tokens(text);
        assert_eq!(parsed.errors.len(), 1);
        assert_eq!(parsed.errors[0].offset, 0);
        assert_eq!(parsed.spans.len(), 1);
        assert_eq!(parsed.spans[0].text, "good");
    }

    #[test]
    fn inverted_box_is_malformed() {
        let parsed = parse_box_tokens("<|box_start|>(9,0),(2,2)<|box_end|>x");
        assert_eq!(parsed.errors.len(), 1);
        assert!(parsed.spans.is_empty());
    }

    #[test]
    fn box_json_rejects_inverted_corners() {
        let err = serde_json::from_str::<BoundingBox>(r#"{"x1":5,"y1":0,"x2":1,"y2":3}"#);
        assert!(err.is_err());
    }

    #[test]
    fn schema_validation() {
        let mut r = SampleRecord::new("a", vec![CandidateAnnotation::new("s", "x")]);
        assert_eq!(r.validate(), Ok(()));
        r.candidates.clear();
        assert_eq!(r.validate(), Err(SchemaError::NoCandidates));
        r.candidates.push(CandidateAnnotation::new("", "x"));
        assert_eq!(r.validate(), Err(SchemaError::EmptySourceId { candidate: 0 }));
    }

    proptest! {
        #[test]
        fn box_parser_is_total(s in "\\PC*") {
            let _ = parse_box_tokens(&s);
        }

        #[test]
        fn box_parser_total_near_tokens(parts in proptest::collection::vec(
            prop_oneof![
                Just("<|box_start|>".to_string()),
                Just("<|box_end|>".to_string()),
                Just("(".to_string()), Just(")".to_string()), Just(",".to_string()),
                "[0-9]{1,3}", "\\PC{0,3}"
            ], 0..20)) {
            let text: String = parts.concat();
            let parsed = parse_box_tokens(&text);
            prop_assert_eq!(parsed.spans.len() + parsed.errors.len(), text.matches(BOX_START).count());
        }
    }
}
