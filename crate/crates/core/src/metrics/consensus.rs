//! Group agreement across candidate annotations of one page.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::edit::normalized_distance;
use super::formula::{ast_similarity_opt, glyph_tokens, multiset_f1};
use super::layout::layout_agreement;
use super::teds::teds_with;
use crate::corpus::{BoundingBox, BoxedText, CandidateAnnotation};
use crate::markup::latex::{parse_formula_with, ArityTable, FormulaExpr};
use crate::markup::normalize::pipe_table_to_html;
use crate::markup::{parse_markdown, strip_document, Block, MarkdownDoc, TableGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsensusError {
    TooFewCandidates,
}

impl fmt::Display for ConsensusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("consensus undefined: fewer than two candidates")
    }
}

impl core::error::Error for ConsensusError {}

/// The three disagreement signals combined into consensus confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceBreakdown {
    pub ed: f64,
    pub iou: f64,
    pub d: f64,
}

#[derive(Debug, Clone)]
pub struct TableEntry {
    /// Grid used for similarity. Pipe tables are converted; HTML that fails
    /// the strict parse has none.
    pub grid: Option<TableGrid>,
    /// Written as HTML and parsed strictly.
    pub strict: bool,
}

#[derive(Debug, Clone)]
pub struct FormulaEntry {
    pub body: String,
    pub expr: Option<FormulaExpr>,
    pub glyphs: Vec<String>,
}

impl FormulaEntry {
    pub fn new(body: &str, arity: &ArityTable) -> Self {
        Self {
            body: String::from(body),
            expr: parse_formula_with(body, arity).ok(),
            glyphs: glyph_tokens(body),
        }
    }

    pub fn valid(&self) -> bool {
        self.expr.is_some()
    }
}

/// Blend of glyph overlap and tree similarity used for formula agreement.
pub fn formula_agreement(a: &FormulaEntry, b: &FormulaEntry) -> f64 {
    0.5 * multiset_f1(&a.glyphs, &b.glyphs) + 0.5 * ast_similarity_opt(a.expr.as_ref(), b.expr.as_ref())
}

pub fn table_agreement(a: &TableEntry, b: &TableEntry, structure_only: bool) -> f64 {
    match (&a.grid, &b.grid) {
        (Some(x), Some(y)) => teds_with(x, y, structure_only),
        _ => 0.0,
    }
}

/// One candidate parsed once for every downstream measurement.
#[derive(Debug, Clone)]
pub struct PreparedCandidate {
    pub doc: MarkdownDoc,
    pub plain: String,
    pub tables: Vec<TableEntry>,
    pub formulas: Vec<FormulaEntry>,
    pub boxes: Option<Vec<BoundingBox>>,
}

impl PreparedCandidate {
    pub fn new(markdown: &str, boxes: Option<&[BoxedText]>, arity: &ArityTable) -> Self {
        let doc = parse_markdown(markdown);
        let plain = strip_document(&doc);
        let mut tables = Vec::new();
        for block in &doc.blocks {
            match block {
                Block::Table { grid, .. } => tables.push(TableEntry {
                    grid: grid.as_ref().ok().cloned(),
                    strict: grid.is_ok(),
                }),
                Block::PipeTable { rows } => tables.push(TableEntry {
                    grid: pipe_table_to_html(rows).1.ok(),
                    strict: false,
                }),
                _ => {}
            }
        }
        let formulas = doc.formulas().into_iter().map(|f| FormulaEntry::new(f, arity)).collect();
        Self {
            doc,
            plain,
            tables,
            formulas,
            boxes: boxes.map(|b| b.iter().map(|bt| bt.bbox).collect()),
        }
    }

    pub fn from_candidate(candidate: &CandidateAnnotation, arity: &ArityTable) -> Self {
        Self::new(&candidate.markdown, candidate.boxes.as_deref(), arity)
    }

    pub fn has_structure(&self) -> bool {
        !self.tables.is_empty() || !self.formulas.is_empty()
    }
}

fn require_pairs(n: usize) -> Result<(), ConsensusError> {
    if n < 2 {
        Err(ConsensusError::TooFewCandidates)
    } else {
        Ok(())
    }
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Normalized edit distance between stripped texts for every ordered pair.
pub fn text_distance_matrix(cands: &[PreparedCandidate]) -> Vec<Vec<f64>> {
    let n = cands.len();
    let mut m = alloc::vec![alloc::vec![0.0; n]; n];
    for (i, j) in pairs(n) {
        let d = normalized_distance(&cands[i].plain, &cands[j].plain);
        m[i][j] = d;
        m[j][i] = d;
    }
    m
}

pub fn char_consistency_prepared(cands: &[PreparedCandidate]) -> Result<f64, ConsensusError> {
    require_pairs(cands.len())?;
    let m = text_distance_matrix(cands);
    let values: Vec<f64> = pairs(cands.len()).map(|(i, j)| m[i][j]).collect();
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean pairwise layout agreement over pairs where both sides carry boxes;
/// 1 when no such pair exists.
pub fn mean_layout_agreement(cands: &[PreparedCandidate]) -> f64 {
    let values: Vec<f64> = pairs(cands.len())
        .filter_map(|(i, j)| match (&cands[i].boxes, &cands[j].boxes) {
            (Some(a), Some(b)) => Some(layout_agreement(a, b)),
            _ => None,
        })
        .collect();
    crate::math::mean(&values).unwrap_or(1.0)
}

/// Divergence contributions `(weighted sum, weight)` of one pair.
fn pair_divergence(a: &PreparedCandidate, b: &PreparedCandidate, structure_only: bool) -> (f64, f64) {
    let mut sum = 0.0;
    let mut weight = 0.0;
    let nt = a.tables.len().max(b.tables.len());
    if nt > 0 {
        let component = if a.tables.len() != b.tables.len() {
            1.0
        } else {
            let s: f64 = a
                .tables
                .iter()
                .zip(&b.tables)
                .map(|(x, y)| table_agreement(x, y, structure_only))
                .sum();
            1.0 - s / nt as f64
        };
        sum += nt as f64 * component;
        weight += nt as f64;
    }
    let nf = a.formulas.len().max(b.formulas.len());
    if nf > 0 {
        let component = if a.formulas.len() != b.formulas.len() {
            1.0
        } else {
            let s: f64 = a.formulas.iter().zip(&b.formulas).map(|(x, y)| formula_agreement(x, y)).sum();
            1.0 - s / nf as f64
        };
        sum += nf as f64 * component;
        weight += nf as f64;
    }
    (sum, weight)
}

/// Content-weighted divergence of tables and formulas across all pairs; 0
/// when no candidate has structured content.
pub fn structural_divergence_prepared(
    cands: &[PreparedCandidate],
    structure_only: bool,
) -> Result<f64, ConsensusError> {
    require_pairs(cands.len())?;
    let (mut sum, mut weight) = (0.0, 0.0);
    for (i, j) in pairs(cands.len()) {
        let (s, w) = pair_divergence(&cands[i], &cands[j], structure_only);
        sum += s;
        weight += w;
    }
    Ok(if weight == 0.0 { 0.0 } else { crate::math::clamp01(sum / weight) })
}

pub fn divergence(cands: &[PreparedCandidate], structure_only: bool) -> Result<DivergenceBreakdown, ConsensusError> {
    Ok(DivergenceBreakdown {
        ed: char_consistency_prepared(cands)?,
        iou: mean_layout_agreement(cands),
        d: structural_divergence_prepared(cands, structure_only)?,
    })
}

fn prepare_all(candidates: &[&str]) -> Vec<PreparedCandidate> {
    let arity = ArityTable::default();
    candidates.iter().map(|c| PreparedCandidate::new(c, None, &arity)).collect()
}

/// Mean pairwise normalized edit distance between stripped candidate texts.
pub fn char_consistency(candidates: &[&str]) -> Result<f64, ConsensusError> {
    char_consistency_prepared(&prepare_all(candidates))
}

pub fn structural_divergence(candidates: &[&str]) -> Result<f64, ConsensusError> {
    structural_divergence_prepared(&prepare_all(candidates), false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T1: &str = "<table><tr><td>a</td><td>b</td></tr><tr><td>c</td><td>d</td></tr></table>";

    #[test]
    fn char_consistency_examples() {
        assert_eq!(char_consistency(&["same", "same"]).unwrap(), 0.0);
        assert!((char_consistency(&["abc", "abd"]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let three = char_consistency(&["abc", "abd", "xyz"]).unwrap();
        assert!((three - (1.0 / 3.0 + 1.0 + 1.0) / 3.0).abs() < 1e-12);
        assert_eq!(char_consistency(&["one"]), Err(ConsensusError::TooFewCandidates));
    }

    #[test]
    fn divergence_examples() {
        assert_eq!(structural_divergence(&[T1, T1, T1]).unwrap(), 0.0);
        assert_eq!(structural_divergence(&["plain", "text"]).unwrap(), 0.0);
        // Five nodes each and one relabel: TEDS = 0.8.
        let a = "<table><tr><td>1</td><td>2</td><td>3</td></tr></table>";
        let b = "<table><tr><td>1</td><td>2</td><td>x</td></tr></table>";
        let d = structural_divergence(&[a, b]).unwrap();
        assert!((d - 0.2).abs() < 1e-12);
        let c = "<table><tr><td>1</td><td>2</td></tr><tr><td>3</td><td>x</td></tr></table>";
        let e = "<table><tr><td>1</td><td>2</td></tr><tr><td>3</td><td>4</td></tr><tr><td>5</td></tr></table>";
        // 7 vs 9 nodes; TED = 1 relabel + 2 inserts = 3 -> TEDS = 2/3.
        let d = structural_divergence(&[c, e]).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn count_mismatch_and_broken_tables() {
        assert_eq!(structural_divergence(&[T1, "no table"]).unwrap(), 1.0);
        let broken = "<table><tr><td>a</tr></table>";
        assert_eq!(structural_divergence(&[broken, broken]).unwrap(), 1.0);
    }

    #[test]
    fn formulas_weighted_by_count() {
        let d = structural_divergence(&["$a$ $b$", "$a$ $b$"]).unwrap();
        assert_eq!(d, 0.0);
        let d = structural_divergence(&["$x+y$", "$x-y$"]).unwrap();
        // glyph F1 2/3, tree 1 - 1/4.
        assert!((d - (1.0 - (0.5 * 2.0 / 3.0 + 0.5 * 0.75))).abs() < 1e-12);
    }

    #[test]
    fn layout_mean_ignores_boxless() {
        let arity = ArityTable::default();
        let bx = |x| BoxedText { bbox: BoundingBox::new(x, 0, x + 10, 10).unwrap(), text: "t".into() };
        let a = PreparedCandidate::new("t", Some(&[bx(0)]), &arity);
        let b = PreparedCandidate::new("t", Some(&[bx(5)]), &arity);
        let c = PreparedCandidate::new("t", None, &arity);
        assert!((mean_layout_agreement(&[a.clone(), b, c.clone()]) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(mean_layout_agreement(&[a, c]), 1.0);
    }

    proptest! {
        #[test]
        fn zero_iff_all_structure_agrees(cells in proptest::collection::vec("[a-c]", 1..4), other in "[a-c]") {
            let row: String = cells.iter().map(|c| alloc::format!("<td>{c}</td>")).collect();
            let t = alloc::format!("<table><tr>{row}</tr></table>");
            prop_assert_eq!(structural_divergence(&[&t, &t]).unwrap(), 0.0);
            let changed = alloc::format!("<table><tr>{row}<td>{other}</td></tr></table>");
            prop_assert!(structural_divergence(&[&t, &changed]).unwrap() > 0.0);
        }
    }
}
