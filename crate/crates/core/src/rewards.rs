//! Rule-based rewards for one prediction against a target annotation, and
//! the gate that conditions structure rewards on text accuracy.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::markup::latex::{validate_latex_with, ArityTable};
use crate::markup::{
    effective_row_widths, parse_markdown, strip_document, Block, MarkdownDoc, TableGrid,
    WellFormednessError,
};
use crate::math::exp;
use crate::metrics::formula::cdm_surrogate;
use crate::metrics::teds::teds_with;
use crate::metrics::normalized_similarity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConstants {
    /// Weight of the compile indicator in the formula reward.
    pub alpha: f64,
    /// Weight of the shape term in the table reward.
    pub beta: f64,
    /// Decay per row of row-count mismatch.
    pub gamma: f64,
    /// Text reward needed before structure rewards count.
    pub tau_text: f64,
    pub epsilon: f64,
}

impl Default for RewardConstants {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 0.4,
            gamma: 0.1,
            tau_text: 0.7,
            epsilon: 1e-6,
        }
    }
}

/// Paired delimiters checked for closure. Symmetric ones are counted by
/// parity, tags by literal open and close occurrences.
pub const SYMMETRIC_DELIMITERS: [&str; 4] = ["**", "__", "$$", "`"];
pub const CLOSURE_TAGS: [&str; 6] = ["table", "thead", "tbody", "tr", "td", "th"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardVector {
    pub text: f64,
    pub formula: f64,
    pub table: f64,
    #[serde(rename = "struct")]
    pub structure: f64,
    #[serde(default)]
    pub gated: bool,
}

impl RewardVector {
    pub fn new(text: f64, formula: f64, table: f64, structure: f64) -> Self {
        Self {
            text,
            formula,
            table,
            structure,
            gated: false,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.text, self.formula, self.table, self.structure]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

pub fn r_text(prediction: &str, target: &str) -> f64 {
    normalized_similarity(
        &strip_document(&parse_markdown(prediction)),
        &strip_document(&parse_markdown(target)),
    )
}

pub fn r_formula(prediction: &str, target: &str, constants: &RewardConstants) -> f64 {
    r_formula_with(prediction, target, constants, &ArityTable::default())
}

/// Mean over target formulas of `alpha * compiles + (1 - alpha) * cdm`,
/// pairing the k-th predicted formula with the k-th target formula.
/// Missing predictions score zero. A prediction with formulas against a
/// formula-free target scores zero.
pub fn r_formula_with(prediction: &str, target: &str, constants: &RewardConstants, arity: &ArityTable) -> f64 {
    let pred_doc = parse_markdown(prediction);
    let target_doc = parse_markdown(target);
    formula_reward_docs(&pred_doc, &target_doc, constants.alpha, arity)
}

fn formula_reward_docs(pred: &MarkdownDoc, target: &MarkdownDoc, alpha: f64, arity: &ArityTable) -> f64 {
    let predicted = pred.formulas();
    let expected = target.formulas();
    if expected.is_empty() {
        return if predicted.is_empty() { 1.0 } else { 0.0 };
    }
    let total: f64 = expected
        .iter()
        .enumerate()
        .map(|(k, want)| match predicted.get(k) {
            Some(got) => {
                let compiles = if validate_latex_with(got, arity).ok { 1.0 } else { 0.0 };
                alpha * compiles + (1.0 - alpha) * cdm_surrogate(got, want)
            }
            None => 0.0,
        })
        .sum();
    total / expected.len() as f64
}

/// Product of strict well-formedness, uniform effective row widths and the
/// row-count decay `exp(-gamma * |rows - target rows|)`.
pub fn s_shape(prediction: Result<&TableGrid, &WellFormednessError>, target: &TableGrid, gamma: f64) -> f64 {
    let Ok(grid) = prediction else {
        return 0.0;
    };
    let widths = effective_row_widths(grid);
    if widths.windows(2).any(|w| w[0] != w[1]) {
        return 0.0;
    }
    let delta = grid.row_count().abs_diff(target.row_count());
    exp(-gamma * delta as f64)
}

fn html_tables(doc: &MarkdownDoc) -> Vec<&Result<TableGrid, WellFormednessError>> {
    doc.blocks
        .iter()
        .filter_map(|b| match b {
            Block::Table { grid, .. } => Some(grid),
            _ => None,
        })
        .collect()
}

pub fn r_table(prediction: &str, target: &str, constants: &RewardConstants) -> f64 {
    r_table_with(prediction, target, constants, false)
}

/// `beta * shape + (1 - beta) * TEDS`, averaged over position-aligned HTML
/// tables. Unpaired tables on either side score zero; no tables on either
/// side scores one.
pub fn r_table_with(prediction: &str, target: &str, constants: &RewardConstants, structure_only: bool) -> f64 {
    table_reward_docs(&parse_markdown(prediction), &parse_markdown(target), constants, structure_only)
}

fn table_reward_docs(pred: &MarkdownDoc, target: &MarkdownDoc, constants: &RewardConstants, structure_only: bool) -> f64 {
    let predicted = html_tables(pred);
    let expected = html_tables(target);
    let n = predicted.len().max(expected.len());
    if n == 0 {
        return 1.0;
    }
    let beta = constants.beta;
    let total: f64 = predicted
        .iter()
        .zip(&expected)
        .map(|(p, t)| {
            let Ok(t) = t else { return 0.0 };
            let shape = s_shape(p.as_ref(), t, constants.gamma);
            let similarity = p.as_ref().map_or(0.0, |p| teds_with(p, t, structure_only));
            beta * shape + (1.0 - beta) * similarity
        })
        .sum();
    total / n as f64
}

/// Drops lines inside fenced code blocks.
fn unfenced_text(text: &str) -> alloc::string::String {
    let mut out = alloc::string::String::with_capacity(text.len());
    let mut fence: Option<(char, usize)> = None;
    for line in text.split('\n') {
        let t = line.trim_start();
        let run = |ch: char| t.chars().take_while(|&c| c == ch).count();
        match fence {
            Some((ch, n)) => {
                if run(ch) >= n && t.trim_start_matches(ch).trim().is_empty() {
                    fence = None;
                }
            }
            None => {
                let opener = ['`', '~'].into_iter().find(|&ch| run(ch) >= 3);
                if let Some(ch) = opener {
                    fence = Some((ch, run(ch)));
                } else {
                    out.push_str(line);
                    out.push('\n');
                }
            }
        }
    }
    out
}

fn count_occurrences(haystack: &str, needle: &str) -> usize {
    haystack.matches(needle).count()
}

/// Opening and closing tag counts, case-insensitive; `<tr>` does not match
/// `<track>`.
fn tag_counts(lower: &str, tag: &str) -> (usize, usize) {
    let boundary = |rest: &str| rest.starts_with(['>', ' ', '\t', '\n', '/']);
    let open = lower
        .match_indices(&alloc::format!("<{tag}"))
        .filter(|(i, m)| boundary(&lower[i + m.len()..]))
        .count();
    let close = lower
        .match_indices(&alloc::format!("</{tag}"))
        .filter(|(i, m)| lower[i + m.len()..].trim_start().starts_with('>'))
        .count();
    (open, close)
}

/// Closure penalty per delimiter, in `[0, 1]`, followed by the hierarchy
/// gate over headings and list indentation.
pub fn r_struct(prediction: &str, constants: &RewardConstants) -> f64 {
    let body = unfenced_text(prediction);
    let eps = constants.epsilon;
    let imbalance = |open: usize, close: usize| -> f64 {
        let (o, c) = (open as f64, close as f64);
        (o - c).abs() / (o + c + eps)
    };
    let mut penalty = 0.0;
    let mut without_pairs = body.clone();
    for delim in SYMMETRIC_DELIMITERS {
        let n = count_occurrences(&without_pairs, delim);
        // Remove counted occurrences so `$$` is not seen again inside `$$$$`-like runs.
        if delim.len() > 1 {
            without_pairs = without_pairs.replace(delim, " ");
        }
        penalty += imbalance(n.div_ceil(2), n / 2);
    }
    let lower = body.to_ascii_lowercase();
    for tag in CLOSURE_TAGS {
        let (open, close) = tag_counts(&lower, tag);
        penalty += imbalance(open, close);
    }
    let terms = (SYMMETRIC_DELIMITERS.len() + CLOSURE_TAGS.len()) as f64;
    let closure = 1.0 - penalty / terms;
    let doc = parse_markdown(prediction);
    if doc.heading_hierarchy_valid() && doc.list_indentation_valid() {
        closure
    } else {
        0.0
    }
}

/// Zeroes the structure rewards when the text reward is below the threshold.
pub fn gate(rv: RewardVector, tau_text: f64) -> RewardVector {
    if rv.text < tau_text {
        RewardVector {
            text: rv.text,
            formula: 0.0,
            table: 0.0,
            structure: 0.0,
            gated: true,
        }
    } else {
        rv
    }
}

/// All four rewards, gated.
pub fn reward_vector(prediction: &str, target: &str, constants: &RewardConstants) -> RewardVector {
    reward_vector_with(prediction, target, constants, &ArityTable::default(), false)
}

pub fn reward_vector_with(
    prediction: &str,
    target: &str,
    constants: &RewardConstants,
    arity: &ArityTable,
    structure_only: bool,
) -> RewardVector {
    let pred = parse_markdown(prediction);
    let tgt = parse_markdown(target);
    let rv = RewardVector::new(
        normalized_similarity(&strip_document(&pred), &strip_document(&tgt)),
        formula_reward_docs(&pred, &tgt, constants.alpha, arity),
        table_reward_docs(&pred, &tgt, constants, structure_only),
        r_struct(prediction, constants),
    );
    gate(rv, constants.tau_text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markup::parse_html_table;
    use alloc::format;
    use alloc::string::String;
    use proptest::prelude::*;

    fn k() -> RewardConstants {
        RewardConstants::default()
    }

    #[test]
    fn text_examples() {
        assert_eq!(r_text("same words", "same words"), 1.0);
        assert!((r_text("**kitten**", "sitting") - 4.0 / 7.0).abs() < 1e-12);
        assert_eq!(r_text("", ""), 1.0);
    }

    #[test]
    fn formula_examples() {
        assert_eq!(r_formula("no math", "none here", &k()), 1.0);
        // {a, b} vs {a, c}: glyph F1 = 0.5.
        assert!((r_formula("$ac$", "$ab$", &k()) - 0.65).abs() < 1e-12);
        assert_eq!(r_formula("$\\frac{a}{b}$", "$\\frac{a}{b}$", &k()), 1.0);
        assert_eq!(r_formula("text", "$x$", &k()), 0.0);
        assert_eq!(r_formula("$x$", "text", &k()), 0.0);
        // Broken but glyph-identical: only the compile term is lost.
        assert!((r_formula("$\\frac{a}$", "$\\frac{a}$", &k()) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn shape_examples() {
        let two = parse_html_table("<table><tr><td>a</td></tr><tr><td>b</td></tr></table>").unwrap();
        let five = parse_html_table(
            "<table><tr><td>a</td></tr><tr><td>b</td></tr><tr><td>c</td></tr><tr><td>d</td></tr><tr><td>e</td></tr></table>",
        )
        .unwrap();
        assert_eq!(s_shape(Ok(&two), &two, 0.1), 1.0);
        let err = parse_html_table("<table>").unwrap_err();
        assert_eq!(s_shape(Err(&err), &two, 0.1), 0.0);
        assert!((s_shape(Ok(&five), &two, 0.1) - libm::exp(-0.3)).abs() < 1e-12);
        let ragged = parse_html_table("<table><tr><td>a</td><td>b</td></tr><tr><td>c</td></tr></table>").unwrap();
        assert_eq!(s_shape(Ok(&ragged), &ragged, 0.1), 0.0);
    }

    #[test]
    fn table_examples() {
        let t = "<table><tr><td>1</td></tr></table>";
        assert_eq!(r_table("plain", "text", &k()), 1.0);
        assert_eq!(r_table("plain", t, &k()), 0.0);
        assert_eq!(r_table(t, t, &k()), 1.0);
        assert_eq!(r_table("| a |\n|---|\n| 1 |", t, &k()), 0.0);
        assert_eq!(r_table(t, "plain", &k()), 0.0);
    }

    #[test]
    fn struct_examples() {
        assert_eq!(r_struct("# A\n\n**b** and <table><tr><td>x</td></tr></table>", &k()), 1.0);
        assert_eq!(r_struct("# A\n\n### B", &k()), 0.0);
        let three = r_struct("**a** **b", &k());
        assert!((three - (1.0 - 0.1 * (1.0 / (3.0 + 1e-6)))).abs() < 1e-12);
        assert!((three - 0.9667).abs() < 1e-4);
        assert_eq!(r_struct("```\n**\n```\nok", &k()), 1.0);
        assert_eq!(r_struct("- a\n    - b", &k()), 0.0);
        assert!(r_struct("<table><tr><td>a</tr></table>", &k()) < 1.0);
    }

    #[test]
    fn gate_examples() {
        let rv = RewardVector::new(0.65, 1.0, 1.0, 1.0);
        assert_eq!(gate(rv, 0.7), RewardVector { text: 0.65, formula: 0.0, table: 0.0, structure: 0.0, gated: true });
        let rv = RewardVector::new(0.7, 0.5, 0.5, 0.5);
        assert_eq!(gate(rv, 0.7), rv);
        let rv = RewardVector::new(1.0, 0.2, 0.3, 0.4);
        assert_eq!(gate(rv, 0.7), rv);
    }

    #[test]
    fn json_uses_struct_key() {
        let json = serde_json::to_string(&RewardVector::new(1.0, 1.0, 1.0, 0.5)).unwrap();
        assert_eq!(json, r#"{"text":1.0,"formula":1.0,"table":1.0,"struct":0.5,"gated":false}"#);
    }

    fn arb_table() -> impl Strategy<Value = String> {
        (1usize..4, 1usize..4, "[a-z0-9]{1,3}").prop_map(|(r, c, t)| {
            let row: String = (0..c).map(|j| format!("<td>{t}{j}</td>")).collect();
            let rows: String = (0..r).map(|_| format!("<tr>{row}</tr>")).collect();
            format!("<table>{rows}</table>")
        })
    }

    proptest! {
        #[test]
        fn rewards_bounded(a in "[#*_$`<>/a-z \n|-]{0,50}", b in "[#*_$`<>/a-z \n|-]{0,50}") {
            let rv = reward_vector(&a, &b, &k());
            for v in rv.as_array() {
                prop_assert!((0.0..=1.0).contains(&v), "{:?}", rv);
            }
        }

        #[test]
        fn self_similarity(t in arb_table(), s in "[a-z ]{0,20}") {
            prop_assert_eq!(r_text(&s, &s), 1.0);
            prop_assert_eq!(r_table(&t, &t, &k()), 1.0);
        }

        #[test]
        fn gate_is_monotone(v in proptest::array::uniform4(0.0f64..=1.0), tau in 0.0f64..=1.0) {
            let rv = RewardVector::from_array(v);
            let g = gate(rv, tau);
            prop_assert_eq!(g.text, rv.text);
            for (a, b) in g.as_array().iter().zip(rv.as_array()) {
                prop_assert!(*a <= b);
            }
        }

        #[test]
        fn shape_decays_with_row_gap(rows in 1usize..8, extra in 0usize..6) {
            let make = |n: usize| {
                let body: String = (0..n).map(|_| "<tr><td>x</td></tr>").collect();
                parse_html_table(&format!("<table>{body}</table>")).unwrap()
            };
            let target = make(rows);
            let near = s_shape(Ok(&make(rows + extra)), &target, 0.1);
            let far = s_shape(Ok(&make(rows + extra + 1)), &target, 0.1);
            prop_assert!(far <= near);
        }

        #[test]
        fn canonical_docs_have_full_closure(levels in proptest::collection::vec(1u8..=3, 0..5)) {
            // Build a doc with no skips by construction, then normalize.
            let mut prev = 0u8;
            let mut src = String::new();
            for l in levels {
                let l = l.min(prev + 1);
                prev = l;
                src.push_str(&format!("{} h\n\n**b** $x$ `c`\n\n", "#".repeat(l as usize)));
            }
            let normalized = crate::markup::normalize_document(&parse_markdown(&src)).normalized_text;
            prop_assert_eq!(r_struct(&normalized, &k()), 1.0);
        }
    }
}
