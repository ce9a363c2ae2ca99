//! Formula similarity: a token-multiset stand-in for rendered glyph matching
//! and a tree-edit similarity over parsed formula trees.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::teds::tree_similarity;
use crate::markup::latex::{tokenize, FormulaExpr, Token};

/// Commands that render identically to a preferred spelling.
const SYNONYMS: &[(&str, &str)] = &[
    ("\\le", "\\leq"),
    ("\\leqslant", "\\leq"),
    ("\\ge", "\\geq"),
    ("\\geqslant", "\\geq"),
    ("\\ne", "\\neq"),
    ("\\to", "\\rightarrow"),
    ("\\gets", "\\leftarrow"),
    ("\\dfrac", "\\frac"),
    ("\\tfrac", "\\frac"),
    ("\\lbrace", "\\{"),
    ("\\rbrace", "\\}"),
    ("\\lbrack", "["),
    ("\\rbrack", "]"),
    ("\\vert", "|"),
    ("\\lvert", "|"),
    ("\\rvert", "|"),
    ("\\Vert", "\\|"),
    ("\\land", "\\wedge"),
    ("\\lor", "\\vee"),
    ("\\lnot", "\\neg"),
    ("\\iff", "\\Leftrightarrow"),
    ("\\implies", "\\Rightarrow"),
    ("\\bf", "\\mathbf"),
    ("\\rm", "\\mathrm"),
    ("\\it", "\\mathit"),
    ("\\varepsilon", "\\epsilon"),
    ("\\hbox", "\\text"),
    ("\\mbox", "\\text"),
];

/// Tokens that do not produce glyphs.
const INVISIBLE: &[&str] = &[
    "\\left", "\\right", "\\middle", "\\displaystyle", "\\textstyle", "\\scriptstyle",
    "\\scriptscriptstyle", "\\,", "\\;", "\\:", "\\!", "\\ ", "\\quad", "\\qquad", "\\limits",
    "\\nolimits", "\\big", "\\Big", "\\bigg", "\\Bigg",
];

/// Normalized glyph-bearing tokens of a formula.
pub fn glyph_tokens(formula: &str) -> Vec<String> {
    tokenize(formula)
        .into_iter()
        .filter_map(|t| match t {
            Token::OpenBrace | Token::CloseBrace => None,
            Token::Command(c) => {
                if INVISIBLE.contains(&c.as_str()) {
                    None
                } else {
                    let canonical = SYNONYMS.iter().find(|(from, _)| *from == c).map(|(_, to)| *to);
                    Some(canonical.map_or(c, String::from))
                }
            }
            Token::Symbol(ch) => Some(String::from(ch)),
        })
        .collect()
}

/// F1 of two token multisets; two empty multisets agree fully.
pub fn multiset_f1<T: Ord + Clone>(a: &[T], b: &[T]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let mut counts: BTreeMap<&T, (usize, usize)> = BTreeMap::new();
    for t in a {
        counts.entry(t).or_default().0 += 1;
    }
    for t in b {
        counts.entry(t).or_default().1 += 1;
    }
    let common: usize = counts.values().map(|(x, y)| (*x).min(*y)).sum();
    2.0 * common as f64 / (a.len() + b.len()) as f64
}

pub fn cdm_surrogate(a: &str, b: &str) -> f64 {
    multiset_f1(&glyph_tokens(a), &glyph_tokens(b))
}

/// Tree-edit similarity of two parsed formulas.
pub fn ast_similarity(a: &FormulaExpr, b: &FormulaExpr) -> f64 {
    tree_similarity(&a.to_tree(), &b.to_tree())
}

/// [`ast_similarity`] over optional parses; a failed side scores zero.
pub fn ast_similarity_opt(a: Option<&FormulaExpr>, b: Option<&FormulaExpr>) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => ast_similarity(a, b),
        _ => 0.0,
    }
}
