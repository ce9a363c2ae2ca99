use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::keys;
use crate::config::EngineConfig;
use crate::corpus::{ModalityConfidence, SampleRecord, VerdictState};
use crate::markup::normalize::pipe_table_to_html;
use crate::markup::{
    grid_closure_check, normalize_document, parse_markdown, rows_consistent, strip_document, Block, MarkdownDoc,
};
use crate::metrics::cells::{cell_matching_rate, numerical_consistency};
use crate::metrics::consensus::{
    divergence, formula_agreement, table_agreement, text_distance_matrix, DivergenceBreakdown, FormulaEntry,
    PreparedCandidate,
};
use crate::metrics::teds::{table_tree, tree_similarity};
use crate::metrics::{reading_order_score, LabeledTree};

#[derive(Debug, Clone, PartialEq)]
pub struct Arbitration {
    pub state: VerdictState,
    pub confidence: ModalityConfidence,
    pub evidence: BTreeMap<String, f64>,
    /// Index of the arbitration candidate.
    pub medoid: usize,
}

/// Block-level tree of a page. Text blocks become labelled leaves; tables
/// and display formulas contribute their own subtrees.
pub fn document_tree(cand: &PreparedCandidate) -> LabeledTree {
    let mut formulas = cand.formulas.iter();
    let mut children = Vec::with_capacity(cand.doc.blocks.len());
    for block in &cand.doc.blocks {
        let text = || {
            let mut one = MarkdownDoc::default();
            one.blocks.push(block.clone());
            strip_document(&one)
        };
        // Inline formulas are part of the block text but still consume
        // their entry in the formula list.
        let inline_math = match block {
            Block::Heading { inlines, .. } | Block::Paragraph(inlines) | Block::ListItem { inlines, .. } => {
                inlines.iter().filter(|i| matches!(i, crate::markup::Inline::Math { .. })).count()
            }
            _ => 0,
        };
        for _ in 0..inline_math {
            formulas.next();
        }
        let node = match block {
            Block::Heading { level, .. } => LabeledTree::leaf(format!("h{level}:{}", text())),
            Block::Paragraph(_) => LabeledTree::leaf(format!("p:{}", text())),
            Block::ListItem { depth, .. } => LabeledTree::leaf(format!("li{depth}:{}", text())),
            Block::Code { body, .. } => LabeledTree::leaf(format!("code:{body}")),
            Block::DisplayFormula { body, .. } => match formulas.next().and_then(|f| f.expr.as_ref()) {
                Some(expr) => expr.to_tree(),
                None => LabeledTree::leaf(format!("formula:{body}")),
            },
            Block::Table { raw, grid } => match grid {
                Ok(grid) => table_tree(grid, false),
                Err(_) => LabeledTree::leaf(format!("table:{raw}")),
            },
            Block::PipeTable { rows } => match pipe_table_to_html(rows).1 {
                Ok(grid) => table_tree(&grid, false),
                Err(_) => LabeledTree::leaf("table:"),
            },
        };
        children.push(node);
    }
    LabeledTree::new("doc", children)
}

/// Parse, serialize canonically and parse again: the canonical text must be
/// a fixed point, visible text must survive, and every table and formula
/// must come back well-formed.
pub fn round_trip_exact(cand: &PreparedCandidate, arity: &crate::markup::ArityTable) -> bool {
    let canonical = normalize_document(&cand.doc).normalized_text;
    let reread = parse_markdown(&canonical);
    if normalize_document(&reread).normalized_text != canonical {
        return false;
    }
    if strip_document(&reread) != cand.plain {
        return false;
    }
    let tables_ok = reread.blocks.iter().all(|b| match b {
        Block::Table { grid, .. } => grid.is_ok(),
        Block::PipeTable { .. } => false,
        _ => true,
    });
    tables_ok
        && reread
            .formulas()
            .iter()
            .all(|f| crate::markup::latex::validate_latex_with(f, arity).ok)
}

fn fraction<T>(items: &[T], ok: impl Fn(&T) -> bool) -> f64 {
    if items.is_empty() {
        1.0
    } else {
        items.iter().filter(|i| ok(i)).count() as f64 / items.len() as f64
    }
}

fn mean_or_one(values: &[f64]) -> f64 {
    crate::math::mean(values).unwrap_or(1.0)
}

/// Mean over position-aligned pairs with unmatched items scoring zero.
/// `None` when neither side has items.
fn aligned_mean<T>(a: &[T], b: &[T], score: impl Fn(&T, &T) -> f64) -> Option<f64> {
    let n = a.len().max(b.len());
    if n == 0 {
        return None;
    }
    let total: f64 = a.iter().zip(b).map(|(x, y)| score(x, y)).sum();
    Some(total / n as f64)
}

/// Candidate with the highest mean text similarity to the others; the
/// lowest index wins ties.
pub(crate) fn medoid_index(cands: &[PreparedCandidate]) -> usize {
    let n = cands.len();
    if n < 2 {
        return 0;
    }
    let m = text_distance_matrix(cands);
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, row) in m.iter().enumerate() {
        let score = row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, d)| 1.0 - d).sum::<f64>();
        if score > best_score {
            best_score = score;
            best = i;
        }
    }
    best
}

pub fn l3_arbitrate(sample: &SampleRecord, config: &EngineConfig) -> Arbitration {
    let cands = super::prepare(sample, &super::arity_table(config));
    l3_prepared(sample, &cands, None, config)
}

pub(crate) fn l3_prepared(
    _sample: &SampleRecord,
    cands: &[PreparedCandidate],
    breakdown: Option<DivergenceBreakdown>,
    config: &EngineConfig,
) -> Arbitration {
    let arity = super::arity_table(config);
    let n = cands.len();
    let breakdown = breakdown.or_else(|| divergence(cands, config.teds_structure_only).ok());
    let (ed, iou) = breakdown.map_or((0.0, 1.0), |b| (b.ed, b.iou));

    let medoid = medoid_index(cands);
    let med = &cands[medoid];
    let others: Vec<&PreparedCandidate> = (0..n).filter(|&j| j != medoid).map(|j| &cands[j]).collect();

    let mut ev = BTreeMap::new();
    ev.insert(keys::MEDOID.into(), medoid as f64);
    ev.insert(keys::AST_VALIDITY.into(), fraction(&med.formulas, FormulaEntry::valid));
    ev.insert(
        keys::GRID_CLOSURE.into(),
        fraction(&med.tables, |t| t.grid.as_ref().is_some_and(grid_closure_check)),
    );
    ev.insert(
        keys::ROW_WIDTH_CONSISTENCY.into(),
        fraction(&med.tables, |t| t.grid.as_ref().is_some_and(rows_consistent)),
    );
    let med_tree = document_tree(med);
    let trees: Vec<f64> = others.iter().map(|o| tree_similarity(&med_tree, &document_tree(o))).collect();
    ev.insert(keys::TREE_SIMILARITY.into(), mean_or_one(&trees));
    let cells: Vec<f64> = others
        .iter()
        .filter_map(|o| {
            aligned_mean(&med.tables, &o.tables, |a, b| match (&a.grid, &b.grid) {
                (Some(x), Some(y)) => cell_matching_rate(x, y),
                _ => 0.0,
            })
        })
        .collect();
    ev.insert(keys::CELL_MATCHING.into(), mean_or_one(&cells));
    let numbers: Vec<f64> = others.iter().map(|o| numerical_consistency(&med.plain, &o.plain)).collect();
    ev.insert(keys::NUMERICAL_CONSISTENCY.into(), mean_or_one(&numbers));
    let order = med.boxes.as_deref().map_or(1.0, reading_order_score);
    ev.insert(keys::READING_ORDER.into(), order);
    let exact = round_trip_exact(med, &arity);
    ev.insert(keys::ROUND_TRIP.into(), if exact { 1.0 } else { 0.0 });

    let mut formula_scores = Vec::new();
    let mut table_scores = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&cands[i], &cands[j]);
            formula_scores.extend(aligned_mean(&a.formulas, &b.formulas, formula_agreement));
            table_scores.extend(aligned_mean(&a.tables, &b.tables, |x, y| {
                table_agreement(x, y, config.teds_structure_only)
            }));
        }
    }
    if n == 1 {
        // Without a second source, structure confidence rests on validity.
        if !med.formulas.is_empty() {
            formula_scores.push(ev[keys::AST_VALIDITY]);
        }
        if !med.tables.is_empty() {
            table_scores.push(ev[keys::GRID_CLOSURE]);
        }
    }
    let confidence = ModalityConfidence {
        c_text: 1.0 - ed,
        c_formula: mean_or_one(&formula_scores),
        c_table: mean_or_one(&table_scores),
        c_layout: iou * order,
    };

    let floor_min = keys::L3_FLOOR_KEYS.iter().map(|k| ev[*k]).fold(f64::INFINITY, f64::min);
    let broken = ev[keys::AST_VALIDITY] < 1.0 || ev[keys::GRID_CLOSURE] < 1.0;
    let floors = &config.arbitration;
    let state = if floor_min >= floors.pass_floor && exact {
        VerdictState::Pass
    } else if broken && confidence.min() < floors.reject_floor {
        VerdictState::Reject
    } else {
        VerdictState::Pending
    };
    Arbitration {
        state,
        confidence,
        evidence: ev,
        medoid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CandidateAnnotation;

    fn sample(cands: &[&str]) -> SampleRecord {
        SampleRecord::new(
            "s",
            cands.iter().enumerate().map(|(i, m)| CandidateAnnotation::new(format!("src{i}"), *m)).collect(),
        )
    }

    #[test]
    fn whitespace_only_differences_pass() {
        let cfg = EngineConfig::default();
        let a = l3_arbitrate(&sample(&["Total  is 12\n\n$x+1$", "Total is 12\n\n$x+1$ "]), &cfg);
        assert_eq!(a.state, VerdictState::Pass, "{:?}", a.evidence);
        assert_eq!(a.evidence[keys::ROUND_TRIP], 1.0);
    }

    #[test]
    fn broken_grid_with_low_confidence_rejects() {
        let cfg = EngineConfig::default();
        let a = l3_arbitrate(
            &sample(&[
                "<table><tr><td>1</td><td>2</td></tr><tr><td>3</td></tr></table>",
                "<table><tr><td>9</td></tr></table><table><tr><td>8</td></tr></table>",
            ]),
            &cfg,
        );
        assert_eq!(a.evidence[keys::GRID_CLOSURE], 0.0);
        assert!(a.confidence.c_table < 0.3);
        assert_eq!(a.state, VerdictState::Reject);
    }

    #[test]
    fn mixed_evidence_is_pending() {
        let cfg = EngineConfig::default();
        let a = l3_arbitrate(&sample(&["Total 12 of $x^2$", "Total 13 of $x^3$", "Total 12 of $x^2$"]), &cfg);
        assert_eq!(a.state, VerdictState::Pending);
        assert_eq!(a.medoid, 0);
        assert!(a.confidence.c_formula < 1.0);
    }

    #[test]
    fn medoid_prefers_central_candidate() {
        let cfg = EngineConfig::default();
        let a = l3_arbitrate(&sample(&["zzzz", "abcd", "abce"]), &cfg);
        assert_eq!(a.medoid, 1);
    }

    #[test]
    fn round_trip_flags_broken_tables() {
        let arity = crate::markup::ArityTable::default();
        let broken = PreparedCandidate::new("<table><tr><td>a</tr></table>", None, &arity);
        assert!(!round_trip_exact(&broken, &arity));
        let fine = PreparedCandidate::new("| a |\n|---|\n| b |", None, &arity);
        assert!(round_trip_exact(&fine, &arity));
    }
}
