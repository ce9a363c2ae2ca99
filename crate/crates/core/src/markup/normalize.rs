//! Rewrites a parsed document into canonical form and records every rule
//! that had to fire: `$$` display math, `$` inline math, canonical HTML
//! tables, no heading-level skips, list depths rising one level at a time.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::markdown::{Block, Inline, MarkdownDoc, MathStyle};
use super::table::{parse_html_table, Section, TableCell, TableGrid, TableRow, WellFormednessError};

pub const DISPLAY_MATH_DELIMITER: &str = "display-math-delimiter";
pub const INLINE_MATH_DELIMITER: &str = "inline-math-delimiter";
pub const TABLE_NOT_HTML: &str = "table-not-html";
pub const TABLE_NONCANONICAL: &str = "table-noncanonical-html";
pub const TABLE_MALFORMED: &str = "table-malformed";
pub const HEADING_SKIP: &str = "heading-skip";
pub const LIST_INDENT_SKIP: &str = "list-indent-skip";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: &'static str,
    /// Index of the offending block.
    pub block: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizationReport {
    pub violations: Vec<Violation>,
    pub normalized: MarkdownDoc,
    pub normalized_text: String,
}

impl NormalizationReport {
    pub fn is_canonical(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, rule: &str) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }
}

pub fn normalize_document(doc: &MarkdownDoc) -> NormalizationReport {
    let mut violations = Vec::new();
    let mut blocks = Vec::with_capacity(doc.blocks.len());
    let mut prev_heading: Option<u8> = None;
    let mut prev_depth: Option<usize> = None;

    for (index, block) in doc.blocks.iter().enumerate() {
        let mut flag = |rule: &'static str, message: String| {
            violations.push(Violation {
                rule,
                block: index,
                message,
            })
        };
        let out = match block {
            Block::Heading { level, inlines } => {
                let mut level = *level;
                if let Some(prev) = prev_heading {
                    if level > prev + 1 {
                        flag(HEADING_SKIP, format!("level {level} follows level {prev}"));
                        level = prev + 1;
                    }
                }
                prev_heading = Some(level);
                Block::Heading {
                    level,
                    inlines: normalize_inlines(inlines, &mut flag),
                }
            }
            Block::Paragraph(inlines) => Block::Paragraph(normalize_inlines(inlines, &mut flag)),
            Block::ListItem {
                depth,
                marker,
                inlines,
            } => {
                let limit = prev_depth.map_or(0, |p| p + 1);
                let depth = if *depth > limit {
                    flag(LIST_INDENT_SKIP, format!("depth {depth} exceeds {limit}"));
                    limit
                } else {
                    *depth
                };
                Block::ListItem {
                    depth,
                    marker: marker.clone(),
                    inlines: normalize_inlines(inlines, &mut flag),
                }
            }
            Block::DisplayFormula { body, style } => {
                if *style != MathStyle::Dollar {
                    flag(DISPLAY_MATH_DELIMITER, "display math must use $$".to_string());
                }
                Block::DisplayFormula {
                    body: body.clone(),
                    style: MathStyle::Dollar,
                }
            }
            Block::Table { raw, grid } => match grid {
                Ok(grid) => {
                    let html = grid.to_html();
                    if html != *raw {
                        flag(TABLE_NONCANONICAL, "table HTML is not in canonical form".to_string());
                    }
                    Block::Table {
                        raw: html,
                        grid: Ok(grid.clone()),
                    }
                }
                Err(e) => {
                    flag(TABLE_MALFORMED, e.to_string());
                    block.clone()
                }
            },
            Block::PipeTable { rows } => {
                flag(TABLE_NOT_HTML, "pipe table must be written as HTML".to_string());
                let (raw, grid) = pipe_table_to_html(rows);
                Block::Table { raw, grid }
            }
            Block::Code { .. } => block.clone(),
        };
        prev_depth = match &out {
            Block::ListItem { depth, .. } => Some(*depth),
            _ => None,
        };
        blocks.push(out);
    }
    let normalized = MarkdownDoc { blocks };
    let normalized_text = normalized.to_markdown();
    NormalizationReport {
        violations,
        normalized,
        normalized_text,
    }
}

fn normalize_inlines(inlines: &[Inline], flag: &mut impl FnMut(&'static str, String)) -> Vec<Inline> {
    let rewrites = inlines.iter().any(|i| matches!(i, Inline::Math { body, style } if rewritable(body, *style)));
    if !rewrites {
        return inlines.to_vec();
    }
    // New `$` delimiters could pair with stray dollars in neighbouring text,
    // so every literal dollar in the span gets escaped.
    inlines
        .iter()
        .map(|inline| match inline {
            Inline::Text(t) => Inline::Text(escape_dollars(t)),
            Inline::Math { body, style } if rewritable(body, *style) => {
                flag(INLINE_MATH_DELIMITER, "inline math must use $".to_string());
                Inline::Math {
                    body: body.clone(),
                    style: MathStyle::Dollar,
                }
            }
            Inline::Math { .. } => inline.clone(),
            Inline::Code(c) => Inline::Code(c.clone()),
        })
        .collect()
}

/// A body holding a `$` cannot be written between `$` delimiters, so its
/// original delimiter is left alone.
fn rewritable(body: &str, style: MathStyle) -> bool {
    style != MathStyle::Dollar && !body.contains('$')
}

fn escape_dollars(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut escaped = false;
    for c in s.chars() {
        if c == '$' && !escaped {
            out.push('\\');
        }
        escaped = c == '\\' && !escaped;
        out.push(c);
    }
    out
}

/// HTML rendering of a pipe table: the first row becomes a `thead` of `th`
/// cells. Angle brackets are escaped only when the raw cells break the parse.
pub fn pipe_table_to_html(rows: &[Vec<String>]) -> (String, Result<TableGrid, WellFormednessError>) {
    let build = |escape: bool| -> TableGrid {
        let rows = rows
            .iter()
            .enumerate()
            .map(|(r, cells)| TableRow {
                section: if r == 0 { Section::Head } else { Section::Body },
                cells: cells
                    .iter()
                    .map(|c| TableCell {
                        content: if escape { escape_angles(c) } else { c.clone() },
                        colspan: 1,
                        rowspan: 1,
                        header: r == 0,
                    })
                    .collect(),
            })
            .collect();
        TableGrid { rows }
    };
    let mut html = build(false).to_html();
    if parse_html_table(&html).is_err() {
        html = build(true).to_html();
    }
    let grid = parse_html_table(&html);
    (html, grid)
}

fn escape_angles(s: &str) -> String {
    s.replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::super::markdown::parse_markdown;
    use super::super::strip::{strip_document, strip_markup};
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn normalize(src: &str) -> NormalizationReport {
        normalize_document(&parse_markdown(src))
    }

    #[test]
    fn heading_skip() {
        let r = normalize("# A\n\n### B");
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].rule, HEADING_SKIP);
        assert_eq!(r.violations[0].block, 1);
        assert_eq!(r.normalized_text, "# A\n\n## B");
    }

    #[test]
    fn canonical_doc_is_untouched() {
        let src = "# A\n\n## B\n\ntext $x$\n\n$$y$$\n\n<table><tr><td>1</td></tr></table>\n\n- a\n  - b";
        let r = normalize(src);
        assert!(r.is_canonical(), "{:?}", r.violations);
        assert_eq!(r.normalized_text, src);
    }

    #[test]
    fn paren_math_rewritten() {
        let r = normalize("\\(x\\)");
        assert_eq!(r.normalized_text, "$x$");
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].rule, INLINE_MATH_DELIMITER);
    }

    #[test]
    fn stray_dollar_is_escaped_when_delimiters_change() {
        let r = normalize("cost $5 and \\(x\\)");
        assert_eq!(r.normalized_text, "cost \\$5 and $x$");
        assert_eq!(strip_markup(&r.normalized_text), strip_markup("cost $5 and \\(x\\)"));
    }

    #[test]
    fn tables() {
        let r = normalize("| a | b |\n|---|---|\n| 1 | 2 |");
        assert_eq!(r.count(TABLE_NOT_HTML), 1);
        assert_eq!(
            r.normalized_text,
            "<table><thead><tr><th>a</th><th>b</th></tr></thead><tbody><tr><td>1</td><td>2</td></tr></tbody></table>"
        );
        let r = normalize("<TABLE>\n  <tr><td>a</td></tr>\n</TABLE>");
        assert_eq!(r.count(TABLE_NONCANONICAL), 1);
        let r = normalize("<table><tr><td>a</tr></table>");
        assert_eq!(r.count(TABLE_MALFORMED), 1);
        assert_eq!(r.normalized_text, "<table><tr><td>a</tr></table>");
    }

    #[test]
    fn list_depths_clamped() {
        let r = normalize("- a\n      - b\n    - c");
        assert_eq!(r.count(LIST_INDENT_SKIP), 1);
        assert_eq!(r.normalized_text, "- a\n  - b\n    - c");
    }

    fn arb_inline() -> impl Strategy<Value = Inline> {
        let body = "[a-z+=^]{1,5}";
        prop_oneof![
            "[a-zA-Z0-9 ,.]{1,10}".prop_map(Inline::Text),
            "[a-z ]{0,4}\\$[0-9]{1,2}".prop_map(Inline::Text),
            (body, 0..4u8).prop_map(|(b, s)| Inline::Math {
                body: b,
                style: [MathStyle::Dollar, MathStyle::DoubleDollar, MathStyle::Paren, MathStyle::Bracket][s as usize],
            }),
            "[a-z]{1,4}".prop_map(Inline::Code),
        ]
    }

    fn arb_inlines() -> impl Strategy<Value = Vec<Inline>> {
        proptest::collection::vec(arb_inline(), 1..5).prop_map(|v| {
            // Reparse so adjacency merging and trimming match the parser.
            let text = super::super::markdown::inlines_to_string(&v);
            super::super::markdown::parse_inlines(text.trim())
        })
    }

    fn arb_block() -> impl Strategy<Value = Block> {
        prop_oneof![
            (1..=6u8, arb_inlines()).prop_map(|(level, inlines)| Block::Heading { level, inlines }),
            arb_inlines().prop_map(Block::Paragraph),
            (0..4usize, arb_inlines()).prop_map(|(depth, inlines)| Block::ListItem {
                depth,
                marker: "-".into(),
                inlines
            }),
            ("[a-z+]{1,6}", any::<bool>()).prop_map(|(body, b)| Block::DisplayFormula {
                body,
                style: if b { MathStyle::Dollar } else { MathStyle::Bracket },
            }),
            proptest::collection::vec(proptest::collection::vec("[a-z0-9]{1,3}", 2), 1..4)
                .prop_map(|rows| Block::PipeTable { rows }),
            proptest::collection::vec(proptest::collection::vec("[a-z0-9 ]{0,3}", 1..3), 0..3).prop_map(|rows| {
                let grid = TableGrid {
                    rows: rows
                        .into_iter()
                        .map(|r| TableRow::new(r.into_iter().map(|c| TableCell::new(c.trim())).collect()))
                        .collect(),
                };
                let raw = grid.to_html().replace("<tr>", "\n<TR>");
                let grid = parse_html_table(&raw);
                Block::Table { raw, grid }
            }),
        ]
    }

    fn arb_doc() -> impl Strategy<Value = MarkdownDoc> {
        proptest::collection::vec(arb_block(), 0..8).prop_map(|blocks| {
            // Normalize to the parser's view of the serialized text.
            parse_markdown(&MarkdownDoc { blocks }.to_markdown())
        })
    }

    proptest! {
        #[test]
        fn idempotent(doc in arb_doc()) {
            let once = normalize_document(&doc);
            let twice = normalize_document(&parse_markdown(&once.normalized_text));
            prop_assert!(twice.is_canonical(), "{:?}\n{}", twice.violations, once.normalized_text);
            prop_assert_eq!(&twice.normalized_text, &once.normalized_text);
        }

        #[test]
        fn visible_content_preserved(doc in arb_doc()) {
            let report = normalize_document(&doc);
            prop_assert_eq!(strip_markup(&report.normalized_text), strip_document(&doc));
        }

        #[test]
        fn canonical_iff_no_violations(doc in arb_doc()) {
            let report = normalize_document(&doc);
            prop_assert_eq!(report.is_canonical(), report.normalized_text == doc.to_markdown());
        }
    }

    #[test]
    fn empty_doc() {
        let r = normalize_document(&MarkdownDoc { blocks: vec![] });
        assert!(r.is_canonical());
        assert_eq!(r.normalized_text, "");
    }
}
