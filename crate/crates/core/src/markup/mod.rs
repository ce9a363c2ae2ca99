//! The annotation grammar: a small line-based Markdown subset with HTML
//! tables and LaTeX math, plus validators and the canonical normalizer.

pub mod latex;
pub mod markdown;
pub mod normalize;
pub mod strip;
pub mod table;

pub use latex::{parse_formula, validate_latex, ArityTable, CompileCheck, FormulaExpr};
pub use markdown::{inlines_text, inlines_to_string, parse_markdown, Block, Inline, MarkdownDoc, MathStyle};
pub use normalize::{normalize_document, NormalizationReport, Violation};
pub use strip::{collapse_whitespace, strip_document, strip_markup};
pub use table::{
    effective_row_widths, grid_closure_check, parse_html_table, rows_consistent, Section, TableCell,
    TableGrid, TableRow, WellFormednessError,
};
