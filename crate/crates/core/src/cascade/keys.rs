//! Evidence keys written into verdicts.

pub const L1_BLANK: &str = "l1_blank";
pub const L1_GIBBERISH: &str = "l1_gibberish";
/// 1 when the reference passed the structural checks, 0 otherwise. Absent
/// for unlabeled samples.
pub const L1_STRUCTURAL_PASS: &str = "l1_structural_pass";
pub const REFERENCE_STRIPPED: &str = "reference_stripped";

pub const CANDIDATES: &str = "candidates";
pub const ED: &str = "ed";
pub const IOU: &str = "iou";
pub const D: &str = "d";
pub const CONSENSUS: &str = "consensus";
/// Total normalization violations across candidates.
pub const FORMAT_VIOLATIONS: &str = "format_violations";
pub const READING_ORDER_MIN: &str = "reading_order_min";
pub const HEADING_VALIDITY: &str = "heading_validity";
pub const LIST_VALIDITY: &str = "list_validity";
/// Prefix for a source's mean text distance to the other sources.
pub const DISSENT_PREFIX: &str = "dissent.";

pub const AST_VALIDITY: &str = "ast_validity";
pub const GRID_CLOSURE: &str = "grid_closure";
pub const ROW_WIDTH_CONSISTENCY: &str = "row_width_consistency";
pub const TREE_SIMILARITY: &str = "tree_similarity";
pub const CELL_MATCHING: &str = "cell_matching";
pub const NUMERICAL_CONSISTENCY: &str = "numerical_consistency";
pub const READING_ORDER: &str = "reading_order";
pub const ROUND_TRIP: &str = "round_trip";
pub const MEDOID: &str = "medoid";

/// The L3 evidence that must clear the pass floor.
pub const L3_FLOOR_KEYS: [&str; 7] = [
    AST_VALIDITY,
    GRID_CLOSURE,
    ROW_WIDTH_CONSISTENCY,
    TREE_SIMILARITY,
    CELL_MATCHING,
    NUMERICAL_CONSISTENCY,
    READING_ORDER,
];
