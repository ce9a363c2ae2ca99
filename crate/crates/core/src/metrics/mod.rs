//! Pairwise and group similarity measures.

pub mod cells;
pub mod consensus;
pub mod edit;
pub mod formula;
pub mod layout;
pub mod teds;
pub mod tree;

pub use cells::{cell_matching_rate, numerical_consistency};
pub use consensus::{
    char_consistency, structural_divergence, ConsensusError, DivergenceBreakdown, PreparedCandidate,
};
pub use edit::{levenshtein, normalized_distance, normalized_similarity};
pub use formula::{ast_similarity, cdm_surrogate};
pub use layout::{bbox_iou, layout_agreement, reading_order_score};
pub use teds::{table_tree, teds, teds_with};
pub use tree::{tree_edit_distance, LabeledTree};
