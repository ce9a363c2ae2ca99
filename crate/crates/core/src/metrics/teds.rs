use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::tree::{tree_edit_distance, LabeledTree};
use crate::markup::TableGrid;

/// `table -> tr -> td` tree. A cell label carries its tag, any spans above
/// one, and (unless `structure_only`) its normalized text, so a span or text
/// change costs one relabel.
pub fn table_tree(grid: &TableGrid, structure_only: bool) -> LabeledTree {
    let rows = grid
        .rows
        .iter()
        .map(|row| {
            let cells = row
                .cells
                .iter()
                .map(|cell| {
                    let mut label = String::from(if cell.header { "th" } else { "td" });
                    if cell.colspan > 1 {
                        label.push_str(&format!(" colspan={}", cell.colspan));
                    }
                    if cell.rowspan > 1 {
                        label.push_str(&format!(" rowspan={}", cell.rowspan));
                    }
                    if !structure_only {
                        label.push(':');
                        label.push_str(&cell.text());
                    }
                    LabeledTree::leaf(label)
                })
                .collect();
            LabeledTree::new("tr", cells)
        })
        .collect::<Vec<_>>();
    LabeledTree::new("table", rows)
}

pub fn teds(a: &TableGrid, b: &TableGrid) -> f64 {
    teds_with(a, b, false)
}

pub fn teds_with(a: &TableGrid, b: &TableGrid, structure_only: bool) -> f64 {
    tree_similarity(&table_tree(a, structure_only), &table_tree(b, structure_only))
}

/// `1 - TED / max(|a|, |b|)`.
pub fn tree_similarity(a: &LabeledTree, b: &LabeledTree) -> f64 {
    let n = a.size().max(b.size());
    if n == 0 {
        return 1.0;
    }
    1.0 - tree_edit_distance(a, b) as f64 / n as f64
}
