//! Ordered labeled trees and the Zhang–Shasha tree edit distance with unit
//! costs for relabel, insert and delete.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledTree {
    pub label: String,
    pub children: Vec<LabeledTree>,
}

impl LabeledTree {
    pub fn new(label: impl Into<String>, children: Vec<LabeledTree>) -> Self {
        Self {
            label: label.into(),
            children,
        }
    }

    pub fn leaf(label: impl Into<String>) -> Self {
        Self::new(label, Vec::new())
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(LabeledTree::size).sum::<usize>()
    }
}

/// Postorder arrays needed by the dynamic program, computed once per tree.
#[derive(Debug, Clone)]
pub struct PreparedTree<'a> {
    labels: Vec<&'a str>,
    /// Postorder index of each node's leftmost leaf descendant.
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> PreparedTree<'a> {
    pub fn new(tree: &'a LabeledTree) -> Self {
        let mut labels = Vec::new();
        let mut leftmost = Vec::new();
        walk(tree, &mut labels, &mut leftmost);
        let n = labels.len();
        // A keyroot is the highest-numbered node for its leftmost leaf.
        let mut seen = vec![false; n];
        let mut keyroots = Vec::new();
        for k in (0..n).rev() {
            if !seen[leftmost[k]] {
                seen[leftmost[k]] = true;
                keyroots.push(k);
            }
        }
        keyroots.reverse();
        Self {
            labels,
            leftmost,
            keyroots,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn walk<'a>(node: &'a LabeledTree, labels: &mut Vec<&'a str>, leftmost: &mut Vec<usize>) -> usize {
    let mut first_leaf = None;
    for child in &node.children {
        let child_leftmost = walk(child, labels, leftmost);
        first_leaf.get_or_insert(child_leftmost);
    }
    let index = labels.len();
    let lm = first_leaf.unwrap_or(index);
    labels.push(node.label.as_str());
    leftmost.push(lm);
    lm
}

/// Reusable working memory for repeated distance computations.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    tree_dist: Vec<usize>,
    forest_dist: Vec<usize>,
}

pub fn tree_edit_distance(a: &LabeledTree, b: &LabeledTree) -> usize {
    prepared_distance(&PreparedTree::new(a), &PreparedTree::new(b), &mut Scratch::default())
}

pub fn prepared_distance(a: &PreparedTree<'_>, b: &PreparedTree<'_>, scratch: &mut Scratch) -> usize {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return n + m;
    }
    scratch.tree_dist.clear();
    scratch.tree_dist.resize(n * m, 0);
    for &i in &a.keyroots {
        for &j in &b.keyroots {
            forest(a, b, i, j, scratch);
        }
    }
    scratch.tree_dist[(n - 1) * m + (m - 1)]
}

fn forest(a: &PreparedTree<'_>, b: &PreparedTree<'_>, i: usize, j: usize, s: &mut Scratch) {
    let m = b.len();
    let (li, lj) = (a.leftmost[i], b.leftmost[j]);
    let rows = i - li + 2;
    let cols = j - lj + 2;
    s.forest_dist.clear();
    s.forest_dist.resize(rows * cols, 0);
    let fd = &mut s.forest_dist;
    for x in 1..rows {
        fd[x * cols] = fd[(x - 1) * cols] + 1;
    }
    for y in 1..cols {
        fd[y] = fd[y - 1] + 1;
    }
    for x in 1..rows {
        let i1 = li + x - 1;
        for y in 1..cols {
            let j1 = lj + y - 1;
            let delete = fd[(x - 1) * cols + y] + 1;
            let insert = fd[x * cols + y - 1] + 1;
            let value = if a.leftmost[i1] == li && b.leftmost[j1] == lj {
                let relabel = usize::from(a.labels[i1] != b.labels[j1]);
                let v = delete.min(insert).min(fd[(x - 1) * cols + y - 1] + relabel);
                s.tree_dist[i1 * m + j1] = v;
                v
            } else {
                let px = a.leftmost[i1] - li;
                let py = b.leftmost[j1] - lj;
                delete
                    .min(insert)
                    .min(fd[px * cols + py] + s.tree_dist[i1 * m + j1])
            };
            fd[x * cols + y] = value;
        }
    }
}
