use alloc::vec::Vec;

use crate::corpus::BoundingBox;

pub fn bbox_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = a.x2.min(b.x2).saturating_sub(a.x1.max(b.x1)) as u64;
    let iy = a.y2.min(b.y2).saturating_sub(a.y1.max(b.y1)) as u64;
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Greedy one-to-one matching by descending IoU. Returns the mean matched
/// IoU scaled by the matched fraction of the longer list.
pub fn layout_agreement(a: &[BoundingBox], b: &[BoundingBox]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, ba) in a.iter().enumerate() {
        for (j, bb) in b.iter().enumerate() {
            let iou = bbox_iou(ba, bb);
            if iou > 0.0 {
                pairs.push((iou, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = alloc::vec![false; a.len()];
    let mut used_b = alloc::vec![false; b.len()];
    let mut total = 0.0;
    for (iou, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            total += iou;
        }
    }
    // mean × matched/longest simplifies to sum/longest.
    total / longest as f64
}

/// Column index for each box, from clustering x-centres with a gap threshold
/// of half the median box width.
pub fn assign_columns(boxes: &[BoundingBox]) -> Vec<usize> {
    let mut widths: Vec<u64> = boxes.iter().map(BoundingBox::width).collect();
    widths.sort_unstable();
    let median = match widths.len() {
        0 => return Vec::new(),
        n if n % 2 == 1 => widths[n / 2] as f64,
        n => (widths[n / 2 - 1] + widths[n / 2]) as f64 / 2.0,
    };
    let gap = 0.5 * median;
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| boxes[i].center_x().total_cmp(&boxes[j].center_x()).then(i.cmp(&j)));
    let mut columns = alloc::vec![0; boxes.len()];
    let mut column = 0;
    for w in 0..order.len() {
        if w > 0 && boxes[order[w]].center_x() - boxes[order[w - 1]].center_x() > gap {
            column += 1;
        }
        columns[order[w]] = column;
    }
    columns
}

/// Canonical reading order: columns left to right, each top to bottom.
pub fn canonical_order(boxes: &[BoundingBox]) -> Vec<usize> {
    let columns = assign_columns(boxes);
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by_key(|&i| (columns[i], boxes[i].y1, boxes[i].x1, i));
    order
}

/// `1 - inversions / max_inversions` of the emitted order against the
/// canonical one.
pub fn reading_order_score(boxes: &[BoundingBox]) -> f64 {
    let n = boxes.len();
    if n <= 1 {
        return 1.0;
    }
    let mut rank = alloc::vec![0usize; n];
    for (r, &i) in canonical_order(boxes).iter().enumerate() {
        rank[i] = r;
    }
    let mut inversions = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if rank[i] > rank[j] {
                inversions += 1;
            }
        }
    }
    1.0 - inversions as f64 / (n * (n - 1) / 2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn b(x1: u32, y1: u32, x2: u32, y2: u32) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn iou_examples() {
        assert_eq!(bbox_iou(&b(0, 0, 10, 10), &b(0, 0, 10, 10)), 1.0);
        assert_eq!(bbox_iou(&b(0, 0, 10, 10), &b(20, 20, 30, 30)), 0.0);
        assert!((bbox_iou(&b(0, 0, 10, 10), &b(5, 0, 15, 10)) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(bbox_iou(&b(3, 3, 3, 3), &b(3, 3, 3, 3)), 0.0);
    }

    #[test]
    fn agreement_examples() {
        let two = vec![b(0, 0, 10, 10), b(0, 20, 10, 30)];
        let three = vec![b(0, 0, 10, 10), b(0, 20, 10, 30), b(0, 40, 10, 50)];
        assert_eq!(layout_agreement(&two, &two), 1.0);
        assert_eq!(layout_agreement(&two, &[]), 0.0);
        assert_eq!(layout_agreement(&[], &[]), 1.0);
        assert!((layout_agreement(&two, &three) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn order_examples() {
        let col: Vec<_> = (0..4).map(|k| b(0, 20 * k, 100, 20 * k + 10)).collect();
        assert_eq!(reading_order_score(&col), 1.0);
        let reversed: Vec<_> = col.iter().rev().copied().collect();
        assert_eq!(reading_order_score(&reversed), 0.0);
        // Left column a1, a2; right column b1, b2; emitted a1 b1 a2 b2 has
        // exactly one inversion (b1 before a2) out of six.
        let interleaved = vec![b(0, 0, 100, 10), b(200, 0, 300, 10), b(0, 20, 100, 30), b(200, 20, 300, 30)];
        assert!((reading_order_score(&interleaved) - 5.0 / 6.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn adjacent_swap_lowers_score(n in 2usize..10, at in 0usize..9) {
            let at = at % (n - 1);
            let mut boxes: Vec<_> = (0..n as u32).map(|k| b(0, 20 * k, 100, 20 * k + 10)).collect();
            boxes.swap(at, at + 1);
            prop_assert!(reading_order_score(&boxes) < 1.0);
        }

        #[test]
        fn iou_symmetric_bounded(a in (0u32..50, 0u32..50, 0u32..50, 0u32..50), c in (0u32..50, 0u32..50, 0u32..50, 0u32..50)) {
            let x = b(a.0.min(a.1), a.2.min(a.3), a.0.max(a.1), a.2.max(a.3));
            let y = b(c.0.min(c.1), c.2.min(c.3), c.0.max(c.1), c.2.max(c.3));
            let v = bbox_iou(&x, &y);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, bbox_iou(&y, &x));
        }
    }
}
