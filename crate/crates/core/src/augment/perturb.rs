use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Perturbation, PerturbationKind};
use crate::corpus::{BoundingBox, BoxedText, CandidateAnnotation};
use crate::diagnostics::ErrorTag;
use crate::markup::{
    grid_closure_check, parse_markdown, Block, Inline, MarkdownDoc, MathStyle, TableCell, TableGrid,
};
use crate::metrics::layout::assign_columns;

/// Marker paragraph separating the two halves of a block cut at a page
/// boundary.
pub const PAGE_BREAK: &str = "<!-- page-break -->";

/// Visually confusable glyph substitutions. Multi-character keys are tried
/// first.
pub const CONFUSABLES: &[(&str, &str)] = &[
    ("rn", "m"),
    ("cl", "d"),
    ("vv", "w"),
    ("m", "rn"),
    ("O", "0"),
    ("0", "O"),
    ("l", "1"),
    ("1", "l"),
    ("I", "l"),
    ("S", "5"),
    ("5", "S"),
    ("B", "8"),
    ("8", "B"),
    ("Z", "2"),
    ("2", "Z"),
    // Cyrillic and Greek homoglyphs of Latin letters.
    ("\u{41e}", "O"),
    ("\u{43e}", "o"),
    ("\u{430}", "a"),
    ("\u{435}", "e"),
    ("\u{440}", "p"),
    ("\u{441}", "c"),
    ("\u{39f}", "O"),
    ("\u{3bf}", "o"),
    ("\u{391}", "A"),
    ("\u{392}", "B"),
];

fn confusable_at(s: &str) -> Option<(&'static str, &'static str)> {
    CONFUSABLES.iter().copied().find(|(from, _)| s.starts_with(from))
}

/// Replaces every confusable glyph of `word`, scanning left to right.
pub fn confuse_word(word: &str) -> String {
    let mut out = String::with_capacity(word.len());
    let mut rest = word;
    while let Some(c) = rest.chars().next() {
        match confusable_at(rest) {
            Some((from, to)) => {
                out.push_str(to);
                rest = &rest[from.len()..];
            }
            None => {
                out.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
    }
    out
}

fn has_confusable(word: &str) -> bool {
    word.char_indices().any(|(i, _)| confusable_at(&word[i..]).is_some())
}

#[derive(Debug, Clone, PartialEq)]
pub enum PerturbOutcome {
    Applied {
        candidate: CandidateAnnotation,
        label: ErrorTag,
    },
    NoOp {
        reason: &'static str,
    },
}

/// A candidate broken into blocks and their boxes. `boxes[i]` belongs to
/// the i-th block that is not a page-break marker, when the counts agree.
struct Page {
    doc: MarkdownDoc,
    boxes: Option<Vec<BoxedText>>,
}

fn is_marker(block: &Block) -> bool {
    matches!(block, Block::Paragraph(inl) if matches!(inl.as_slice(), [Inline::Text(t)] if t == PAGE_BREAK))
}

impl Page {
    fn content_indices(&self) -> Vec<usize> {
        (0..self.doc.blocks.len()).filter(|&i| !is_marker(&self.doc.blocks[i])).collect()
    }

    /// Boxes aligned one-to-one with the content blocks.
    fn aligned_boxes(&self) -> Option<&Vec<BoxedText>> {
        self.boxes.as_ref().filter(|b| b.len() == self.content_indices().len())
    }
}

/// Applies `p` to a candidate. Operators that find nothing to act on return
/// `NoOp` and leave the candidate alone.
pub fn apply_perturbation(candidate: &CandidateAnnotation, p: &Perturbation) -> PerturbOutcome {
    let mut page = Page {
        doc: parse_markdown(&candidate.markdown),
        boxes: candidate.boxes.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let intensity = p.intensity.clamp(0.0, 1.0);
    let result = match p.kind {
        PerturbationKind::CellMergeSplit => cell_merge_split(&mut page, intensity, &mut rng),
        PerturbationKind::FormulaAlignDisturb => formula_align(&mut page, intensity, &mut rng),
        PerturbationKind::ListRearrange => list_rearrange(&mut page, &mut rng),
        PerturbationKind::CharConfusion => char_confusion(&mut page, intensity, &mut rng),
        PerturbationKind::ColumnRearrange => column_rearrange(&mut page),
        PerturbationKind::CrossPageCut => cross_page_cut(&mut page, intensity),
        PerturbationKind::MarkupTransposition => markup_transposition(&mut page, intensity, &mut rng),
    };
    if let Err(reason) = result {
        return PerturbOutcome::NoOp { reason };
    }
    let markdown = page.doc.to_markdown();
    if markdown == candidate.markdown && page.boxes == candidate.boxes {
        return PerturbOutcome::NoOp {
            reason: "perturbation left the candidate unchanged",
        };
    }
    PerturbOutcome::Applied {
        candidate: CandidateAnnotation {
            source_id: candidate.source_id.clone(),
            markdown,
            boxes: page.boxes,
        },
        label: p.kind.self_label(),
    }
}

type Step = Result<(), &'static str>;

fn count_for(intensity: f64, n: usize) -> usize {
    ((intensity * n as f64).ceil() as usize).clamp(1, n.max(1))
}

fn table_grids(doc: &mut MarkdownDoc) -> Vec<(&mut String, &mut TableGrid)> {
    doc.blocks
        .iter_mut()
        .filter_map(|b| match b {
            Block::Table { raw, grid: Ok(grid) } => Some((raw, grid)),
            _ => None,
        })
        .collect()
}

#[derive(Clone, Copy)]
enum CellEdit {
    /// Absorb the next cell of the row through colspan.
    Merge(usize, usize),
    /// Give up one column of a spanning cell to a new empty cell.
    Split(usize, usize),
}

fn cell_edits(grid: &TableGrid) -> Vec<CellEdit> {
    let mut edits = Vec::new();
    for (r, row) in grid.rows.iter().enumerate() {
        for i in 0..row.cells.len() {
            let cell = &row.cells[i];
            if cell.colspan > 1 {
                edits.push(CellEdit::Split(r, i));
            }
            if i + 1 < row.cells.len() && cell.rowspan == 1 && row.cells[i + 1].rowspan == 1 {
                edits.push(CellEdit::Merge(r, i));
            }
        }
    }
    edits
}

fn apply_cell_edit(grid: &TableGrid, edit: CellEdit) -> Option<TableGrid> {
    let mut rows = grid.rows.clone();
    match edit {
        CellEdit::Merge(r, i) => {
            let next = rows[r].cells.remove(i + 1);
            let cell = &mut rows[r].cells[i];
            cell.colspan += next.colspan;
            if !next.content.is_empty() {
                if !cell.content.is_empty() {
                    cell.content.push(' ');
                }
                cell.content.push_str(&next.content);
            }
        }
        CellEdit::Split(r, i) => {
            let cell = &mut rows[r].cells[i];
            cell.colspan -= 1;
            let mut fresh = TableCell::new("");
            fresh.header = cell.header;
            rows[r].cells.insert(i + 1, fresh);
        }
    }
    TableGrid::new(rows).ok().filter(grid_closure_check)
}

fn cell_merge_split(page: &mut Page, intensity: f64, rng: &mut ChaCha8Rng) -> Step {
    let mut tables = table_grids(&mut page.doc);
    tables.retain(|(_, g)| !cell_edits(g).is_empty());
    if tables.is_empty() {
        return Err("no table with mergeable or splittable cells");
    }
    let pick = rng.random_range(0..tables.len());
    let (raw, grid) = &mut tables[pick];
    let steps = count_for(intensity, grid.cell_count());
    let mut changed = false;
    for _ in 0..steps {
        let mut edits = cell_edits(grid);
        edits.shuffle(rng);
        let Some(next) = edits.into_iter().find_map(|e| apply_cell_edit(grid, e)) else {
            break;
        };
        **grid = next;
        changed = true;
    }
    if !changed {
        return Err("no cell edit keeps the grid closed");
    }
    **raw = grid.to_html();
    Ok(())
}

/// Byte ranges of `&` and `\\` tokens outside escapes.
fn alignment_tokens(body: &str) -> Vec<(usize, usize)> {
    let bytes = body.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' if bytes.get(i + 1) == Some(&b'\\') => {
                out.push((i, i + 2));
                i += 2;
            }
            b'\\' => i += 2,
            b'&' => {
                out.push((i, i + 1));
                i += 1;
            }
            _ => i += 1,
        }
    }
    out
}

fn formula_align(page: &mut Page, intensity: f64, rng: &mut ChaCha8Rng) -> Step {
    let mut bodies: Vec<&mut String> = page
        .doc
        .blocks
        .iter_mut()
        .filter_map(|b| match b {
            Block::DisplayFormula { body, .. } if !alignment_tokens(body).is_empty() => Some(body),
            _ => None,
        })
        .collect();
    if bodies.is_empty() {
        return Err("no display formula with alignment tokens");
    }
    let pick = rng.random_range(0..bodies.len());
    let body = &mut bodies[pick];
    let mut tokens = alignment_tokens(body);
    let k = count_for(intensity, tokens.len());
    tokens.shuffle(rng);
    let mut chosen: Vec<(usize, usize, bool)> = tokens[..k].iter().map(|&(s, e)| (s, e, rng.random_bool(0.7))).collect();
    // Edit from the back so earlier offsets stay valid.
    chosen.sort_by_key(|c| core::cmp::Reverse(c.0));
    for (start, end, remove) in chosen {
        if remove {
            body.replace_range(start..end, " ");
        } else {
            let token = String::from(&body[start..end]);
            body.insert_str(end, &alloc::format!(" {token}"));
        }
    }
    Ok(())
}

fn list_rearrange(page: &mut Page, rng: &mut ChaCha8Rng) -> Step {
    let blocks = &mut page.doc.blocks;
    // Longest run of consecutive list items.
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < blocks.len() {
        if blocks[i].is_list_item() {
            let start = i;
            while i < blocks.len() && blocks[i].is_list_item() {
                i += 1;
            }
            if best.is_none_or(|(s, e)| i - start > e - s) {
                best = Some((start, i));
            }
        } else {
            i += 1;
        }
    }
    let Some((start, end)) = best else {
        return Err("no list items");
    };
    let depth = |b: &Block| match b {
        Block::ListItem { depth, .. } => *depth,
        _ => 0,
    };
    // Shuffle the top-level subtrees of the run, moving box text along.
    let run: Vec<Block> = blocks[start..end].to_vec();
    let base = run.iter().map(depth).min().unwrap_or(0);
    let mut groups: Vec<Vec<Block>> = Vec::new();
    for b in run {
        if depth(&b) == base || groups.is_empty() {
            groups.push(Vec::new());
        }
        groups.last_mut().expect("group exists").push(b);
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(rng);
    let mut reordered: Vec<Block> = order.iter().flat_map(|&g| groups[g].clone()).collect();
    // Push one item two levels below its predecessor.
    let target = rng.random_range(0..reordered.len());
    let prev = if target == 0 { None } else { Some(depth(&reordered[target - 1])) };
    if let Block::ListItem { depth, .. } = &mut reordered[target] {
        *depth = prev.map_or(1, |p| p + 2);
    }
    if let Some(boxes) = page.boxes.as_mut().filter(|b| b.len() == blocks.len()) {
        let texts: Vec<String> = boxes[start..end].iter().map(|b| b.text.clone()).collect();
        let mut k = 0;
        for &g in &order {
            let offset: usize = groups[..g].iter().map(Vec::len).sum();
            for j in 0..groups[g].len() {
                boxes[start + k].text = texts[offset + j].clone();
                k += 1;
            }
        }
    }
    blocks.splice(start..end, reordered);
    Ok(())
}

/// A word inside some text slot of the page: `(slot, byte range)`.
type WordRef = (usize, usize, usize);

fn word_spans(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, text.len()));
    }
    out
}

fn char_confusion(page: &mut Page, intensity: f64, rng: &mut ChaCha8Rng) -> Step {
    // Every editable text slot: inline text runs and table cell contents.
    let mut slots: Vec<&mut String> = Vec::new();
    let mut tables_touched = Vec::new();
    for (bi, block) in page.doc.blocks.iter_mut().enumerate() {
        match block {
            Block::Heading { inlines, .. } | Block::Paragraph(inlines) | Block::ListItem { inlines, .. } => {
                for inline in inlines.iter_mut() {
                    if let Inline::Text(t) = inline {
                        if t != PAGE_BREAK {
                            slots.push(t);
                        }
                    }
                }
            }
            Block::Table { grid: Ok(grid), .. } => {
                tables_touched.push(bi);
                for row in grid.rows.iter_mut() {
                    for cell in row.cells.iter_mut() {
                        if !cell.content.contains(['<', '&']) {
                            slots.push(&mut cell.content);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    let mut words: Vec<WordRef> = Vec::new();
    for (s, text) in slots.iter().enumerate() {
        for (a, b) in word_spans(text) {
            if has_confusable(&text[a..b]) {
                words.push((s, a, b));
            }
        }
    }
    if words.is_empty() {
        return Err("no word with confusable glyphs");
    }
    let k = count_for(intensity, words.len());
    words.shuffle(rng);
    let mut chosen = words[..k].to_vec();
    chosen.sort_by_key(|w| core::cmp::Reverse((w.0, w.1)));
    for (s, a, b) in chosen {
        let replaced = confuse_word(&slots[s][a..b]);
        slots[s].replace_range(a..b, &replaced);
    }
    drop(slots);
    for bi in tables_touched {
        if let Block::Table { raw, grid: Ok(grid) } = &mut page.doc.blocks[bi] {
            *raw = grid.to_html();
        }
    }
    Ok(())
}

fn column_rearrange(page: &mut Page) -> Step {
    let Some(boxes) = page.aligned_boxes() else {
        return Err("blocks carry no aligned boxes");
    };
    if page.content_indices().len() != page.doc.blocks.len() {
        return Err("page already carries a page break");
    }
    let geometry: Vec<BoundingBox> = boxes.iter().map(|b| b.bbox).collect();
    let columns = assign_columns(&geometry);
    let left: Vec<usize> = (0..boxes.len()).filter(|&i| columns[i] == 0).collect();
    let right: Vec<usize> = (0..boxes.len()).filter(|&i| columns[i] == 1).collect();
    if left.len() < 2 || right.is_empty() {
        return Err("no two-column layout to interleave");
    }
    let mut order = Vec::with_capacity(boxes.len());
    for j in 0..left.len().max(right.len()) {
        order.extend(left.get(j));
        order.extend(right.get(j));
    }
    order.extend((0..boxes.len()).filter(|&i| columns[i] > 1));
    let new_boxes: Vec<BoxedText> = order.iter().map(|&i| boxes[i].clone()).collect();
    let new_blocks: Vec<Block> = order.iter().map(|&i| page.doc.blocks[i].clone()).collect();
    page.boxes = Some(new_boxes);
    page.doc.blocks = new_blocks;
    Ok(())
}

fn cross_page_cut(page: &mut Page, intensity: f64) -> Step {
    let Some(boxes) = page.aligned_boxes().cloned() else {
        return Err("blocks carry no aligned boxes");
    };
    let content = page.content_indices();
    let geometry: Vec<BoundingBox> = boxes.iter().map(|b| b.bbox).collect();
    let columns = assign_columns(&geometry);
    // The splittable paragraph with the most blocks above it in its column.
    let mut best: Option<(usize, usize)> = None;
    for (k, &bi) in content.iter().enumerate() {
        let splittable = match &page.doc.blocks[bi] {
            Block::Paragraph(inl) => {
                inl.iter().all(|i| matches!(i, Inline::Text(_))) && word_spans(&crate::markup::inlines_text(inl)).len() >= 2
            }
            _ => false,
        };
        if !splittable {
            continue;
        }
        let above = (0..k).filter(|&j| columns[j] == columns[k]).count();
        if best.is_none_or(|(_, a)| above >= a) {
            best = Some((k, above));
        }
    }
    let Some((k, _)) = best else {
        return Err("no paragraph to cut");
    };
    let bi = content[k];
    let Block::Paragraph(inlines) = &page.doc.blocks[bi] else {
        unreachable!("selected block is a paragraph")
    };
    let text = crate::markup::inlines_to_string(inlines);
    let spans = word_spans(&text);
    let cut = count_for(intensity, spans.len() - 1).min(spans.len() - 1);
    let first = text[..spans[cut - 1].1].trim_end();
    let rest = text[spans[cut].0..].trim_start();
    let (first, rest) = (String::from(first), String::from(rest));
    page.doc.blocks.splice(
        bi..=bi,
        [
            Block::Paragraph(alloc::vec![Inline::Text(first.clone())]),
            Block::Paragraph(alloc::vec![Inline::Text(String::from(PAGE_BREAK))]),
            Block::Paragraph(alloc::vec![Inline::Text(rest.clone())]),
        ],
    );
    // The continuation lands at the top of its column on the next page.
    let column = columns[k];
    let top = (0..boxes.len())
        .filter(|&j| columns[j] == column)
        .map(|j| boxes[j].bbox.y1)
        .min()
        .unwrap_or(0);
    let orig = boxes[k].bbox;
    let height = (orig.height() as u32 / 2).max(1);
    let y1 = top.saturating_sub(height + 1);
    let cont = BoundingBox::new(orig.x1, y1, orig.x2, y1 + height).map_err(|_| "degenerate box")?;
    let mut new_boxes = boxes;
    new_boxes[k].text = first;
    new_boxes.insert(
        k + 1,
        BoxedText {
            bbox: cont,
            text: rest,
        },
    );
    page.boxes = Some(new_boxes);
    Ok(())
}

fn markup_transposition(page: &mut Page, intensity: f64, rng: &mut ChaCha8Rng) -> Step {
    let blocks = &mut page.doc.blocks;
    let tables: Vec<usize> = (0..blocks.len())
        .filter(|&i| matches!(&blocks[i], Block::Table { grid: Ok(_), .. }))
        .collect();
    let displays: Vec<usize> = (0..blocks.len())
        .filter(|&i| matches!(&blocks[i], Block::DisplayFormula { style: MathStyle::Dollar, .. }))
        .collect();
    let pick = |mut v: Vec<usize>, rng: &mut ChaCha8Rng| {
        let k = count_for(intensity, v.len());
        v.shuffle(rng);
        v.truncate(k);
        v
    };
    if !tables.is_empty() {
        for i in pick(tables, rng) {
            if let Block::Table { grid: Ok(grid), .. } = &blocks[i] {
                let rows = grid
                    .rows
                    .iter()
                    .map(|r| r.cells.iter().map(|c| c.content.replace('|', "\\|")).collect())
                    .collect();
                blocks[i] = Block::PipeTable { rows };
            }
        }
        return Ok(());
    }
    if !displays.is_empty() {
        for i in pick(displays, rng) {
            if let Block::DisplayFormula { style, .. } = &mut blocks[i] {
                *style = MathStyle::Bracket;
            }
        }
        return Ok(());
    }
    let mut inline_math = Vec::new();
    for (bi, block) in blocks.iter().enumerate() {
        if let Block::Heading { inlines, .. } | Block::Paragraph(inlines) | Block::ListItem { inlines, .. } = block {
            for (ii, inline) in inlines.iter().enumerate() {
                if matches!(inline, Inline::Math { style: MathStyle::Dollar, body } if !body.contains('$')) {
                    inline_math.push((bi, ii));
                }
            }
        }
    }
    if inline_math.is_empty() {
        return Err("no HTML table or dollar-delimited math to transpose");
    }
    let k = count_for(intensity, inline_math.len());
    inline_math.shuffle(rng);
    for &(bi, ii) in &inline_math[..k] {
        if let Block::Heading { inlines, .. } | Block::Paragraph(inlines) | Block::ListItem { inlines, .. } = &mut blocks[bi] {
            if let Inline::Math { style, .. } = &mut inlines[ii] {
                *style = MathStyle::Paren;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markup::normalize_document;
    use proptest::prelude::*;

    fn run(md: &str, kind: PerturbationKind, intensity: f64) -> PerturbOutcome {
        apply_perturbation(
            &CandidateAnnotation::new("a", md),
            &Perturbation { kind, intensity, seed: 11 },
        )
    }

    fn applied(out: PerturbOutcome) -> String {
        match out {
            PerturbOutcome::Applied { candidate, .. } => candidate.markdown,
            PerturbOutcome::NoOp { reason } => panic!("no-op: {reason}"),
        }
    }

    #[test]
    fn confusion_table() {
        assert_eq!(confuse_word("Olll"), "0111");
        assert_eq!(confuse_word("corn"), "com");
        assert_eq!(confuse_word("xyz"), "xyz");
        assert_eq!(applied(run("Olll", PerturbationKind::CharConfusion, 1.0)), "0111");
    }

    #[test]
    fn merge_on_single_cell_is_noop() {
        let out = run("<table><tr><td>a</td></tr></table>", PerturbationKind::CellMergeSplit, 1.0);
        assert!(matches!(out, PerturbOutcome::NoOp { .. }));
    }

    #[test]
    fn merge_keeps_grid_closed() {
        let md = applied(run(
            "<table><tr><td>a</td><td>b</td></tr><tr><td>c</td><td>d</td></tr></table>",
            PerturbationKind::CellMergeSplit,
            0.5,
        ));
        let doc = parse_markdown(&md);
        let grid = doc.tables().next().unwrap().as_ref().unwrap().clone();
        assert!(grid_closure_check(&grid));
        assert_ne!(grid.cell_texts(), ["a", "b", "c", "d"], "{md}");
    }

    #[test]
    fn transposition_breaks_canonical_form() {
        let md = "<table><tr><td>a</td><td>b</td></tr></table>";
        let out = applied(run(md, PerturbationKind::MarkupTransposition, 1.0));
        assert!(!normalize_document(&parse_markdown(&out)).violations.is_empty());
        let out = applied(run("$$x+1$$", PerturbationKind::MarkupTransposition, 1.0));
        assert_eq!(out, "\\[x+1\\]");
        let out = applied(run("see $x$", PerturbationKind::MarkupTransposition, 1.0));
        assert_eq!(out, "see \\(x\\)");
        assert!(matches!(run("plain", PerturbationKind::MarkupTransposition, 1.0), PerturbOutcome::NoOp { .. }));
    }

    #[test]
    fn alignment_tokens_change() {
        let md = "$$\n\\begin{aligned}\na &= b \\\\\nc &= d\n\\end{aligned}\n$$";
        let out = applied(run(md, PerturbationKind::FormulaAlignDisturb, 1.0));
        assert_ne!(out, md);
        assert!(matches!(run("$$x$$", PerturbationKind::FormulaAlignDisturb, 1.0), PerturbOutcome::NoOp { .. }));
    }

    #[test]
    fn list_rearrange_breaks_hierarchy() {
        let out = applied(run("- a\n- b\n  - c\n- d", PerturbationKind::ListRearrange, 1.0));
        assert!(!parse_markdown(&out).list_indentation_valid(), "{out}");
    }

    fn boxed(md: &str, geometry: &[[u32; 4]]) -> CandidateAnnotation {
        let doc = parse_markdown(md);
        let boxes = doc
            .blocks
            .iter()
            .zip(geometry)
            .map(|(_, g)| BoxedText {
                bbox: BoundingBox::new(g[0], g[1], g[2], g[3]).unwrap(),
                text: String::new(),
            })
            .collect();
        CandidateAnnotation::new("a", md).with_boxes(boxes)
    }

    #[test]
    fn layout_operators_invert_reading_order() {
        use crate::metrics::reading_order_score;
        let cand = boxed(
            "L one\n\nL two\n\nR one\n\nR two",
            &[[50, 100, 450, 150], [50, 200, 450, 250], [550, 100, 950, 150], [550, 200, 950, 250]],
        );
        let p = Perturbation { kind: PerturbationKind::ColumnRearrange, intensity: 1.0, seed: 0 };
        let PerturbOutcome::Applied { candidate, .. } = apply_perturbation(&cand, &p) else { panic!() };
        assert_eq!(candidate.markdown, "L one\n\nR one\n\nL two\n\nR two");
        let geom: Vec<_> = candidate.boxes.unwrap().iter().map(|b| b.bbox).collect();
        assert!((reading_order_score(&geom) - 5.0 / 6.0).abs() < 1e-12);

        let cand = boxed("Title\n\nfirst second third fourth", &[[50, 100, 950, 150], [50, 200, 950, 300]]);
        let p = Perturbation { kind: PerturbationKind::CrossPageCut, intensity: 0.5, seed: 0 };
        let PerturbOutcome::Applied { candidate, .. } = apply_perturbation(&cand, &p) else { panic!() };
        assert_eq!(candidate.markdown, "Title\n\nfirst second\n\n<!-- page-break -->\n\nthird fourth");
        let geom: Vec<_> = candidate.boxes.unwrap().iter().map(|b| b.bbox).collect();
        assert!(reading_order_score(&geom) < 0.9);
    }

    proptest! {
        #[test]
        fn operators_are_total_and_deterministic(
            md in "[-#$|<>a-zO0l1 \n&\\\\{}]{0,60}",
            kind in 0usize..7,
            intensity in 0.0f64..=1.0,
            seed in any::<u64>(),
        ) {
            let p = Perturbation { kind: PerturbationKind::ALL[kind], intensity, seed };
            let cand = CandidateAnnotation::new("a", md);
            let out = apply_perturbation(&cand, &p);
            prop_assert_eq!(&out, &apply_perturbation(&cand, &p));
            if let PerturbOutcome::Applied { candidate, .. } = out {
                let _ = parse_markdown(&candidate.markdown);
            }
        }
    }
}
