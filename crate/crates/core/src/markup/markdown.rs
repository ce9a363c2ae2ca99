//! Line-based parser for the annotation Markdown subset. Parsing is total:
//! anything unrecognized is paragraph text.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::table::{parse_html_table, TableGrid, WellFormednessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MathStyle {
    /// `$x$` inline, `$$x$$` display.
    Dollar,
    /// `$$x$$` appearing inside running text.
    DoubleDollar,
    /// `\(x\)`.
    Paren,
    /// `\[x\]`.
    Bracket,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inline {
    Text(String),
    Math { body: String, style: MathStyle },
    Code(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Block {
    Heading {
        level: u8,
        inlines: Vec<Inline>,
    },
    Paragraph(Vec<Inline>),
    /// A `<table>...</table>` span. `grid` holds the strict parse.
    Table {
        raw: String,
        grid: Result<TableGrid, WellFormednessError>,
    },
    /// Pipe-delimited Markdown table; the separator row is not stored.
    PipeTable {
        rows: Vec<Vec<String>>,
    },
    DisplayFormula {
        body: String,
        style: MathStyle,
    },
    ListItem {
        depth: usize,
        marker: String,
        inlines: Vec<Inline>,
    },
    Code {
        info: String,
        body: String,
    },
}

impl Block {
    pub fn is_list_item(&self) -> bool {
        matches!(self, Block::ListItem { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarkdownDoc {
    pub blocks: Vec<Block>,
}

impl MarkdownDoc {
    pub fn tables(&self) -> impl Iterator<Item = &Result<TableGrid, WellFormednessError>> {
        self.blocks.iter().filter_map(|b| match b {
            Block::Table { grid, .. } => Some(grid),
            _ => None,
        })
    }

    /// Table blocks of either syntax, in order. Pipe tables count as present
    /// but unparsed.
    pub fn table_count(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| matches!(b, Block::Table { .. } | Block::PipeTable { .. }))
            .count()
    }

    /// Every formula body, display and inline, in document order.
    pub fn formulas(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for block in &self.blocks {
            match block {
                Block::DisplayFormula { body, .. } => out.push(body.as_str()),
                Block::Heading { inlines, .. }
                | Block::Paragraph(inlines)
                | Block::ListItem { inlines, .. } => {
                    for inline in inlines {
                        if let Inline::Math { body, .. } = inline {
                            out.push(body.as_str());
                        }
                    }
                }
                _ => {}
            }
        }
        out
    }

    pub fn headings(&self) -> impl Iterator<Item = u8> + '_ {
        self.blocks.iter().filter_map(|b| match b {
            Block::Heading { level, .. } => Some(*level),
            _ => None,
        })
    }

    /// No heading raises the level by more than one over the previous
    /// heading. The first heading may be at any level.
    pub fn heading_hierarchy_valid(&self) -> bool {
        let mut prev: Option<u8> = None;
        for level in self.headings() {
            if prev.is_some_and(|p| level > p + 1) {
                return false;
            }
            prev = Some(level);
        }
        true
    }

    /// Each run of consecutive list items starts at depth 0 and deepens by at
    /// most one level per item.
    pub fn list_indentation_valid(&self) -> bool {
        let mut prev: Option<usize> = None;
        for block in &self.blocks {
            match block {
                Block::ListItem { depth, .. } => {
                    let limit = prev.map_or(0, |p| p + 1);
                    if *depth > limit {
                        return false;
                    }
                    prev = Some(*depth);
                }
                _ => prev = None,
            }
        }
        true
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for (i, block) in self.blocks.iter().enumerate() {
            if i > 0 {
                let tight = block.is_list_item() && self.blocks[i - 1].is_list_item();
                out.push_str(if tight { "\n" } else { "\n\n" });
            }
            write_block(&mut out, block);
        }
        out
    }
}

fn write_block(out: &mut String, block: &Block) {
    match block {
        Block::Heading { level, inlines } => {
            for _ in 0..*level {
                out.push('#');
            }
            let text = inlines_to_string(inlines);
            if !text.is_empty() {
                out.push(' ');
                out.push_str(&text);
            }
        }
        Block::Paragraph(inlines) => out.push_str(&inlines_to_string(inlines)),
        Block::Table { raw, .. } => out.push_str(raw),
        Block::PipeTable { rows } => {
            for (i, row) in rows.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                push_pipe_row(out, row);
                if i == 0 {
                    out.push('\n');
                    let sep: Vec<String> = row.iter().map(|_| "---".to_string()).collect();
                    push_pipe_row(out, &sep);
                }
            }
        }
        Block::DisplayFormula { body, style } => {
            let (open, close) = match style {
                MathStyle::Bracket | MathStyle::Paren => ("\\[", "\\]"),
                _ => ("$$", "$$"),
            };
            out.push_str(open);
            if body.contains('\n') {
                out.push('\n');
                out.push_str(body);
                out.push('\n');
            } else {
                out.push_str(body);
            }
            out.push_str(close);
        }
        Block::ListItem {
            depth,
            marker,
            inlines,
        } => {
            for _ in 0..*depth {
                out.push_str("  ");
            }
            out.push_str(marker);
            let text = inlines_to_string(inlines);
            if !text.is_empty() {
                out.push(' ');
                out.push_str(&text);
            }
        }
        Block::Code { info, body } => {
            out.push_str("```");
            out.push_str(info);
            out.push('\n');
            if !body.is_empty() {
                out.push_str(body);
                out.push('\n');
            }
            out.push_str("```");
        }
    }
}

fn push_pipe_row(out: &mut String, row: &[String]) {
    out.push('|');
    for cell in row {
        out.push(' ');
        out.push_str(cell);
        out.push_str(" |");
    }
}

pub fn inlines_to_string(inlines: &[Inline]) -> String {
    let mut out = String::new();
    for inline in inlines {
        match inline {
            Inline::Text(t) => out.push_str(t),
            Inline::Code(c) => {
                out.push('`');
                out.push_str(c);
                out.push('`');
            }
            Inline::Math { body, style } => {
                let (open, close) = match style {
                    MathStyle::Dollar => ("$", "$"),
                    MathStyle::DoubleDollar => ("$$", "$$"),
                    MathStyle::Paren => ("\\(", "\\)"),
                    MathStyle::Bracket => ("\\[", "\\]"),
                };
                out.push_str(open);
                out.push_str(body);
                out.push_str(close);
            }
        }
    }
    out
}

/// Plain concatenation of inline content with math and code bodies bare.
pub fn inlines_text(inlines: &[Inline]) -> String {
    let mut out = String::new();
    for inline in inlines {
        match inline {
            Inline::Text(t) | Inline::Code(t) => out.push_str(t),
            Inline::Math { body, .. } => out.push_str(body),
        }
    }
    out
}

fn is_blank(line: &str) -> bool {
    line.trim().is_empty()
}

fn heading(line: &str) -> Option<(u8, &str)> {
    let line = line.trim_start();
    let hashes = line.bytes().take_while(|&b| b == b'#').count();
    if !(1..=6).contains(&hashes) {
        return None;
    }
    let rest = &line[hashes..];
    if rest.is_empty() || rest.starts_with([' ', '\t']) {
        Some((hashes as u8, rest.trim()))
    } else {
        None
    }
}

fn list_item(line: &str) -> Option<(usize, &str, &str)> {
    let mut indent = 0usize;
    let mut start = 0usize;
    for (i, c) in line.char_indices() {
        match c {
            ' ' => indent += 1,
            '\t' => indent += 4,
            _ => {
                start = i;
                break;
            }
        }
    }
    let rest = &line[start..];
    let marker_len = if rest.starts_with(['-', '*', '+']) {
        1
    } else {
        let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
        if (1..=9).contains(&digits) && rest[digits..].starts_with(['.', ')']) {
            digits + 1
        } else {
            return None;
        }
    };
    let after = &rest[marker_len..];
    if after.is_empty() || after.starts_with([' ', '\t']) {
        Some((indent / 2, &rest[..marker_len], after.trim()))
    } else {
        None
    }
}

fn starts_table(line: &str) -> bool {
    let t = line.trim_start();
    t.len() >= 6
        && t.is_char_boundary(6)
        && t[..6].eq_ignore_ascii_case("<table")
        && t[6..].chars().next().is_none_or(|c| c == '>' || c.is_whitespace())
}

fn is_pipe_separator(line: &str) -> bool {
    let t = line.trim();
    t.starts_with('|')
        && t.contains('-')
        && t.chars().all(|c| matches!(c, '|' | '-' | ':' | ' ' | '\t'))
}

/// Splits a pipe row on unescaped `|`, dropping the outer pipes.
pub fn split_pipe_row(line: &str) -> Vec<String> {
    let t = line.trim();
    let t = t.strip_prefix('|').unwrap_or(t);
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut escaped = false;
    for c in t.chars() {
        if escaped {
            cur.push(c);
            escaped = false;
        } else if c == '\\' {
            cur.push(c);
            escaped = true;
        } else if c == '|' {
            cells.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(c);
        }
    }
    if !cur.trim().is_empty() {
        cells.push(cur.trim().to_string());
    }
    cells
}

fn fence(line: &str) -> Option<(char, usize, &str)> {
    let t = line.trim_start();
    let ch = t.chars().next()?;
    if ch != '`' && ch != '~' {
        return None;
    }
    let n = t.chars().take_while(|&c| c == ch).count();
    (n >= 3).then(|| (ch, n, t[n..].trim()))
}

/// Delimited display math starting at `lines[i]`. Returns the body and the
/// index after the closing line.
fn display_math(lines: &[&str], i: usize) -> Option<(String, MathStyle, usize)> {
    let t = lines[i].trim();
    let (open, close, style) = if t.starts_with("$$") {
        ("$$", "$$", MathStyle::Dollar)
    } else if t.starts_with("\\[") {
        ("\\[", "\\]", MathStyle::Bracket)
    } else {
        return None;
    };
    let rest = &t[open.len()..];
    if let Some(pos) = rest.find(close) {
        // Single line: the closing delimiter must end the line.
        if pos + close.len() == rest.len() && !rest[..pos].trim().is_empty() {
            return Some((rest[..pos].trim().to_string(), style, i + 1));
        }
        return None;
    }
    let mut body: Vec<&str> = Vec::new();
    if !rest.trim().is_empty() {
        body.push(rest);
    }
    for (j, line) in lines.iter().enumerate().skip(i + 1) {
        let lt = line.trim_end();
        if let Some(pos) = lt.find(close) {
            if pos + close.len() != lt.len() {
                return None;
            }
            body.push(&lt[..pos]);
            let joined = body.join("\n");
            let joined = joined.trim();
            if joined.is_empty() {
                return None;
            }
            return Some((joined.to_string(), style, j + 1));
        }
        if line.contains(open) {
            return None;
        }
        body.push(line);
    }
    None
}

fn try_block(lines: &[&str], i: usize) -> Option<(Block, usize)> {
    let line = lines[i];
    if let Some((ch, n, info)) = fence(line) {
        let mut body = Vec::new();
        let mut j = i + 1;
        while j < lines.len() {
            if let Some((c2, n2, rest)) = fence(lines[j]) {
                if c2 == ch && n2 >= n && rest.is_empty() {
                    j += 1;
                    break;
                }
            }
            body.push(lines[j]);
            j += 1;
        }
        return Some((
            Block::Code {
                info: info.to_string(),
                body: body.join("\n"),
            },
            j,
        ));
    }
    if starts_table(line) {
        let mut j = i;
        let mut end = None;
        while j < lines.len() {
            if lines[j].to_ascii_lowercase().contains("</table>") {
                end = Some(j + 1);
                break;
            }
            j += 1;
        }
        let end = end.unwrap_or_else(|| {
            (i + 1..lines.len())
                .find(|&k| is_blank(lines[k]))
                .unwrap_or(lines.len())
        });
        let raw = lines[i..end].join("\n").trim().to_string();
        let grid = parse_html_table(&raw);
        return Some((Block::Table { raw, grid }, end));
    }
    if let Some((body, style, next)) = display_math(lines, i) {
        return Some((Block::DisplayFormula { body, style }, next));
    }
    if let Some((level, text)) = heading(line) {
        return Some((
            Block::Heading {
                level,
                inlines: parse_inlines(text),
            },
            i + 1,
        ));
    }
    if line.trim_start().starts_with('|') && i + 1 < lines.len() && is_pipe_separator(lines[i + 1]) {
        let mut rows = vec![split_pipe_row(line)];
        let mut j = i + 2;
        while j < lines.len() && lines[j].trim_start().starts_with('|') {
            rows.push(split_pipe_row(lines[j]));
            j += 1;
        }
        return Some((Block::PipeTable { rows }, j));
    }
    if let Some((depth, marker, text)) = list_item(line) {
        return Some((
            Block::ListItem {
                depth,
                marker: marker.to_string(),
                inlines: parse_inlines(text),
            },
            i + 1,
        ));
    }
    None
}

pub fn parse_markdown(text: &str) -> MarkdownDoc {
    let lines: Vec<&str> = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if is_blank(lines[i]) {
            i += 1;
            continue;
        }
        if let Some((block, next)) = try_block(&lines, i) {
            blocks.push(block);
            i = next;
            continue;
        }
        let start = i;
        i += 1;
        while i < lines.len() && !is_blank(lines[i]) && try_block(&lines, i).is_none() {
            i += 1;
        }
        let text = lines[start..i].join("\n");
        blocks.push(Block::Paragraph(parse_inlines(text.trim())));
    }
    MarkdownDoc { blocks }
}

/// Position of the first unescaped `delim` at or after `from`.
fn find_unescaped(s: &str, from: usize, delim: &str) -> Option<usize> {
    let bytes = s.as_bytes();
    let mut i = from;
    while i < s.len() {
        if bytes[i] == b'\\' {
            i += 2;
            continue;
        }
        if bytes[i..].starts_with(delim.as_bytes()) {
            return Some(i);
        }
        i += 1;
    }
    None
}

pub fn parse_inlines(text: &str) -> Vec<Inline> {
    let mut out = Vec::new();
    let mut buf = String::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < text.len() {
        let rest = &text[i..];
        let found = if let Some(after) = rest.strip_prefix('`') {
            after.find('`').map(|end| {
                (
                    Inline::Code(after[..end].to_string()),
                    end + 2,
                )
            })
        } else if rest.starts_with("\\(") || rest.starts_with("\\[") {
            let (close, style) = if rest.starts_with("\\(") {
                ("\\)", MathStyle::Paren)
            } else {
                ("\\]", MathStyle::Bracket)
            };
            rest[2..].find(close).filter(|&end| end > 0).map(|end| {
                (
                    Inline::Math {
                        body: rest[2..2 + end].to_string(),
                        style,
                    },
                    end + 4,
                )
            })
        } else if rest.starts_with("$$") {
            find_unescaped(rest, 2, "$$").filter(|&end| end > 2).map(|end| {
                (
                    Inline::Math {
                        body: rest[2..end].to_string(),
                        style: MathStyle::DoubleDollar,
                    },
                    end + 2,
                )
            })
        } else if rest.starts_with('$') {
            find_unescaped(rest, 1, "$").filter(|&end| end > 1).map(|end| {
                (
                    Inline::Math {
                        body: rest[1..end].to_string(),
                        style: MathStyle::Dollar,
                    },
                    end + 1,
                )
            })
        } else {
            None
        };
        match found {
            Some((inline, len)) => {
                if !buf.is_empty() {
                    out.push(Inline::Text(core::mem::take(&mut buf)));
                }
                out.push(inline);
                i += len;
            }
            None => {
                // Escapes are kept verbatim; the escaped char never opens a span.
                let step = if bytes[i] == b'\\' && i + 1 < text.len() {
                    1 + text[i + 1..].chars().next().map_or(0, char::len_utf8)
                } else {
                    rest.chars().next().map_or(1, char::len_utf8)
                };
                buf.push_str(&text[i..i + step]);
                i += step;
            }
        }
    }
    if !buf.is_empty() {
        out.push(Inline::Text(buf));
    }
    out
}

/// Describes a block for diagnostics.
pub fn block_kind(block: &Block) -> String {
    match block {
        Block::Heading { level, .. } => format!("heading {level}"),
        Block::Paragraph(_) => "paragraph".into(),
        Block::Table { .. } => "table".into(),
        Block::PipeTable { .. } => "pipe table".into(),
        Block::DisplayFormula { .. } => "display formula".into(),
        Block::ListItem { .. } => "list item".into(),
        Block::Code { .. } => "code".into(),
    }
}
