//! Strict parser for the HTML table subset `{table, thead, tbody, tr, td, th}`
//! with `colspan`/`rowspan`, span resolution, and canonical serialization.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::strip::inline_html_text;

/// Largest span accepted from markup.
const MAX_SPAN: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WellFormednessError {
    /// Byte offset of the first offending construct.
    pub position: usize,
    pub message: String,
}

impl fmt::Display for WellFormednessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at byte {}", self.message, self.position)
    }
}

impl core::error::Error for WellFormednessError {}

fn fail<T>(position: usize, message: impl Into<String>) -> Result<T, WellFormednessError> {
    Err(WellFormednessError {
        position,
        message: message.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    None,
    Head,
    Body,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableCell {
    /// Inner HTML of the cell, trimmed.
    pub content: String,
    pub colspan: u32,
    pub rowspan: u32,
    pub header: bool,
}

impl TableCell {
    pub fn new(content: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            colspan: 1,
            rowspan: 1,
            header: false,
        }
    }

    pub fn spans(mut self, colspan: u32, rowspan: u32) -> Self {
        self.colspan = colspan;
        self.rowspan = rowspan;
        self
    }

    /// Visible text: inline tags removed, entities decoded, whitespace collapsed.
    pub fn text(&self) -> String {
        inline_html_text(&self.content)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    pub section: Section,
    pub cells: Vec<TableCell>,
}

impl TableRow {
    pub fn new(cells: Vec<TableCell>) -> Self {
        Self {
            section: Section::None,
            cells,
        }
    }
}

/// Span-resolved view of a grid: which cell claims each `(row, column)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occupancy {
    pub width: usize,
    /// `slots[r][c]` is `(row, index)` of the claiming cell.
    pub slots: Vec<Vec<Option<(usize, usize)>>>,
    /// Some rowspan reaches past the last row.
    pub overflow: bool,
    /// Some coordinate is claimed by two cells.
    pub overlap: bool,
}

impl Occupancy {
    pub fn occupied(&self) -> usize {
        self.slots.iter().flatten().filter(|s| s.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableGrid {
    pub rows: Vec<TableRow>,
}

impl TableGrid {
    /// Builds a grid, rejecting zero spans and doubly-claimed coordinates.
    pub fn new(rows: Vec<TableRow>) -> Result<Self, WellFormednessError> {
        for row in &rows {
            if row.cells.iter().any(|c| c.colspan == 0 || c.rowspan == 0) {
                return fail(0, "span must be at least 1");
            }
        }
        let grid = Self { rows };
        if grid.occupancy().overlap {
            return fail(0, "overlapping cells");
        }
        Ok(grid)
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn cell_count(&self) -> usize {
        self.rows.iter().map(|r| r.cells.len()).sum()
    }

    pub fn cell(&self, at: (usize, usize)) -> &TableCell {
        &self.rows[at.0].cells[at.1]
    }

    pub fn occupancy(&self) -> Occupancy {
        let n = self.rows.len();
        let mut slots: Vec<Vec<Option<(usize, usize)>>> = vec![Vec::new(); n];
        let mut overflow = false;
        let mut overlap = false;
        for (r, row) in self.rows.iter().enumerate() {
            let mut col = 0usize;
            for (k, cell) in row.cells.iter().enumerate() {
                while slots[r].get(col).is_some_and(Option::is_some) {
                    col += 1;
                }
                let last_row = r + cell.rowspan as usize;
                if last_row > n {
                    overflow = true;
                }
                for row in &mut slots[r..last_row.min(n)] {
                    for cc in col..col + cell.colspan as usize {
                        if row.len() <= cc {
                            row.resize(cc + 1, None);
                        }
                        if row[cc].is_some() {
                            overlap = true;
                        } else {
                            row[cc] = Some((r, k));
                        }
                    }
                }
                col += cell.colspan as usize;
            }
        }
        let width = slots.iter().map(Vec::len).max().unwrap_or(0);
        for row in &mut slots {
            row.resize(width, None);
        }
        Occupancy {
            width,
            slots,
            overflow,
            overlap,
        }
    }

    /// Canonical HTML: lowercase tags, `colspan` before `rowspan`, spans of 1
    /// omitted, no whitespace between tags.
    pub fn to_html(&self) -> String {
        let mut out = String::from("<table>");
        let mut open: Option<Section> = None;
        for row in &self.rows {
            if open != Some(row.section) {
                close_section(&mut out, open);
                match row.section {
                    Section::Head => out.push_str("<thead>"),
                    Section::Body => out.push_str("<tbody>"),
                    Section::None => {}
                }
                open = Some(row.section);
            }
            out.push_str("<tr>");
            for cell in &row.cells {
                let tag = if cell.header { "th" } else { "td" };
                out.push('<');
                out.push_str(tag);
                if cell.colspan > 1 {
                    out.push_str(&format!(" colspan=\"{}\"", cell.colspan));
                }
                if cell.rowspan > 1 {
                    out.push_str(&format!(" rowspan=\"{}\"", cell.rowspan));
                }
                out.push('>');
                out.push_str(&cell.content);
                out.push_str("</");
                out.push_str(tag);
                out.push('>');
            }
            out.push_str("</tr>");
        }
        close_section(&mut out, open);
        out.push_str("</table>");
        out
    }

    /// Text of every cell in document order.
    pub fn cell_texts(&self) -> Vec<String> {
        self.rows
            .iter()
            .flat_map(|r| r.cells.iter().map(TableCell::text))
            .collect()
    }
}

fn close_section(out: &mut String, open: Option<Section>) {
    match open {
        Some(Section::Head) => out.push_str("</thead>"),
        Some(Section::Body) => out.push_str("</tbody>"),
        _ => {}
    }
}

/// `W(r)`: colspans of the row's own cells plus columns held by rowspans
/// started in earlier rows.
pub fn effective_row_widths(grid: &TableGrid) -> Vec<usize> {
    let mut widths: Vec<usize> = grid
        .rows
        .iter()
        .map(|r| r.cells.iter().map(|c| c.colspan as usize).sum())
        .collect();
    for (r, row) in grid.rows.iter().enumerate() {
        for cell in &row.cells {
            let end = (r + cell.rowspan as usize).min(grid.rows.len());
            for w in &mut widths[r + 1..end] {
                *w += cell.colspan as usize;
            }
        }
    }
    widths
}

pub fn rows_consistent(grid: &TableGrid) -> bool {
    let widths = effective_row_widths(grid);
    widths.windows(2).all(|w| w[0] == w[1])
}

/// The occupancy matrix is a full rectangle: no holes and no rowspan past
/// the last row. A table without rows is closed.
pub fn grid_closure_check(grid: &TableGrid) -> bool {
    let occ = grid.occupancy();
    !occ.overflow && !occ.overlap && occ.slots.iter().flatten().all(Option::is_some)
}

#[derive(Debug)]
enum Event<'a> {
    Start {
        name: String,
        attrs: Vec<(String, String)>,
        pos: usize,
        end: usize,
    },
    End {
        name: String,
        pos: usize,
    },
    Text {
        text: &'a str,
        pos: usize,
    },
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<Option<Event<'a>>, WellFormednessError> {
        let src = self.src;
        if self.pos >= src.len() {
            return Ok(None);
        }
        let rest = &src[self.pos..];
        let start = self.pos;
        if let Some(body) = rest.strip_prefix("<!--") {
            let Some(close) = body.find("-->") else {
                return fail(start, "unterminated comment");
            };
            self.pos += 4 + close + 3;
            return Ok(Some(Event::Text { text: "", pos: start }));
        }
        let is_tag = rest.starts_with('<')
            && rest[1..]
                .chars()
                .next()
                .is_some_and(|c| c.is_ascii_alphabetic() || c == '/');
        if !is_tag {
            let len = rest[1..].find('<').map_or(rest.len(), |i| i + 1);
            self.pos += len;
            return Ok(Some(Event::Text {
                text: &rest[..len],
                pos: start,
            }));
        }
        let Some(close) = find_tag_end(rest) else {
            return fail(start, "unterminated tag");
        };
        self.pos += close + 1;
        let inner = &rest[1..close];
        if let Some(name) = inner.strip_prefix('/') {
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric()) {
                return fail(start, "malformed end tag");
            }
            return Ok(Some(Event::End {
                name: name.to_ascii_lowercase(),
                pos: start,
            }));
        }
        let inner = inner.trim_end().trim_end_matches('/');
        let name_len = inner
            .find(|c: char| !c.is_ascii_alphanumeric())
            .unwrap_or(inner.len());
        let name = inner[..name_len].to_ascii_lowercase();
        let attrs = parse_attrs(&inner[name_len..]).ok_or(WellFormednessError {
            position: start,
            message: "malformed attributes".to_string(),
        })?;
        Ok(Some(Event::Start {
            name,
            attrs,
            pos: start,
            end: self.pos,
        }))
    }
}

fn find_tag_end(rest: &str) -> Option<usize> {
    let mut quote: Option<char> = None;
    for (i, c) in rest.char_indices().skip(1) {
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '"' | '\'') => quote = Some(c),
            (None, '>') => return Some(i),
            (None, '<') => return None,
            _ => {}
        }
    }
    None
}

fn parse_attrs(mut s: &str) -> Option<Vec<(String, String)>> {
    let mut attrs = Vec::new();
    loop {
        s = s.trim_start();
        if s.is_empty() {
            return Some(attrs);
        }
        let name_len = s
            .find(|c: char| c.is_whitespace() || c == '=')
            .unwrap_or(s.len());
        if name_len == 0 {
            return None;
        }
        let name = s[..name_len].to_ascii_lowercase();
        s = s[name_len..].trim_start();
        let value = if let Some(rest) = s.strip_prefix('=') {
            let rest = rest.trim_start();
            match rest.chars().next() {
                Some(q @ ('"' | '\'')) => {
                    let end = rest[1..].find(q)?;
                    s = &rest[end + 2..];
                    rest[1..end + 1].to_string()
                }
                Some(_) => {
                    let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
                    s = &rest[end..];
                    rest[..end].to_string()
                }
                None => return None,
            }
        } else {
            String::new()
        };
        attrs.push((name, value));
    }
}

fn span_attr(attrs: &[(String, String)], key: &str, pos: usize) -> Result<u32, WellFormednessError> {
    match attrs.iter().find(|(k, _)| k == key) {
        None => Ok(1),
        Some((_, v)) => match v.trim().parse::<u32>() {
            Ok(n) if (1..=MAX_SPAN).contains(&n) => Ok(n),
            _ => fail(pos, format!("invalid {key} value {v:?}")),
        },
    }
}

const STRUCTURE_TAGS: &[&str] = &[
    "table", "thead", "tbody", "tfoot", "tr", "td", "th", "caption", "colgroup", "col",
];

struct OpenCell {
    header: bool,
    colspan: u32,
    rowspan: u32,
    content_start: usize,
    pos: usize,
}

/// Strictly parses one HTML table. Mis-nesting, unclosed tags, stray text
/// between structural tags, nested tables and unsupported structural tags
/// (`tfoot`, `caption`, `colgroup`, `col`) are errors.
pub fn parse_html_table(html: &str) -> Result<TableGrid, WellFormednessError> {
    let mut lexer = Lexer { src: html, pos: 0 };
    let mut rows: Vec<TableRow> = Vec::new();
    let mut opened = false;
    let mut closed = false;
    let mut section = Section::None;
    let mut row: Option<(Vec<TableCell>, usize)> = None;
    let mut cell: Option<OpenCell> = None;

    while let Some(event) = lexer.next()? {
        if closed {
            match event {
                Event::Text { text, .. } if text.trim().is_empty() => continue,
                Event::Text { pos, .. } | Event::Start { pos, .. } | Event::End { pos, .. } => {
                    return fail(pos, "content after </table>")
                }
            }
        }
        if let Some(open) = &cell {
            // Inside a cell every non-structural tag is inline content.
            match &event {
                Event::Start { name, pos, .. } if STRUCTURE_TAGS.contains(&name.as_str()) => {
                    let message = if name == "table" {
                        "nested table".to_string()
                    } else {
                        format!("unclosed {}", if open.header { "th" } else { "td" })
                    };
                    return fail(*pos, message);
                }
                Event::End { name, pos } if STRUCTURE_TAGS.contains(&name.as_str()) => {
                    let tag = if open.header { "th" } else { "td" };
                    if name != tag {
                        return fail(*pos, format!("unclosed {tag}"));
                    }
                    let content = html[open.content_start..*pos].trim().to_string();
                    let (cells, _) = row.as_mut().expect("cell inside row");
                    cells.push(TableCell {
                        content,
                        colspan: open.colspan,
                        rowspan: open.rowspan,
                        header: open.header,
                    });
                    cell = None;
                }
                _ => {}
            }
            continue;
        }
        match event {
            Event::Text { text, pos } => {
                if !text.trim().is_empty() {
                    return fail(pos, "text outside a cell");
                }
            }
            Event::Start {
                name,
                attrs,
                pos,
                end,
            } => match name.as_str() {
                "table" if !opened => opened = true,
                "table" => return fail(pos, "nested table"),
                _ if !opened => return fail(pos, "expected <table>"),
                "thead" | "tbody" => {
                    if row.is_some() {
                        return fail(pos, "unclosed tr");
                    }
                    if section != Section::None {
                        return fail(pos, "nested table section");
                    }
                    section = if name == "thead" { Section::Head } else { Section::Body };
                }
                "tr" => {
                    if row.is_some() {
                        return fail(pos, "unclosed tr");
                    }
                    row = Some((Vec::new(), pos));
                }
                "td" | "th" => {
                    if row.is_none() {
                        return fail(pos, format!("<{name}> outside <tr>"));
                    }
                    cell = Some(OpenCell {
                        header: name == "th",
                        colspan: span_attr(&attrs, "colspan", pos)?,
                        rowspan: span_attr(&attrs, "rowspan", pos)?,
                        content_start: end,
                        pos,
                    });
                }
                other => return fail(pos, format!("unsupported tag <{other}> in table structure")),
            },
            Event::End { name, pos } => match name.as_str() {
                "tr" => {
                    let Some((cells, _)) = row.take() else {
                        return fail(pos, "unmatched </tr>");
                    };
                    rows.push(TableRow { section, cells });
                }
                "thead" | "tbody" => {
                    if row.is_some() {
                        return fail(pos, "unclosed tr");
                    }
                    let expected = if name == "thead" { Section::Head } else { Section::Body };
                    if section != expected {
                        return fail(pos, format!("unmatched </{name}>"));
                    }
                    section = Section::None;
                }
                "table" => {
                    if row.is_some() {
                        return fail(pos, "unclosed tr");
                    }
                    if section != Section::None {
                        return fail(pos, "unclosed table section");
                    }
                    if !opened {
                        return fail(pos, "unmatched </table>");
                    }
                    closed = true;
                }
                other => return fail(pos, format!("unexpected </{other}>")),
            },
        }
    }
    if let Some(open) = cell {
        return fail(open.pos, format!("unclosed {}", if open.header { "th" } else { "td" }));
    }
    if let Some((_, pos)) = row {
        return fail(pos, "unclosed tr");
    }
    if !opened {
        return fail(0, "expected <table>");
    }
    if !closed {
        return fail(html.len(), "unclosed table");
    }
    TableGrid::new(rows)
}
