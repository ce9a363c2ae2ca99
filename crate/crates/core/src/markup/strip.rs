//! Plain-text projection of annotations: markup removed, visible content kept.

use alloc::string::String;
use alloc::vec::Vec;

use super::markdown::{parse_markdown, Block, Inline, MarkdownDoc};

const BOX_START: &str = "<|box_start|>";
const BOX_END: &str = "<|box_end|>";

/// Collapses every run of Unicode whitespace to one ASCII space and trims.
pub fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

pub fn strip_markup(text: &str) -> String {
    strip_document(&parse_markdown(text))
}

pub fn strip_document(doc: &MarkdownDoc) -> String {
    let mut parts: Vec<String> = Vec::new();
    for block in &doc.blocks {
        match block {
            Block::Heading { inlines, .. }
            | Block::Paragraph(inlines)
            | Block::ListItem { inlines, .. } => parts.push(inlines_plain(inlines)),
            Block::Table { raw, grid } => match grid {
                Ok(grid) => {
                    for row in &grid.rows {
                        for cell in &row.cells {
                            parts.push(plain_text(&cell.content));
                        }
                    }
                }
                Err(_) => parts.push(plain_text(raw)),
            },
            Block::PipeTable { rows } => {
                for cell in rows.iter().flatten() {
                    parts.push(plain_text(cell));
                }
            }
            Block::DisplayFormula { body, .. } => parts.push(body.clone()),
            Block::Code { body, .. } => parts.push(body.clone()),
        }
    }
    collapse_whitespace(&parts.join(" "))
}

fn inlines_plain(inlines: &[Inline]) -> String {
    let mut out = String::new();
    for inline in inlines {
        match inline {
            Inline::Text(t) => out.push_str(&plain_text(t)),
            Inline::Math { body, .. } | Inline::Code(body) => out.push_str(body),
        }
    }
    out
}

/// Visible text of an HTML fragment such as a table cell.
pub fn inline_html_text(html: &str) -> String {
    collapse_whitespace(&plain_text(html))
}

/// Removes box tokens, comments, tags, emphasis markers and backslash
/// escapes from running text and decodes character entities.
pub fn plain_text(s: &str) -> String {
    let s = remove_box_tokens(s);
    let s = remove_tags(&s);
    let s = remove_emphasis(&s);
    decode_escapes(&decode_entities(&s))
}

fn remove_box_tokens(s: &str) -> String {
    if !s.contains(BOX_START) {
        return String::from(s);
    }
    let mut out = String::new();
    let mut rest = s;
    while let Some(start) = rest.find(BOX_START) {
        out.push_str(&rest[..start]);
        let after = &rest[start + BOX_START.len()..];
        match after.find(BOX_END) {
            Some(end) if !after[..end].contains(BOX_START) => {
                out.push(' ');
                rest = &after[end + BOX_END.len()..];
            }
            _ => {
                out.push(' ');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn remove_tags(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(lt) = rest.find('<') {
        out.push_str(&rest[..lt]);
        let tail = &rest[lt..];
        if let Some(body) = tail.strip_prefix("<!--") {
            if let Some(end) = body.find("-->") {
                out.push(' ');
                rest = &body[end + 3..];
                continue;
            }
        }
        let tag_like = tail[1..]
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '/' || c == '!');
        if tag_like {
            if let Some(gt) = tail.find('>') {
                if !tail[1..gt].contains('<') {
                    out.push(' ');
                    rest = &tail[gt + 1..];
                    continue;
                }
            }
        }
        out.push('<');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

fn remove_emphasis(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\\' && i + 1 < chars.len() {
            out.push(c);
            out.push(chars[i + 1]);
            i += 2;
            continue;
        }
        if matches!(c, '*' | '_' | '~') && chars.get(i + 1) == Some(&c) {
            i += 2;
            continue;
        }
        if matches!(c, '*' | '_') {
            let before = i.checked_sub(1).map(|j| chars[j]);
            let after = chars.get(i + 1).copied();
            let word = |ch: Option<char>| ch.is_some_and(char::is_alphanumeric);
            let space = |ch: Option<char>| ch.is_none_or(char::is_whitespace);
            let intraword = word(before) && word(after);
            let isolated = space(before) && space(after);
            if !intraword && !isolated {
                i += 1;
                continue;
            }
        }
        out.push(c);
        i += 1;
    }
    out
}

fn decode_escapes(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\\' {
            if let Some(&next) = chars.peek() {
                if next.is_ascii_punctuation() {
                    out.push(next);
                    chars.next();
                    continue;
                }
            }
        }
        out.push(c);
    }
    out
}

pub fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return String::from(s);
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        let decoded = tail[1..].find(';').filter(|&n| n > 0 && n <= 10).and_then(|n| {
            let name = &tail[1..1 + n];
            let ch = match name {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                "nbsp" => Some(' '),
                _ => name.strip_prefix('#').and_then(|num| {
                    let code = match num.strip_prefix(['x', 'X']) {
                        Some(hex) => u32::from_str_radix(hex, 16).ok(),
                        None => num.parse().ok(),
                    };
                    code.and_then(char::from_u32)
                }),
            };
            ch.map(|c| (c, n + 2))
        });
        match decoded {
            Some((c, len)) => {
                out.push(c);
                rest = &tail[len..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}
