use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{BoundingBox, BoxedText, CandidateAnnotation, SampleRecord};
use crate::markup::{Section, TableCell, TableGrid, TableRow};

/// Registered synthesis templates.
#[derive(Debug, Clone, PartialEq)]
pub enum Template {
    /// `table:RxC:density`: a header row plus `R - 1` body rows, with about
    /// `density` of the cells merged with their right neighbour.
    Table { rows: usize, cols: usize, density: f64 },
    /// `align:N`: an aligned equation environment of N lines.
    Align { lines: usize },
    /// `list:D`: a list nested to depth D.
    List { depth: usize },
    /// `mixed-script`: paragraphs mixing Latin, Greek, Cyrillic and CJK.
    MixedScript,
    /// `two-column:K`: K blocks in each of two columns.
    TwoColumn { blocks: usize },
    /// `composite`: two columns holding a table, an aligned formula and a
    /// nested list.
    Composite,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateError(pub String);

impl fmt::Display for TemplateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown template {:?} (expected table:RxC[:density], align:N, list:D, mixed-script, two-column:K or composite)",
            self.0
        )
    }
}

impl core::error::Error for TemplateError {}

fn num<T: core::str::FromStr>(s: &str, id: &str) -> Result<T, TemplateError> {
    s.parse().map_err(|_| TemplateError(id.to_string()))
}

impl Template {
    pub fn parse(id: &str) -> Result<Self, TemplateError> {
        let err = || TemplateError(id.to_string());
        let parts: Vec<&str> = id.trim().split(':').collect();
        let t = match parts.as_slice() {
            ["table", dims] | ["table", dims, _] => {
                let (r, c) = dims.split_once('x').ok_or_else(err)?;
                let density = match parts.get(2) {
                    Some(d) => num::<f64>(d, id)?,
                    None => 0.0,
                };
                Template::Table {
                    rows: num(r, id)?,
                    cols: num(c, id)?,
                    density,
                }
            }
            ["align", n] => Template::Align { lines: num(n, id)? },
            ["list", d] => Template::List { depth: num(d, id)? },
            ["mixed-script"] => Template::MixedScript,
            ["two-column", k] => Template::TwoColumn { blocks: num(k, id)? },
            ["composite"] => Template::Composite,
            _ => return Err(err()),
        };
        let valid = match &t {
            Template::Table { rows, cols, density } => {
                (1..=50).contains(rows) && (1..=20).contains(cols) && (0.0..=1.0).contains(density)
            }
            Template::Align { lines } => (1..=40).contains(lines),
            Template::List { depth } => (1..=8).contains(depth),
            Template::TwoColumn { blocks } => (1..=12).contains(blocks),
            _ => true,
        };
        if valid {
            Ok(t)
        } else {
            Err(err())
        }
    }

    /// The registered template ids used when none are requested.
    pub fn defaults() -> Vec<Template> {
        ["table:3x3:0.3", "align:4", "list:3", "mixed-script", "two-column:3", "composite"]
            .iter()
            .map(|id| Template::parse(id).expect("built-in template"))
            .collect()
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Template::Table { rows, cols, density } => write!(f, "table:{rows}x{cols}:{density}"),
            Template::Align { lines } => write!(f, "align:{lines}"),
            Template::List { depth } => write!(f, "list:{depth}"),
            Template::MixedScript => f.write_str("mixed-script"),
            Template::TwoColumn { blocks } => write!(f, "two-column:{blocks}"),
            Template::Composite => f.write_str("composite"),
        }
    }
}

/// Words dense in confusable glyphs, so recognition noise stays visible.
const WORDS: &[&str] = &[
    "SOLO", "Bill", "lOOm", "ISO", "BOZO", "moll", "Zorn", "Oslo", "BOSS", "Illinois", "modern", "burn",
    "corn", "OIL", "Bloom", "Mill", "SIZE", "ZONE", "LOSS", "BIOS", "Isolde", "mirror", "summit", "lime",
];
const GREEK: &[&str] = &["\u{391}\u{3bb}\u{3c6}\u{3b1}", "\u{39f}\u{3bc}\u{3ad}\u{3b3}\u{3b1}", "\u{392}\u{3ae}\u{3c4}\u{3b1}"];
const CYRILLIC: &[&str] = &["\u{41e}\u{431}\u{43e}\u{440}\u{43e}\u{442}", "\u{43a}\u{43e}\u{441}\u{43c}\u{43e}\u{441}", "\u{441}\u{43e}\u{43a}"];
const CJK: &[&str] = &["\u{6570}\u{636e}", "\u{6587}\u{6863}", "\u{8868}\u{683c}"];
const VARS: &[&str] = &["x", "y", "z", "a", "b", "u", "v"];

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn pick<'a>(&mut self, from: &[&'a str]) -> &'a str {
        from[self.rng.random_range(0..from.len())]
    }

    fn number(&mut self) -> String {
        match self.rng.random_range(0..3) {
            0 => format!("{}", self.rng.random_range(1..100)),
            1 => format!("{}.{}", self.rng.random_range(1..100), self.rng.random_range(0..10)),
            _ => format!("{}", self.rng.random_range(1990..2030)),
        }
    }

    fn words(&mut self, lo: usize, hi: usize) -> String {
        let n = self.rng.random_range(lo..=hi);
        let mut out: Vec<String> = Vec::with_capacity(n);
        for _ in 0..n {
            if self.rng.random_bool(0.15) {
                out.push(self.number());
            } else {
                out.push(self.pick(WORDS).to_string());
            }
        }
        out.join(" ")
    }

    fn mixed(&mut self, n: usize) -> String {
        let mut out: Vec<String> = Vec::with_capacity(n);
        for i in 0..n {
            let w = match i % 4 {
                0 => self.pick(WORDS),
                1 => self.pick(GREEK),
                2 => self.pick(CYRILLIC),
                _ => self.pick(CJK),
            };
            out.push(w.to_string());
        }
        out.join(" ")
    }

    fn term(&mut self) -> String {
        let v = self.pick(VARS);
        match self.rng.random_range(0..3) {
            0 => format!("{v}_{{{}}}", self.rng.random_range(1..10)),
            1 => format!("\\frac{{{v}}}{{{}}}", self.rng.random_range(2..10)),
            _ => format!("{}{v}^{{2}}", self.rng.random_range(2..10)),
        }
    }

    fn aligned(&mut self, lines: usize) -> String {
        let rows: Vec<String> = (0..lines)
            .map(|_| format!("{} &= {} + {}", self.pick(VARS), self.term(), self.term()))
            .collect();
        format!("\\begin{{aligned}}\n{}\n\\end{{aligned}}", rows.join(" \\\\\n"))
    }

    fn table(&mut self, rows: usize, cols: usize, density: f64) -> TableGrid {
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            let header = r == 0;
            let mut cells = Vec::new();
            let mut c = 0;
            while c < cols {
                let span = if c + 1 < cols && self.rng.random_bool(density) { 2 } else { 1 };
                let content = if header { self.pick(WORDS).to_string() } else { self.number() };
                let mut cell = TableCell::new(content).spans(span, 1);
                cell.header = header;
                cells.push(cell);
                c += span as usize;
            }
            let mut row = TableRow::new(cells);
            row.section = if header { Section::Head } else { Section::Body };
            out.push(row);
        }
        TableGrid::new(out).expect("generated grid has no overlaps")
    }
}

/// Stacks blocks top to bottom in one or two columns and records a box for
/// each.
struct Layout {
    markdown: Vec<String>,
    boxes: Vec<BoxedText>,
    cursor: [u32; 2],
    columns: [(u32, u32); 2],
    tight: Vec<bool>,
}

impl Layout {
    fn new(two_columns: bool) -> Self {
        let columns = if two_columns { [(60, 470), (530, 940)] } else { [(80, 920), (80, 920)] };
        Self {
            markdown: Vec::new(),
            boxes: Vec::new(),
            cursor: [100, 100],
            columns,
            tight: Vec::new(),
        }
    }

    fn push(&mut self, column: usize, markdown: String, text: String, lines: u32) {
        let (x1, x2) = self.columns[column];
        let y1 = self.cursor[column];
        let y2 = y1 + 24 * lines.max(1);
        self.cursor[column] = y2 + 16;
        self.boxes.push(BoxedText {
            bbox: BoundingBox::new(x1, y1, x2, y2).expect("positive extent"),
            text,
        });
        self.tight.push(markdown.trim_start().starts_with("- "));
        self.markdown.push(markdown);
    }

    fn text(&mut self, column: usize, markdown: String) {
        let lines = 1 + markdown.len() as u32 / 60;
        self.push(column, markdown.clone(), markdown, lines);
    }

    fn finish(self) -> (String, Vec<BoxedText>) {
        let mut out = String::new();
        for (i, block) in self.markdown.iter().enumerate() {
            if i > 0 {
                out.push_str(if self.tight[i] && self.tight[i - 1] { "\n" } else { "\n\n" });
            }
            out.push_str(block);
        }
        (out, self.boxes)
    }
}

fn list_block(g: &mut Gen, layout: &mut Layout, column: usize, depth: usize) {
    let mut depths: Vec<usize> = (0..depth).collect();
    depths.extend((0..depth.saturating_sub(1)).rev());
    depths.push(0);
    for d in depths {
        let item = format!("{}- {}", "  ".repeat(d), g.words(2, 4));
        let text = String::from(item.trim_start().trim_start_matches("- "));
        layout.push(column, item, text, 1);
    }
}

fn table_block(g: &mut Gen, layout: &mut Layout, column: usize, rows: usize, cols: usize, density: f64) {
    let grid = g.table(rows, cols, density);
    let text = grid.cell_texts().join(" ");
    layout.push(column, grid.to_html(), text, rows as u32);
}

fn formula_block(g: &mut Gen, layout: &mut Layout, column: usize, lines: usize) {
    let body = g.aligned(lines);
    layout.push(column, format!("$$\n{body}\n$$"), body, lines as u32 + 2);
}

/// Generates a clean sample: canonical markup, one box per block, and three
/// identical candidates.
pub fn synthesize_from_template(template: &Template, seed: u64) -> SampleRecord {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let mut layout = Layout::new(matches!(template, Template::TwoColumn { .. } | Template::Composite));
    let heading = format!("## {}", g.words(2, 4));
    match template {
        Template::Table { rows, cols, density } => {
            layout.text(0, heading);
            layout.text(0, g.words(8, 14));
            table_block(&mut g, &mut layout, 0, *rows, *cols, *density);
            layout.text(0, g.words(8, 14));
        }
        Template::Align { lines } => {
            layout.text(0, heading);
            layout.text(0, g.words(8, 14));
            formula_block(&mut g, &mut layout, 0, *lines);
            layout.text(0, g.words(8, 14));
        }
        Template::List { depth } => {
            layout.text(0, heading);
            layout.text(0, g.words(8, 14));
            list_block(&mut g, &mut layout, 0, *depth);
            layout.text(0, g.words(8, 14));
        }
        Template::MixedScript => {
            layout.text(0, heading);
            let n = g.rng.random_range(8..14);
            layout.text(0, g.mixed(n));
            let term = g.term();
            let lead = g.words(3, 5);
            layout.text(0, format!("{lead} ${term}$ {}", g.mixed(6)));
            let n = g.rng.random_range(8..14);
            layout.text(0, g.mixed(n));
        }
        Template::TwoColumn { blocks } => {
            layout.text(0, heading);
            for _ in 1..*blocks {
                layout.text(0, g.words(8, 14));
            }
            for _ in 0..*blocks {
                layout.text(1, g.words(8, 14));
            }
        }
        Template::Composite => {
            layout.text(0, heading);
            layout.text(0, g.words(8, 14));
            list_block(&mut g, &mut layout, 0, 2);
            layout.text(0, g.words(8, 14));
            table_block(&mut g, &mut layout, 1, 3, 3, 0.3);
            formula_block(&mut g, &mut layout, 1, 2);
            let term = g.term();
            let lead = g.words(4, 6);
            layout.text(1, format!("{lead} ${term}$ {}", g.words(3, 5)));
            layout.text(1, g.words(8, 14));
        }
    }
    let (markdown, boxes) = layout.finish();
    let candidates = ["src-a", "src-b", "src-c"]
        .iter()
        .map(|s| CandidateAnnotation::new(*s, markdown.clone()).with_boxes(boxes.clone()))
        .collect();
    let mut record = SampleRecord::new(format!("syn:{template}:{seed:016x}"), candidates);
    record.metadata.insert("template".into(), template.to_string());
    record
}
