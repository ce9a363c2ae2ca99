//! Syntactic LaTeX math checking.
//!
//! This is a necessary-condition gate: braces, environments and
//! `\left`/`\right` pairs must nest, and commands listed in an
//! [`ArityTable`] must receive non-empty required arguments. There is no
//! macro expansion and no font or package semantics.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::metrics::tree::LabeledTree;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    /// Control sequence including the backslash, e.g. `\frac`, `\\`, `\{`.
    Command(String),
    OpenBrace,
    CloseBrace,
    Symbol(char),
}

impl Token {
    pub fn text(&self) -> String {
        match self {
            Token::Command(c) => c.clone(),
            Token::OpenBrace => "{".to_string(),
            Token::CloseBrace => "}".to_string(),
            Token::Symbol(c) => c.to_string(),
        }
    }
}

/// Splits a formula into tokens. Whitespace and `%` comments are dropped.
pub fn tokenize(src: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chars = src.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                let mut name = String::from("\\");
                match chars.peek().copied() {
                    Some(n) if n.is_ascii_alphabetic() => {
                        while let Some(&n) = chars.peek() {
                            if n.is_ascii_alphabetic() {
                                name.push(n);
                                chars.next();
                            } else {
                                break;
                            }
                        }
                    }
                    Some(n) => {
                        name.push(n);
                        chars.next();
                    }
                    None => {}
                }
                tokens.push(Token::Command(name));
            }
            '%' => {
                for n in chars.by_ref() {
                    if n == '\n' {
                        break;
                    }
                }
            }
            '{' => tokens.push(Token::OpenBrace),
            '}' => tokens.push(Token::CloseBrace),
            c if c.is_whitespace() => {}
            c => tokens.push(Token::Symbol(c)),
        }
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arity {
    pub required: u8,
    /// Accepts a leading `[...]` optional argument.
    pub optional: bool,
}

/// Required-argument counts for commands. The default list covers the
/// fraction, root, font, accent and text commands that KaTeX rejects when
/// their argument is missing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArityTable {
    entries: BTreeMap<String, Arity>,
}

const DEFAULT_ARITY: &[(&str, u8, bool)] = &[
    ("\\frac", 2, false),
    ("\\dfrac", 2, false),
    ("\\tfrac", 2, false),
    ("\\cfrac", 2, false),
    ("\\binom", 2, false),
    ("\\dbinom", 2, false),
    ("\\tbinom", 2, false),
    ("\\overset", 2, false),
    ("\\underset", 2, false),
    ("\\stackrel", 2, false),
    ("\\sqrt", 1, true),
    ("\\text", 1, false),
    ("\\textbf", 1, false),
    ("\\textit", 1, false),
    ("\\textrm", 1, false),
    ("\\mathrm", 1, false),
    ("\\mathbf", 1, false),
    ("\\mathit", 1, false),
    ("\\mathbb", 1, false),
    ("\\mathcal", 1, false),
    ("\\mathfrak", 1, false),
    ("\\mathsf", 1, false),
    ("\\mathtt", 1, false),
    ("\\boldsymbol", 1, false),
    ("\\operatorname", 1, false),
    ("\\overline", 1, false),
    ("\\underline", 1, false),
    ("\\overbrace", 1, false),
    ("\\underbrace", 1, false),
    ("\\hat", 1, false),
    ("\\widehat", 1, false),
    ("\\bar", 1, false),
    ("\\vec", 1, false),
    ("\\tilde", 1, false),
    ("\\widetilde", 1, false),
    ("\\dot", 1, false),
    ("\\ddot", 1, false),
    ("\\check", 1, false),
    ("\\breve", 1, false),
    ("\\acute", 1, false),
    ("\\grave", 1, false),
    ("\\overrightarrow", 1, false),
    ("\\overleftarrow", 1, false),
];

impl Default for ArityTable {
    fn default() -> Self {
        let entries = DEFAULT_ARITY
            .iter()
            .map(|&(name, required, optional)| (name.to_string(), Arity { required, optional }))
            .collect();
        Self { entries }
    }
}

impl ArityTable {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, command: impl Into<String>, arity: Arity) {
        let mut command = command.into();
        if !command.starts_with('\\') {
            command.insert(0, '\\');
        }
        self.entries.insert(command, arity);
    }

    pub fn get(&self, command: &str) -> Option<Arity> {
        self.entries.get(command).copied()
    }

    /// Default table with `extra` merged over it.
    pub fn with_overrides(extra: &BTreeMap<String, u8>) -> Self {
        let mut table = Self::default();
        for (name, &required) in extra {
            let optional = table.get(name).is_some_and(|a| a.optional);
            table.insert(name.clone(), Arity { required, optional });
        }
        table
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Root,
    Group,
    Environment(String),
    /// `\left ... \right` with both delimiters.
    Delimited(String, String),
    Command(String),
    Symbol(char),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub children: Vec<Node>,
}

impl Node {
    fn leaf(kind: NodeKind) -> Self {
        Self {
            kind,
            children: Vec::new(),
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            NodeKind::Root => "math".to_string(),
            NodeKind::Group => "{}".to_string(),
            NodeKind::Environment(name) => format!("env:{name}"),
            NodeKind::Delimited(l, r) => format!("lr:{l}:{r}"),
            NodeKind::Command(c) => c.clone(),
            NodeKind::Symbol(c) => c.to_string(),
        }
    }

    pub fn count(&self) -> usize {
        1 + self.children.iter().map(Node::count).sum::<usize>()
    }

    pub fn to_tree(&self) -> LabeledTree {
        LabeledTree::new(self.label(), self.children.iter().map(Node::to_tree).collect())
    }
}

/// Parsed formula: the token stream and its group/environment tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormulaExpr {
    pub tokens: Vec<Token>,
    pub root: Node,
}

impl FormulaExpr {
    pub fn node_count(&self) -> usize {
        self.root.count()
    }

    pub fn to_tree(&self) -> LabeledTree {
        self.root.to_tree()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatexError {
    /// Index into the token stream where the problem was detected.
    pub token: usize,
    pub reason: String,
}

impl fmt::Display for LatexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (token {})", self.reason, self.token)
    }
}

impl core::error::Error for LatexError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompileCheck {
    pub ok: bool,
    pub reason: Option<String>,
}

pub fn validate_latex(formula: &str) -> CompileCheck {
    validate_latex_with(formula, &ArityTable::default())
}

pub fn validate_latex_with(formula: &str, arity: &ArityTable) -> CompileCheck {
    match parse_formula_with(formula, arity) {
        Ok(_) => CompileCheck {
            ok: true,
            reason: None,
        },
        Err(e) => CompileCheck {
            ok: false,
            reason: Some(e.reason),
        },
    }
}

pub fn parse_formula(formula: &str) -> Result<FormulaExpr, LatexError> {
    parse_formula_with(formula, &ArityTable::default())
}

const DELIMITER_SYMBOLS: &[char] = &['(', ')', '[', ']', '|', '.', '/', '<', '>'];
const DELIMITER_COMMANDS: &[&str] = &[
    "\\{", "\\}", "\\|", "\\langle", "\\rangle", "\\lfloor", "\\rfloor", "\\lceil", "\\rceil",
    "\\vert", "\\Vert", "\\lvert", "\\rvert", "\\lVert", "\\rVert", "\\backslash", "\\uparrow",
    "\\downarrow", "\\updownarrow", "\\Uparrow", "\\Downarrow", "\\Updownarrow", "\\lbrace",
    "\\rbrace", "\\lbrack", "\\rbrack", "\\lgroup", "\\rgroup", "\\lmoustache", "\\rmoustache",
    "\\ulcorner", "\\urcorner", "\\llcorner", "\\lrcorner",
];

fn delimiter(token: Option<&Token>) -> Option<String> {
    match token? {
        Token::Symbol(c) if DELIMITER_SYMBOLS.contains(c) => Some(c.to_string()),
        Token::Command(c) if DELIMITER_COMMANDS.contains(&c.as_str()) => Some(c.clone()),
        _ => None,
    }
}

enum Frame {
    Root,
    Brace,
    Env(String),
    Left(String),
}

fn err<T>(token: usize, reason: impl Into<String>) -> Result<T, LatexError> {
    Err(LatexError {
        token,
        reason: reason.into(),
    })
}

/// Reads `{name}` after `\begin` / `\end`, returning the name and the index
/// after the closing brace.
fn environment_name(tokens: &[Token], at: usize) -> Result<(String, usize), LatexError> {
    if tokens.get(at) != Some(&Token::OpenBrace) {
        return err(at, "missing environment name");
    }
    let mut name = String::new();
    let mut i = at + 1;
    loop {
        match tokens.get(i) {
            Some(Token::CloseBrace) => break,
            Some(Token::Symbol(c)) => name.push(*c),
            _ => return err(i, "malformed environment name"),
        }
        i += 1;
    }
    if name.is_empty() {
        return err(at, "empty argument");
    }
    Ok((name, i + 1))
}

fn matching_brace(tokens: &[Token], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        match t {
            Token::OpenBrace => depth += 1,
            Token::CloseBrace => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Checks one argument starting at `at`; returns the index after it.
fn check_argument(tokens: &[Token], at: usize, owner: &str, allow_empty: bool) -> Result<usize, LatexError> {
    match tokens.get(at) {
        None | Some(Token::CloseBrace) => err(at, format!("missing argument for {owner}")),
        Some(Token::Symbol('&' | '^' | '_')) => err(at, format!("missing argument for {owner}")),
        Some(Token::Command(c)) if c == "\\\\" || c == "\\end" || c == "\\right" => {
            err(at, format!("missing argument for {owner}"))
        }
        Some(Token::OpenBrace) => {
            let close = match matching_brace(tokens, at) {
                Some(c) => c,
                // Reported by the structural pass.
                None => return Ok(tokens.len()),
            };
            if close == at + 1 && !allow_empty {
                return err(at, format!("empty argument for {owner}"));
            }
            Ok(close + 1)
        }
        Some(_) => Ok(at + 1),
    }
}

fn check_arguments(tokens: &[Token], arity: &ArityTable) -> Result<(), LatexError> {
    for (i, t) in tokens.iter().enumerate() {
        match t {
            Token::Command(c) if c == "\\" => return err(i, "dangling backslash"),
            Token::Command(c) => {
                let Some(a) = arity.get(c) else { continue };
                let mut j = i + 1;
                if a.optional && tokens.get(j) == Some(&Token::Symbol('[')) {
                    j = tokens[j..]
                        .iter()
                        .position(|t| *t == Token::Symbol(']'))
                        .map(|p| j + p + 1)
                        .ok_or(LatexError {
                            token: j,
                            reason: format!("unclosed optional argument for {c}"),
                        })?;
                }
                for _ in 0..a.required {
                    j = check_argument(tokens, j, c, false)?;
                }
            }
            Token::Symbol(s @ ('^' | '_')) => {
                let owner = if *s == '^' { "superscript" } else { "subscript" };
                check_argument(tokens, i + 1, owner, true)?;
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn parse_formula_with(formula: &str, arity: &ArityTable) -> Result<FormulaExpr, LatexError> {
    let tokens = tokenize(formula);
    let mut stack: Vec<(Frame, Vec<Node>)> = alloc::vec![(Frame::Root, Vec::new())];
    let mut i = 0;
    while i < tokens.len() {
        match &tokens[i] {
            Token::OpenBrace => stack.push((Frame::Brace, Vec::new())),
            Token::CloseBrace => {
                let (frame, children) = stack.pop().expect("root frame");
                match frame {
                    Frame::Brace => push_node(&mut stack, NodeKind::Group, children),
                    Frame::Root => return err(i, "unbalanced braces"),
                    Frame::Env(name) => return err(i, format!("unclosed environment {name}")),
                    Frame::Left(_) => return err(i, "\\left without matching \\right"),
                }
            }
            Token::Command(c) if c == "\\begin" => {
                let (name, next) = environment_name(&tokens, i + 1)?;
                stack.push((Frame::Env(name), Vec::new()));
                i = next;
                continue;
            }
            Token::Command(c) if c == "\\end" => {
                let (name, next) = environment_name(&tokens, i + 1)?;
                let (frame, children) = stack.pop().expect("root frame");
                match frame {
                    Frame::Env(open) if open == name => {
                        push_node(&mut stack, NodeKind::Environment(name), children)
                    }
                    Frame::Env(_) => return err(i, "environment mismatch"),
                    Frame::Root => return err(i, format!("unmatched \\end{{{name}}}")),
                    Frame::Brace => return err(i, "unclosed brace before \\end"),
                    Frame::Left(_) => return err(i, "\\left without matching \\right"),
                }
                i = next;
                continue;
            }
            Token::Command(c) if c == "\\left" => {
                let Some(d) = delimiter(tokens.get(i + 1)) else {
                    return err(i + 1, "invalid delimiter after \\left");
                };
                stack.push((Frame::Left(d), Vec::new()));
                i += 2;
                continue;
            }
            Token::Command(c) if c == "\\right" => {
                let Some(d) = delimiter(tokens.get(i + 1)) else {
                    return err(i + 1, "invalid delimiter after \\right");
                };
                let (frame, children) = stack.pop().expect("root frame");
                match frame {
                    Frame::Left(open) => push_node(&mut stack, NodeKind::Delimited(open, d), children),
                    Frame::Root => return err(i, "unmatched \\right"),
                    Frame::Brace => return err(i, "unclosed brace before \\right"),
                    Frame::Env(name) => return err(i, format!("unclosed environment {name}")),
                }
                i += 2;
                continue;
            }
            Token::Command(c) if c == "\\middle" => {
                if !stack.iter().any(|(f, _)| matches!(f, Frame::Left(_))) {
                    return err(i, "\\middle outside \\left ... \\right");
                }
                let Some(d) = delimiter(tokens.get(i + 1)) else {
                    return err(i + 1, "invalid delimiter after \\middle");
                };
                push_leaf(&mut stack, NodeKind::Command(format!("\\middle{d}")));
                i += 2;
                continue;
            }
            Token::Command(c) => push_leaf(&mut stack, NodeKind::Command(c.clone())),
            Token::Symbol(c) => push_leaf(&mut stack, NodeKind::Symbol(*c)),
        }
        i += 1;
    }
    if stack.len() > 1 {
        let reason = match &stack.last().expect("non-empty").0 {
            Frame::Brace => "unclosed brace".to_string(),
            Frame::Env(name) => format!("unclosed environment {name}"),
            Frame::Left(_) => "\\left without matching \\right".to_string(),
            Frame::Root => unreachable!(),
        };
        return err(tokens.len(), reason);
    }
    check_arguments(&tokens, arity)?;
    let (_, children) = stack.pop().expect("root frame");
    Ok(FormulaExpr {
        tokens,
        root: Node {
            kind: NodeKind::Root,
            children,
        },
    })
}

fn push_leaf(stack: &mut [(Frame, Vec<Node>)], kind: NodeKind) {
    stack.last_mut().expect("root frame").1.push(Node::leaf(kind));
}

fn push_node(stack: &mut [(Frame, Vec<Node>)], kind: NodeKind, children: Vec<Node>) {
    stack
        .last_mut()
        .expect("root frame")
        .1
        .push(Node { kind, children });
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reason(f: &str) -> String {
        validate_latex(f).reason.unwrap_or_default()
    }

    #[test]
    fn fraction_compiles() {
        assert!(validate_latex("\\frac{a}{b}").ok);
        assert!(validate_latex("\\frac12").ok);
        assert!(validate_latex("\\sqrt[3]{x}").ok);
    }

    #[test]
    fn environment_mismatch() {
        let check = validate_latex("\\begin{align} x \\end{array}");
        assert!(!check.ok);
        assert_eq!(check.reason.as_deref(), Some("environment mismatch"));
    }

    #[test]
    fn period_is_a_legal_right_delimiter() {
        assert!(validate_latex("\\left( x \\right.").ok);
        assert!(validate_latex("\\left\\{ x \\middle| y \\right\\}").ok);
    }

    #[test]
    fn structural_failures() {
        assert_eq!(reason("{a"), "unclosed brace");
        assert_eq!(reason("a}"), "unbalanced braces");
        assert_eq!(reason("\\left( x"), "\\left without matching \\right");
        assert_eq!(reason("x \\right)"), "unmatched \\right");
        assert_eq!(reason("\\left x \\right)"), "invalid delimiter after \\left");
        assert_eq!(reason("\\begin{cases} x"), "unclosed environment cases");
        assert_eq!(reason("x \\end{cases}"), "unmatched \\end{cases}");
        assert_eq!(reason("\\left( {x \\right)"), "unclosed brace before \\right");
        assert_eq!(reason("x \\"), "dangling backslash");
    }

    #[test]
    fn empty_required_arguments() {
        assert_eq!(reason("\\frac{}{b}"), "empty argument for \\frac");
        assert_eq!(reason("\\frac{a}"), "missing argument for \\frac");
        assert_eq!(reason("\\sqrt"), "missing argument for \\sqrt");
        assert_eq!(reason("x^"), "missing argument for superscript");
        assert!(validate_latex("x^{}").ok);
    }

    #[test]
    fn arity_table_is_extensible() {
        let mut table = ArityTable::default();
        assert!(validate_latex_with("\\myop{}", &table).ok);
        table.insert("myop", Arity { required: 1, optional: false });
        assert!(!validate_latex_with("\\myop{}", &table).ok);
    }

    #[test]
    fn tree_shape() {
        let f = parse_formula("\\frac{a}{b}").unwrap();
        // math, \frac, {}, a, {}, b
        assert_eq!(f.node_count(), 6);
        let env = parse_formula("\\begin{aligned} a &= b \\\\ c \\end{aligned}").unwrap();
        assert_eq!(env.root.children[0].kind, NodeKind::Environment("aligned".into()));
    }

    #[test]
    fn brackets_and_parens_need_not_balance() {
        assert!(validate_latex("x \\in [0, 1)").ok);
    }

    proptest! {
        #[test]
        fn validator_is_total(s in "[\\\\{}()\\[\\]a-z &^_%.]{0,40}") {
            let check = validate_latex(&s);
            prop_assert_eq!(check.ok, check.reason.is_none());
        }

        #[test]
        fn node_count_covers_leaf_tokens(s in "[a-z+{}]{0,30}") {
            if let Ok(f) = parse_formula(&s) {
                let leaves = f.tokens.iter().filter(|t| matches!(t, Token::Symbol(_) | Token::Command(_))).count();
                prop_assert!(f.node_count() > leaves);
            }
        }
    }
}
