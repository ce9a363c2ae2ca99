use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::keys;
use crate::config::EngineConfig;
use crate::corpus::SampleRecord;
use crate::markup::latex::{validate_latex_with, ArityTable};
use crate::markup::{parse_markdown, strip_document, Block};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    Blank,
    Gibberish,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Blank => "blank",
            RejectReason::Gibberish => "gibberish",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum L1Outcome {
    Forward,
    /// The reference failed structural checks and is no longer trusted.
    ForwardUnlabeled { issues: Vec<&'static str> },
    Reject(RejectReason),
}

impl L1Outcome {
    pub(crate) fn record(&self, evidence: &mut BTreeMap<String, f64>) {
        match self {
            L1Outcome::Reject(RejectReason::Blank) => {
                evidence.insert(keys::L1_BLANK.into(), 1.0);
            }
            L1Outcome::Reject(RejectReason::Gibberish) => {
                evidence.insert(keys::L1_GIBBERISH.into(), 1.0);
            }
            L1Outcome::ForwardUnlabeled { .. } => {
                evidence.insert(keys::L1_STRUCTURAL_PASS.into(), 0.0);
                evidence.insert(keys::REFERENCE_STRIPPED.into(), 1.0);
            }
            L1Outcome::Forward => {}
        }
    }
}

fn is_gibberish(markdown: &str, config: &EngineConfig) -> bool {
    let plain = strip_document(&parse_markdown(markdown));
    if plain.chars().count() <= config.filter.gibberish_min_chars {
        return false;
    }
    let visible: Vec<char> = plain.chars().filter(|c| !c.is_whitespace()).collect();
    let alnum = visible.iter().filter(|c| c.is_alphanumeric()).count();
    (alnum as f64) < config.filter.gibberish_alnum_ratio * visible.len() as f64
}

/// Structural defects of an annotation: malformed HTML tables, formulas
/// failing validation, an odd number of `$$`, and unbalanced table tags.
pub fn reference_issues(markdown: &str, arity: &ArityTable) -> Vec<&'static str> {
    let doc = parse_markdown(markdown);
    let mut issues = Vec::new();
    if doc.blocks.iter().any(|b| matches!(b, Block::Table { grid: Err(_), .. })) {
        issues.push("table-malformed");
    }
    if doc.formulas().iter().any(|f| !validate_latex_with(f, arity).ok) {
        issues.push("latex-invalid");
    }
    let outside_code: String = doc
        .blocks
        .iter()
        .filter(|b| !matches!(b, Block::Code { .. }))
        .map(|b| {
            let mut one = crate::markup::MarkdownDoc::default();
            one.blocks.push(b.clone());
            one.to_markdown()
        })
        .collect::<Vec<_>>()
        .join("\n");
    if outside_code.matches("$$").count() % 2 == 1 {
        issues.push("math-unclosed");
    }
    let lower = outside_code.to_ascii_lowercase();
    let unbalanced = crate::rewards::CLOSURE_TAGS.iter().any(|tag| {
        let open = lower.matches(&alloc::format!("<{tag}>")).count()
            + lower.matches(&alloc::format!("<{tag} ")).count();
        let close = lower.matches(&alloc::format!("</{tag}>")).count();
        open != close
    });
    if unbalanced {
        issues.push("tag-unbalanced");
    }
    issues
}

/// Rejects pages whose candidates are all blank or all gibberish, and
/// downgrades samples whose reference is structurally broken.
pub fn l1_filter(sample: &SampleRecord, config: &EngineConfig) -> L1Outcome {
    let blank = |m: &str| m.trim().is_empty();
    if sample.candidates.iter().all(|c| blank(&c.markdown)) {
        return L1Outcome::Reject(RejectReason::Blank);
    }
    if sample
        .candidates
        .iter()
        .all(|c| blank(&c.markdown) || is_gibberish(&c.markdown, config))
    {
        return L1Outcome::Reject(RejectReason::Gibberish);
    }
    if let Some(reference) = &sample.reference {
        let issues = reference_issues(&reference.markdown, &super::arity_table(config));
        if !issues.is_empty() {
            return L1Outcome::ForwardUnlabeled { issues };
        }
    }
    L1Outcome::Forward
}
