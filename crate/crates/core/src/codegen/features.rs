use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::lang::{tokenize_lenient, Token, TokenKind};

/// Structural quantities the fitness function scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StructuralCounts {
    pub imports: usize,
    pub defs: usize,
    pub ifs: usize,
    pub prints: usize,
    pub variables: usize,
    pub fors: usize,
    pub lines: usize,
}

/// Per-feature scores and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitnessBreakdown {
    pub s1: i32,
    pub s2: i32,
    pub s3: i32,
    pub s4: i32,
    pub s5: i32,
    pub s6: i32,
    pub s7: i32,
    pub s_comp: i32,
    pub total: i32,
}

pub const MAX_FITNESS: i32 = 8;
pub const MIN_FITNESS: i32 = -16;

const AUG_OPS: &[&str] = &["+=", "-=", "*=", "/=", "//=", "%=", "**=", "&=", "|=", "^=", ">>=", "<<="];

/// Counts features from tokens, so `printx` is not a print and keywords
/// inside string literals are ignored. Works on unparseable text.
pub fn count_features(source: &str) -> StructuralCounts {
    let tokens = tokenize_lenient(source);
    let mut counts = StructuralCounts {
        lines: source.lines().count(),
        ..Default::default()
    };
    for (i, tok) in tokens.iter().enumerate() {
        match tok.kind {
            TokenKind::Keyword => match tok.text.as_str() {
                "import" => counts.imports += 1,
                "def" => counts.defs += 1,
                "if" => counts.ifs += 1,
                "for" => counts.fors += 1,
                _ => {}
            },
            TokenKind::Identifier if tok.text == "print" => {
                let called = tokens.get(i + 1).is_some_and(|t| t.is_op("("));
                let attribute = i > 0 && tokens[i - 1].is_op(".");
                if called && !attribute {
                    counts.prints += 1;
                }
            }
            _ => {}
        }
    }
    counts.variables = assignment_targets(&tokens).len();
    counts
}

/// Distinct identifiers bound by plain or augmented assignment, or by a
/// `for` header.
pub fn assignment_targets(tokens: &[Token]) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    let mut stmt_start = true;
    for (i, tok) in tokens.iter().enumerate() {
        match tok.kind {
            TokenKind::Newline | TokenKind::Indent | TokenKind::Dedent => {
                stmt_start = true;
                continue;
            }
            _ => {}
        }
        if tok.is_op(";") {
            stmt_start = true;
            continue;
        }
        if tok.is_keyword("for") {
            let mut j = i + 1;
            while let Some(t) = tokens.get(j) {
                if t.is_keyword("in") || t.kind == TokenKind::Newline {
                    break;
                }
                if t.kind == TokenKind::Identifier {
                    names.insert(t.text.clone());
                }
                j += 1;
            }
        } else if stmt_start && tok.kind == TokenKind::Identifier {
            // chained targets: a = b = expr
            let mut j = i;
            while let (Some(name), Some(op)) = (tokens.get(j), tokens.get(j + 1)) {
                if name.kind != TokenKind::Identifier {
                    break;
                }
                let plain = op.is_op("=");
                let aug = op.kind == TokenKind::Operator && AUG_OPS.contains(&op.text.as_str());
                if !(plain || aug) {
                    break;
                }
                names.insert(name.text.clone());
                if aug {
                    break;
                }
                j += 2;
            }
        }
        stmt_start = false;
    }
    names
}

fn within(value: usize, lo: usize, hi: usize) -> bool {
    (lo..=hi).contains(&value)
}

fn bounded(value: usize, lo: usize, hi: usize, penalty: i32) -> i32 {
    if within(value, lo, hi) {
        1
    } else {
        penalty
    }
}

/// Scores counts and the compile verdict; bounds are inclusive.
pub fn score_fitness(c: &StructuralCounts, compiles: bool) -> FitnessBreakdown {
    let s1 = bounded(c.imports, 1, 12, -1);
    let s2 = bounded(c.defs, 2, 8, -1);
    let s3 = bounded(c.ifs, 2, 8, -1);
    let s4 = bounded(c.prints, 2, 8, -1);
    let s5 = bounded(c.variables, 2, 100, -1);
    let s6 = bounded(c.fors, 1, 6, -5);
    let s7 = bounded(c.lines, 10, 150, -1);
    let s_comp = if compiles { 1 } else { -5 };
    FitnessBreakdown {
        s1,
        s2,
        s3,
        s4,
        s5,
        s6,
        s7,
        s_comp,
        total: s1 + s2 + s3 + s4 + s5 + s6 + s7 + s_comp,
    }
}
