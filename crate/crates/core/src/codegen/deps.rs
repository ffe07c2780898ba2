//! Static loop-carried reuse detection.
//!
//! A variable is carried by a loop when some iteration may read a value
//! written by an earlier iteration. Scalars are carried when they are
//! written somewhere in the body and read before any unconditional write
//! in the same iteration. Subscripted containers are carried when they are
//! written in the body and read at any index other than the bare loop
//! variable (or written at such an index and read at all).

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::lang::{tokenize_lenient, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopReport {
    /// 1-based source line of the `for` header.
    pub line: usize,
    pub loop_vars: Vec<String>,
    /// Names carried across iterations, sorted.
    pub carried: Vec<String>,
}

struct LogicalLine {
    depth: usize,
    tokens: Vec<Token>,
}

fn logical_lines(source: &str) -> Vec<LogicalLine> {
    let mut lines = Vec::new();
    let mut depth = 0usize;
    let mut current: Vec<Token> = Vec::new();
    for tok in tokenize_lenient(source) {
        match tok.kind {
            TokenKind::Indent => depth += 1,
            TokenKind::Dedent => depth = depth.saturating_sub(1),
            TokenKind::Newline => {
                if !current.is_empty() {
                    lines.push(LogicalLine { depth, tokens: std::mem::take(&mut current) });
                }
            }
            _ => current.push(tok),
        }
    }
    if !current.is_empty() {
        lines.push(LogicalLine { depth, tokens: current });
    }
    lines
}

#[derive(Default, Debug)]
struct Effects {
    scalar_reads: Vec<String>,
    scalar_writes: Vec<String>,
    /// (name, index text) for subscript reads; index `None` means a bare read.
    container_reads: Vec<(String, Option<String>)>,
    container_writes: Vec<(String, String)>,
}

const AUG_OPS: &[&str] = &["+=", "-=", "*=", "/=", "//=", "%=", "**=", "&=", "|=", "^=", ">>=", "<<="];

fn matching_bracket(tokens: &[Token], open: usize) -> usize {
    let mut level = 0i32;
    for (j, t) in tokens.iter().enumerate().skip(open) {
        if t.is_op("[") || t.is_op("(") || t.is_op("{") {
            level += 1;
        } else if t.is_op("]") || t.is_op(")") || t.is_op("}") {
            level -= 1;
            if level == 0 {
                return j;
            }
        }
    }
    tokens.len()
}

fn join_text(tokens: &[Token]) -> String {
    tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ")
}

/// Collects reads in an expression token range.
fn collect_reads(tokens: &[Token], fx: &mut Effects) {
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        if t.kind == TokenKind::Identifier && !(i > 0 && tokens[i - 1].is_op(".")) {
            if tokens.get(i + 1).is_some_and(|n| n.is_op("[")) {
                let close = matching_bracket(tokens, i + 1);
                let index = join_text(&tokens[i + 2..close.min(tokens.len())]);
                fx.container_reads.push((t.text.clone(), Some(index)));
            } else {
                fx.container_reads.push((t.text.clone(), None));
            }
            fx.scalar_reads.push(t.text.clone());
        }
        i += 1;
    }
}

fn line_effects(tokens: &[Token]) -> Effects {
    let mut fx = Effects::default();
    let Some(first) = tokens.first() else { return fx };

    if first.is_keyword("for") {
        let in_at = tokens.iter().position(|t| t.is_keyword("in")).unwrap_or(tokens.len());
        let end = tokens.iter().rposition(|t| t.is_op(":")).filter(|&c| c > in_at).unwrap_or(tokens.len());
        for t in &tokens[1..in_at] {
            if t.kind == TokenKind::Identifier {
                fx.scalar_writes.push(t.text.clone());
            }
        }
        if in_at < end {
            collect_reads(&tokens[in_at + 1..end], &mut fx);
        }
        return fx;
    }
    if first.kind == TokenKind::Keyword && !matches!(first.text.as_str(), "True" | "False" | "None" | "not") {
        collect_reads(&tokens[1..], &mut fx);
        return fx;
    }

    // Top-level assignment operator, if any.
    let mut level = 0i32;
    let mut assigns: Vec<usize> = Vec::new();
    let mut aug: Option<usize> = None;
    for (j, t) in tokens.iter().enumerate() {
        if t.is_op("(") || t.is_op("[") || t.is_op("{") {
            level += 1;
        } else if t.is_op(")") || t.is_op("]") || t.is_op("}") {
            level -= 1;
        } else if level == 0 && t.is_op("=") {
            assigns.push(j);
        } else if level == 0 && t.kind == TokenKind::Operator && AUG_OPS.contains(&t.text.as_str()) && aug.is_none() {
            aug = Some(j);
        }
    }

    if let Some(op) = aug {
        let target = &tokens[..op];
        // the target is read before being written
        collect_reads(target, &mut fx);
        collect_reads(&tokens[op + 1..], &mut fx);
        write_target(target, &mut fx);
        return fx;
    }
    if assigns.is_empty() {
        collect_reads(tokens, &mut fx);
        return fx;
    }
    let rhs_start = assigns.last().unwrap() + 1;
    collect_reads(&tokens[rhs_start..], &mut fx);
    let mut start = 0;
    for &eq in &assigns {
        write_target(&tokens[start..eq], &mut fx);
        start = eq + 1;
    }
    fx
}

fn write_target(target: &[Token], fx: &mut Effects) {
    // split tuple targets on top-level commas
    let mut level = 0i32;
    let mut parts: Vec<&[Token]> = Vec::new();
    let mut from = 0;
    for (j, t) in target.iter().enumerate() {
        if t.is_op("(") || t.is_op("[") {
            level += 1;
        } else if t.is_op(")") || t.is_op("]") {
            level -= 1;
        } else if level == 0 && t.is_op(",") {
            parts.push(&target[from..j]);
            from = j + 1;
        }
    }
    parts.push(&target[from..]);
    for part in parts {
        match part {
            [name] if name.kind == TokenKind::Identifier => fx.scalar_writes.push(name.text.clone()),
            [name, open, ..] if name.kind == TokenKind::Identifier && open.is_op("[") => {
                let close = matching_bracket(part, 1);
                let index_tokens = &part[2..close.min(part.len())];
                collect_reads(index_tokens, fx);
                fx.container_writes.push((name.text.clone(), join_text(index_tokens)));
            }
            _ => collect_reads(part, fx),
        }
    }
}

/// Analyzes every `for` loop in `source`, including loops nested in
/// other loops, functions or conditionals.
pub fn analyze_loops(source: &str) -> Vec<LoopReport> {
    let lines = logical_lines(source);
    let mut reports = Vec::new();
    for (h, header) in lines.iter().enumerate() {
        if !header.tokens[0].is_keyword("for") {
            continue;
        }
        let header_fx = line_effects(&header.tokens);
        let loop_vars = header_fx.scalar_writes.clone();
        let body_end = lines[h + 1..]
            .iter()
            .position(|l| l.depth <= header.depth)
            .map_or(lines.len(), |p| h + 1 + p);
        let body = &lines[h + 1..body_end];
        let carried = carried_names(body, header.depth + 1, &loop_vars);
        reports.push(LoopReport {
            line: header.tokens[0].line,
            loop_vars,
            carried: carried.into_iter().collect(),
        });
    }
    reports
}

fn carried_names(body: &[LogicalLine], top_depth: usize, loop_vars: &[String]) -> BTreeSet<String> {
    // Body lines in scope order, skipping nested function bodies.
    let mut scoped: Vec<(&LogicalLine, Effects)> = Vec::new();
    let mut skip_deeper_than: Option<usize> = None;
    for line in body {
        if let Some(d) = skip_deeper_than {
            if line.depth > d {
                continue;
            }
            skip_deeper_than = None;
        }
        if line.tokens[0].is_keyword("def") {
            skip_deeper_than = Some(line.depth);
            continue;
        }
        scoped.push((line, line_effects(&line.tokens)));
    }

    let written: HashSet<&str> = scoped
        .iter()
        .flat_map(|(_, fx)| fx.scalar_writes.iter().map(String::as_str))
        .collect();
    let mut container_writes: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (_, fx) in &scoped {
        for (name, index) in &fx.container_writes {
            container_writes.entry(name).or_default().push(index);
        }
    }

    let mut carried = BTreeSet::new();
    let mut definite: HashSet<&str> = loop_vars.iter().map(String::as_str).collect();
    for (line, fx) in &scoped {
        for r in &fx.scalar_reads {
            if written.contains(r.as_str()) && !definite.contains(r.as_str()) {
                carried.insert(r.clone());
            }
        }
        if line.depth == top_depth || line.tokens[0].is_keyword("for") {
            for w in &fx.scalar_writes {
                definite.insert(w);
            }
        }
    }

    for (name, write_indices) in &container_writes {
        let writes_elsewhere = write_indices.iter().any(|ix| !loop_vars.iter().any(|v| v == ix));
        for (_, fx) in &scoped {
            for (read_name, read_index) in &fx.container_reads {
                if read_name != name {
                    continue;
                }
                let same_cell = read_index
                    .as_deref()
                    .is_some_and(|ix| loop_vars.iter().any(|v| v == ix));
                if !same_cell || writes_elsewhere {
                    carried.insert(name.to_string());
                }
            }
        }
    }
    carried
}

/// Number of (loop, variable) pairs with loop-carried reuse.
pub fn carried_reuse_count(source: &str) -> usize {
    analyze_loops(source).iter().map(|r| r.carried.len()).sum()
}
