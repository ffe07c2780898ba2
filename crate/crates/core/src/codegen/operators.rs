use std::collections::BTreeSet;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::Rng;

use super::features::assignment_targets;
use super::{CodegenError, Program};
use crate::lang::{tokenize_lenient, TokenKind};

/// Offset added after shifting fitnesses so the minimum keeps a small
/// positive selection weight.
pub const ROULETTE_EPSILON: f64 = 1e-6;

/// Swaps the line block `a[a_range]` with `b[b_range]`.
pub fn splice(
    a: &Program,
    b: &Program,
    a_range: std::ops::Range<usize>,
    b_range: std::ops::Range<usize>,
) -> (Program, Program) {
    let la: Vec<&str> = a.source.lines().collect();
    let lb: Vec<&str> = b.source.lines().collect();
    let child = |head: &[&str], mid: &[&str], tail: &[&str], label| {
        let mut lines: Vec<&str> = Vec::with_capacity(head.len() + mid.len() + tail.len());
        lines.extend_from_slice(head);
        lines.extend_from_slice(mid);
        lines.extend_from_slice(tail);
        let mut s = lines.join("\n");
        s.push('\n');
        Program::new(s, label)
    };
    let c1 = child(&la[..a_range.start], &lb[b_range.clone()], &la[a_range.end..], a.label);
    let c2 = child(&lb[..b_range.start], &la[a_range.clone()], &lb[b_range.end..], b.label);
    (c1, c2)
}

fn random_block<R: Rng>(len: usize, rng: &mut R) -> std::ops::Range<usize> {
    let start = rng.gen_range(0..len);
    let end = rng.gen_range(start + 1..=len);
    start..end
}

/// Exchanges one contiguous block of whole lines between the parents,
/// with block boundaries drawn independently in each parent.
pub fn crossover_lines<R: Rng>(a: &Program, b: &Program, rng: &mut R) -> (Program, Program) {
    debug_assert_eq!(a.label, b.label);
    if a.line_count <= 1 || b.line_count <= 1 {
        return (a.clone(), b.clone());
    }
    let ra = random_block(a.line_count, rng);
    let rb = random_block(b.line_count, rng);
    splice(a, b, ra, rb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mutation {
    Rename,
    Literal,
    InsertPrint,
}

fn replace_at(line: &str, col: usize, old_len: usize, new: &str) -> String {
    let chars: Vec<char> = line.chars().collect();
    let start = col - 1;
    let mut out: String = chars[..start].iter().collect();
    out.push_str(new);
    out.extend(chars[start + old_len..].iter());
    out
}

/// Applies one edit drawn uniformly from the applicable kinds: consistent
/// renaming of an assigned variable, replacing a numeric literal, or
/// inserting a module-level `print`. None of them changes what any loop
/// body reads or writes, so the class invariant is preserved.
pub fn mutate_program<R: Rng>(p: &Program, rng: &mut R) -> Program {
    let tokens = tokenize_lenient(&p.source);
    let targets: Vec<String> = assignment_targets(&tokens).into_iter().collect();
    let numbers: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.kind == TokenKind::Number)
        .map(|(i, _)| i)
        .collect();

    let mut kinds = Vec::with_capacity(3);
    if !targets.is_empty() {
        kinds.push(Mutation::Rename);
    }
    if !numbers.is_empty() {
        kinds.push(Mutation::Literal);
    }
    let lines: Vec<&str> = p.source.lines().collect();
    let insert_sites: Vec<usize> = (0..=lines.len())
        .filter(|&i| {
            i == lines.len() || {
                let l = lines[i];
                let trimmed = l.trim_start();
                l.len() == trimmed.len()
                    && !trimmed.is_empty()
                    && !["else", "elif", "except", "finally"].iter().any(|k| {
                        trimmed.starts_with(k)
                            && !trimmed[k.len()..].starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_')
                    })
            }
        })
        .collect();
    if !insert_sites.is_empty() {
        kinds.push(Mutation::InsertPrint);
    }
    if kinds.is_empty() {
        return p.clone();
    }

    let mut lines: Vec<String> = lines.into_iter().map(str::to_string).collect();
    match kinds[rng.gen_range(0..kinds.len())] {
        Mutation::Rename => {
            let old = &targets[rng.gen_range(0..targets.len())];
            let existing: BTreeSet<&str> = tokens
                .iter()
                .filter(|t| t.kind == TokenKind::Identifier)
                .map(|t| t.text.as_str())
                .collect();
            let fresh = loop {
                let candidate = format!("v{}", rng.gen_range(0..10_000));
                if !existing.contains(candidate.as_str()) {
                    break candidate;
                }
            };
            // right to left so earlier columns stay valid
            let mut sites: Vec<(usize, usize)> = tokens
                .iter()
                .enumerate()
                .filter(|(i, t)| {
                    t.kind == TokenKind::Identifier && &t.text == old && !(*i > 0 && tokens[i - 1].is_op("."))
                })
                .map(|(_, t)| (t.line, t.col))
                .collect();
            sites.sort_unstable_by(|a, b| b.cmp(a));
            for (line, col) in sites {
                let l = &mut lines[line - 1];
                *l = replace_at(l, col, old.chars().count(), &fresh);
            }
        }
        Mutation::Literal => {
            let tok = &tokens[numbers[rng.gen_range(0..numbers.len())]];
            let mut value = rng.gen_range(1..=99).to_string();
            if value == tok.text {
                value = (rng.gen_range(1..=98) + 100).to_string();
            }
            let l = &mut lines[tok.line - 1];
            *l = replace_at(l, tok.col, tok.text.chars().count(), &value);
        }
        Mutation::InsertPrint => {
            let at = insert_sites[rng.gen_range(0..insert_sites.len())];
            let arg = if targets.is_empty() {
                rng.gen_range(0..100).to_string()
            } else {
                targets[rng.gen_range(0..targets.len())].clone()
            };
            lines.insert(at, format!("print({arg})"));
        }
    }
    let mut source = lines.join("\n");
    source.push('\n');
    Program::new(source, p.label)
}

/// Samples `k` individuals with replacement, with probability proportional
/// to `f - min(f) + ROULETTE_EPSILON`.
pub fn roulette_select<R: Rng>(
    pop: &[Program],
    fitnesses: &[i32],
    k: usize,
    rng: &mut R,
) -> Result<Vec<Program>, CodegenError> {
    Ok(roulette_indices(fitnesses, k, rng)?
        .into_iter()
        .map(|i| pop[i].clone())
        .collect())
}

/// Index form of [`roulette_select`].
pub fn roulette_indices<R: Rng>(fitnesses: &[i32], k: usize, rng: &mut R) -> Result<Vec<usize>, CodegenError> {
    let min = *fitnesses.iter().min().ok_or(CodegenError::EmptyPopulation)?;
    let weights = fitnesses.iter().map(|&f| (f - min) as f64 + ROULETTE_EPSILON);
    let dist = WeightedIndex::new(weights).map_err(|_| CodegenError::EmptyPopulation)?;
    Ok((0..k).map(|_| dist.sample(rng)).collect())
}
