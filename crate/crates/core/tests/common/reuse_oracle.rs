//! Text-level loop-carried reuse detector.
//!
//! Works on raw lines and leading spaces only. Each loop body is unrolled
//! twice; a read in the second copy is carried when no unconditional write
//! precedes it in that copy while the first copy writes the name. Element
//! reads of containers written in the body are carried unless both the
//! read and every write use the bare loop variable as index.

const KEYWORDS: &[&str] = &[
    "and", "or", "not", "in", "is", "if", "else", "elif", "for", "while", "def", "return",
    "import", "True", "False", "None", "pass", "break", "continue", "lambda",
];

#[derive(Debug, Default, Clone)]
struct Access {
    reads: Vec<(String, Option<String>)>,
    writes: Vec<(String, Option<String>)>,
}

fn indent_of(line: &str) -> usize {
    line.len() - line.trim_start_matches(' ').len()
}

fn squash(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Identifier occurrences with an optional subscript text.
fn words(expr: &str) -> Vec<(String, Option<String>)> {
    let chars: Vec<char> = expr.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '"' || c == '\'' {
            i += 1;
            while i < chars.len() && chars[i] != c {
                i += 1;
            }
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.') {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let after_dot = start > 0 && chars[start - 1] == '.';
            if after_dot || KEYWORDS.contains(&word.as_str()) {
                continue;
            }
            let mut j = i;
            while j < chars.len() && chars[j] == ' ' {
                j += 1;
            }
            if j < chars.len() && chars[j] == '[' {
                let mut depth = 0;
                let mut k = j;
                while k < chars.len() {
                    if chars[k] == '[' {
                        depth += 1;
                    } else if chars[k] == ']' {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    k += 1;
                }
                let index: String = chars[j + 1..k.min(chars.len())].iter().collect();
                out.push((word, Some(squash(&index))));
            } else {
                out.push((word, None));
            }
            continue;
        }
        i += 1;
    }
    out
}

/// Byte offset of a top-level assignment operator and its length.
fn find_assignment(stmt: &str) -> Option<(usize, usize, bool)> {
    let b = stmt.as_bytes();
    let mut depth = 0i32;
    let mut quote: Option<u8> = None;
    for i in 0..b.len() {
        let c = b[i];
        if let Some(q) = quote {
            if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            b'"' | b'\'' => quote = Some(c),
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth -= 1,
            b'=' if depth == 0 => {
                let prev = if i > 0 { b[i - 1] } else { b' ' };
                let next = b.get(i + 1).copied().unwrap_or(b' ');
                if next == b'=' || prev == b'=' {
                    continue;
                }
                if b"!<>".contains(&prev) {
                    continue;
                }
                if b"+-*/%&|^".contains(&prev) {
                    let start = if i >= 2 && (b[i - 2] == b'/' || b[i - 2] == b'*') && b[i - 2] == prev { i - 2 } else { i - 1 };
                    return Some((start, i + 1 - start, true));
                }
                return Some((i, 1, false));
            }
            _ => {}
        }
    }
    None
}

fn access_of(stmt: &str) -> Access {
    let s = stmt.trim();
    let mut acc = Access::default();
    if let Some(rest) = s.strip_prefix("for ") {
        let (vars, iter) = rest.split_once(" in ").unwrap_or((rest, ""));
        for v in vars.split(',') {
            acc.writes.push((v.trim().to_string(), None));
        }
        acc.reads = words(iter.trim_end_matches(':'));
        return acc;
    }
    let first_word = s.split(|c: char| !c.is_ascii_alphanumeric() && c != '_').next().unwrap_or("");
    if KEYWORDS.contains(&first_word) {
        acc.reads = words(&s[first_word.len()..]);
        return acc;
    }
    match find_assignment(s) {
        None => acc.reads = words(s),
        Some((at, len, augmented)) => {
            let lhs = &s[..at];
            let rhs = &s[at + len..];
            let targets = words(lhs);
            let mut reads = words(rhs);
            if augmented {
                reads.extend(targets.iter().cloned());
            }
            // names inside a subscript target are reads
            if let Some(open) = lhs.find('[') {
                reads.extend(words(&lhs[open + 1..lhs.rfind(']').unwrap_or(lhs.len())]));
            }
            acc.reads = reads;
            if let Some(first) = targets.into_iter().next() {
                acc.writes.push(first);
            }
        }
    }
    acc
}

/// Per-loop verdicts (`true` = something is carried) in source order.
pub fn loop_verdicts(source: &str) -> Vec<bool> {
    let lines: Vec<&str> = source
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .collect();
    let mut verdicts = Vec::new();
    for (h, header) in lines.iter().enumerate() {
        if !header.trim_start().starts_with("for ") {
            continue;
        }
        let hi = indent_of(header);
        let loop_vars: Vec<String> = access_of(header).writes.into_iter().map(|(n, _)| n).collect();
        let mut body: Vec<(bool, Access)> = Vec::new();
        let mut body_indent = None;
        let mut skip_above: Option<usize> = None;
        for line in &lines[h + 1..] {
            let ind = indent_of(line);
            if ind <= hi {
                break;
            }
            let bi = *body_indent.get_or_insert(ind);
            if let Some(d) = skip_above {
                if ind > d {
                    continue;
                }
                skip_above = None;
            }
            if line.trim_start().starts_with("def ") {
                skip_above = Some(ind);
                continue;
            }
            let is_for = line.trim_start().starts_with("for ");
            body.push((ind == bi || is_for, access_of(line)));
        }

        let mut carried = false;
        // second copy of the unrolled body
        for (p, (_, acc)) in body.iter().enumerate() {
            for (name, _) in &acc.reads {
                if loop_vars.contains(name) {
                    continue;
                }
                let defined_before = body[..p]
                    .iter()
                    .any(|(definite, a)| *definite && a.writes.iter().any(|(w, ix)| w == name && ix.is_none()));
                let first_copy_writes = body
                    .iter()
                    .any(|(_, a)| a.writes.iter().any(|(w, ix)| w == name && ix.is_none()));
                if !defined_before && first_copy_writes {
                    carried = true;
                }
            }
        }
        let element_writes: Vec<(&String, &String)> = body
            .iter()
            .flat_map(|(_, a)| a.writes.iter())
            .filter_map(|(n, ix)| ix.as_ref().map(|ix| (n, ix)))
            .collect();
        for (_, acc) in &body {
            for (name, index) in &acc.reads {
                let writes: Vec<&&String> = element_writes.iter().filter(|(n, _)| *n == name).map(|(_, ix)| ix).collect();
                if writes.is_empty() {
                    continue;
                }
                let read_same = index.as_ref().is_some_and(|ix| loop_vars.contains(ix));
                let writes_same = writes.iter().all(|ix| loop_vars.contains(**ix));
                if !(read_same && writes_same) {
                    carried = true;
                }
            }
        }
        verdicts.push(carried);
    }
    verdicts
}

pub fn has_carried_reuse(source: &str) -> bool {
    loop_verdicts(source).into_iter().any(|c| c)
}
