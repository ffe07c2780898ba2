//! Random program construction from the restricted grammar.
//!
//! Both classes share every construct except loops. Independent loop bodies
//! only write the current element or a temporary assigned earlier in the
//! same iteration. Every statement of an ambiguous loop body is an
//! accumulator update, a coupled pair or a shifted-index read.
//!
//! Programs open with a module-level block holding all loops, followed by
//! the imports, the function definitions and the module-level calls.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{ClassLabel, Program};

const MODULES: &[&str] = &[
    "math", "random", "os", "sys", "time", "json", "itertools", "functools", "collections",
    "statistics", "string", "re", "datetime", "copy", "heapq", "bisect",
];
const FUNCTIONS: &[&str] = &[
    "compute", "scale", "process", "update", "merge", "combine", "transform", "evaluate",
    "collect", "adjust", "measure", "blend",
];
const PARAMS: &[&str] = &["a", "b", "x", "y", "n", "m", "p", "q"];
const SCALARS: &[&str] = &[
    "val", "res", "count", "score", "level", "step", "delta", "offset", "factor", "value", "limit",
    "ratio",
];
/// Per-iteration temporaries of independent loops.
const ELEMENTS: &[&str] = &["elem", "item", "cell", "part", "piece", "entry"];
/// Cross-iteration state of ambiguous loops.
const CARRIED: &[&str] = &["acc", "total", "running", "prev", "cur", "carry", "state", "memo"];
const SEQUENCES: &[&str] = &["data", "values", "items", "nums", "samples", "weights", "series", "points"];
const OUTPUTS: &[&str] = &["out", "result", "scaled", "squares", "buffer", "output", "mapped", "table"];
const LOOP_VARS: &[&str] = &["i", "j", "k", "idx"];
const WORDS: &[&str] = &["start", "done", "value", "result", "total", "check", "step", "end"];
const ARITH: &[&str] = &["+", "-", "*"];
const COMPARE: &[&str] = &[">", "<", ">=", "<=", "==", "!="];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Construct {
    If,
    Print,
}

struct Scope {
    indent: usize,
    vars: Vec<String>,
}

struct Builder<'r, R: Rng> {
    rng: &'r mut R,
    class: ClassLabel,
    used: HashSet<String>,
    lines: Vec<String>,
}

impl<'r, R: Rng> Builder<'r, R> {
    fn pick<'a>(&mut self, pool: &'a [&'a str]) -> &'a str {
        pool.choose(self.rng).expect("non-empty pool")
    }

    fn fresh(&mut self, pool: &[&str]) -> String {
        let base = self.pick(pool).to_string();
        let mut name = base.clone();
        let mut n = 1;
        while self.used.contains(&name) {
            name = format!("{base}_{n}");
            n += 1;
        }
        self.used.insert(name.clone());
        name
    }

    fn lit(&mut self) -> String {
        self.rng.gen_range(1..=9).to_string()
    }

    fn emit(&mut self, indent: usize, text: String) {
        self.lines.push(format!("{}{}", " ".repeat(indent), text));
    }

    fn operand(&mut self, scope: &Scope) -> String {
        if !scope.vars.is_empty() && self.rng.gen_bool(0.7) {
            scope.vars.choose(self.rng).unwrap().clone()
        } else {
            self.lit()
        }
    }

    fn ensure_var(&mut self, scope: &mut Scope) -> String {
        if let Some(v) = scope.vars.choose(self.rng) {
            return v.clone();
        }
        let v = self.fresh(SCALARS);
        let l = self.lit();
        self.emit(scope.indent, format!("{v} = {l}"));
        scope.vars.push(v.clone());
        v
    }

    fn emit_print(&mut self, scope: &mut Scope) {
        let line = match self.rng.gen_range(0..3) {
            0 => {
                let v = self.ensure_var(scope);
                format!("print({v})")
            }
            1 => {
                let v = self.ensure_var(scope);
                let w = self.pick(WORDS);
                format!("print(\"{w}\", {v})")
            }
            _ => {
                let w = self.pick(WORDS);
                format!("print(\"{w}\")")
            }
        };
        self.emit(scope.indent, line);
    }

    fn emit_if(&mut self, scope: &mut Scope) {
        let v = self.ensure_var(scope);
        let cmp = self.pick(COMPARE);
        let l = self.lit();
        self.emit(scope.indent, format!("if {v} {cmp} {l}:"));
        let target = self.fresh(SCALARS);
        let op = self.pick(ARITH);
        let rhs = self.operand(scope);
        self.emit(scope.indent + 4, format!("{target} = {v} {op} {rhs}"));
        if self.rng.gen_bool(0.5) {
            self.emit(scope.indent, "else:".to_string());
            let op = self.pick(ARITH);
            let l = self.lit();
            self.emit(scope.indent + 4, format!("{target} = {v} {op} {l}"));
        }
        scope.vars.push(target);
    }

    fn emit_for(&mut self, scope: &mut Scope) {
        let ind = scope.indent;
        let body = ind + 4;
        let len = self.rng.gen_range(3..=8);
        let data = self.fresh(SEQUENCES);
        if self.rng.gen_bool(0.5) {
            let items: Vec<String> = (0..len).map(|_| self.rng.gen_range(0..=20).to_string()).collect();
            self.emit(ind, format!("{data} = [{}]", items.join(", ")));
        } else {
            self.emit(ind, format!("{data} = list(range({len}))"));
        }
        let out = self.fresh(OUTPUTS);
        self.emit(ind, format!("{out} = [0] * {len}"));
        let iv = self.pick(LOOP_VARS).to_string();
        let header = if self.rng.gen_bool(0.5) {
            format!("for {iv} in range({len}):")
        } else {
            format!("for {iv} in range(len({data})):")
        };

        let mut setup: Vec<String> = Vec::new();
        let mut stmts: Vec<Vec<String>> = Vec::new();
        match self.class {
            ClassLabel::Independent => {
                for _ in 0..self.rng.gen_range(4..=6) {
                    stmts.push(self.independent_stmt(&data, &out, &iv));
                }
            }
            ClassLabel::Ambiguous => {
                for _ in 0..self.rng.gen_range(4..=6) {
                    stmts.push(self.dependent_stmt(&data, &out, &iv, &mut setup));
                }
            }
        }
        for s in setup {
            self.emit(ind, s);
        }
        self.emit(ind, header);
        for s in stmts.into_iter().flatten() {
            self.emit(body, s);
        }
        scope.vars.push(out);
    }

    fn independent_stmt(&mut self, data: &str, out: &str, iv: &str) -> Vec<String> {
        match self.rng.gen_range(0..4) {
            0 => {
                let op = self.pick(ARITH);
                let l = self.lit();
                vec![format!("{out}[{iv}] = {data}[{iv}] {op} {l}")]
            }
            1 => {
                let tmp = self.fresh(ELEMENTS);
                let (op1, l1) = (self.pick(ARITH), self.lit());
                let (op2, l2) = (self.pick(ARITH), self.lit());
                vec![
                    format!("{tmp} = {data}[{iv}] {op1} {l1}"),
                    format!("{out}[{iv}] = {tmp} {op2} {l2}"),
                ]
            }
            2 => vec![format!("{out}[{iv}] = {data}[{iv}] * {data}[{iv}]")],
            _ => {
                let tmp = self.fresh(ELEMENTS);
                let l = self.lit();
                vec![
                    format!("{tmp} = {iv} * {l}"),
                    format!("{out}[{iv}] = {tmp} + {data}[{iv}]"),
                ]
            }
        }
    }

    fn dependent_stmt(&mut self, data: &str, out: &str, iv: &str, setup: &mut Vec<String>) -> Vec<String> {
        match self.rng.gen_range(0..5) {
            0 => {
                let acc = self.fresh(CARRIED);
                setup.push(format!("{acc} = 0"));
                vec![format!("{acc} = {acc} + {data}[{iv}]")]
            }
            1 => {
                let acc = self.fresh(CARRIED);
                let (l0, l1) = (self.lit(), self.lit());
                setup.push(format!("{acc} = {l0}"));
                vec![format!("{acc} += {data}[{iv}] * {l1}")]
            }
            2 => {
                let prev = self.fresh(CARRIED);
                let cur = self.fresh(CARRIED);
                setup.push(format!("{prev} = 0"));
                setup.push(format!("{cur} = 1"));
                vec![format!("{prev} = {cur}"), format!("{cur} = {prev} + {data}[{iv}]")]
            }
            3 => vec![format!("{out}[{iv}] = {out}[{iv} - 1] + {data}[{iv}]")],
            _ => {
                let acc = self.fresh(CARRIED);
                let tmp = self.fresh(CARRIED);
                let l = self.lit();
                setup.push(format!("{acc} = 1"));
                vec![format!("{tmp} = {data}[{iv}] + {acc}"), format!("{acc} = {tmp} * {l}")]
            }
        }
    }

    fn emit_construct(&mut self, c: Construct, scope: &mut Scope) {
        match c {
            Construct::If => self.emit_if(scope),
            Construct::Print => self.emit_print(scope),
        }
    }
}

/// Draws one program of the given class. Counts are sampled from the
/// ranges 1–12 imports, 2–8 defs, 0–8 ifs, 0–8 prints and 0–6 loops
/// (1–6 for ambiguous programs, which need at least one dependent loop).
pub fn synthesize_program<R: Rng>(class: ClassLabel, rng: &mut R) -> Program {
    let mut b = Builder { rng, class, used: HashSet::new(), lines: Vec::new() };
    for p in PARAMS {
        b.used.insert(p.to_string());
    }

    let n_imports = b.rng.gen_range(1..=12);
    let n_defs = b.rng.gen_range(2..=8);
    let n_ifs = b.rng.gen_range(0..=8);
    let n_prints = b.rng.gen_range(0..=8);
    let n_fors = match class {
        ClassLabel::Independent => b.rng.gen_range(0..=6),
        ClassLabel::Ambiguous => b.rng.gen_range(1..=6),
    };

    // scope n_defs is the module-level section after the definitions
    let mut plan: Vec<Vec<Construct>> = vec![Vec::new(); n_defs + 1];
    let kinds = std::iter::repeat_n(Construct::If, n_ifs)
        .chain(std::iter::repeat_n(Construct::Print, n_prints));
    for c in kinds {
        let s = b.rng.gen_range(0..=n_defs);
        plan[s].push(c);
    }
    for constructs in plan.iter_mut() {
        constructs.shuffle(b.rng);
    }

    // all loops go first so that loop tokens sit at comparable offsets
    let mut head = Scope { indent: 0, vars: Vec::new() };
    for _ in 0..n_fors {
        b.emit_for(&mut head);
    }

    let mut modules = MODULES.to_vec();
    modules.shuffle(b.rng);
    for m in &modules[..n_imports.min(modules.len())] {
        b.emit(0, format!("import {m}"));
    }

    let mut functions = Vec::with_capacity(n_defs);
    for constructs in plan.iter().take(n_defs) {
        let name = b.fresh(FUNCTIONS);
        let mut params = PARAMS.to_vec();
        params.shuffle(b.rng);
        let (p1, p2) = (params[0].to_string(), params[1].to_string());
        b.emit(0, format!("def {name}({p1}, {p2}):"));
        let mut scope = Scope { indent: 4, vars: vec![p1.clone(), p2.clone()] };
        let v = b.fresh(SCALARS);
        let op = b.pick(ARITH);
        b.emit(4, format!("{v} = {p1} {op} {p2}"));
        scope.vars.push(v.clone());
        for &c in constructs {
            b.emit_construct(c, &mut scope);
        }
        b.emit(4, format!("return {v}"));
        functions.push(name);
    }

    let mut main = Scope { indent: 0, vars: Vec::new() };
    for f in &functions {
        let r = b.fresh(SCALARS);
        let (l1, l2) = (b.lit(), b.lit());
        b.emit(0, format!("{r} = {f}({l1}, {l2})"));
        main.vars.push(r);
    }
    let main_constructs = plan[n_defs].clone();
    for c in main_constructs {
        b.emit_construct(c, &mut main);
    }

    let mut source = b.lines.join("\n");
    source.push('\n');
    Program::new(source, class)
}
