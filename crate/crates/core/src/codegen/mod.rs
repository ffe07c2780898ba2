//! Genetic-algorithm synthesis of labeled programs.

pub mod deps;
mod evolve;
mod features;
mod operators;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use evolve::{
    curve_csv, evaluate_program, evolve, external_compiles, write_corpus, CompileCheck, EvolutionResult,
    GenerationStats, GeneratorConfig, HallOfFame, HallOfFameEntry,
};
pub use features::{
    assignment_targets, count_features, score_fitness, FitnessBreakdown, StructuralCounts, MAX_FITNESS,
    MIN_FITNESS,
};
pub use operators::{crossover_lines, mutate_program, roulette_indices, roulette_select, splice, ROULETTE_EPSILON};
pub use synth::synthesize_program;

#[derive(Debug, thiserror::Error)]
pub enum CodegenError {
    #[error("empty population")]
    EmptyPopulation,
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("external compile check failed: {0}")]
    Interpreter(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Label 1 = independent (parallelizable) loops, 0 = ambiguous/dependent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Ambiguous = 0,
    Independent = 1,
}

impl ClassLabel {
    pub fn label(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Independent => "independent",
            ClassLabel::Ambiguous => "ambiguous",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "independent" => Ok(ClassLabel::Independent),
            "ambiguous" => Ok(ClassLabel::Ambiguous),
            other => Err(format!("unknown class {other:?} (expected independent or ambiguous)")),
        }
    }
}

/// One GA individual: a complete program text and its class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Program {
    pub source: String,
    pub label: ClassLabel,
    pub line_count: usize,
}

impl Program {
    pub fn new(source: String, label: ClassLabel) -> Self {
        let line_count = source.lines().count();
        Self { source, label, line_count }
    }
}

/// Independent programs carry nothing across iterations; ambiguous ones
/// carry something in at least one loop.
pub fn class_invariant_holds(p: &Program) -> bool {
    let loops = deps::analyze_loops(&p.source);
    match p.label {
        ClassLabel::Independent => loops.iter().all(|l| l.carried.is_empty()),
        ClassLabel::Ambiguous => loops.iter().any(|l| !l.carried.is_empty()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_and_names() {
        assert_eq!(ClassLabel::Independent.label(), 1);
        assert_eq!(ClassLabel::Ambiguous.label(), 0);
        assert_eq!("Independent".parse::<ClassLabel>().unwrap(), ClassLabel::Independent);
        assert!("parallel".parse::<ClassLabel>().is_err());
    }

    #[test]
    fn line_count_matches_lines() {
        let p = Program::new("a = 1\nb = 2\n".into(), ClassLabel::Ambiguous);
        assert_eq!(p.line_count, 2);
    }
}
