use std::collections::HashSet;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::process::{Command, Stdio};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{count_features, score_fitness, FitnessBreakdown};
use super::operators::{crossover_lines, mutate_program, roulette_indices};
use super::{class_invariant_holds, synthesize_program, ClassLabel, CodegenError, Program};
use crate::lang::validate;

/// Where the compile verdict behind `s_comp` comes from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CompileCheck {
    /// The built-in restricted-grammar parser.
    #[default]
    Builtin,
    /// `<interpreter> -c "compile(...)"` on stdin; exit status 0 means it compiles.
    External { interpreter: String },
}

const COMPILE_SNIPPET: &str = "import sys; compile(sys.stdin.read(), '<generated>', 'exec')";

impl CompileCheck {
    pub fn compiles(&self, source: &str) -> Result<bool, CodegenError> {
        match self {
            CompileCheck::Builtin => Ok(validate(source).ok),
            CompileCheck::External { interpreter } => external_compiles(interpreter, source),
        }
    }
}

/// Runs an external interpreter's compile step on `source`.
pub fn external_compiles(interpreter: &str, source: &str) -> Result<bool, CodegenError> {
    let spawn_err = |e: std::io::Error| CodegenError::Interpreter(format!("{interpreter}: {e}"));
    let mut child = Command::new(interpreter)
        .args(["-c", COMPILE_SNIPPET])
        .stdin(Stdio::piped())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(spawn_err)?;
    child
        .stdin
        .take()
        .expect("piped stdin")
        .write_all(source.as_bytes())
        .map_err(spawn_err)?;
    let status = child.wait().map_err(spawn_err)?;
    Ok(status.success())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub hof_size: usize,
    pub class: ClassLabel,
    pub seed: u64,
    #[serde(default)]
    pub compile_check: CompileCheck,
}

impl GeneratorConfig {
    /// Full-scale settings: 10 000 individuals, 50 generations.
    pub fn new(class: ClassLabel, seed: u64) -> Self {
        Self {
            population_size: 10_000,
            generations: 50,
            crossover_prob: 0.9,
            mutation_prob: 0.1,
            hof_size: 500,
            class,
            seed,
            compile_check: CompileCheck::Builtin,
        }
    }

    pub fn validate(&self) -> Result<(), CodegenError> {
        let bad = |m: String| Err(CodegenError::Config(m));
        if self.population_size < 2 {
            return bad(format!("population_size must be >= 2, got {}", self.population_size));
        }
        if self.generations < 1 {
            return bad("generations must be >= 1".into());
        }
        for (name, p) in [("crossover_prob", self.crossover_prob), ("mutation_prob", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.hof_size > self.population_size {
            return bad(format!(
                "hof_size {} exceeds population_size {}",
                self.hof_size, self.population_size
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub avg: f64,
    /// Best fitness seen so far (population and archive), hence monotone.
    pub max: i32,
    pub min: i32,
    /// Best fitness in this generation's population alone.
    pub population_max: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HallOfFameEntry {
    pub program: Program,
    pub fitness: FitnessBreakdown,
    /// (generation, index) of first discovery; generation 0 is the initial population.
    pub discovered: (usize, usize),
}

/// Best-ever distinct programs, ordered by fitness then discovery.
#[derive(Debug, Clone, Default)]
pub struct HallOfFame {
    capacity: usize,
    entries: Vec<HallOfFameEntry>,
    sources: HashSet<String>,
}

impl HallOfFame {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, entries: Vec::with_capacity(capacity + 1), sources: HashSet::new() }
    }

    pub fn entries(&self) -> &[HallOfFameEntry] {
        &self.entries
    }

    pub fn best(&self) -> Option<i32> {
        self.entries.first().map(|e| e.fitness.total)
    }

    /// Offers one individual. Equal fitness never displaces an earlier entry.
    pub fn offer(&mut self, program: &Program, fitness: FitnessBreakdown, discovered: (usize, usize)) {
        if self.capacity == 0 || self.sources.contains(&program.source) {
            return;
        }
        if self.entries.len() == self.capacity
            && fitness.total <= self.entries.last().expect("full archive").fitness.total
        {
            return;
        }
        // insert after every entry with fitness >= this one
        let at = self.entries.partition_point(|e| e.fitness.total >= fitness.total);
        self.entries.insert(at, HallOfFameEntry { program: program.clone(), fitness, discovered });
        self.sources.insert(program.source.clone());
        if self.entries.len() > self.capacity {
            let dropped = self.entries.pop().expect("over capacity");
            self.sources.remove(&dropped.program.source);
        }
    }

    pub fn into_programs(self) -> Vec<Program> {
        self.entries.into_iter().map(|e| e.program).collect()
    }
}

/// Scores one program with Eq.-style fitness: structural scores plus the compile score.
pub fn evaluate_program(p: &Program, check: &CompileCheck) -> Result<FitnessBreakdown, CodegenError> {
    let counts = count_features(&p.source);
    Ok(score_fitness(&counts, check.compiles(&p.source)?))
}

fn evaluate_all(pop: &[Program], check: &CompileCheck) -> Result<Vec<FitnessBreakdown>, CodegenError> {
    pop.par_iter().map(|p| evaluate_program(p, check)).collect()
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub hall_of_fame: HallOfFame,
    pub curve: Vec<GenerationStats>,
}

/// Generational GA: roulette selection of a full mating pool, pairwise
/// line crossover, per-individual mutation, full replacement. The hall of
/// fame sees every evaluated individual, the initial population included.
///
/// Crossover children that break their class's loop invariant are
/// replaced by the corresponding parent.
pub fn evolve(cfg: &GeneratorConfig) -> Result<EvolutionResult, CodegenError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.population_size;

    let mut pop: Vec<Program> = (0..n).map(|_| synthesize_program(cfg.class, &mut rng)).collect();
    let mut fits = evaluate_all(&pop, &cfg.compile_check)?;
    let mut hof = HallOfFame::new(cfg.hof_size);
    for (i, (p, f)) in pop.iter().zip(&fits).enumerate() {
        hof.offer(p, *f, (0, i));
    }

    let mut curve = Vec::with_capacity(cfg.generations);
    let mut best_ever = fits.iter().map(|f| f.total).max().expect("non-empty population");
    for generation in 1..=cfg.generations {
        let totals: Vec<i32> = fits.iter().map(|f| f.total).collect();
        let chosen = roulette_indices(&totals, n, &mut rng)?;
        let mut offspring: Vec<Program> = chosen.iter().map(|&i| pop[i].clone()).collect();

        for pair in offspring.chunks_mut(2) {
            if pair.len() == 2 && rng.gen::<f64>() < cfg.crossover_prob {
                let (c1, c2) = crossover_lines(&pair[0], &pair[1], &mut rng);
                if class_invariant_holds(&c1) {
                    pair[0] = c1;
                }
                if class_invariant_holds(&c2) {
                    pair[1] = c2;
                }
            }
        }
        for child in offspring.iter_mut() {
            if rng.gen::<f64>() < cfg.mutation_prob {
                *child = mutate_program(child, &mut rng);
            }
        }

        fits = evaluate_all(&offspring, &cfg.compile_check)?;
        for (i, (p, f)) in offspring.iter().zip(&fits).enumerate() {
            hof.offer(p, *f, (generation, i));
        }
        pop = offspring;

        let totals = fits.iter().map(|f| f.total);
        let population_max = totals.clone().max().unwrap();
        let min = totals.clone().min().unwrap();
        let avg = totals.map(f64::from).sum::<f64>() / n as f64;
        best_ever = best_ever.max(population_max);
        curve.push(GenerationStats { generation, avg, max: best_ever, min, population_max });
    }

    Ok(EvolutionResult { hall_of_fame: hof, curve })
}

pub fn curve_csv(curve: &[GenerationStats]) -> String {
    let mut out = String::from("generation,avg,max,min\n");
    for s in curve {
        out.push_str(&format!("{},{},{},{}\n", s.generation, s.avg, s.max, s.min));
    }
    out
}

/// Writes `<class>_<index>.py` per hall-of-fame program plus `curve.csv`.
pub fn write_corpus(
    dir: &Path,
    class: ClassLabel,
    programs: &[Program],
    curve: &[GenerationStats],
) -> Result<(), CodegenError> {
    let io = |path: &Path, e: std::io::Error| CodegenError::Io(format!("{}: {e}", path.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    for (i, p) in programs.iter().enumerate() {
        let path = dir.join(format!("{}_{i}.py", class.name()));
        fs::write(&path, &p.source).map_err(|e| io(&path, e))?;
    }
    let path = dir.join("curve.csv");
    fs::write(&path, curve_csv(curve)).map_err(|e| io(&path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(class: ClassLabel, seed: u64) -> GeneratorConfig {
        GeneratorConfig { population_size: 60, generations: 5, hof_size: 20, ..GeneratorConfig::new(class, seed) }
    }

    #[test]
    fn config_validation() {
        let ok = small(ClassLabel::Independent, 0);
        assert!(ok.validate().is_ok());
        assert!(GeneratorConfig { population_size: 1, hof_size: 1, ..ok.clone() }.validate().is_err());
        assert!(GeneratorConfig { hof_size: 61, ..ok.clone() }.validate().is_err());
        assert!(GeneratorConfig { crossover_prob: 1.5, ..ok.clone() }.validate().is_err());
        assert!(GeneratorConfig { mutation_prob: -0.1, ..ok.clone() }.validate().is_err());
        assert!(GeneratorConfig { generations: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn evolution_is_deterministic() {
        let cfg = small(ClassLabel::Ambiguous, 42);
        let a = evolve(&cfg).unwrap();
        let b = evolve(&cfg).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.hall_of_fame.entries(), b.hall_of_fame.entries());
    }

    #[test]
    fn curve_shape_and_monotone_max() {
        let r = evolve(&small(ClassLabel::Independent, 3)).unwrap();
        assert_eq!(r.curve.len(), 5);
        for w in r.curve.windows(2) {
            assert!(w[1].max >= w[0].max);
        }
        for s in &r.curve {
            assert!(f64::from(s.min) <= s.avg && s.avg <= f64::from(s.population_max));
            assert!(s.population_max <= s.max);
        }
        assert_eq!(r.hall_of_fame.best(), Some(r.curve.last().unwrap().max));
    }

    #[test]
    fn hall_of_fame_orders_and_breaks_ties_by_discovery() {
        let p = |s: &str| Program::new(s.to_string(), ClassLabel::Independent);
        let f = |total| FitnessBreakdown { s1: 0, s2: 0, s3: 0, s4: 0, s5: 0, s6: 0, s7: 0, s_comp: 0, total };
        let mut hof = HallOfFame::new(2);
        hof.offer(&p("a\n"), f(5), (0, 0));
        hof.offer(&p("b\n"), f(7), (0, 1));
        hof.offer(&p("c\n"), f(7), (1, 0));
        hof.offer(&p("b\n"), f(7), (1, 1));
        let got: Vec<&str> = hof.entries().iter().map(|e| e.program.source.as_str()).collect();
        assert_eq!(got, vec!["b\n", "c\n"]);
        hof.offer(&p("d\n"), f(7), (2, 0));
        assert_eq!(hof.entries()[1].program.source, "c\n");
    }

    #[test]
    fn corpus_files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let r = evolve(&small(ClassLabel::Independent, 5)).unwrap();
        let progs = r.hall_of_fame.clone().into_programs();
        write_corpus(dir.path(), ClassLabel::Independent, &progs, &r.curve).unwrap();
        assert!(dir.path().join("independent_0.py").exists());
        let csv = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
        assert!(csv.starts_with("generation,avg,max,min\n"));
        assert_eq!(csv.lines().count(), 6);
    }
}
