use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use loopsight::codegen::{evolve, write_corpus, ClassLabel, CompileCheck, GeneratorConfig};
use loopsight::dataset::build_dataset;
use loopsight::experiments::{reemit_report, run_experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "loopsight", version, about = "Synthetic loop corpora and parallelizability classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one class of programs and write the Hall of Fame as .py files.
    Generate {
        #[arg(long)]
        class: ClassLabel,
        #[arg(long, default_value_t = 10_000)]
        population: usize,
        #[arg(long, default_value_t = 50)]
        generations: usize,
        #[arg(long, default_value_t = 500)]
        hof: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Check compilability with this Python interpreter instead of the built-in parser.
        #[arg(long)]
        python: Option<String>,
    },
    /// Tokenize both corpora and write the padded dataset cache.
    Dataset {
        #[arg(long)]
        pos: PathBuf,
        #[arg(long)]
        neg: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every (model, variance level) cell described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Recompute aggregates from an experiment directory and write them to another.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate { class, population, generations, hof, seed, out, python } => {
            let cfg = GeneratorConfig {
                population_size: population,
                generations,
                hof_size: hof,
                compile_check: python.map_or(CompileCheck::Builtin, |interpreter| CompileCheck::External { interpreter }),
                ..GeneratorConfig::new(class, seed)
            };
            let result = evolve(&cfg).context("evolution failed")?;
            let best = result.hall_of_fame.best();
            let curve = result.curve;
            let programs = result.hall_of_fame.into_programs();
            write_corpus(&out, class, &programs, &curve).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "wrote {} {class} programs to {} (best fitness {})",
                programs.len(),
                out.display(),
                best.map_or("n/a".to_string(), |b| b.to_string())
            );
        }
        Command::Dataset { pos, neg, out, width, seed } => {
            let data = build_dataset(&pos, &neg, &out, width, seed).context("building dataset")?;
            println!(
                "wrote {} rows of width {} to {} ({} positive, {} negative)",
                data.meta.rows,
                data.meta.width,
                out.display(),
                data.meta.positives,
                data.meta.negatives
            );
        }
        Command::Experiment { config } => {
            let cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let report = run_experiment(&cfg).context("experiment failed")?;
            print_summary(&report);
            println!("report written to {}", cfg.output_dir().display());
        }
        Command::Report { input, out } => {
            let report = reemit_report(&input, &out).with_context(|| format!("re-emitting {}", input.display()))?;
            print_summary(&report);
            println!("report written to {}", out.display());
        }
    }
    Ok(())
}

fn print_summary(report: &loopsight::experiments::ExperimentReport) {
    for c in &report.cells {
        let a = &c.accuracy;
        println!(
            "{} {:>3}%  acc mean {:.2} std {:.2} median {:.2} ci [{:.2}, {:.2}]  loss mean {:.4}",
            c.model, c.variance, a.mean, a.std, a.median, a.ci95.0, a.ci95.1, c.loss.mean
        );
    }
    for k in &report.comparisons {
        println!(
            "ks {:>3}% {:<8} D={:.4} p={:.4} {}",
            k.variance,
            k.metric,
            k.ks.statistic,
            k.ks.p_value,
            if k.significant { "significant" } else { "not significant" }
        );
    }
}
