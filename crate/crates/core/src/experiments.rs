//! Seeded repetitions of split → scale → PCA → train → evaluate per
//! (model, variance level) cell, their aggregation and the report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    fit_scaler, read_dataset_cache, split_corpus, CachedDataset, DataSplit, DatasetError, DEFAULT_PROPORTIONS,
    FITNESS_CURVE_FILE,
};
use crate::neural::{
    evaluate, predict, train_model, AdamConfig, EpochMetrics, ModelKind, ModelSpec, NeuralError, Preprocess,
    TrainConfig, TrainingHistory, HISTORY_HEADER,
};
use crate::pca::{fit_pca, PcaError, VARIANCE_LEVELS};
use crate::stats::{
    classification_report, confusion, ks_two_sample, summarize_runs, ClassReport, ConfusionMatrix, KSResult,
    RunStatistics, StatsError,
};

/// Added to a run's seed for its single retry after a divergence.
pub const DIVERGENCE_SEED_OFFSET: u64 = 1_000_003;
pub const SIGNIFICANCE: f64 = 0.05;

pub const RUNS_CSV: &str = "runs.csv";
pub const RUNS_HEADER: &str = "run,model,variance,test_acc,test_loss";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_HEADER: &str = "model,variance,metric,n,mean,std,median,best,worst,ci_low,ci_high,best_run,worst_run";
pub const KS_CSV: &str = "ks.csv";
pub const KS_HEADER: &str = "variance,metric,statistic,p_value,method,verdict";
pub const REPORT_CONFIG: &str = "config.json";

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("cell {model} at {level}% aborted: run {run} failed twice ({message})")]
    CellAborted { model: ModelKind, level: u32, run: usize, message: String },
    #[error("malformed run artifact {path}: {message}")]
    Artifact { path: String, message: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn default_runs() -> usize {
    30
}
fn default_levels() -> Vec<f64> {
    VARIANCE_LEVELS.to_vec()
}
fn default_epochs() -> usize {
    1000
}
fn default_batch() -> usize {
    4
}
fn default_lr() -> f64 {
    0.001
}
fn default_models() -> Vec<ModelKind> {
    vec![ModelKind::Dnn, ModelKind::Cnn]
}

/// JSON experiment description. Relative paths are resolved against the
/// directory of the config file by [`ExperimentConfig::load`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Dataset cache directory written by the dataset stage.
    pub corpus: PathBuf,
    /// Retained-variance fractions in (0, 1].
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    /// Report directory; defaults to `<corpus>/experiment`.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(corpus: PathBuf) -> Self {
        Self {
            corpus,
            levels: default_levels(),
            runs: default_runs(),
            base_seed: 0,
            epochs: default_epochs(),
            batch_size: default_batch(),
            learning_rate: default_lr(),
            models: default_models(),
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.corpus.is_relative() {
            cfg.corpus = base.join(&cfg.corpus);
        }
        if let Some(out) = cfg.output.as_mut().filter(|o| o.is_relative()) {
            *out = base.join(&*out);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.levels.is_empty() {
            return bad("levels must not be empty".into());
        }
        if let Some(l) = self.levels.iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
            return bad(format!("variance level {l} is outside (0, 1]"));
        }
        if self.models.is_empty() {
            return bad("models must not be empty".into());
        }
        self.train_config(0).validate().map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| self.corpus.join("experiment"))
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            adam: AdamConfig::default(),
            seed,
        }
    }
}

/// Variance level as a whole percentage, e.g. 0.95 → 95.
pub fn level_percent(level: f64) -> u32 {
    (level * 100.0).round() as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub model: ModelKind,
    pub variance: u32,
    /// Seed actually used (the retry seed after a divergence).
    pub seed: u64,
    pub retried: bool,
    pub components: usize,
    /// Percent.
    pub test_acc: f64,
    pub test_loss: f64,
    pub confusion: ConfusionMatrix,
    pub report: ClassReport,
    pub final_epoch: Option<EpochMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifact {
    pub record: RunRecord,
    pub history: TrainingHistory,
}

/// One seeded end-to-end run: fresh split, scaler and PCA fitted on the
/// training rows, model trained and evaluated on the test rows.
pub fn run_once(
    data: &CachedDataset,
    cfg: &ExperimentConfig,
    model: ModelKind,
    level: f64,
    run: usize,
    seed: u64,
) -> Result<RunArtifact, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let split = split_corpus(&data.x, &data.y, DEFAULT_PROPORTIONS, &mut rng)?;
    let scaler = fit_scaler(&split.train.x)?;
    let pca = fit_pca(&scaler.apply(&split.train.x)?)?;
    let k = pca.select_components(level)?;
    if k == 0 {
        return Err(ExperimentError::Config("training data has no variance to keep".into()));
    }
    let prep = Preprocess { scaler, pca, k };
    let project = |s: &crate::dataset::Subset| -> Result<_, ExperimentError> { Ok(s.with_features(prep.apply(&s.x)?)) };
    let reduced = DataSplit { train: project(&split.train)?, val: project(&split.val)?, test: project(&split.test)? };

    let (mut trained, history) = train_model(&ModelSpec::new(model, k), &reduced, &cfg.train_config(seed))?;
    trained.preprocess = Some(prep);
    let (test_loss, _) = evaluate(&trained, &reduced.test.x, &reduced.test.y)?;
    let (_, labels) = predict(&trained, &reduced.test.x, 0.5)?;
    let cm = confusion(&reduced.test.y, &labels)?;
    let record = RunRecord {
        run,
        model,
        variance: level_percent(level),
        seed,
        retried: false,
        components: k,
        test_acc: cm.accuracy() * 100.0,
        test_loss,
        confusion: cm,
        report: classification_report(&cm),
        final_epoch: history.last().copied(),
    };
    Ok(RunArtifact { record, history })
}

/// `cfg.runs` runs with seeds `base_seed + i`, executed concurrently and
/// returned in run order. A diverged run is retried once with an offset seed.
pub fn run_cell(
    data: &CachedDataset,
    cfg: &ExperimentConfig,
    model: ModelKind,
    level: f64,
) -> Result<Vec<RunArtifact>, ExperimentError> {
    (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let seed = cfg.base_seed + run as u64;
            match run_once(data, cfg, model, level, run, seed) {
                Err(ExperimentError::Neural(NeuralError::Divergence(_))) => {
                    let mut retry = run_once(data, cfg, model, level, run, seed + DIVERGENCE_SEED_OFFSET).map_err(|e| {
                        ExperimentError::CellAborted { model, level: level_percent(level), run, message: e.to_string() }
                    })?;
                    retry.record.retried = true;
                    Ok(retry)
                }
                other => other,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub model: ModelKind,
    pub variance: u32,
    pub accuracy: RunStatistics,
    pub loss: RunStatistics,
    /// Run indices of the highest and lowest test accuracy (first on ties).
    pub best_run: usize,
    pub worst_run: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub variance: u32,
    pub metric: &'static str,
    pub ks: KSResult,
    pub significant: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub runs: Vec<RunArtifact>,
    pub cells: Vec<CellSummary>,
    pub comparisons: Vec<Comparison>,
}

/// KS tests of accuracy and loss distributions; significant when p < 0.05.
pub fn compare_models(a: &[RunRecord], b: &[RunRecord]) -> Result<Vec<Comparison>, ExperimentError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFew(a.len().min(b.len())).into());
    }
    let variance = a[0].variance;
    let col = |rs: &[RunRecord], f: fn(&RunRecord) -> f64| rs.iter().map(f).collect::<Vec<_>>();
    let mut out = Vec::new();
    for (metric, f) in [("accuracy", (|r: &RunRecord| r.test_acc) as fn(&RunRecord) -> f64), ("loss", |r| r.test_loss)] {
        let ks = ks_two_sample(&col(a, f), &col(b, f))?;
        out.push(Comparison { variance, metric, ks, significant: ks.p_value < SIGNIFICANCE });
    }
    Ok(out)
}

fn summarize_cell(records: &[&RunRecord]) -> Result<CellSummary, ExperimentError> {
    let acc: Vec<f64> = records.iter().map(|r| r.test_acc).collect();
    let loss: Vec<f64> = records.iter().map(|r| r.test_loss).collect();
    let pick = |better: fn(f64, f64) -> bool| {
        let mut best = records[0];
        for r in &records[1..] {
            if better(r.test_acc, best.test_acc) {
                best = r;
            }
        }
        best.run
    };
    Ok(CellSummary {
        model: records[0].model,
        variance: records[0].variance,
        accuracy: summarize_runs(&acc)?,
        loss: summarize_runs(&loss)?,
        best_run: pick(|a, b| a > b),
        worst_run: pick(|a, b| a < b),
    })
}

/// Groups runs into cells (model order dnn, cnn; levels descending) and
/// recomputes every aggregate. Cells with a single run get no summary.
pub fn build_report(mut runs: Vec<RunArtifact>) -> Result<ExperimentReport, ExperimentError> {
    runs.sort_by(|a, b| {
        (a.record.model, std::cmp::Reverse(a.record.variance), a.record.run).cmp(&(
            b.record.model,
            std::cmp::Reverse(b.record.variance),
            b.record.run,
        ))
    });
    let mut groups: BTreeMap<(ModelKind, std::cmp::Reverse<u32>), Vec<&RunRecord>> = BTreeMap::new();
    for r in &runs {
        groups.entry((r.record.model, std::cmp::Reverse(r.record.variance))).or_default().push(&r.record);
    }
    let mut cells = Vec::new();
    for records in groups.values().filter(|g| g.len() >= 2) {
        cells.push(summarize_cell(records)?);
    }
    let mut comparisons = Vec::new();
    let levels: Vec<u32> = {
        let mut l: Vec<u32> = runs.iter().map(|r| r.record.variance).collect();
        l.sort_unstable_by(|a, b| b.cmp(a));
        l.dedup();
        l
    };
    for v in levels {
        let get = |m| groups.get(&(m, std::cmp::Reverse(v))).map(|g| g.iter().map(|r| (*r).clone()).collect::<Vec<_>>());
        if let (Some(d), Some(c)) = (get(ModelKind::Dnn), get(ModelKind::Cnn)) {
            if d.len() >= 2 && c.len() >= 2 {
                comparisons.extend(compare_models(&d, &c)?);
            }
        }
    }
    Ok(ExperimentReport { runs, cells, comparisons })
}

/// Runs every configured cell and writes the report into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let data = read_dataset_cache(&cfg.corpus)?;
    let mut runs = Vec::new();
    for &model in &cfg.models {
        for &level in &cfg.levels {
            runs.extend(run_cell(&data, cfg, model, level)?);
        }
    }
    let report = build_report(runs)?;
    let out = cfg.output_dir();
    emit_report(&report, &out)?;
    let cfg_path = out.join(REPORT_CONFIG);
    let json = serde_json::to_string_pretty(cfg).expect("config serializes") + "\n";
    fs::write(&cfg_path, json).map_err(|e| io_err(&cfg_path, e))?;
    let fitness = cfg.corpus.join(FITNESS_CURVE_FILE);
    if fitness.exists() {
        let dest = out.join(FITNESS_CURVE_FILE);
        fs::copy(&fitness, &dest).map_err(|e| io_err(&dest, e))?;
    }
    Ok(report)
}

fn level_dir(variance: u32) -> String {
    format!("level_{variance}")
}

pub fn runs_csv(report: &ExperimentReport) -> String {
    let mut out = format!("{RUNS_HEADER}\n");
    for r in &report.runs {
        let r = &r.record;
        let _ = writeln!(out, "{},{},{},{},{}", r.run, r.model, r.variance, r.test_acc, r.test_loss);
    }
    out
}

pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for c in &report.cells {
        for (metric, s) in [("accuracy", &c.accuracy), ("loss", &c.loss)] {
            let _ = writeln!(
                out,
                "{},{},{metric},{},{},{},{},{},{},{},{},{},{}",
                c.model, c.variance, s.n, s.mean, s.std, s.median, s.best, s.worst, s.ci95.0, s.ci95.1, c.best_run, c.worst_run
            );
        }
    }
    out
}

pub fn ks_csv(report: &ExperimentReport) -> String {
    let mut out = format!("{KS_HEADER}\n");
    for c in &report.comparisons {
        let method = match c.ks.method {
            crate::stats::KsMethod::Exact => "exact",
            crate::stats::KsMethod::Asymptotic => "asymptotic",
        };
        let verdict = if c.significant { "significant" } else { "not significant" };
        let _ = writeln!(out, "{},{},{},{},{method},{verdict}", c.variance, c.metric, c.ks.statistic, c.ks.p_value);
    }
    out
}

/// Two-decimal table per model: variance, mean, std, median, best, worst, CI.
pub fn accuracy_table(report: &ExperimentReport, model: ModelKind) -> String {
    let mut out = String::from("variance,mean,std,median,best,worst,ci95\n");
    for c in report.cells.iter().filter(|c| c.model == model) {
        let s = &c.accuracy;
        let _ = writeln!(
            out,
            "{}%,{:.2},{:.2},{:.2},{:.2},{:.2},\"[{:.2}, {:.2}]\"",
            c.variance, s.mean, s.std, s.median, s.best, s.worst, s.ci95.0, s.ci95.1
        );
    }
    out
}

fn write(path: &Path, text: &str) -> Result<(), ExperimentError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Writes aggregate CSVs, per-model tables, KS verdicts, boxplot columns,
/// per-run JSON records and training curves.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write(&dir.join(RUNS_CSV), &runs_csv(report))?;
    write(&dir.join(SUMMARY_CSV), &summary_csv(report))?;
    write(&dir.join(KS_CSV), &ks_csv(report))?;
    for model in [ModelKind::Dnn, ModelKind::Cnn] {
        if report.cells.iter().any(|c| c.model == model) {
            write(&dir.join(format!("table_{model}.csv")), &accuracy_table(report, model))?;
        }
    }

    let mut boxplots: BTreeMap<(ModelKind, u32), String> = BTreeMap::new();
    for a in &report.runs {
        let r = &a.record;
        let col = boxplots.entry((r.model, r.variance)).or_insert_with(|| "accuracy,loss\n".to_string());
        let _ = writeln!(col, "{},{}", r.test_acc, r.test_loss);
        let level = dir.join(level_dir(r.variance));
        write(&level.join(format!("curve_{}_{}.csv", r.model, r.run)), &a.history.to_csv())?;
        let json = serde_json::to_string_pretty(r).expect("record serializes") + "\n";
        write(&level.join(format!("run_{}_{}.json", r.model, r.run)), &json)?;
    }
    for ((model, variance), text) in boxplots {
        write(&dir.join(format!("boxplot_{model}_{variance}.csv")), &text)?;
    }
    Ok(())
}

fn parse_history(text: &str, path: &Path) -> Result<TrainingHistory, ExperimentError> {
    let bad = |m: String| ExperimentError::Artifact { path: path.display().to_string(), message: m };
    let mut lines = text.lines();
    if lines.next() != Some(HISTORY_HEADER) {
        return Err(bad("missing history header".into()));
    }
    let mut epochs = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 fields, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(e.to_string()));
        epochs.push(EpochMetrics {
            epoch: f[0].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            train_loss: num(f[1])?,
            train_acc: num(f[2])?,
            val_loss: num(f[3])?,
            val_acc: num(f[4])?,
        });
    }
    Ok(TrainingHistory { epochs })
}

/// Reads back the per-run JSON records and curves of an emitted report and
/// recomputes all aggregates from them.
pub fn load_report(dir: &Path) -> Result<ExperimentReport, ExperimentError> {
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut level_dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("level_")))
        .collect();
    level_dirs.sort();
    let mut runs = Vec::new();
    for level in level_dirs {
        let mut files: Vec<PathBuf> = fs::read_dir(&level)
            .map_err(|e| io_err(&level, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
                name.starts_with("run_") && name.ends_with(".json")
            })
            .collect();
        files.sort();
        for path in files {
            let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
            let record: RunRecord = serde_json::from_str(&text).map_err(|e| ExperimentError::Artifact {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let curve = level.join(format!("curve_{}_{}.csv", record.model, record.run));
            let history = match fs::read_to_string(&curve) {
                Ok(t) => parse_history(&t, &curve)?,
                Err(_) => TrainingHistory::default(),
            };
            runs.push(RunArtifact { record, history });
        }
    }
    build_report(runs)
}

/// `report --in DIR --out DIR`: reload, recompute and re-emit.
pub fn reemit_report(input: &Path, output: &Path) -> Result<ExperimentReport, ExperimentError> {
    let report = load_report(input)?;
    emit_report(&report, output)?;
    for extra in [FITNESS_CURVE_FILE, REPORT_CONFIG] {
        let src = input.join(extra);
        if src.exists() && input != output {
            let dest = output.join(extra);
            fs::copy(&src, &dest).map_err(|e| io_err(&dest, e))?;
        }
    }
    Ok(report)
}
