//! Encoded corpora → fixed-width, standardized matrices and the 70/15/15 split.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codegen::ClassLabel;
use crate::lang::{save_vocab, tokenize, TokenId, TokenVocab, PAD_ID};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("empty corpus directory: {0}")]
    EmptyCorpus(String),
    #[error("lex error in {path} at {line}:{col}: {message}")]
    Lex { path: String, line: usize, col: usize, message: String },
    #[error("split proportions must be positive and sum to 1, got {0:?}")]
    Proportions([f64; 3]),
    #[error("split of {rows} rows leaves the {part} portion empty")]
    EmptySplit { rows: usize, part: &'static str },
    #[error("cannot fit on an empty matrix")]
    EmptyMatrix,
    #[error("width mismatch: expected {expected} columns, got {got}")]
    Width { expected: usize, got: usize },
    #[error("malformed dataset cache {path}: {message}")]
    Cache { path: String, message: String },
    #[error(transparent)]
    Vocab(#[from] crate::lang::VocabError),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> DatasetError {
    DatasetError::Io { path: path.display().to_string(), message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSequence {
    pub ids: Vec<TokenId>,
    pub label: u8,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * cols, "matrix data must be rows * cols");
        Self { rows, cols, values }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, values)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.cols, values)
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (m, v) in mean.iter_mut().zip(self.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= self.rows as f64);
        mean
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

fn sorted_program_files(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "py"))
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if files.is_empty() {
        return Err(DatasetError::EmptyCorpus(dir.display().to_string()));
    }
    Ok(files)
}

/// Tokenizes and encodes every `.py` file of each directory, directories in
/// the given order and files by name. The vocabulary grows during assembly
/// and is frozen afterwards.
pub fn assemble_corpus(
    dirs: &[(PathBuf, ClassLabel)],
    vocab: &mut TokenVocab,
) -> Result<Vec<LabeledSequence>, DatasetError> {
    let mut out = Vec::new();
    for (dir, class) in dirs {
        for path in sorted_program_files(dir)? {
            let source = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
            let tokens = tokenize(&source).map_err(|e| DatasetError::Lex {
                path: path.display().to_string(),
                line: e.line,
                col: e.col,
                message: e.message,
            })?;
            let ids = vocab.encode(&tokens, false);
            out.push(LabeledSequence { ids, label: class.label() });
        }
    }
    vocab.freeze();
    Ok(out)
}

pub fn max_length(seqs: &[LabeledSequence]) -> usize {
    seqs.iter().map(|s| s.ids.len()).max().unwrap_or(0)
}

/// Right-pads with [`PAD_ID`] or truncates every sequence to `width`
/// (default: the longest given sequence).
pub fn pad_truncate(seqs: &[LabeledSequence], width: Option<usize>) -> (FeatureMatrix, Vec<u8>) {
    let width = width.unwrap_or_else(|| max_length(seqs)).max(1);
    let mut m = FeatureMatrix::zeros(seqs.len(), width);
    for (r, s) in seqs.iter().enumerate() {
        let row = m.row_mut(r);
        for (c, slot) in row.iter_mut().enumerate() {
            *slot = f64::from(s.ids.get(c).copied().unwrap_or(PAD_ID));
        }
    }
    (m, seqs.iter().map(|s| s.label).collect())
}

/// Per-column z-score statistics (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureScaler {
    pub fn is_constant(&self, col: usize) -> bool {
        self.std[col] == 0.0
    }

    /// Constant columns are only shifted by their mean.
    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix, DatasetError> {
        if x.cols != self.mean.len() {
            return Err(DatasetError::Width { expected: self.mean.len(), got: x.cols });
        }
        let mut out = x.clone();
        for r in 0..out.rows {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                let centered = *v - self.mean[c];
                *v = if self.std[c] > 0.0 { centered / self.std[c] } else { centered };
            }
        }
        Ok(out)
    }
}

pub fn fit_scaler(train: &FeatureMatrix) -> Result<FeatureScaler, DatasetError> {
    if train.rows == 0 {
        return Err(DatasetError::EmptyMatrix);
    }
    let mean = train.column_means();
    let mut var = vec![0.0; train.cols];
    for r in 0..train.rows {
        for ((acc, v), m) in var.iter_mut().zip(train.row(r)).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / train.rows as f64).sqrt()).collect();
    Ok(FeatureScaler { mean, std })
}

pub fn apply_scaler(scaler: &FeatureScaler, x: &FeatureMatrix) -> Result<FeatureMatrix, DatasetError> {
    scaler.apply(x)
}

pub const DEFAULT_PROPORTIONS: [f64; 3] = [0.70, 0.15, 0.15];

#[derive(Debug, Clone, PartialEq)]
pub struct Subset {
    pub x: FeatureMatrix,
    pub y: Vec<u8>,
    /// Row indices into the matrix the split was taken from.
    pub indices: Vec<usize>,
}

impl Subset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn with_features(&self, x: FeatureMatrix) -> Self {
        assert_eq!(x.rows, self.y.len());
        Self { x, y: self.y.clone(), indices: self.indices.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: Subset,
    pub val: Subset,
    pub test: Subset,
}

/// Sizes for `n` rows: validation and test are `round(n * p)`, training
/// takes the remainder.
pub fn split_sizes(n: usize, proportions: [f64; 3]) -> Result<[usize; 3], DatasetError> {
    let sum: f64 = proportions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || proportions.iter().any(|&p| p <= 0.0) {
        return Err(DatasetError::Proportions(proportions));
    }
    let val = (n as f64 * proportions[1]).round() as usize;
    let test = (n as f64 * proportions[2]).round() as usize;
    let train = n.saturating_sub(val + test);
    for (size, part) in [(train, "train"), (val, "validation"), (test, "test")] {
        if size == 0 {
            return Err(DatasetError::EmptySplit { rows: n, part });
        }
    }
    Ok([train, val, test])
}

/// One seeded shuffle, then consecutive train/val/test blocks. Not stratified.
pub fn split_indices<R: Rng>(n: usize, proportions: [f64; 3], rng: &mut R) -> Result<[Vec<usize>; 3], DatasetError> {
    let [train, val, _] = split_sizes(n, proportions)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let test_part = idx.split_off(train + val);
    let val_part = idx.split_off(train);
    Ok([idx, val_part, test_part])
}

pub fn split_corpus<R: Rng>(
    x: &FeatureMatrix,
    y: &[u8],
    proportions: [f64; 3],
    rng: &mut R,
) -> Result<DataSplit, DatasetError> {
    if x.rows != y.len() {
        return Err(DatasetError::Width { expected: x.rows, got: y.len() });
    }
    let [tr, va, te] = split_indices(x.rows, proportions, rng)?;
    let subset = |idx: Vec<usize>| Subset {
        x: x.select_rows(&idx),
        y: idx.iter().map(|&i| y[i]).collect(),
        indices: idx,
    };
    Ok(DataSplit { train: subset(tr), val: subset(va), test: subset(te) })
}

pub const DATASET_CSV: &str = "dataset.csv";
pub const DATASET_META: &str = "dataset.json";
pub const VOCAB_FILE: &str = "vocab.json";
pub const FITNESS_CURVE_FILE: &str = "fitness_curve.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub width: usize,
    pub vocab_path: String,
    pub seed: u64,
    pub rows: usize,
    pub positives: usize,
    pub negatives: usize,
}

/// Padded id matrix plus labels as read back from a cache directory.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedDataset {
    pub x: FeatureMatrix,
    pub y: Vec<u8>,
    pub meta: DatasetMeta,
}

pub fn dataset_csv(x: &FeatureMatrix, y: &[u8]) -> String {
    let mut out = String::from("label");
    for c in 0..x.cols {
        out.push_str(&format!(",x{c}"));
    }
    out.push('\n');
    for (r, label) in y.iter().enumerate() {
        out.push_str(&label.to_string());
        for v in x.row(r) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset_cache(dir: &Path, data: &CachedDataset) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let csv = dir.join(DATASET_CSV);
    fs::write(&csv, dataset_csv(&data.x, &data.y)).map_err(|e| io_err(&csv, e))?;
    let meta = dir.join(DATASET_META);
    let json = serde_json::to_string_pretty(&data.meta).expect("metadata serializes");
    fs::write(&meta, json + "\n").map_err(|e| io_err(&meta, e))?;
    Ok(())
}

pub fn read_dataset_cache(dir: &Path) -> Result<CachedDataset, DatasetError> {
    let meta_path = dir.join(DATASET_META);
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| io_err(&meta_path, e))?;
    let meta: DatasetMeta = serde_json::from_str(&meta_text).map_err(|e| DatasetError::Cache {
        path: meta_path.display().to_string(),
        message: e.to_string(),
    })?;
    let csv_path = dir.join(DATASET_CSV);
    let text = fs::read_to_string(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    let bad = |message: String| DatasetError::Cache { path: csv_path.display().to_string(), message };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("missing header".into()))?;
    let cols = header.split(',').count() - 1;
    if cols != meta.width {
        return Err(bad(format!("header has {cols} feature columns, metadata says {}", meta.width)));
    }
    let mut values = Vec::new();
    let mut y = Vec::new();
    for (n, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let label: u8 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .filter(|l| *l <= 1)
            .ok_or_else(|| bad(format!("row {}: bad label", n + 1)))?;
        y.push(label);
        let before = values.len();
        for f in fields {
            values.push(f.parse::<f64>().map_err(|e| bad(format!("row {}: {e}", n + 1)))?);
        }
        if values.len() - before != cols {
            return Err(bad(format!("row {} has {} columns", n + 1, values.len() - before)));
        }
    }
    Ok(CachedDataset { x: FeatureMatrix::new(y.len(), cols, values), y, meta })
}

/// Builds the dataset cache from a positive (independent) and a negative
/// (ambiguous) corpus directory. Without an explicit width, the width is
/// the longest sequence in the training portion of the split drawn with
/// `seed`.
pub fn build_dataset(
    pos: &Path,
    neg: &Path,
    out: &Path,
    width: Option<usize>,
    seed: u64,
) -> Result<CachedDataset, DatasetError> {
    let mut vocab = TokenVocab::new();
    let seqs = assemble_corpus(
        &[(pos.to_path_buf(), ClassLabel::Independent), (neg.to_path_buf(), ClassLabel::Ambiguous)],
        &mut vocab,
    )?;
    let width = match width {
        Some(w) => w.max(1),
        None => {
            let [train, _, _] = split_indices(seqs.len(), DEFAULT_PROPORTIONS, &mut ChaCha8Rng::seed_from_u64(seed))?;
            train.iter().map(|&i| seqs[i].ids.len()).max().unwrap_or(1)
        }
    };
    let (x, y) = pad_truncate(&seqs, Some(width));
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let vocab_path = out.join(VOCAB_FILE);
    save_vocab(&vocab, &vocab_path)?;
    let positives = y.iter().filter(|&&l| l == 1).count();
    let data = CachedDataset {
        meta: DatasetMeta {
            width,
            vocab_path: VOCAB_FILE.to_string(),
            seed,
            rows: y.len(),
            positives,
            negatives: y.len() - positives,
        },
        x,
        y,
    };
    write_dataset_cache(out, &data)?;

    // carry the generators' fitness curves along for plotting
    let mut curves = String::from("class,generation,avg,max,min\n");
    let mut any = false;
    for (dir, class) in [(pos, ClassLabel::Independent), (neg, ClassLabel::Ambiguous)] {
        if let Ok(text) = fs::read_to_string(dir.join("curve.csv")) {
            any = true;
            for line in text.lines().skip(1) {
                curves.push_str(&format!("{},{line}\n", class.name()));
            }
        }
    }
    if any {
        let path = out.join(FITNESS_CURVE_FILE);
        fs::write(&path, curves).map_err(|e| io_err(&path, e))?;
    }
    Ok(data)
}
