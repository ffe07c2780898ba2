//! Principal component analysis with retained-variance component selection.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;

/// The five retained-variance levels of the evaluation protocol.
pub const VARIANCE_LEVELS: [f64; 5] = [1.00, 0.95, 0.90, 0.85, 0.80];

/// Eigenvalues at or below this fraction of the largest one count as zero.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum PcaError {
    #[error("PCA needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("requested {k} components but the model has rank {rank}")]
    TooManyComponents { k: usize, rank: usize },
    #[error("width mismatch: model expects {expected} columns, got {got}")]
    Width { expected: usize, got: usize },
    #[error("variance level must lie in (0, 1], got {0}")]
    Level(f64),
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed PCA model: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PCAModel {
    pub mean: Vec<f64>,
    /// Row-major `k_max × L`, rows orthonormal.
    pub components: Vec<Vec<f64>>,
    /// Descending, strictly positive.
    pub eigenvalues: Vec<f64>,
    pub explained_ratio: Vec<f64>,
}

impl PCAModel {
    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn rank(&self) -> usize {
        self.components.len()
    }

    pub fn select_components(&self, level: f64) -> Result<usize, PcaError> {
        select_components(&self.explained_ratio, level)
    }

    pub fn transform(&self, x: &FeatureMatrix, k: usize) -> Result<FeatureMatrix, PcaError> {
        transform(self, x, k)
    }
}

/// Centers by the column mean and eigendecomposes the unbiased sample
/// covariance. Components with a zero eigenvalue are dropped, so the model's
/// size is the numerical rank of the centered data.
pub fn fit_pca(x: &FeatureMatrix) -> Result<PCAModel, PcaError> {
    if x.rows < 2 {
        return Err(PcaError::TooFewRows(x.rows));
    }
    let mean = x.column_means();
    let centered = DMatrix::from_fn(x.rows, x.cols, |r, c| x.get(r, c) - mean[c]);
    let cov = (centered.transpose() * &centered) / (x.rows as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..x.cols).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let largest = order.first().map_or(0.0, |&i| eig.eigenvalues[i]).max(0.0);

    let mut components = Vec::new();
    let mut eigenvalues = Vec::new();
    for i in order {
        let lambda = eig.eigenvalues[i];
        if largest == 0.0 || lambda <= largest * RANK_TOLERANCE {
            break;
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        // sign convention: first nonzero coordinate positive
        if v.iter().find(|a| a.abs() > 1e-12).is_some_and(|a| *a < 0.0) {
            v.iter_mut().for_each(|a| *a = -*a);
        }
        components.push(v);
        eigenvalues.push(lambda);
    }
    let total: f64 = eigenvalues.iter().sum();
    let explained_ratio = eigenvalues.iter().map(|l| l / total).collect();
    Ok(PCAModel { mean, components, eigenvalues, explained_ratio })
}

/// Smallest k whose cumulative ratio reaches `level`; `level = 1` gives the rank.
pub fn select_components(ratios: &[f64], level: f64) -> Result<usize, PcaError> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(PcaError::Level(level));
    }
    if level >= 1.0 {
        return Ok(ratios.len());
    }
    let mut cumulative = 0.0;
    for (i, r) in ratios.iter().enumerate() {
        cumulative += r;
        if cumulative >= level - 1e-12 {
            return Ok(i + 1);
        }
    }
    Ok(ratios.len())
}

fn check_width(m: &PCAModel, cols: usize) -> Result<(), PcaError> {
    if cols != m.width() {
        return Err(PcaError::Width { expected: m.width(), got: cols });
    }
    Ok(())
}

pub fn transform(m: &PCAModel, x: &FeatureMatrix, k: usize) -> Result<FeatureMatrix, PcaError> {
    check_width(m, x.cols)?;
    if k > m.rank() {
        return Err(PcaError::TooManyComponents { k, rank: m.rank() });
    }
    let mut out = FeatureMatrix::zeros(x.rows, k);
    for r in 0..x.rows {
        let row = x.row(r);
        for (j, comp) in m.components[..k].iter().enumerate() {
            out.row_mut(r)[j] = row.iter().zip(&m.mean).zip(comp).map(|((v, mu), c)| (v - mu) * c).sum();
        }
    }
    Ok(out)
}

/// Maps `k`-dimensional scores back to the original space.
pub fn inverse_transform(m: &PCAModel, z: &FeatureMatrix) -> Result<FeatureMatrix, PcaError> {
    if z.cols > m.rank() {
        return Err(PcaError::TooManyComponents { k: z.cols, rank: m.rank() });
    }
    let mut out = FeatureMatrix::zeros(z.rows, m.width());
    for r in 0..z.rows {
        let target = out.row_mut(r);
        target.copy_from_slice(&m.mean);
        for (score, comp) in z.row(r).iter().zip(&m.components) {
            for (t, c) in target.iter_mut().zip(comp) {
                *t += score * c;
            }
        }
    }
    Ok(out)
}

pub fn reconstruct(m: &PCAModel, x: &FeatureMatrix, k: usize) -> Result<FeatureMatrix, PcaError> {
    inverse_transform(m, &transform(m, x, k)?)
}

fn row_text(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        // shortest round-trip representation
        let _ = write!(s, "{v:?}");
    }
    s
}

/// Text form: `L k_max`, the mean row, the eigenvalue row, then one row per
/// component.
pub fn to_text(m: &PCAModel) -> String {
    let mut out = format!("{} {}\n", m.width(), m.rank());
    out.push_str(&row_text(&m.mean));
    out.push('\n');
    out.push_str(&row_text(&m.eigenvalues));
    out.push('\n');
    for c in &m.components {
        out.push_str(&row_text(c));
        out.push('\n');
    }
    out
}

pub fn from_text(text: &str) -> Result<PCAModel, PcaError> {
    let bad = |m: &str| PcaError::Format(m.to_string());
    let parse_row = |line: Option<&str>, what: &str, expected: usize| -> Result<Vec<f64>, PcaError> {
        let line = line.ok_or_else(|| bad(&format!("missing {what} row")))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(&format!("{what} row: {e}")))?;
        if row.len() != expected {
            return Err(bad(&format!("{what} row has {} values, expected {expected}", row.len())));
        }
        Ok(row)
    };
    let mut lines = text.lines();
    let header = parse_row(lines.next(), "header", 2)?;
    let (width, k) = (header[0] as usize, header[1] as usize);
    let mean = parse_row(lines.next(), "mean", width)?;
    // a rank-0 model has an empty eigenvalue row
    let eigenvalues = parse_row(lines.next().or(Some("")), "eigenvalue", k)?;
    let components = (0..k)
        .map(|i| parse_row(lines.next(), &format!("component {i}"), width))
        .collect::<Result<Vec<_>, _>>()?;
    let total: f64 = eigenvalues.iter().sum();
    let explained_ratio = eigenvalues.iter().map(|l| l / total).collect();
    Ok(PCAModel { mean, components, eigenvalues, explained_ratio })
}

pub fn save_pca(m: &PCAModel, path: &Path) -> Result<(), PcaError> {
    std::fs::write(path, to_text(m))
        .map_err(|e| PcaError::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn load_pca(path: &Path) -> Result<PCAModel, PcaError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PcaError::Io { path: path.display().to_string(), message: e.to_string() })?;
    from_text(&text)
}
