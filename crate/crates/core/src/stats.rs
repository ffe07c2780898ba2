//! Classification metrics, the two-sample Kolmogorov–Smirnov test, Student-t
//! intervals and cross-run summaries.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("length mismatch: {0} labels vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("label {0} is not 0 or 1")]
    Label(u8),
    #[error("need at least 2 values, got {0}")]
    TooFew(usize),
    #[error("confidence level must lie in (0, 1), got {0}")]
    Level(f64),
}

pub const CLASS_NAMES: [&str; 2] = ["Undefined Loop (0)", "Independent Loop (1)"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tp: usize,
}

impl ConfusionMatrix {
    pub fn new(tn: usize, fp: usize, fn_: usize, tp: usize) -> Self {
        Self { tn, fp, fn_, tp }
    }

    pub fn total(&self) -> usize {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tn + self.tp) as f64 / self.total() as f64
    }
}

/// Rows are actual classes, columns predicted ones.
pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix, StatsError> {
    if y_true.len() != y_pred.len() {
        return Err(StatsError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (0, 0) => cm.tn += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            (1, 1) => cm.tp += 1,
            (bad, 0 | 1) | (_, bad) => return Err(StatsError::Label(bad)),
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    /// Index 0 is the undefined/ambiguous class, 1 the independent class.
    pub classes: [ClassMetrics; 2],
    pub accuracy: f64,
    pub macro_avg: ClassMetrics,
    pub weighted_avg: ClassMetrics,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Zero denominators report 0.
pub fn classification_report(cm: &ConfusionMatrix) -> ClassReport {
    let class = |correct: usize, predicted: usize, support: usize| {
        let precision = ratio(correct, predicted);
        let recall = ratio(correct, support);
        ClassMetrics { precision, recall, f1: f1(precision, recall), support }
    };
    let c0 = class(cm.tn, cm.tn + cm.fn_, cm.tn + cm.fp);
    let c1 = class(cm.tp, cm.tp + cm.fp, cm.tp + cm.fn_);
    let total = cm.total();
    let avg = |w0: f64, w1: f64| ClassMetrics {
        precision: w0 * c0.precision + w1 * c1.precision,
        recall: w0 * c0.recall + w1 * c1.recall,
        f1: w0 * c0.f1 + w1 * c1.f1,
        support: total,
    };
    ClassReport {
        classes: [c0, c1],
        accuracy: cm.accuracy(),
        macro_avg: avg(0.5, 0.5),
        weighted_avg: avg(ratio(c0.support, total), ratio(c1.support, total)),
    }
}

impl ClassReport {
    /// Two-decimal CSV table in the usual classification-report layout.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,precision,recall,f1,support\n");
        let mut row = |name: &str, m: &ClassMetrics| {
            let _ = writeln!(out, "{name},{:.2},{:.2},{:.2},{}", m.precision, m.recall, m.f1, m.support);
        };
        row(CLASS_NAMES[0], &self.classes[0]);
        row(CLASS_NAMES[1], &self.classes[1]);
        row("macro avg", &self.macro_avg);
        row("weighted avg", &self.weighted_avg);
        let _ = writeln!(out, "accuracy,,,{:.2},{}", self.accuracy, self.macro_avg.support);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KsMethod {
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KSResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: KsMethod,
}

/// Sample-size product up to which the exact distribution is used.
pub const KS_EXACT_LIMIT: usize = 10_000;

/// `sup |F_a - F_b|` over the pooled sample points.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Exact two-sided `P(D ≥ d)` for sample sizes `n`, `m` under the null,
/// by walking the lattice of merged orderings with hypergeometric step
/// probabilities and absorbing the mass that touches the boundary.
pub fn ks_exact_p(d: f64, n: usize, m: usize) -> f64 {
    // the statistic is a multiple of 1/(n·m) so the boundary is integral
    let bound = (d * (n * m) as f64 - 1e-9).ceil().max(0.0) as i64;
    let outside = |i: usize, j: usize| ((i * m) as i64 - (j * n) as i64).abs() >= bound;
    if outside(0, 0) {
        return 1.0;
    }
    let mut row = vec![0.0; m + 1];
    row[0] = 1.0;
    let mut absorbed = 0.0;
    for i in 0..=n {
        let mut next = vec![0.0; m + 1];
        for j in 0..=m {
            let mass = row[j];
            if mass == 0.0 {
                continue;
            }
            let remaining = (n - i + m - j) as f64;
            if remaining == 0.0 {
                continue;
            }
            if i < n {
                let p = mass * (n - i) as f64 / remaining;
                if outside(i + 1, j) {
                    absorbed += p;
                } else {
                    next[j] += p;
                }
            }
            if j < m {
                let p = mass * (m - j) as f64 / remaining;
                if outside(i, j + 1) {
                    absorbed += p;
                } else {
                    row[j + 1] += p;
                }
            }
        }
        row = next;
    }
    absorbed.clamp(0.0, 1.0)
}

/// Limiting Kolmogorov distribution `Q(√(nm/(n+m))·d)`.
pub fn ks_asymptotic_p(d: f64, n: usize, m: usize) -> f64 {
    let en = (n * m) as f64 / (n + m) as f64;
    kolmogorov_q(en.sqrt() * d)
}

fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form converges fast for small arguments
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let s: f64 = (1..=100)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

pub fn ks_p_value(d: f64, n: usize, m: usize) -> (f64, KsMethod) {
    if n * m <= KS_EXACT_LIMIT {
        (ks_exact_p(d, n, m), KsMethod::Exact)
    } else {
        (ks_asymptotic_p(d, n, m), KsMethod::Asymptotic)
    }
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KSResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Empty);
    }
    let statistic = ks_statistic(a, b);
    let (p_value, method) = ks_p_value(statistic, a.len(), b.len());
    Ok(KSResult { statistic, p_value, method })
}

/// Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Student-t CDF with `nu` degrees of freedom.
pub fn t_cdf(t: f64, nu: f64) -> f64 {
    let tail = 0.5 * regularized_incomplete_beta(nu / 2.0, 0.5, nu / (nu + t * t));
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Inverse of [`t_cdf`] by bracketing bisection.
pub fn t_quantile(p: f64, nu: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile probability must lie in (0, 1)");
    if p < 0.5 {
        return -t_quantile(1.0 - p, nu);
    }
    let mut hi = 1.0;
    while t_cdf(hi, nu) < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_cdf(mid, nu) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Midpoint convention for even lengths.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `mean ± t · s / √n` from summary values.
pub fn t_interval_from_summary(mean: f64, std: f64, n: usize, level: f64) -> Result<(f64, f64), StatsError> {
    if n < 2 {
        return Err(StatsError::TooFew(n));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::Level(level));
    }
    let t = t_quantile((1.0 + level) / 2.0, (n - 1) as f64);
    let half = t * std / (n as f64).sqrt();
    Ok((mean - half, mean + half))
}

pub fn t_confidence_interval(xs: &[f64], level: f64) -> Result<(f64, f64), StatsError> {
    if xs.len() < 2 {
        return Err(StatsError::TooFew(xs.len()));
    }
    t_interval_from_summary(mean(xs), sample_std(xs), xs.len(), level)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStatistics {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub best: f64,
    pub worst: f64,
    pub ci95: (f64, f64),
}

pub fn summarize_runs(values: &[f64]) -> Result<RunStatistics, StatsError> {
    if values.len() < 2 {
        return Err(StatsError::TooFew(values.len()));
    }
    Ok(RunStatistics {
        n: values.len(),
        mean: mean(values),
        std: sample_std(values),
        median: median(values),
        best: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        worst: values.iter().copied().fold(f64::INFINITY, f64::min),
        ci95: t_confidence_interval(values, 0.95)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn confusion_counts_cells() {
        let cm = confusion(&[0, 0, 1, 1, 1], &[0, 1, 0, 1, 1]).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(1, 1, 1, 2));
        assert!(matches!(confusion(&[0], &[0, 1]), Err(StatsError::LengthMismatch(1, 2))));
        assert!(matches!(confusion(&[2], &[0]), Err(StatsError::Label(2))));
        assert!(matches!(confusion(&[], &[]), Err(StatsError::Empty)));
    }

    #[test]
    fn report_handles_empty_predictions() {
        let r = classification_report(&ConfusionMatrix::new(5, 0, 5, 0));
        assert_eq!(r.classes[1].precision, 0.0);
        assert_eq!(r.classes[1].f1, 0.0);
        assert_eq!(r.accuracy, 0.5);
    }

    #[test]
    fn report_table_layout() {
        let t = classification_report(&ConfusionMatrix::new(312, 11, 8, 269)).to_csv();
        assert!(t.starts_with("class,precision,recall,f1,support\nUndefined Loop (0),0.97,0.97,0.97,323\n"), "{t}");
        assert!(t.ends_with("accuracy,,,0.97,600\n"));
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a = [1.0, 2.0, 3.0];
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let r = ks_two_sample(&[1.0, 2.0], &[5.0, 6.0, 7.0]).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert_eq!(r.method, KsMethod::Exact);
        // both orderings with all a before all b: 2 / C(5, 2)
        assert!(approx(r.p_value, 0.2, 1e-12));
        assert!(ks_two_sample(&[], &a).is_err());
    }

    #[test]
    fn ks_ties_count_once() {
        assert!(approx(ks_statistic(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]), 1.0 / 3.0, 1e-12));
    }

    #[test]
    fn asymptotic_switch() {
        let (_, m) = ks_p_value(0.2, 101, 100);
        assert_eq!(m, KsMethod::Asymptotic);
        assert_eq!(ks_p_value(0.2, 100, 100).1, KsMethod::Exact);
    }

    #[test]
    fn gamma_values() {
        assert!(approx(ln_gamma(5.0), 24f64.ln(), 1e-13));
        assert!(approx(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), 1e-13));
    }

    #[test]
    fn t_distribution_symmetry() {
        assert!(approx(t_cdf(0.0, 7.0), 0.5, 1e-15));
        assert!(approx(t_cdf(1.3, 4.0) + t_cdf(-1.3, 4.0), 1.0, 1e-14));
        // one degree of freedom is Cauchy
        assert!(approx(t_cdf(1.0, 1.0), 0.75, 1e-12));
        assert!(approx(t_quantile(0.975, 29.0), 2.045_229_642, 1e-8));
    }

    #[test]
    fn constant_sample_interval_collapses() {
        assert_eq!(t_confidence_interval(&[4.0; 6], 0.95).unwrap(), (4.0, 4.0));
        assert!(t_confidence_interval(&[1.0], 0.95).is_err());
    }

    #[test]
    fn two_point_summary() {
        let s = summarize_runs(&[90.0, 94.0]).unwrap();
        assert_eq!((s.mean, s.median, s.best, s.worst), (92.0, 92.0, 94.0, 90.0));
        assert!(approx(s.std, 8f64.sqrt(), 1e-12));
        assert!(s.ci95.0 < 92.0 && s.ci95.1 > 92.0);
    }
}
