use loopsight::stats::{
    classification_report, confusion, ks_asymptotic_p, ks_exact_p, ks_two_sample, summarize_runs, t_confidence_interval,
    t_interval_from_summary, t_quantile, ClassReport, ConfusionMatrix, KsMethod,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn two(x: f64) -> String {
    format!("{x:.2}")
}

/// (class 0, class 1, macro, weighted) rows of precision/recall/f1 plus accuracy.
fn rendered(r: &ClassReport) -> (Vec<[String; 3]>, String) {
    let row = |m: &loopsight::stats::ClassMetrics| [two(m.precision), two(m.recall), two(m.f1)];
    (vec![row(&r.classes[0]), row(&r.classes[1]), row(&r.macro_avg), row(&r.weighted_avg)], two(r.accuracy))
}

fn table(rows: [[&str; 3]; 4]) -> Vec<[String; 3]> {
    rows.iter().map(|r| r.map(String::from)).collect()
}

#[test]
fn reference_classification_reports() {
    let cases = [
        // best DNN
        (ConfusionMatrix::new(312, 11, 8, 269), [["0.97", "0.97", "0.97"], ["0.96", "0.97", "0.97"], ["0.97", "0.97", "0.97"], ["0.97", "0.97", "0.97"]], "0.97", 0.9683),
        // best CNN
        (ConfusionMatrix::new(323, 0, 14, 263), [["0.96", "1.00", "0.98"], ["1.00", "0.95", "0.97"], ["0.98", "0.97", "0.98"], ["0.98", "0.98", "0.98"]], "0.98", 0.9767),
        // worst DNN
        (ConfusionMatrix::new(79, 244, 0, 277), [["1.00", "0.24", "0.39"], ["0.53", "1.00", "0.69"], ["0.77", "0.62", "0.54"], ["0.78", "0.59", "0.53"]], "0.59", 0.5933),
        // worst CNN
        (ConfusionMatrix::new(322, 1, 264, 13), [["0.55", "1.00", "0.71"], ["0.93", "0.05", "0.09"], ["0.74", "0.52", "0.40"], ["0.72", "0.56", "0.42"]], "0.56", 0.5583),
    ];
    for (cm, rows, acc, pct) in cases {
        let report = classification_report(&cm);
        let (got, got_acc) = rendered(&report);
        assert_eq!(got, table(rows), "{cm:?}");
        assert_eq!(got_acc, acc);
        assert!((report.accuracy - pct).abs() < 5e-5);
        assert_eq!(report.classes[0].support + report.classes[1].support, 600);
    }
}

#[test]
fn confusion_from_label_vectors() {
    let y_true: Vec<u8> = [vec![0; 323], vec![1; 277]].concat();
    let mut y_pred = y_true.clone();
    for p in y_pred.iter_mut().take(11) {
        *p = 1;
    }
    for p in y_pred.iter_mut().skip(323).take(8) {
        *p = 0;
    }
    assert_eq!(confusion(&y_true, &y_pred).unwrap(), ConfusionMatrix::new(312, 11, 8, 269));
    let perfect: Vec<u8> = [vec![0; 300], vec![1; 300]].concat();
    let cm = confusion(&perfect, &perfect).unwrap();
    assert_eq!((cm.fp, cm.fn_), (0, 0));
}

#[test]
fn reference_confidence_intervals() {
    for (m, s, lo, hi) in [(91.37, 7.41, 88.59, 94.14), (92.70, 7.53, 89.89, 95.51)] {
        let (a, b) = t_interval_from_summary(m, s, 30, 0.95).unwrap();
        let round2 = |x: f64| (x * 100.0).round() / 100.0;
        assert!((round2(a) - lo).abs() <= 0.01 + 1e-9, "{a} vs {lo}");
        assert!((round2(b) - hi).abs() <= 0.01 + 1e-9, "{b} vs {hi}");
    }
    assert_eq!(t_confidence_interval(&[4.0; 6], 0.95).unwrap(), (4.0, 4.0));
}

#[test]
fn reference_ks_p_values() {
    let p = ks_exact_p(1.0 / 3.0, 30, 30);
    assert!((p - 0.0708).abs() <= 0.002, "p = {p}");
    assert!(ks_exact_p(0.7, 30, 30) < 1e-4);

    // samples realizing those statistics
    let a: Vec<f64> = (0..30).map(f64::from).collect();
    let b: Vec<f64> = (10..40).map(f64::from).collect();
    let r = ks_two_sample(&a, &b).unwrap();
    assert!((r.statistic - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(r.method, KsMethod::Exact);
    assert!((r.p_value - 0.0708).abs() <= 0.002);
    let b: Vec<f64> = (21..51).map(f64::from).collect();
    let r = ks_two_sample(&a, &b).unwrap();
    assert!((r.statistic - 0.7).abs() < 1e-12 && r.p_value < 1e-4);
}

fn ecdf_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    pooled
        .iter()
        .map(|&t| {
            let fa = a.iter().filter(|&&x| x <= t).count() as f64 / a.len() as f64;
            let fb = b.iter().filter(|&&x| x <= t).count() as f64 / b.len() as f64;
            (fa - fb).abs()
        })
        .fold(0.0, f64::max)
}

/// Share of all n-subsets of n+m distinct ranks whose statistic is at least `d`.
fn brute_force_p(d: f64, n: usize, m: usize) -> f64 {
    let total = n + m;
    let (mut hits, mut count) = (0u64, 0u64);
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let (a, b): (Vec<f64>, Vec<f64>) = {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for i in 0..total {
                if mask >> i & 1 == 1 { a.push(i as f64) } else { b.push(i as f64) }
            }
            (a, b)
        };
        count += 1;
        if ecdf_distance(&a, &b) >= d - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / count as f64
}

#[test]
fn exact_ks_matches_enumeration() {
    for (n, m) in [(3, 4), (5, 5), (5, 7), (6, 6)] {
        for num in 1..=n * m {
            let d = num as f64 / (n * m) as f64;
            let (exact, brute) = (ks_exact_p(d, n, m), brute_force_p(d, n, m));
            assert!((exact - brute).abs() < 1e-12, "n={n} m={m} d={d}: {exact} vs {brute}");
        }
    }
}

#[test]
fn exact_and_asymptotic_agree_for_large_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // a statistic for n = m = 100 is always a multiple of 1/100
    for _ in 0..50 {
        let d = rng.gen_range(5..=50) as f64 / 100.0;
        let (e, a) = (ks_exact_p(d, 100, 100), ks_asymptotic_p(d, 100, 100));
        assert!((e - a).abs() < 0.01, "d={d}: exact {e} asymptotic {a}");
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Quantile from the Student-t kernel normalized by its own numerical integral.
fn quadrature_t_quantile(p: f64, nu: f64) -> f64 {
    let kernel = |t: f64| (1.0 + t * t / nu).powf(-(nu + 1.0) / 2.0);
    // the tail beyond 2000 is below 1e-80 for nu = 29
    let norm = 2.0 * simpson(kernel, 0.0, 2000.0, 400_000);
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let cdf = 0.5 + simpson(kernel, 0.0, mid, 20_000) / norm;
        if cdf < p { lo = mid } else { hi = mid }
    }
    0.5 * (lo + hi)
}

#[test]
fn t_quantile_matches_quadrature() {
    let q = t_quantile(0.975, 29.0);
    assert!((q - 2.0452).abs() <= 0.0005);
    let oracle = quadrature_t_quantile(0.975, 29.0);
    assert!((q - oracle).abs() < 1e-6, "{q} vs {oracle}");
    for (p, nu) in [(0.9, 5.0), (0.995, 12.0)] {
        assert!((t_quantile(p, nu) - quadrature_t_quantile(p, nu)).abs() < 1e-5);
    }
}

#[test]
fn ci_width_scales_with_inverse_sqrt_n() {
    // alternating samples with a fixed sample std of 2
    let width = |n: usize| {
        let s = 2.0 * ((n - 1) as f64 / n as f64).sqrt();
        let xs: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 50.0 + s } else { 50.0 - s }).collect();
        let (lo, hi) = t_confidence_interval(&xs, 0.95).unwrap();
        (hi - lo) / t_quantile(0.975, (n - 1) as f64)
    };
    let (w10, w40, w160) = (width(10), width(40), width(160));
    assert!((w10 / w40 - 2.0).abs() < 1e-9);
    assert!((w40 / w160 - 2.0).abs() < 1e-9);
}

#[test]
fn two_point_summary() {
    let s = summarize_runs(&[90.0, 94.0]).unwrap();
    assert_eq!((s.mean, s.median), (92.0, 92.0));
    assert!((s.std - 8f64.sqrt()).abs() < 1e-12);
    assert!(summarize_runs(&[1.0]).is_err());
}

proptest! {
    #[test]
    fn ks_is_symmetric(a in prop::collection::vec(0.0f64..100.0, 1..25), b in prop::collection::vec(0.0f64..100.0, 1..25)) {
        let (x, y) = (ks_two_sample(&a, &b).unwrap(), ks_two_sample(&b, &a).unwrap());
        prop_assert_eq!(x.statistic, y.statistic);
        prop_assert!((x.p_value - y.p_value).abs() < 1e-12);
        prop_assert!((x.statistic - ecdf_distance(&a, &b)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&x.p_value));
    }

    #[test]
    fn report_identities(tn in 0usize..400, fp in 0usize..400, fn_ in 0usize..400, tp in 0usize..400) {
        prop_assume!(tn + fp + fn_ + tp > 0);
        let cm = ConfusionMatrix::new(tn, fp, fn_, tp);
        let r = classification_report(&cm);
        prop_assert!((r.weighted_avg.recall - r.accuracy).abs() < 1e-12);
        for c in r.classes.iter().chain([&r.macro_avg, &r.weighted_avg]) {
            for v in [c.precision, c.recall, c.f1] {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
        }
        for c in &r.classes {
            prop_assert!(c.f1 <= c.precision.max(c.recall) + 1e-12);
            if c.precision > 0.0 && c.recall > 0.0 {
                prop_assert!(c.f1 >= c.precision.min(c.recall) - 1e-12);
            }
        }
    }

    #[test]
    fn summary_is_order_invariant(mut xs in prop::collection::vec(0.0f64..100.0, 2..40), seed in any::<u64>()) {
        let s = summarize_runs(&xs).unwrap();
        prop_assert!(s.worst <= s.median && s.median <= s.best);
        prop_assert!(s.ci95.0 <= s.mean + 1e-9 && s.mean <= s.ci95.1 + 1e-9);
        use rand::seq::SliceRandom;
        xs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let t = summarize_runs(&xs).unwrap();
        prop_assert_eq!((s.median, s.best, s.worst, s.n), (t.median, t.best, t.worst, t.n));
        prop_assert!((s.mean - t.mean).abs() < 1e-9 && (s.std - t.std).abs() < 1e-9);
    }
}
