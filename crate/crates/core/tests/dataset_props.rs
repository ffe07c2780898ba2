use std::fs;

use loopsight::codegen::ClassLabel;
use loopsight::dataset::{
    assemble_corpus, build_dataset, fit_scaler, pad_truncate, read_dataset_cache, split_corpus, split_sizes, DatasetError,
    FeatureMatrix, LabeledSequence, DEFAULT_PROPORTIONS,
};
use loopsight::lang::TokenVocab;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn matrix(rows: usize, cols: usize, seed: u64) -> (FeatureMatrix, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..rows * cols).map(|_| rng.gen_range(0..50) as f64).collect();
    let y = (0..rows).map(|_| rng.gen_range(0..2)).collect();
    (FeatureMatrix::new(rows, cols, values), y)
}

#[test]
fn full_scale_split_sizes() {
    assert_eq!(split_sizes(4000, DEFAULT_PROPORTIONS).unwrap(), [2800, 600, 600]);
    assert_eq!(split_sizes(400, DEFAULT_PROPORTIONS).unwrap(), [280, 60, 60]);
    assert!(matches!(split_sizes(3, DEFAULT_PROPORTIONS), Err(DatasetError::EmptySplit { .. })));
}

#[test]
fn scaler_ignores_validation_rows() {
    let (x, y) = matrix(60, 5, 1);
    let split = split_corpus(&x, &y, DEFAULT_PROPORTIONS, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let mut tampered = x.clone();
    for &i in split.val.indices.iter().chain(&split.test.indices) {
        tampered.row_mut(i).iter_mut().for_each(|v| *v = 1e6);
    }
    let again = split_corpus(&tampered, &y, DEFAULT_PROPORTIONS, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(again.train, split.train);
    assert_eq!(fit_scaler(&again.train.x).unwrap(), fit_scaler(&split.train.x).unwrap());
}

fn write_programs(dir: &std::path::Path, sources: &[&str]) {
    fs::create_dir_all(dir).unwrap();
    for (i, s) in sources.iter().enumerate() {
        fs::write(dir.join(format!("p_{i}.py")), s).unwrap();
    }
}

#[test]
fn corpus_assembly_and_cache_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let pos = tmp.path().join("pos");
    let neg = tmp.path().join("neg");
    let programs: Vec<String> = (0..12).map(|i| format!("for i in range({i}):\n    x = i * {i}\n    y = x + 1\n")).collect();
    let carried: Vec<String> = (0..12).map(|i| format!("acc = 0\nfor i in range({i}):\n    acc = acc + i\n")).collect();
    write_programs(&pos, &programs.iter().map(String::as_str).collect::<Vec<_>>());
    write_programs(&neg, &carried.iter().map(String::as_str).collect::<Vec<_>>());

    let dirs = [(pos.clone(), ClassLabel::Independent), (neg.clone(), ClassLabel::Ambiguous)];
    let a = assemble_corpus(&dirs, &mut TokenVocab::new()).unwrap();
    let b = assemble_corpus(&dirs, &mut TokenVocab::new()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.iter().filter(|s| s.label == 1).count(), 12);

    let out1 = tmp.path().join("c1");
    let out2 = tmp.path().join("c2");
    build_dataset(&pos, &neg, &out1, None, 4).unwrap();
    build_dataset(&pos, &neg, &out2, None, 4).unwrap();
    for f in ["dataset.csv", "dataset.json", "vocab.json"] {
        assert_eq!(fs::read(out1.join(f)).unwrap(), fs::read(out2.join(f)).unwrap(), "{f}");
    }
    let cached = read_dataset_cache(&out1).unwrap();
    assert_eq!(cached.x.rows, 24);
    let header = fs::read_to_string(out1.join("dataset.csv")).unwrap().lines().next().unwrap().to_string();
    assert!(header.starts_with("label,x0,"));
    assert!(header.ends_with(&format!("x{}", cached.meta.width - 1)));

    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let err = assemble_corpus(&[(empty, ClassLabel::Independent)], &mut TokenVocab::new()).unwrap_err();
    assert!(err.to_string().contains("empty corpus directory"));
}

#[test]
fn lex_errors_name_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    write_programs(tmp.path(), &["x = 1\n", "y = $\n"]);
    let err = assemble_corpus(&[(tmp.path().to_path_buf(), ClassLabel::Ambiguous)], &mut TokenVocab::new()).unwrap_err();
    match err {
        DatasetError::Lex { path, line, .. } => {
            assert!(path.ends_with("p_1.py"));
            assert_eq!(line, 1);
        }
        other => panic!("unexpected {other}"),
    }
}

proptest! {
    #[test]
    fn split_is_a_partition(rows in 7usize..120, seed in any::<u64>()) {
        let (x, y) = matrix(rows, 3, seed);
        let split = split_corpus(&x, &y, DEFAULT_PROPORTIONS, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let mut all: Vec<usize> = [&split.train, &split.val, &split.test].iter().flat_map(|s| s.indices.clone()).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..rows).collect::<Vec<_>>());
        for s in [&split.train, &split.val, &split.test] {
            for (k, &i) in s.indices.iter().enumerate() {
                prop_assert_eq!(s.x.row(k), x.row(i));
                prop_assert_eq!(s.y[k], y[i]);
            }
        }
        let [tr, va, te] = split_sizes(rows, DEFAULT_PROPORTIONS).unwrap();
        prop_assert_eq!((split.train.len(), split.val.len(), split.test.len()), (tr, va, te));
        let again = split_corpus(&x, &y, DEFAULT_PROPORTIONS, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(again, split);
    }

    #[test]
    fn padding_keeps_prefix(seqs in prop::collection::vec(prop::collection::vec(1u32..500, 0..30), 1..10), width in 1usize..40) {
        let labeled: Vec<LabeledSequence> = seqs.iter().map(|ids| LabeledSequence { ids: ids.clone(), label: 0 }).collect();
        let (m, _) = pad_truncate(&labeled, Some(width));
        prop_assert_eq!(m.cols, width);
        for (r, ids) in seqs.iter().enumerate() {
            let keep = ids.len().min(width);
            for c in 0..width {
                let expected = if c < keep { f64::from(ids[c]) } else { 0.0 };
                prop_assert_eq!(m.get(r, c), expected);
            }
        }
    }

    #[test]
    fn scaled_training_columns_are_standard(rows in 2usize..60, cols in 1usize..6, seed in any::<u64>()) {
        let (x, _) = matrix(rows, cols, seed);
        let scaler = fit_scaler(&x).unwrap();
        let z = scaler.apply(&x).unwrap();
        for c in 0..cols {
            let col: Vec<f64> = (0..rows).map(|r| z.get(r, c)).collect();
            let mean = col.iter().sum::<f64>() / rows as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64;
            prop_assert!(mean.abs() < 1e-9);
            if scaler.is_constant(c) {
                prop_assert!(col.iter().all(|v| *v == 0.0));
            } else {
                prop_assert!((var - 1.0).abs() < 1e-9);
            }
        }
    }
}
