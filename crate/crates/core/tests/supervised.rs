use geoseg::supervised::{
    classify_volume, cross_validate, extract_features, fold_assignment, patch_at, roc_curve, train_ensemble,
    train_lssvm, Classifier, DecisionTree, EnsembleMethod, EnsembleParams, FeatureMatrix, LssvmParams, Trainer,
    TrainingTable, N_FEATURES,
};
use geoseg::{BitDepth, Dims, Error, VoxelVolume};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

mod common;
use common::{bordered_system, dense_solve, relative_residual};

/// XOR corners in features 0 and 1, the remaining 34 features constant.
fn xor(per_corner: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (cx, cy, class) in [(0.0, 0.0, 1), (1.0, 1.0, 1), (0.0, 1.0, 2), (1.0, 0.0, 2)] {
        for _ in 0..per_corner {
            let mut r = vec![5.0; N_FEATURES];
            r[0] = cx + rng.random_range(-0.1..0.1);
            r[1] = cy + rng.random_range(-0.1..0.1);
            rows.push(r);
            labels.push(class);
        }
    }
    FeatureMatrix::from_rows(rows, labels).unwrap()
}

#[test]
fn xor_machine_solves_its_kernel_system() {
    let f = xor(5, 3);
    let p = LssvmParams {
        standardize: false,
        ..LssvmParams::new(10.0, 0.5)
    };
    let model = train_lssvm(&f, &p).unwrap();
    assert_eq!(model.machines.len(), 1);
    let m = &model.machines[0];

    let rows: Vec<Vec<f64>> = m.members.iter().map(|&i| f.row(i).to_vec()).collect();
    let (a, r) = bordered_system(&rows, &m.targets, 10.0, 0.5);
    let mut z = vec![m.bias];
    z.extend_from_slice(&m.alphas);
    let res = relative_residual(&a, &z, &r);
    assert!(res <= 1e-8, "residual {res:e}");
    assert!(m.residual <= 1e-8);

    let reference = dense_solve(a, r);
    for (got, want) in z.iter().zip(&reference) {
        assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "{got} vs {want}");
    }

    let clf = Classifier::Lssvm(model);
    assert_eq!(clf.accuracy(&f), 1.0);
}

#[test]
fn every_pairwise_machine_meets_the_residual_bound() {
    // four classes with standardisation on: the oracle rebuilds the system
    // from the stored (scaled) support rows
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::<f64>::new(0.0, 3.0).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (class, level) in [(1u8, 20.0), (2, 90.0), (3, 160.0), (4, 230.0)] {
        for _ in 0..12 {
            rows.push((0..N_FEATURES).map(|_| level + noise.sample(&mut rng)).collect());
            labels.push(class);
        }
    }
    let f = FeatureMatrix::from_rows(rows, labels).unwrap();
    let p = LssvmParams::default();
    let model = train_lssvm(&f, &p).unwrap();
    assert_eq!(model.machines.len(), 6);
    for m in &model.machines {
        let rows: Vec<Vec<f64>> = m.members.iter().map(|&i| model.support_row(i).to_vec()).collect();
        let (a, r) = bordered_system(&rows, &m.targets, p.gamma, p.sigma2);
        let mut z = vec![m.bias];
        z.extend_from_slice(&m.alphas);
        let res = relative_residual(&a, &z, &r);
        assert!(res <= 1e-8, "{}/{}: {res:e}", m.positive, m.negative);
    }
    assert_eq!(Classifier::Lssvm(model).accuracy(&f), 1.0);
}

#[test]
fn tiny_regularisation_on_duplicates_is_a_conditioning_error() {
    let rows = vec![vec![1.0; 4], vec![1.0; 4], vec![1.0; 4], vec![2.0; 4]];
    let f = FeatureMatrix::from_rows(rows, vec![1, 2, 1, 2]).unwrap();
    let p = LssvmParams {
        standardize: false,
        ..LssvmParams::new(1e17, 1.0)
    };
    match train_lssvm(&f, &p) {
        Err(Error::Conditioning(msg)) => assert!(msg.contains("1/gamma"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

fn noisy_three_class(seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..90 {
        let class = (i % 3) as u8 + 1;
        let centre = class as f64 * 2.0;
        rows.push(vec![centre + rng.random_range(-2.5..2.5), rng.random_range(0.0..1.0)]);
        labels.push(class);
    }
    FeatureMatrix::from_rows(rows, labels).unwrap()
}

#[test]
fn one_unresampled_learner_is_the_single_tree() {
    let f = noisy_three_class(1);
    let p = EnsembleParams {
        bootstrap: false,
        ..EnsembleParams::new(EnsembleMethod::Bagging, 1, 3)
    };
    let bag = train_ensemble(&f, &p).unwrap();
    let idx: Vec<usize> = f.labels().iter().map(|&l| l as usize - 1).collect();
    let tree = DecisionTree::fit(&f, &idx, &vec![1.0; f.len()], 3, 3);
    assert_eq!(bag.trees[0], tree);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let x = [rng.random_range(0.0..9.0), rng.random_range(0.0..1.0)];
        assert_eq!(bag.predict(&x) as usize, tree.predict(&x) + 1);
    }
}

#[test]
fn bagging_resamples_differ_between_learners() {
    let f = noisy_three_class(1);
    let m = train_ensemble(&f, &EnsembleParams::new(EnsembleMethod::Bagging, 8, 3)).unwrap();
    assert_eq!(m.trees.len(), 8);
    assert!(m.trees.windows(2).any(|w| w[0] != w[1]));
    assert!(m.learner_weights.iter().all(|&w| w == 1.0));
}

#[test]
fn boosting_rounds_recompute_from_their_trace() {
    let f = noisy_three_class(4);
    let m = train_ensemble(&f, &EnsembleParams::new(EnsembleMethod::AdaBoost, 15, 1)).unwrap();
    let k = 3.0;
    assert!(m.boost_trace.len() > 1);
    assert_eq!(m.trees.len(), m.boost_trace.len());
    for (t, (round, tree)) in m.boost_trace.iter().zip(&m.trees).enumerate() {
        let total: f64 = round.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        let eps: f64 = (0..f.len())
            .filter(|&i| tree.predict(f.row(i)) + 1 != f.labels()[i] as usize)
            .map(|i| round.weights[i])
            .sum();
        assert!((eps - round.error).abs() < 1e-12, "round {t}");
        assert!(eps < 1.0 - 1.0 / k, "round {t}: {eps}");
        let alpha = ((1.0 - eps) / eps).ln() + (k - 1.0f64).ln();
        assert!((alpha - round.alpha).abs() < 1e-9);
        assert!(round.alpha.is_finite() && round.alpha > 0.0);
        assert_eq!(m.learner_weights[t], round.alpha);

        if let Some(next) = m.boost_trace.get(t + 1) {
            // misclassified weights grow by exp(alpha), then renormalise
            let raw: Vec<f64> = (0..f.len())
                .map(|i| round.weights[i] * if round.missed[i] { round.alpha.exp() } else { 1.0 })
                .collect();
            let s: f64 = raw.iter().sum();
            for i in 0..f.len() {
                assert!((raw[i] / s - next.weights[i]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn boosting_stops_after_a_perfect_round() {
    let f = FeatureMatrix::from_rows(vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]], vec![1, 1, 2, 2]).unwrap();
    let m = train_ensemble(&f, &EnsembleParams::new(EnsembleMethod::AdaBoost, 10, 1)).unwrap();
    assert_eq!(m.trees.len(), 1);
    assert!(m.learner_weights[0].is_finite());
}

#[test]
fn separable_data_cross_validates_perfectly() {
    let f = xor(10, 5);
    let report = cross_validate(&f, 10, &Trainer::Lssvm(LssvmParams::default()), 0).unwrap();
    assert_eq!(report.fold_accuracies.len(), 10);
    assert_eq!(report.mean, 1.0);
    assert_eq!(report.std, 0.0);
    assert!(matches!(
        cross_validate(&f, 41, &Trainer::Lssvm(LssvmParams::default()), 0),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn shuffled_labels_cross_validate_at_chance() {
    let seeds = 10;
    let mut total = 0.0;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..N_FEATURES).map(|_| rng.random_range(0.0..255.0)).collect())
            .collect();
        let mut labels: Vec<u8> = (0..60).map(|i| 1 + (i % 2) as u8).collect();
        use rand::seq::SliceRandom;
        labels.shuffle(&mut rng);
        let f = FeatureMatrix::from_rows(rows, labels).unwrap();
        let trainer = Trainer::Ensemble(EnsembleParams {
            seed,
            ..EnsembleParams::new(EnsembleMethod::Bagging, 15, 3)
        });
        total += cross_validate(&f, 10, &trainer, seed).unwrap().mean;
    }
    let mean = total / seeds as f64;
    assert!((mean - 0.5).abs() <= 0.15, "mean accuracy {mean}");
}

#[test]
fn folds_are_stratified_and_seeded() {
    let labels: Vec<u8> = (0..50).map(|i| if i < 20 { 1 } else { 2 }).collect();
    let a = fold_assignment(&labels, 10, 7).unwrap();
    assert_eq!(a, fold_assignment(&labels, 10, 7).unwrap());
    assert_ne!(a, fold_assignment(&labels, 10, 8).unwrap());
    for k in 0..10 {
        let ones = (0..50).filter(|&i| a[i] == k && labels[i] == 1).count();
        assert_eq!(ones, 2);
    }
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counted half.
fn rank_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut hits = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                hits += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
    }
    hits / pairs
}

#[test]
fn random_scores_give_auc_near_one_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let scores: Vec<f64> = (0..4000).map(|_| rng.random()).collect();
    let labels: Vec<bool> = (0..4000).map(|_| rng.random()).collect();
    let roc = roc_curve(&scores, &labels).unwrap();
    assert!((roc.auc - 0.5).abs() < 0.03, "{}", roc.auc);
}

fn scored_samples() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    prop::collection::vec((0u8..12, prop::bool::ANY), 2..60)
        .prop_filter("both classes", |v| v.iter().any(|x| x.1) && v.iter().any(|x| !x.1))
        .prop_map(|v| v.into_iter().map(|(s, l)| (s as f64 / 4.0, l)).unzip())
}

fn any_slice_volume() -> impl Strategy<Value = VoxelVolume> {
    (1usize..10, 1usize..10, 1usize..3).prop_flat_map(|(nx, ny, nz)| {
        prop::collection::vec(0u16..=255, nx * ny * nz)
            .prop_map(move |d| VoxelVolume::new(Dims::new(nx, ny, nz), 1.0, BitDepth::U8, d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auc_is_the_pairwise_ranking_statistic((scores, labels) in scored_samples()) {
        let roc = roc_curve(&scores, &labels).unwrap();
        prop_assert!((roc.auc - rank_auc(&scores, &labels)).abs() < 1e-12);
        prop_assert_eq!(roc.points.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(roc.points.last().copied(), Some((1.0, 1.0)));
        prop_assert!(roc.points.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
    }

    #[test]
    fn patch_is_the_clamped_neighbourhood(vol in any_slice_volume(), x in 0usize..10, y in 0usize..10, z in 0usize..3) {
        let d = vol.dims();
        let (x, y, z) = (x % d.nx, y % d.ny, z % d.nz);
        let p = patch_at(&vol, x, y, z);
        for r in 0..6i64 {
            for c in 0..6i64 {
                let xx = (x as i64 + c - 2).clamp(0, d.nx as i64 - 1) as usize;
                let yy = (y as i64 + r - 2).clamp(0, d.ny as i64 - 1) as usize;
                prop_assert_eq!(p[(r * 6 + c) as usize], vol.get(xx, yy, z) as f64);
            }
        }
    }
}

#[test]
fn four_phase_table_extracts_36_values_per_row() {
    let vol = VoxelVolume::from_fn(Dims::new(20, 20, 2), 1.0, BitDepth::U8, |x, y, z| (x * 3 + y * 5 + z) as u16).unwrap();
    let mut t = TrainingTable::default();
    for (c, name, x, y) in [(1, "pore", 2, 3), (2, "matrix", 10, 10), (3, "mineral", 17, 1), (4, "noise", 0, 19)] {
        t.push(c, name, x, y, 1);
    }
    let f = extract_features(&vol, &t).unwrap();
    assert_eq!((f.len(), f.width()), (4, 36));
    assert_eq!(f.classes(), vec![1, 2, 3, 4]);
    assert_eq!(f.row(1), patch_at(&vol, 10, 10, 1).as_slice());

    let back = TrainingTable::from_csv_reader(t.to_csv_string().as_bytes()).unwrap();
    assert_eq!(back, t);
    assert!(t.to_csv_string().starts_with("class,feature,x,y,slice\n"));

    let mut bad = t.clone();
    bad.push(2, "matrix", 3, 20, 0);
    match extract_features(&vol, &bad) {
        Err(Error::Coordinate(msg)) => assert!(msg.starts_with("row 4"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

fn two_regions() -> VoxelVolume {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let noise = Normal::<f64>::new(0.0, 8.0).unwrap();
    VoxelVolume::from_fn(Dims::new(40, 32, 4), 1.0, BitDepth::U8, |x, _, _| {
        let base = if x < 20 { 70.0 } else { 170.0 };
        (base + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u16
    })
    .unwrap()
}

#[test]
fn single_slice_training_labels_the_whole_stack() {
    let vol = two_regions();
    let mut t = TrainingTable::default();
    for i in 0..10 {
        t.push(1, "pore", 3 + i, 4 + 2 * i, 1);
        t.push(2, "matrix", 26 + i, 5 + 2 * i, 1);
    }
    let f = extract_features(&vol, &t).unwrap();
    for trainer in [
        Trainer::Lssvm(LssvmParams::default()),
        Trainer::Ensemble(EnsembleParams::new(EnsembleMethod::Bagging, 20, 3)),
        Trainer::Ensemble(EnsembleParams::new(EnsembleMethod::AdaBoost, 20, 2)),
    ] {
        let model = trainer.train(&f).unwrap();
        let labels = classify_volume(&model, &vol).unwrap();
        let d = vol.dims();
        let (mut interior, mut right) = (0, 0);
        for z in 0..d.nz {
            for y in 0..d.ny {
                for x in 0..d.nx {
                    // boundary sits between columns 19 and 20
                    if (x as f64 - 19.5).abs() <= 3.0 {
                        continue;
                    }
                    interior += 1;
                    let want = if x < 20 { 1 } else { 2 };
                    right += (labels.get(x, y, z) == want) as usize;
                }
            }
        }
        let acc = right as f64 / interior as f64;
        assert!(acc >= 0.99, "{trainer:?}: {acc}");
    }
}

#[test]
fn saved_models_predict_identically() {
    let vol = two_regions();
    let mut t = TrainingTable::default();
    for i in 0..6 {
        t.push(1, "pore", 4 + i, 3 * i + 2, 0);
        t.push(2, "matrix", 30 + i, 3 * i + 1, 0);
    }
    let f = extract_features(&vol, &t).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (i, trainer) in [
        Trainer::Lssvm(LssvmParams::default()),
        Trainer::Ensemble(EnsembleParams::new(EnsembleMethod::AdaBoost, 10, 2)),
    ]
    .into_iter()
    .enumerate()
    {
        let model = trainer.train(&f).unwrap();
        let path = dir.path().join(format!("m{i}.json"));
        model.save(&path).unwrap();
        let back = Classifier::load(&path).unwrap();
        assert_eq!(back.classes(), model.classes());
        assert_eq!(classify_volume(&back, &vol).unwrap(), classify_volume(&model, &vol).unwrap());
    }
    assert!(matches!(Classifier::from_json("{\"format\":\"other\"}"), Err(Error::Model(_))));
}
