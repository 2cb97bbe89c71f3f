mod common;

use alseg::features::{FeatureConfig, Scaler};
use alseg::svm::*;
use alseg::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use common::{gram, qp_oracle, quad};

// ---------- helpers and oracles ----------

fn random_problem(rng: &mut ChaCha8Rng, m: usize, d: usize) -> (Vec<Vec<f64>>, Vec<i8>) {
    let n = Normal::new(0.0, 1.0).unwrap();
    loop {
        let x: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| n.sample(rng)).collect()).collect();
        let y: Vec<i8> = (0..m).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        let (p, q) = class_counts(&y);
        if p > 0 && q > 0 {
            return (x, y);
        }
    }
}

/// Two Gaussian blobs far apart.
fn separable(rng: &mut ChaCha8Rng, m: usize, d: usize, gap: f64) -> (Vec<Vec<f64>>, Vec<i8>) {
    let n = Normal::new(0.0, 1.0).unwrap();
    let y: Vec<i8> = (0..m).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    let x = y
        .iter()
        .map(|&l| {
            (0..d)
                .map(|k| n.sample(rng) + if k == 0 { l as f64 * gap / 2.0 } else { 0.0 })
                .collect()
        })
        .collect();
    (x, y)
}

fn decision(sol: &DualSolution, x: &[Vec<f64>], y: &[i8], gamma: f64, p: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(&sol.alpha)
        .map(|((xi, &yi), a)| a * yi as f64 * gaussian_kernel(xi, p, gamma).unwrap())
        .sum::<f64>()
        + sol.b
}

fn check_feasible(sol: &DualSolution, y: &[i8], nu: f64, eps: f64) {
    let m = y.len() as f64;
    for &a in &sol.alpha {
        assert!(a >= 0.0 && a <= 1.0 / m + eps, "alpha {a} outside [0, 1/M]");
    }
    let ya: f64 = sol.alpha.iter().zip(y).map(|(a, &l)| a * l as f64).sum();
    assert!(ya.abs() <= eps, "y'a = {ya}");
    let s: f64 = sol.alpha.iter().sum();
    assert!(s >= nu - eps, "sum alpha {s} < nu {nu}");
}

// ---------- nu_max and kernel ----------

#[test]
fn nu_max_examples() {
    let mut y = vec![1i8; 3];
    y.extend(vec![-1i8; 7]);
    assert!((nu_max(&y).unwrap() - 0.6).abs() < 1e-15);
    for m in [2, 10, 64] {
        let y: Vec<i8> = (0..m).map(|i| if i < m / 2 { 1 } else { -1 }).collect();
        assert_eq!(nu_max(&y).unwrap(), 1.0);
    }
    let mut y = vec![1i8];
    y.extend(vec![-1i8; 99]);
    assert!((nu_max(&y).unwrap() - 0.02).abs() < 1e-15);
    assert!(matches!(nu_max(&[1, 1]), Err(Error::SingleClass { .. })));
}

#[test]
fn kernel_examples() {
    assert_eq!(gaussian_kernel(&[1.0, 2.0], &[1.0, 2.0], 3.0).unwrap(), 1.0);
    assert!((gaussian_kernel(&[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-15);
    assert!(gaussian_kernel(&[0.0], &[0.0, 1.0], 1.0).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let a: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let k = gaussian_kernel(&a, &b, 0.7).unwrap();
        assert_eq!(k, gaussian_kernel(&b, &a, 0.7).unwrap());
        assert!(k > 0.0 && k <= 1.0);
    }
}

// ---------- solver ----------

#[test]
fn two_points_are_symmetric() {
    let x = vec![vec![0.0, 1.0], vec![2.0, -1.0]];
    let y = vec![1, -1];
    for gamma in [0.01, 0.5, 3.0] {
        let sol = solve_nu_svm(&x, &y, 1.0, gamma, &SolverParams::default()).unwrap();
        assert!(sol.alpha.iter().all(|&a| a > 0.0));
        let s1 = decision(&sol, &x, &y, gamma, &x[0]);
        let s2 = decision(&sol, &x, &y, gamma, &x[1]);
        assert!((s1 + s2).abs() < 1e-12, "{s1} {s2}");
        assert!(s1 > 0.0);
    }
}

#[test]
fn separable_twenty_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (x, y) = separable(&mut rng, 20, 2, 8.0);
    let gamma = 0.1;
    let nu = 0.1;
    let sol = solve_nu_svm(&x, &y, nu, gamma, &SolverParams::default()).unwrap();
    check_feasible(&sol, &y, nu, 1e-3);
    let mut errors = 0;
    for (xi, &yi) in x.iter().zip(&y) {
        let s = decision(&sol, &x, &y, gamma, xi);
        assert_eq!(s > 0.0, yi > 0);
        if yi as f64 * s < sol.diagnostics.margin - 1e-3 / 20.0 {
            errors += 1;
        }
    }
    assert!(errors as f64 / 20.0 <= nu);
}

#[test]
fn objective_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for round in 0..12 {
        let m = if round == 0 { 30 } else { rng.random_range(6..=40) };
        let (x, y) = random_problem(&mut rng, m, 3);
        let nu = rng.random_range(0.05..=1.0) * nu_max(&y).unwrap();
        let gamma = 2f64.powf(rng.random_range(-3.0..2.0));
        let sol = solve_nu_svm(&x, &y, nu, gamma, &SolverParams::default()).unwrap();
        check_feasible(&sol, &y, nu, 1e-3);
        let q = gram(&x, &y, gamma);
        let mine = quad(&q, &sol.alpha);
        assert!((mine - sol.diagnostics.objective).abs() <= 1e-12 + 1e-9 * mine);
        let oracle = qp_oracle(&q, &y, nu);
        let rel = (mine - oracle).abs() / oracle.abs().max(1e-300);
        assert!(rel < 1e-4, "round {round}: solver {mine} oracle {oracle} rel {rel}");
    }
}

#[test]
fn nu_property_on_separable_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut good = 0;
    for _ in 0..50 {
        let m = rng.random_range(20..=40);
        let (x, y) = separable(&mut rng, m, 2, 3.0);
        let nu = rng.random_range(0.05..=1.0) * nu_max(&y).unwrap();
        let gamma = 0.5;
        let sol = solve_nu_svm(&x, &y, nu, gamma, &SolverParams::default()).unwrap();
        let mf = m as f64;
        let margin = sol.diagnostics.margin;
        let errs = x
            .iter()
            .zip(&y)
            .filter(|(xi, &yi)| yi as f64 * decision(&sol, &x, &y, gamma, xi) < margin - 1e-3 / mf)
            .count() as f64;
        let svs = sol.alpha.iter().filter(|&&a| a > 0.0).count() as f64;
        if errs / mf <= nu + 2.0 / mf && svs / mf >= nu - 2.0 / mf {
            good += 1;
        }
    }
    assert!(good >= 45, "{good} of 50");
}

#[test]
fn infeasible_parameters() {
    let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
    let y = vec![1, -1, -1, -1];
    assert!(matches!(
        solve_nu_svm(&x, &y, 0.6, 1.0, &SolverParams::default()),
        Err(Error::InfeasibleNu { .. })
    ));
    assert!(solve_nu_svm(&x, &y, 0.5, 1.0, &SolverParams::default()).is_ok());
    assert!(solve_nu_svm(&x, &y, 0.0, 1.0, &SolverParams::default()).is_err());
    assert!(solve_nu_svm(&x, &y, 0.5, 0.0, &SolverParams::default()).is_err());
    assert!(matches!(
        solve_nu_svm(&x, &[1, 1, 1, 1], 0.5, 1.0, &SolverParams::default()),
        Err(Error::SingleClass { .. })
    ));
}

#[test]
fn kernel_evaluation_cap_is_enforced() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (x, y) = random_problem(&mut rng, 40, 3);
    let params = SolverParams {
        max_kernel_evals: 10,
        ..SolverParams::default()
    };
    assert!(matches!(solve_nu_svm(&x, &y, 0.5 * nu_max(&y).unwrap(), 1.0, &params), Err(Error::NonConvergence(_))));
}

#[test]
fn cache_budget_and_shrinking_do_not_change_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (x, y) = random_problem(&mut rng, 120, 4);
    let nu = 0.4 * nu_max(&y).unwrap();
    let big = solve_nu_svm(&x, &y, nu, 0.3, &SolverParams::default()).unwrap();
    let tiny = solve_nu_svm(
        &x,
        &y,
        nu,
        0.3,
        &SolverParams {
            cache_bytes: 1,
            ..SolverParams::default()
        },
    )
    .unwrap();
    assert_eq!(big.alpha, tiny.alpha);
    assert!(tiny.diagnostics.kernel_evals >= big.diagnostics.kernel_evals);
    let plain = solve_nu_svm(
        &x,
        &y,
        nu,
        0.3,
        &SolverParams {
            shrinking: false,
            ..SolverParams::default()
        },
    )
    .unwrap();
    let rel = (plain.diagnostics.objective - big.diagnostics.objective).abs() / big.diagnostics.objective;
    assert!(rel < 1e-4);
}

// ---------- model, decision ----------

fn toy_config() -> FeatureConfig {
    FeatureConfig::default()
}

fn toy_set(rng: &mut ChaCha8Rng, m: usize, gap: f64) -> TrainingSet {
    let len = toy_config().layout().len;
    let (x, y) = separable(rng, m, len, gap);
    let mut set = TrainingSet::new();
    for (v, l) in x.into_iter().zip(y) {
        // Per-axis affine distortion.
        set.push(v.iter().enumerate().map(|(k, a)| a * (k + 1) as f64 * 10.0 + 50.0).collect(), l);
    }
    set
}

fn quick_opts() -> TrainOptions {
    TrainOptions::default()
}

#[test]
fn support_vector_side_and_held_out_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let set = toy_set(&mut rng, 40, 6.0);
    let (model, _) = train(&set, &toy_config(), &quick_opts()).unwrap();
    assert!(model.coef.iter().all(|c| *c != 0.0));
    for (&i, &c) in model.support_indices.iter().zip(&model.coef) {
        assert_eq!(c > 0.0, set.labels[i] > 0);
        if set.labels[i] > 0 {
            assert!(model.decision(&set.samples[i]).unwrap() > 0.0);
        }
    }
    let test = toy_set(&mut rng, 200, 6.0);
    let ok = test
        .samples
        .iter()
        .zip(&test.labels)
        .filter(|(v, &l)| (model.decision(v).unwrap() > 0.0) == (l > 0))
        .count();
    assert!(ok as f64 >= 0.95 * 200.0, "{ok}");
    assert!(matches!(model.decision(&[1.0, 2.0]), Err(Error::LayoutMismatch { .. })));
}

#[test]
fn decision_is_continuous() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let set = toy_set(&mut rng, 30, 3.0);
    let (model, _) = train(&set, &toy_config(), &quick_opts()).unwrap();
    for v in &set.samples {
        let mut w = v.clone();
        for x in &mut w {
            *x += 1e-9;
        }
        let d = (model.decision(v).unwrap() - model.decision(&w).unwrap()).abs();
        assert!(d < 1e-6);
    }
}

#[test]
fn stored_dual_satisfies_constraints() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let set = toy_set(&mut rng, 36, 2.0);
    let (model, _) = train(&set, &toy_config(), &quick_opts()).unwrap();
    let m = set.len() as f64;
    let sum_y: f64 = model.coef.iter().sum();
    let sum_a: f64 = model.coef.iter().map(|c| c.abs()).sum();
    assert!(sum_y.abs() <= 1e-3);
    assert!(sum_a >= model.nu - 1e-3);
    for c in &model.coef {
        assert!(c.abs() > 0.0 && c.abs() <= 1.0 / m + 1e-12);
    }
    assert!(model.nu > 0.0 && model.nu <= nu_max(&set.labels).unwrap());
}

// ---------- Platt ----------

#[test]
fn platt_direction_and_symmetry() {
    let p = fit_platt(&[-1.0, -1.0, 1.0, 1.0], &[-1, -1, 1, 1]).unwrap();
    assert!(p.a < 0.0);
    let p = fit_platt(&[-2.0, -0.5, 0.5, 2.0], &[-1, -1, 1, 1]).unwrap();
    assert!((p.probability(0.0) - 0.5).abs() < 1e-6);
    assert!(matches!(fit_platt(&[1.0, 2.0], &[1, 1]), Err(Error::SingleClass { .. })));
}

#[test]
fn platt_is_a_local_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let n = rng.random_range(4..60);
        let y: Vec<i8> = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let d: Vec<f64> = y.iter().map(|&l| l as f64 * 0.5 + rng.random_range(-1.0..1.0)).collect();
        let p = fit_platt(&d, &y).unwrap();
        let f = platt_objective(&d, &y, p.a, p.b);
        for (da, db) in [(1e-3, 0.0), (-1e-3, 0.0), (0.0, 1e-3), (0.0, -1e-3)] {
            assert!(platt_objective(&d, &y, p.a + da, p.b + db) >= f);
        }
    }
}

#[test]
fn confidence_matches_formula_and_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let set = toy_set(&mut rng, 30, 3.0);
    let (model, _) = train(&set, &toy_config(), &quick_opts()).unwrap();
    let pl = model.platt.unwrap();
    assert!(pl.a < 0.0);
    let mut pairs = Vec::new();
    for v in &set.samples {
        let s = model.decision(v).unwrap();
        let c = model.predict_confidence(v).unwrap();
        assert!((0.0..=1.0).contains(&c));
        assert!((c - 1.0 / (1.0 + (pl.a * s + pl.b).exp())).abs() < 1e-12);
        pairs.push((s, c));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
    let mut raw = model.clone();
    raw.platt = None;
    assert!(matches!(raw.predict_confidence(&set.samples[0]), Err(Error::Uncalibrated)));
}

#[test]
fn calibration_ranks_positives_above_negatives() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for gap in [0.5, 1.0, 4.0] {
        let set = toy_set(&mut rng, 24, gap);
        let (model, _) = train(&set, &toy_config(), &quick_opts()).unwrap();
        let mean = |class: i8| {
            let v: Vec<f64> = set
                .samples
                .iter()
                .zip(&set.labels)
                .filter(|(_, &l)| l == class)
                .map(|(s, _)| model.predict_confidence(s).unwrap())
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean(1) >= mean(-1));
    }
}

// ---------- grid search ----------

#[test]
fn single_point_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (x, y) = separable(&mut rng, 28, 3, 2.0);
    let grid = HyperGrid::single(0.3, 0.5);
    let r = grid_search_report(&x, &y, &grid, 1);
    assert_eq!(r.points.len(), 1);
    assert_eq!(r.best().fold_accuracies().len(), 7);
    assert_eq!((r.best().nu, r.best().gamma), (0.3, 0.5));
}

fn grid_search_report(x: &[Vec<f64>], y: &[i8], grid: &HyperGrid, workers: usize) -> CvReport {
    alseg::svm::grid_search(x, y, grid, &SolverParams::default(), workers).unwrap()
}

#[test]
fn ties_resolve_identically_across_worker_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let (x, y) = separable(&mut rng, 30, 2, 10.0);
    let grid = HyperGrid {
        nus: vec![0.5, 0.2, 0.2, 0.5, 0.8],
        gammas: vec![0.1, 0.1, 0.05, 1.0],
        folds: 5,
        seed: 99,
    };
    let a = grid_search_report(&x, &y, &grid, 1);
    let b = grid_search_report(&x, &y, &grid, 4);
    assert_eq!(a, b);
    // Perfect separation everywhere: the smallest ν and γ win.
    assert_eq!((a.best().nu, a.best().gamma), (0.2, 0.05));
}

#[test]
fn best_point_beats_extreme_bandwidths() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let (x, y) = separable(&mut rng, 40, 2, 3.0);
    let grid = HyperGrid::default_for(&x, &y).unwrap();
    let r = grid_search_report(&x, &y, &grid, 2);
    let best = r.best().accuracy.unwrap();
    let gmin = grid.gammas[0];
    let gmax = *grid.gammas.last().unwrap();
    for p in r.points.iter().filter(|p| p.gamma == gmin || p.gamma == gmax) {
        assert!(best >= p.accuracy.unwrap());
    }
    assert_eq!(r.points.len(), 72);
    assert_eq!(r.folds, 7);
}

#[test]
fn grid_rejects_invalid_points() {
    let y = vec![1, 1, -1, -1, -1, -1];
    let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
    let too_big = HyperGrid::single(0.9, 1.0);
    assert!(matches!(
        alseg::svm::grid_search(&x, &y, &too_big, &SolverParams::default(), 1),
        Err(Error::InvalidGrid(_))
    ));
    let bad_gamma = HyperGrid::single(0.5, -1.0);
    assert!(alseg::svm::grid_search(&x, &y, &bad_gamma, &SolverParams::default(), 1).is_err());
}

#[test]
fn folds_are_stratified_and_seeded() {
    let y: Vec<i8> = (0..50).map(|i| if i < 15 { 1 } else { -1 }).collect();
    let f = stratified_folds(&y, 7, 1);
    for k in 0..7 {
        let pos = (0..50).filter(|&i| f[i] == k && y[i] > 0).count();
        assert!((2..=3).contains(&pos));
    }
    assert_eq!(f, stratified_folds(&y, 7, 1));
    assert_ne!(f, stratified_folds(&y, 7, 2));
}

#[test]
fn median_distance_oracle() {
    let x = vec![vec![0.0], vec![1.0], vec![3.0]];
    // Pairwise squared distances 1, 9, 4.
    assert_eq!(median_sq_distance(&x), 4.0);
}

// ---------- pipeline and serialization ----------

#[test]
fn identity_scaler_on_prescaled_data_gives_same_support() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let set = toy_set(&mut rng, 30, 2.0);
    let cfg = toy_config();
    let (a, _) = train(&set, &cfg, &quick_opts()).unwrap();
    let scaler = Scaler::fit(&set.samples, &cfg.layout()).unwrap();
    let pre: Vec<Vec<f64>> = set.samples.iter().map(|v| scaler.apply(v).unwrap()).collect();
    let (b, _) = train_scaled(&pre, &set.labels, Scaler::identity(cfg.layout().len), cfg, &quick_opts()).unwrap();
    assert_eq!(a.support_indices, b.support_indices);
    assert_eq!((a.nu, a.gamma), (b.nu, b.gamma));
}

#[test]
fn round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let set = toy_set(&mut rng, 26, 2.0);
    let (model, _) = train(&set, &toy_config(), &quick_opts()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.svm");
    serialize_model(&model, &set, &path).unwrap();
    let (back, train_back) = deserialize_model(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(train_back, set);
    for _ in 0..100 {
        let v: Vec<f64> = (0..model.feature_len()).map(|_| rng.random_range(0.0..120.0)).collect();
        assert_eq!(model.decision(&v).unwrap().to_bits(), back.decision(&v).unwrap().to_bits());
    }
}

#[test]
fn damaged_files_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let set = toy_set(&mut rng, 16, 2.0);
    let (model, _) = train(&set, &toy_config(), &quick_opts()).unwrap();
    let bytes = model_to_bytes(&model, &set);
    for cut in [0, 10, 27, bytes.len() / 2, bytes.len() - 1] {
        assert!(matches!(model_from_bytes(&bytes[..cut]), Err(Error::CorruptModel(_))), "cut {cut}");
    }
    let mut flipped = bytes.clone();
    let last = flipped.len() - 3;
    flipped[last] ^= 0x40;
    assert!(matches!(model_from_bytes(&flipped), Err(Error::CorruptModel(_))));
    let mut v2 = bytes.clone();
    v2[8] = 2;
    assert!(matches!(model_from_bytes(&v2), Err(Error::VersionMismatch(2))));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.svm");
    std::fs::write(&p, &bytes[..bytes.len() - 5]).unwrap();
    assert!(deserialize_model(&p).is_err());
}

#[test]
fn retraining_from_file_equals_training_on_union() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let first = toy_set(&mut rng, 14, 1.5);
    let extra = toy_set(&mut rng, 8, 1.5);
    let cfg = toy_config();
    let (m1, _) = train(&first, &cfg, &quick_opts()).unwrap();
    let bytes = model_to_bytes(&m1, &first);
    let (_, mut loaded) = model_from_bytes(&bytes).unwrap();
    loaded.append(&extra);
    let mut union = first.clone();
    union.append(&extra);
    let (a, ra) = train(&loaded, &cfg, &quick_opts()).unwrap();
    let (b, rb) = train(&union, &cfg, &quick_opts()).unwrap();
    assert_eq!((a.nu, a.gamma), (b.nu, b.gamma));
    assert_eq!(ra, rb);
    assert_eq!(a, b);
}

#[test]
fn minimal_seed_sets_train() {
    let cfg = toy_config();
    let len = cfg.layout().len;
    let mut set = TrainingSet::new();
    set.push(vec![1.0; len], 1);
    set.push(vec![5.0; len], -1);
    let (m, r) = train(&set, &cfg, &quick_opts()).unwrap();
    assert_eq!(r.folds, 0);
    assert!(m.predict_confidence(&vec![1.0; len]).unwrap() > m.predict_confidence(&vec![5.0; len]).unwrap());
    let mut one = TrainingSet::new();
    one.push(vec![1.0; len], 1);
    one.push(vec![2.0; len], 1);
    assert!(matches!(train(&one, &cfg, &quick_opts()), Err(Error::SingleClass { .. })));
}
