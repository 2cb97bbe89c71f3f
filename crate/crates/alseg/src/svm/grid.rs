use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::sq_dist;
use super::solver::{solve_nu_svm, DualSolution, SolverParams};
use super::{class_counts, nu_max};
use crate::error::{Error, Result};

pub const DEFAULT_FOLDS: usize = 7;
pub const DEFAULT_CV_SEED: u64 = 0x5eed;

/// Candidate `(ν, γ)` pairs plus the cross-validation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub nus: Vec<f64>,
    pub gammas: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl HyperGrid {
    /// Eight equidistant ν in `(0, ν_max]` and `γ = 2^e / d̄` for
    /// `e = -8..=0`, where `d̄` is the median pairwise squared distance.
    pub fn default_for(x: &[Vec<f64>], y: &[i8]) -> Result<Self> {
        let nm = nu_max(y)?;
        let d = median_sq_distance(x);
        let d = if d > 0.0 && d.is_finite() { d } else { 1.0 };
        Ok(HyperGrid {
            nus: (1..=8).map(|k| k as f64 * nm / 8.0).collect(),
            gammas: (-8..=0).map(|e| 2f64.powi(e) / d).collect(),
            folds: DEFAULT_FOLDS,
            seed: DEFAULT_CV_SEED,
        })
    }

    pub fn single(nu: f64, gamma: f64) -> Self {
        HyperGrid {
            nus: vec![nu],
            gammas: vec![gamma],
            folds: DEFAULT_FOLDS,
            seed: DEFAULT_CV_SEED,
        }
    }

    pub fn validate(&self, y: &[i8]) -> Result<()> {
        let nm = nu_max(y)?;
        if self.nus.is_empty() || self.gammas.is_empty() {
            return Err(Error::InvalidGrid("empty axis".into()));
        }
        if let Some(nu) = self.nus.iter().find(|&&n| !(n > 0.0) || n > nm * (1.0 + 1e-12)) {
            return Err(Error::InvalidGrid(format!("nu = {nu} outside (0, {nm}]")));
        }
        if let Some(g) = self.gammas.iter().find(|&&g| !(g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidGrid(format!("gamma = {g} must be positive")));
        }
        if self.folds < 2 {
            return Err(Error::InvalidGrid("at least two folds are required".into()));
        }
        Ok(())
    }
}

pub fn median_sq_distance(x: &[Vec<f64>]) -> f64 {
    let mut d = Vec::with_capacity(x.len() * x.len().saturating_sub(1) / 2);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            d.push(sq_dist(&x[i], &x[j]));
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

/// Fold index per sample; each class is shuffled and dealt round robin.
pub fn stratified_folds(y: &[i8], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0; y.len()];
    for class in [1i8, -1] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for (k, i) in idx.into_iter().enumerate() {
            out[i] = k % folds;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub nu: f64,
    pub gamma: f64,
    /// Correctly classified held-out samples per fold.
    pub fold_correct: Vec<usize>,
    pub fold_sizes: Vec<usize>,
    /// `None` when a fold failed to train.
    pub accuracy: Option<f64>,
}

impl GridPoint {
    pub fn fold_accuracies(&self) -> Vec<f64> {
        self.fold_correct.iter().zip(&self.fold_sizes).map(|(&c, &n)| c as f64 / n as f64).collect()
    }

    fn correct(&self) -> usize {
        self.fold_correct.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: usize,
    pub seed: u64,
    /// Grid points in ν-major order.
    pub points: Vec<GridPoint>,
    pub best: usize,
}

impl CvReport {
    pub fn best(&self) -> &GridPoint {
        &self.points[self.best]
    }
}

pub(crate) fn decision_of(sol: &DualSolution, sv: &[Vec<f64>], x: &[f64], y: &[i8], gamma: f64) -> f64 {
    sol.alpha
        .iter()
        .zip(sv.iter().zip(y))
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, (s, &l))| a * l as f64 * (-gamma * sq_dist(s, x)).exp())
        .sum::<f64>()
        + sol.b
}

fn evaluate(x: &[Vec<f64>], y: &[i8], fold_of: &[usize], folds: usize, nu: f64, gamma: f64, params: &SolverParams) -> GridPoint {
    let mut fold_correct = vec![0; folds];
    let mut fold_sizes = vec![0; folds];
    let mut ok = true;
    for f in 0..folds {
        let (mut tx, mut ty) = (Vec::new(), Vec::new());
        let mut held = Vec::new();
        for i in 0..y.len() {
            if fold_of[i] == f {
                held.push(i);
            } else {
                tx.push(x[i].clone());
                ty.push(y[i]);
            }
        }
        fold_sizes[f] = held.len();
        let fold_nu = match nu_max(&ty) {
            Ok(m) => nu.min(m),
            Err(_) => {
                ok = false;
                continue;
            }
        };
        match solve_nu_svm(&tx, &ty, fold_nu, gamma, params) {
            Ok(sol) => {
                fold_correct[f] = held
                    .iter()
                    .filter(|&&i| {
                        let s = decision_of(&sol, &tx, &x[i], &ty, gamma);
                        (s > 0.0) == (y[i] > 0)
                    })
                    .count();
            }
            Err(_) => ok = false,
        }
    }
    let total: usize = fold_sizes.iter().sum();
    let accuracy = ok.then(|| fold_correct.iter().sum::<usize>() as f64 / total as f64);
    GridPoint {
        nu,
        gamma,
        fold_correct,
        fold_sizes,
        accuracy,
    }
}

/// Cross-validated accuracy of every grid point on `workers` threads.
/// The fold count is capped at the smaller class size.
pub fn grid_search(x: &[Vec<f64>], y: &[i8], grid: &HyperGrid, params: &SolverParams, workers: usize) -> Result<CvReport> {
    super::solver::check_problem(x, y)?;
    grid.validate(y)?;
    let (pos, neg) = class_counts(y);
    let folds = grid.folds.min(pos).min(neg);
    if folds < 2 {
        return Err(Error::InvalidGrid(format!(
            "stratified folds need at least two samples per class (positives: {pos}, negatives: {neg})"
        )));
    }
    let fold_of = stratified_folds(y, folds, grid.seed);
    let pairs: Vec<(f64, f64)> = grid.nus.iter().flat_map(|&n| grid.gammas.iter().map(move |&g| (n, g))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let points: Vec<GridPoint> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(nu, gamma)| evaluate(x, y, &fold_of, folds, nu, gamma, params))
            .collect()
    });
    let best = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.accuracy.is_some())
        .min_by(|(_, p), (_, q)| {
            q.correct()
                .cmp(&p.correct())
                .then(p.nu.total_cmp(&q.nu))
                .then(p.gamma.total_cmp(&q.gamma))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidGrid("no grid point could be trained".into()))?;
    Ok(CvReport {
        folds,
        seed: grid.seed,
        points,
        best,
    })
}
