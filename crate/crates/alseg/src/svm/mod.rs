//! ν-SVM training, Platt calibration, grid search and model files.

mod grid;
mod io;
mod kernel;
mod platt;
mod solver;

pub use grid::{grid_search, median_sq_distance, stratified_folds, CvReport, GridPoint, HyperGrid, DEFAULT_CV_SEED, DEFAULT_FOLDS};
pub use io::{deserialize_model, model_from_bytes, model_to_bytes, serialize_model, MODEL_VERSION};
pub use kernel::gaussian_kernel;
pub use platt::{fit_platt, platt_objective, Platt};
pub use solver::{solve_nu_svm, Diagnostics, DualSolution, SolverParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, Scaler};
use kernel::sq_dist;

/// `(#positives, #negatives)`.
pub fn class_counts(labels: &[i8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l > 0).count();
    (pos, labels.len() - pos)
}

/// Largest feasible ν: `2·min(M₊, M₋) / M`.
pub fn nu_max(labels: &[i8]) -> Result<f64> {
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass {
            positives: pos,
            negatives: neg,
        });
    }
    Ok(2.0 * pos.min(neg) as f64 / labels.len() as f64)
}

/// Unscaled feature vectors with ±1 labels, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub samples: Vec<Vec<f64>>,
    pub labels: Vec<i8>,
}

impl TrainingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, sample: Vec<f64>, label: i8) {
        self.samples.push(sample);
        self.labels.push(label);
    }

    pub fn append(&mut self, other: &TrainingSet) {
        self.samples.extend(other.samples.iter().cloned());
        self.labels.extend(&other.labels);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positives(&self) -> usize {
        class_counts(&self.labels).0
    }

    pub fn negatives(&self) -> usize {
        class_counts(&self.labels).1
    }

    /// Checks labels, vector lengths and that both classes are present.
    pub fn validate(&self, len: usize) -> Result<()> {
        solver::check_problem(&self.samples, &self.labels)?;
        if let Some(v) = self.samples.iter().find(|v| v.len() != len) {
            return Err(Error::LayoutMismatch {
                expected: len,
                actual: v.len(),
            });
        }
        nu_max(&self.labels).map(|_| ())
    }
}

/// A trained ν-SVM together with everything needed to score raw features.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub config: FeatureConfig,
    pub scaler: Scaler,
    /// Scaled support vectors.
    pub support: Vec<Vec<f64>>,
    /// Indices of the support vectors in the training set.
    pub support_indices: Vec<usize>,
    /// `y_i α_i` per support vector.
    pub coef: Vec<f64>,
    pub b: f64,
    pub gamma: f64,
    pub nu: f64,
    pub platt: Option<Platt>,
    pub diagnostics: Diagnostics,
}

impl SvmModel {
    /// Keeps the entries with `α_i > 0`.
    pub fn from_solution(
        x: &[Vec<f64>],
        y: &[i8],
        sol: &DualSolution,
        nu: f64,
        gamma: f64,
        scaler: Scaler,
        config: FeatureConfig,
    ) -> Self {
        let idx: Vec<usize> = (0..y.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
        SvmModel {
            config,
            scaler,
            support: idx.iter().map(|&i| x[i].clone()).collect(),
            coef: idx.iter().map(|&i| y[i] as f64 * sol.alpha[i]).collect(),
            support_indices: idx,
            b: sol.b,
            gamma,
            nu,
            platt: None,
            diagnostics: sol.diagnostics,
        }
    }

    pub fn feature_len(&self) -> usize {
        self.scaler.len
    }

    /// `Σ y_i α_i k(x, x_i) + b` for an already scaled vector.
    pub fn decision_scaled(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * (-self.gamma * sq_dist(s, x)).exp())
            .sum::<f64>()
            + self.b
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        let mut v = x.to_vec();
        self.decision_in_place(&mut v)
    }

    /// Scales `x` in place, then evaluates the decision function.
    pub fn decision_in_place(&self, x: &mut [f64]) -> Result<f64> {
        self.scaler.apply_in_place(x)?;
        Ok(self.decision_scaled(x))
    }

    pub fn confidence_of(&self, decision: f64) -> Result<f64> {
        self.platt.map(|p| p.probability(decision)).ok_or(Error::Uncalibrated)
    }

    pub fn predict_confidence(&self, x: &[f64]) -> Result<f64> {
        let d = self.decision(x)?;
        self.confidence_of(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub solver: SolverParams,
    /// Overrides the data-driven default grid.
    pub grid: Option<HyperGrid>,
    pub folds: usize,
    pub cv_seed: u64,
    pub workers: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            solver: SolverParams::default(),
            grid: None,
            folds: DEFAULT_FOLDS,
            cv_seed: DEFAULT_CV_SEED,
            workers: 1,
        }
    }
}

/// Fits the scaler on the raw samples, then trains as [`train_scaled`].
pub fn train(set: &TrainingSet, config: &FeatureConfig, opts: &TrainOptions) -> Result<(SvmModel, CvReport)> {
    let layout = config.layout();
    set.validate(layout.len)?;
    let scaler = Scaler::fit(&set.samples, &layout)?;
    let x: Vec<Vec<f64>> = set.samples.iter().map(|v| scaler.apply(v)).collect::<Result<_>>()?;
    train_scaled(&x, &set.labels, scaler, config.clone(), opts)
}

/// Grid search, final solve and Platt fit on pre-scaled samples. With fewer
/// than two samples in some class the grid centre is used without
/// cross-validation.
pub fn train_scaled(
    x: &[Vec<f64>],
    y: &[i8],
    scaler: Scaler,
    config: FeatureConfig,
    opts: &TrainOptions,
) -> Result<(SvmModel, CvReport)> {
    solver::check_problem(x, y)?;
    let (pos, neg) = class_counts(y);
    let grid = match &opts.grid {
        Some(g) => g.clone(),
        None => {
            let mut g = HyperGrid::default_for(x, y)?;
            g.folds = opts.folds;
            g.seed = opts.cv_seed;
            g
        }
    };
    let report = if pos.min(neg).min(grid.folds) >= 2 {
        grid::grid_search(x, y, &grid, &opts.solver, opts.workers)?
    } else {
        grid.validate(y)?;
        CvReport {
            folds: 0,
            seed: grid.seed,
            points: vec![GridPoint {
                nu: grid.nus[(grid.nus.len() - 1) / 2],
                gamma: grid.gammas[(grid.gammas.len() - 1) / 2],
                fold_correct: Vec::new(),
                fold_sizes: Vec::new(),
                accuracy: None,
            }],
            best: 0,
        }
    };
    let (nu, gamma) = (report.best().nu, report.best().gamma);
    let sol = solve_nu_svm(x, y, nu, gamma, &opts.solver)?;
    let mut model = SvmModel::from_solution(x, y, &sol, nu, gamma, scaler, config);
    let decisions: Vec<f64> = x.iter().map(|v| model.decision_scaled(v)).collect();
    model.platt = Some(fit_platt(&decisions, y)?);
    Ok((model, report))
}
