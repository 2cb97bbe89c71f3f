//! Pairwise working-set solver for the ν-SVM dual.
//!
//! Internally the box is `[0, 1]` and `Σ α = νM`; the result is divided by
//! `M` so that `0 ≤ α ≤ 1/M` and `Σ α = ν`. Working-set selection uses
//! second-order information and picks both indices from the same class,
//! which keeps both equality constraints satisfied after every step.

use serde::{Deserialize, Serialize};

use super::kernel::KernelRows;
use super::nu_max;
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    /// Tolerance on the maximal KKT violation, relative to the margin.
    pub eps: f64,
    pub max_kernel_evals: u64,
    pub cache_bytes: usize,
    pub shrinking: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            eps: 1e-3,
            max_kernel_evals: 10_000_000,
            cache_bytes: 256 << 20,
            shrinking: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    /// `½ αᵀQα` at the returned α.
    pub objective: f64,
    /// Functional margin: `y_i S^u(x_i)` of free support vectors.
    pub margin: f64,
    pub iterations: u64,
    pub kernel_evals: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub b: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Bound {
    Lower,
    Upper,
    Free,
}

struct Solver<'a> {
    q: KernelRows<'a>,
    y: &'a [i8],
    alpha: Vec<f64>,
    g: Vec<f64>,
    g_bar: Vec<f64>,
    status: Vec<Bound>,
    active: Vec<usize>,
    in_active: Vec<bool>,
    unshrink: bool,
    eps: f64,
}

/// α-weighted mean gradient, which approximates the functional margin.
/// Violations are measured against it, clamped to `[1e-3, 1]`.
fn margin_scale(ag: f64, asum: f64) -> f64 {
    if asum > 0.0 {
        (ag / asum).clamp(1e-3, 1.0)
    } else {
        1.0
    }
}

fn bound_of(a: f64) -> Bound {
    if a >= 1.0 {
        Bound::Upper
    } else if a <= 0.0 {
        Bound::Lower
    } else {
        Bound::Free
    }
}

impl Solver<'_> {
    fn l(&self) -> usize {
        self.y.len()
    }

    fn pos(&self, i: usize) -> bool {
        self.y[i] > 0
    }

    fn reconstruct_gradient(&mut self) {
        let l = self.l();
        if self.active.len() == l {
            return;
        }
        let inactive: Vec<usize> = (0..l).filter(|&i| !self.in_active[i]).collect();
        for &j in &inactive {
            self.g[j] = self.g_bar[j];
        }
        let free: Vec<usize> = self.active.iter().copied().filter(|&i| self.status[i] == Bound::Free).collect();
        if free.len() * l > 2 * self.active.len() * inactive.len() {
            for &i in &inactive {
                let row = self.q.row(i);
                self.g[i] += free.iter().map(|&j| self.alpha[j] * row[j]).sum::<f64>();
            }
        } else {
            for &i in &free {
                let row = self.q.row(i);
                let a = self.alpha[i];
                for &j in &inactive {
                    self.g[j] += a * row[j];
                }
            }
        }
        self.active = (0..l).collect();
        self.in_active.iter_mut().for_each(|f| *f = true);
    }

    fn select_working_set(&mut self) -> Option<(usize, usize)> {
        let mut gmaxp = f64::NEG_INFINITY;
        let mut gmaxp2 = f64::NEG_INFINITY;
        let mut ip = None;
        let mut gmaxn = f64::NEG_INFINITY;
        let mut gmaxn2 = f64::NEG_INFINITY;
        let mut in_ = None;
        let (mut ag, mut asum) = (0.0, 0.0);
        for &t in &self.active {
            ag += self.alpha[t] * self.g[t];
            asum += self.alpha[t];
            if self.pos(t) {
                if self.status[t] != Bound::Upper && -self.g[t] >= gmaxp {
                    gmaxp = -self.g[t];
                    ip = Some(t);
                }
            } else if self.status[t] != Bound::Lower && self.g[t] >= gmaxn {
                gmaxn = self.g[t];
                in_ = Some(t);
            }
        }
        let q_ip = ip.map(|i| self.q.row(i));
        let q_in = in_.map(|i| self.q.row(i));
        let mut gmin_idx = None;
        let mut obj_diff_min = f64::INFINITY;
        for &j in &self.active {
            if self.pos(j) {
                if self.status[j] != Bound::Lower {
                    let grad_diff = gmaxp + self.g[j];
                    if self.g[j] >= gmaxp2 {
                        gmaxp2 = self.g[j];
                    }
                    if grad_diff > 0.0 {
                        let qc = 2.0 - 2.0 * q_ip.as_ref().unwrap()[j];
                        let obj_diff = -(grad_diff * grad_diff) / if qc > 0.0 { qc } else { TAU };
                        if obj_diff <= obj_diff_min {
                            gmin_idx = Some(j);
                            obj_diff_min = obj_diff;
                        }
                    }
                }
            } else if self.status[j] != Bound::Upper {
                let grad_diff = gmaxn - self.g[j];
                if -self.g[j] >= gmaxn2 {
                    gmaxn2 = -self.g[j];
                }
                if grad_diff > 0.0 {
                    let qc = 2.0 - 2.0 * q_in.as_ref().unwrap()[j];
                    let obj_diff = -(grad_diff * grad_diff) / if qc > 0.0 { qc } else { TAU };
                    if obj_diff <= obj_diff_min {
                        gmin_idx = Some(j);
                        obj_diff_min = obj_diff;
                    }
                }
            }
        }
        let j = gmin_idx?;
        if (gmaxp + gmaxp2).max(gmaxn + gmaxn2) < self.eps * margin_scale(ag, asum) {
            return None;
        }
        let i = if self.pos(j) { ip? } else { in_? };
        Some((i, j))
    }

    fn be_shrunk(&self, i: usize, gmax: [f64; 4]) -> bool {
        match (self.status[i], self.pos(i)) {
            (Bound::Upper, true) => -self.g[i] > gmax[0],
            (Bound::Upper, false) => -self.g[i] > gmax[3],
            (Bound::Lower, true) => self.g[i] > gmax[1],
            (Bound::Lower, false) => self.g[i] > gmax[2],
            (Bound::Free, _) => false,
        }
    }

    fn do_shrinking(&mut self) {
        let mut gmax = [f64::NEG_INFINITY; 4];
        for &i in &self.active {
            let g = self.g[i];
            if self.status[i] != Bound::Upper {
                if self.pos(i) {
                    gmax[0] = gmax[0].max(-g);
                } else {
                    gmax[3] = gmax[3].max(-g);
                }
            }
            if self.status[i] != Bound::Lower {
                if self.pos(i) {
                    gmax[1] = gmax[1].max(g);
                } else {
                    gmax[2] = gmax[2].max(g);
                }
            }
        }
        let (ag, asum) = self.active.iter().fold((0.0, 0.0), |(g, s), &i| (g + self.alpha[i] * self.g[i], s + self.alpha[i]));
        if !self.unshrink && (gmax[0] + gmax[1]).max(gmax[2] + gmax[3]) <= self.eps * 10.0 * margin_scale(ag, asum) {
            self.unshrink = true;
            self.reconstruct_gradient();
        }
        let keep: Vec<usize> = self.active.iter().copied().filter(|&i| !self.be_shrunk(i, gmax)).collect();
        for &i in &self.active {
            self.in_active[i] = false;
        }
        for &i in &keep {
            self.in_active[i] = true;
        }
        self.active = keep;
    }

    fn update_pair(&mut self, i: usize, j: usize) {
        let q_i = self.q.row(i);
        let q_j = self.q.row(j);
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        // Both indices come from the same class, so only the same-sign
        // branch of the two-variable subproblem is reachable.
        let qc = {
            let q = 2.0 - 2.0 * q_i[j];
            if q > 0.0 {
                q
            } else {
                TAU
            }
        };
        let delta = (self.g[i] - self.g[j]) / qc;
        let sum = ai + aj;
        ai -= delta;
        aj += delta;
        if sum > 1.0 {
            if ai > 1.0 {
                ai = 1.0;
                aj = sum - 1.0;
            }
        } else if aj < 0.0 {
            aj = 0.0;
            ai = sum;
        }
        if sum > 1.0 {
            if aj > 1.0 {
                aj = 1.0;
                ai = sum - 1.0;
            }
        } else if ai < 0.0 {
            ai = 0.0;
            aj = sum;
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for &k in &self.active {
            self.g[k] += q_i[k] * di + q_j[k] * dj;
        }
        for (idx, row) in [(i, &q_i), (j, &q_j)] {
            let was_upper = self.status[idx] == Bound::Upper;
            self.status[idx] = bound_of(self.alpha[idx]);
            let is_upper = self.status[idx] == Bound::Upper;
            if was_upper != is_upper {
                let sign = if was_upper { -1.0 } else { 1.0 };
                for (gb, q) in self.g_bar.iter_mut().zip(row.iter()) {
                    *gb += sign * q;
                }
            }
        }
    }

    /// Returns `(rho, r)` with the decision `Σ y_j α_j k − rho` and margin `r`.
    fn rho_and_margin(&self) -> (f64, f64) {
        let mut stats = [(0usize, 0.0f64, f64::INFINITY, f64::NEG_INFINITY); 2];
        for &i in &self.active {
            let s = &mut stats[if self.pos(i) { 0 } else { 1 }];
            match self.status[i] {
                Bound::Upper => s.3 = s.3.max(self.g[i]),
                Bound::Lower => s.2 = s.2.min(self.g[i]),
                Bound::Free => {
                    s.0 += 1;
                    s.1 += self.g[i];
                }
            }
        }
        let side = |(n, sum, ub, lb): (usize, f64, f64, f64)| {
            if n > 0 {
                sum / n as f64
            } else if ub.is_finite() && lb.is_finite() {
                (ub + lb) / 2.0
            } else if ub.is_finite() {
                ub
            } else if lb.is_finite() {
                lb
            } else {
                0.0
            }
        };
        let r1 = side(stats[0]);
        let r2 = side(stats[1]);
        ((r1 - r2) / 2.0, (r1 + r2) / 2.0)
    }
}

pub(crate) fn check_problem(x: &[Vec<f64>], y: &[i8]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!("{} samples but {} labels", x.len(), y.len())));
    }
    if let Some(&bad) = y.iter().find(|&&l| l != 1 && l != -1) {
        return Err(Error::InvalidParameter(format!("label {bad} is not +1 or -1")));
    }
    if let Some(first) = x.first() {
        if let Some(v) = x.iter().find(|v| v.len() != first.len()) {
            return Err(Error::LayoutMismatch {
                expected: first.len(),
                actual: v.len(),
            });
        }
    }
    Ok(())
}

/// Solves `min ½ αᵀQα` s.t. `0 ≤ α_i ≤ 1/M`, `yᵀα = 0`, `1ᵀα = ν` on
/// pre-scaled samples.
pub fn solve_nu_svm(x: &[Vec<f64>], y: &[i8], nu: f64, gamma: f64, params: &SolverParams) -> Result<DualSolution> {
    check_problem(x, y)?;
    let nu_max = nu_max(y)?;
    if !(nu > 0.0) || nu > nu_max * (1.0 + 1e-12) {
        return Err(Error::InfeasibleNu { nu, nu_max });
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be positive")));
    }
    let l = y.len();
    let mut alpha = vec![0.0; l];
    let mut sum_pos = nu * l as f64 / 2.0;
    let mut sum_neg = sum_pos;
    for (a, &yi) in alpha.iter_mut().zip(y) {
        let s = if yi > 0 { &mut sum_pos } else { &mut sum_neg };
        *a = s.min(1.0);
        *s -= *a;
    }
    let mut s = Solver {
        q: KernelRows::new(x, y, gamma, params.cache_bytes),
        y,
        status: alpha.iter().map(|&a| bound_of(a)).collect(),
        alpha,
        g: vec![0.0; l],
        g_bar: vec![0.0; l],
        active: (0..l).collect(),
        in_active: vec![true; l],
        unshrink: false,
        eps: params.eps,
    };
    for i in 0..l {
        if s.status[i] == Bound::Lower {
            continue;
        }
        let row = s.q.row(i);
        let a = s.alpha[i];
        for j in 0..l {
            s.g[j] += a * row[j];
        }
        if s.status[i] == Bound::Upper {
            for j in 0..l {
                s.g_bar[j] += row[j];
            }
        }
    }

    let max_iter = (100 * l as u64).max(10_000_000);
    let mut iter = 0u64;
    let mut counter = l.min(1000) + 1;
    loop {
        if iter >= max_iter || s.q.evals > params.max_kernel_evals {
            return Err(Error::NonConvergence("nu-SVM solver"));
        }
        counter -= 1;
        if counter == 0 {
            counter = l.min(1000);
            if params.shrinking {
                s.do_shrinking();
            }
        }
        let (i, j) = match s.select_working_set() {
            Some(p) => p,
            None => {
                s.reconstruct_gradient();
                match s.select_working_set() {
                    Some(p) => {
                        counter = 1;
                        p
                    }
                    None => break,
                }
            }
        };
        iter += 1;
        s.update_pair(i, j);
    }

    let (rho, r) = s.rho_and_margin();
    let m = l as f64;
    let objective = s.alpha.iter().zip(&s.g).map(|(a, g)| a * g).sum::<f64>() / 2.0 / (m * m);
    Ok(DualSolution {
        alpha: s.alpha.iter().map(|a| a / m).collect(),
        b: -rho / m,
        diagnostics: Diagnostics {
            objective,
            margin: r / m,
            iterations: iter,
            kernel_evals: s.q.evals,
        },
    })
}
