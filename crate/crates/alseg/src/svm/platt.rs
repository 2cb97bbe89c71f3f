use crate::error::{Error, Result};

/// Logistic calibration `P(y = +1 | s) = 1 / (1 + exp(A·s + B))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    pub fn probability(&self, s: f64) -> f64 {
        sigmoid(self.a * s + self.b)
    }
}

/// `1 / (1 + exp(t))` without overflow.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

fn targets(labels: &[i8]) -> Vec<f64> {
    let pos = labels.iter().filter(|&&l| l > 0).count() as f64;
    let neg = labels.len() as f64 - pos;
    let hi = (pos + 1.0) / (pos + 2.0);
    let lo = 1.0 / (neg + 2.0);
    labels.iter().map(|&l| if l > 0 { hi } else { lo }).collect()
}

/// Cross-entropy against the smoothed targets.
pub fn platt_objective(decisions: &[f64], labels: &[i8], a: f64, b: f64) -> f64 {
    targets(labels)
        .iter()
        .zip(decisions)
        .map(|(t, s)| {
            let f = s * a + b;
            if f >= 0.0 {
                t * f + (-f).exp().ln_1p()
            } else {
                (t - 1.0) * f + f.exp().ln_1p()
            }
        })
        .sum()
}

/// Damped Newton fit of `(A, B)` on decisions scaled to unit maximum
/// magnitude; stops once the gradient norm drops below `1e-8`.
pub fn fit_platt(decisions: &[f64], labels: &[i8]) -> Result<Platt> {
    if decisions.len() != labels.len() {
        return Err(Error::InvalidParameter("decision and label counts differ".into()));
    }
    let pos = labels.iter().filter(|&&l| l > 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass {
            positives: pos,
            negatives: neg,
        });
    }
    let scale = decisions.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    let decisions: Vec<f64> = decisions.iter().map(|d| d / scale).collect();
    let decisions = &decisions[..];
    let t = targets(labels);
    let mut a = 0.0;
    let mut b = ((neg as f64 + 1.0) / (pos as f64 + 1.0)).ln();
    let mut fval = platt_objective(decisions, labels, a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (s, ti) in decisions.iter().zip(&t) {
            let p = sigmoid(s * a + b);
            let d2 = p * (1.0 - p);
            h11 += s * s * d2;
            h22 += d2;
            h21 += s * d2;
            let d1 = ti - p;
            g1 += s * d1;
            g2 += d1;
        }
        if g1.hypot(g2) < 1e-8 {
            return Ok(Platt { a: a / scale, b });
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        loop {
            if step < 1e-10 {
                return Err(Error::NonConvergence("Platt scaling"));
            }
            let (na, nb) = (a + step * da, b + step * db);
            let nf = platt_objective(decisions, labels, na, nb);
            if nf <= fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
    }
    Err(Error::NonConvergence("Platt scaling"))
}
