//! Fourier embedding of 1D quantile functions.
//!
//! A histogram is read as a discrete measure with atoms at the bin centres.
//! Its quantile function is then a step function on (0, 1), and its
//! coefficients against the orthonormal basis
//! `1, √2 cos 2πx, √2 sin 2πx, √2 cos 4πx, √2 sin 4πx, …`
//! are integrated exactly, segment by segment. Euclidean distances between
//! embeddings approach the 2-Wasserstein distance as the dimension grows.

use std::f64::consts::{SQRT_2, TAU};

use super::Histogram;
use crate::error::{Error, Result};

/// Embeds the distribution with atoms `points` and weights `weights`.
/// Atoms need not be sorted; zero weights are ignored.
pub fn embed_atoms(points: &[f64], weights: &[f64], dim: usize, out: &mut Vec<f64>) -> Result<()> {
    let mass: f64 = weights.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::EmptyHistogram);
    }
    let mut order: Vec<usize> = (0..points.len()).filter(|&i| weights[i] > 0.0).collect();
    order.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
    out.clear();
    out.resize(dim, 0.0);
    let mut lo = 0.0;
    for (j, &i) in order.iter().enumerate() {
        let hi = if j + 1 == order.len() { 1.0 } else { (lo + weights[i] / mass).min(1.0) };
        let c = points[i];
        for (n, slot) in out.iter_mut().enumerate() {
            *slot += c * segment_integral(n, lo, hi);
        }
        lo = hi;
    }
    Ok(())
}

/// ∫_a^b ξ_n(x) dx for the n-th basis function.
fn segment_integral(n: usize, a: f64, b: f64) -> f64 {
    if n == 0 {
        return b - a;
    }
    let freq = TAU * n.div_ceil(2) as f64;
    if n % 2 == 1 {
        SQRT_2 * ((freq * b).sin() - (freq * a).sin()) / freq
    } else {
        SQRT_2 * ((freq * a).cos() - (freq * b).cos()) / freq
    }
}

/// First `dim` Fourier coefficients of the histogram's quantile function.
pub fn wasserstein_embed(h: &Histogram, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::FeatureConfig("embedding dimension must be positive".into()));
    }
    let mut out = Vec::with_capacity(dim);
    embed_atoms(&h.centers(), h.counts(), dim, &mut out)?;
    Ok(out)
}

pub fn embedding_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
