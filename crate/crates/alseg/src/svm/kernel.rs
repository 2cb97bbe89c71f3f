use std::rc::Rc;

use lru::LruCache;

use crate::error::{Error, Result};

/// `exp(-γ‖x − y‖²)`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LayoutMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok((-gamma * sq_dist(x, y)).exp())
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Rows of `Q_ij = y_i y_j k(x_i, x_j)` computed on demand and kept in an
/// LRU cache bounded by a byte budget.
pub(crate) struct KernelRows<'a> {
    x: &'a [Vec<f64>],
    y: &'a [i8],
    gamma: f64,
    cache: LruCache<usize, Rc<[f64]>>,
    pub evals: u64,
}

impl<'a> KernelRows<'a> {
    pub fn new(x: &'a [Vec<f64>], y: &'a [i8], gamma: f64, budget_bytes: usize) -> Self {
        let row_bytes = (x.len() * std::mem::size_of::<f64>()).max(1);
        let rows = (budget_bytes / row_bytes).clamp(2, x.len().max(2));
        KernelRows {
            x,
            y,
            gamma,
            cache: LruCache::new(std::num::NonZeroUsize::new(rows).unwrap()),
            evals: 0,
        }
    }

    pub fn row(&mut self, i: usize) -> Rc<[f64]> {
        if let Some(r) = self.cache.get(&i) {
            return r.clone();
        }
        let xi = &self.x[i];
        let yi = self.y[i] as f64;
        let row: Rc<[f64]> = self
            .x
            .iter()
            .zip(self.y)
            .map(|(xj, &yj)| yi * yj as f64 * (-self.gamma * sq_dist(xi, xj)).exp())
            .collect();
        self.evals += self.x.len() as u64;
        self.cache.put(i, row.clone());
        row
    }
}
