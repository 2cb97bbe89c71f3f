use std::ops::Range;

use super::Layout;
use crate::error::{Error, Result};

/// Group-wise z-score parameters. Each group is a contiguous index range
/// whose entries share one mean and standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub groups: Vec<Range<usize>>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub len: usize,
}

impl Scaler {
    /// Maps every vector to itself.
    pub fn identity(len: usize) -> Self {
        Scaler {
            groups: vec![0..len],
            means: vec![0.0],
            stds: vec![1.0],
            len,
        }
    }

    pub fn fit(vectors: &[Vec<f64>], layout: &Layout) -> Result<Self> {
        Self::fit_groups(vectors, layout.groups(), layout.len)
    }

    /// Pooled population statistics per group; σ = 0 becomes 1.
    pub fn fit_groups(vectors: &[Vec<f64>], groups: Vec<Range<usize>>, len: usize) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::InvalidParameter("scaler needs at least one vector".into()));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != len) {
            return Err(Error::LayoutMismatch {
                expected: len,
                actual: v.len(),
            });
        }
        let mut means = Vec::with_capacity(groups.len());
        let mut stds = Vec::with_capacity(groups.len());
        for g in &groups {
            let n = (vectors.len() * g.len()) as f64;
            let mean = vectors.iter().map(|v| v[g.clone()].iter().sum::<f64>()).sum::<f64>() / n;
            let var = vectors
                .iter()
                .map(|v| v[g.clone()].iter().map(|x| (x - mean) * (x - mean)).sum::<f64>())
                .sum::<f64>()
                / n;
            let sd = var.sqrt();
            means.push(mean);
            stds.push(if sd > 0.0 && sd.is_finite() { sd } else { 1.0 });
        }
        Ok(Scaler { groups, means, stds, len })
    }

    pub fn apply_in_place(&self, v: &mut [f64]) -> Result<()> {
        if v.len() != self.len {
            return Err(Error::LayoutMismatch {
                expected: self.len,
                actual: v.len(),
            });
        }
        for (g, (m, s)) in self.groups.iter().zip(self.means.iter().zip(&self.stds)) {
            for x in &mut v[g.clone()] {
                *x = (*x - m) / s;
            }
        }
        Ok(())
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = v.to_vec();
        self.apply_in_place(&mut out)?;
        Ok(out)
    }
}
