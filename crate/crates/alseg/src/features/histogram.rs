use crate::error::{Error, Result};

/// Weighted histogram over strictly increasing bin edges.
///
/// Bins are half-open `[e_i, e_{i+1})`; values outside the range are
/// clamped into the first or last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<f64>,
}

impl Histogram {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 3 {
            return Err(Error::FeatureConfig("histogram needs at least 2 bins".into()));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::FeatureConfig("histogram edges must increase strictly".into()));
        }
        let n = edges.len() - 1;
        Ok(Histogram {
            edges,
            counts: vec![0.0; n],
        })
    }

    /// `bins` equal-width bins over `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::FeatureConfig(format!("bin count {bins} below 2")));
        }
        if !(hi > lo) {
            return Err(Error::FeatureConfig(format!("empty histogram range [{lo}, {hi}]")));
        }
        let w = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|i| lo + w * i as f64).collect();
        edges.push(hi);
        Self::new(edges)
    }

    /// Same edges, given counts.
    pub fn with_counts(edges: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        let mut h = Self::new(edges)?;
        if counts.len() != h.counts.len() || counts.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::FeatureConfig("counts must be non-negative, one per bin".into()));
        }
        h.counts = counts;
        Ok(h)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn mass(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn bin_of(&self, x: f64) -> usize {
        let n = self.counts.len();
        if !(x >= self.edges[0]) {
            return 0;
        }
        // index of the first edge strictly greater than x, minus one
        let i = self.edges.partition_point(|&e| e <= x);
        (i.max(1) - 1).min(n - 1)
    }

    pub fn add(&mut self, x: f64, weight: f64) {
        let b = self.bin_of(x);
        self.counts[b] += weight;
    }

    pub fn clear(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0.0);
    }
}
