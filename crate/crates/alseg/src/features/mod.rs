//! Structural and geometric descriptors of local environments.
//!
//! [`FeatureExtractor`] turns a [`LocalEnvironment`] into a fixed-length
//! vector whose [`Layout`] depends only on the [`FeatureConfig`]. Features
//! are always emitted in the order of [`FeatureKind::ALL`], whatever order
//! the configuration lists them in.

mod curvature;
mod geometry;
mod histogram;
mod hog;
mod lbp;
mod moments;
mod scaler;
mod wasserstein;

use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::LocalEnvironment;

pub use curvature::{curvature_estimates, curvature_histogram, mean_curvature};
pub use geometry::{
    center_distances, fit_structures, inertia_features, max_distance, selected_offsets, structure_characteristics,
    StructureFit,
};
pub use histogram::Histogram;
pub use hog::{gradient, hog_sphere, sphere_bin, BAND_CELLS, BAND_EDGES, HOG_BINS};
pub use lbp::{image_codes, lbp_top, projection, riu2_code, LBP_BINS};
pub use moments::{moments, moments_of, position_feature};
pub use scaler::Scaler;
pub use wasserstein::{embed_atoms, embedding_distance, wasserstein_embed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Moments,
    Position,
    LbpTop,
    Curvature,
    LineFit,
    PlaneFit,
    Inertia,
    CenterDistance,
    Hog,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 9] = [
        FeatureKind::Moments,
        FeatureKind::Position,
        FeatureKind::LbpTop,
        FeatureKind::Curvature,
        FeatureKind::LineFit,
        FeatureKind::PlaneFit,
        FeatureKind::Inertia,
        FeatureKind::CenterDistance,
        FeatureKind::Hog,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Moments => "moments",
            FeatureKind::Position => "position",
            FeatureKind::LbpTop => "lbp_top",
            FeatureKind::Curvature => "curvature",
            FeatureKind::LineFit => "line_fit",
            FeatureKind::PlaneFit => "plane_fit",
            FeatureKind::Inertia => "inertia",
            FeatureKind::CenterDistance => "center_distance",
            FeatureKind::Hog => "hog",
        }
    }
}

/// Embedding dimension per histogram family; 0 keeps the raw histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedDims {
    pub lbp: usize,
    pub curvature: usize,
    pub fit: usize,
    pub distance: usize,
    pub hog: usize,
}

impl Default for EmbedDims {
    fn default() -> Self {
        EmbedDims {
            lbp: 0,
            curvature: 8,
            fit: 8,
            distance: 8,
            hog: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub features: Vec<FeatureKind>,
    /// Environment edge length K.
    pub env_size: usize,
    /// Inner curvature cube edge length k.
    pub curvature_size: usize,
    /// Voxels with value strictly above τ count as "nonzero".
    pub threshold: f64,
    /// Gradients at or below this magnitude are ignored.
    pub gradient_threshold: f64,
    pub curvature_range: [f64; 2],
    pub curvature_bins: usize,
    pub fit_bins: usize,
    pub distance_bins: usize,
    pub embed: EmbedDims,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            features: vec![FeatureKind::Moments, FeatureKind::Inertia],
            env_size: 5,
            curvature_size: 3,
            threshold: 0.0,
            gradient_threshold: 1.0,
            curvature_range: [-1.0, 1.0],
            curvature_bins: 16,
            fit_bins: 16,
            distance_bins: 16,
            embed: EmbedDims::default(),
        }
    }
}

impl FeatureConfig {
    pub fn new(features: &[FeatureKind], env_size: usize) -> Self {
        FeatureConfig {
            features: features.to_vec(),
            env_size,
            ..Default::default()
        }
    }

    pub fn enables(&self, kind: FeatureKind) -> bool {
        self.features.contains(&kind)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::FeatureConfig(m));
        if self.features.is_empty() {
            return bad("no feature enabled".into());
        }
        let k = self.env_size;
        if k < 3 || k % 2 == 0 {
            return bad(format!("environment size {k} must be odd and > 1"));
        }
        let c = self.curvature_size;
        if c < 3 || c % 2 == 0 || c > k {
            return bad(format!("curvature size {c} must be odd with 1 < k <= {k}"));
        }
        for (name, b) in [
            ("curvature", self.curvature_bins),
            ("fit", self.fit_bins),
            ("distance", self.distance_bins),
        ] {
            if b < 2 {
                return bad(format!("{name} bin count {b} below 2"));
            }
        }
        if !(self.curvature_range[1] > self.curvature_range[0]) {
            return bad("curvature range is empty".into());
        }
        if !(self.threshold.is_finite() && self.gradient_threshold >= 0.0) {
            return bad("thresholds must be finite and the gradient threshold non-negative".into());
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("feature config serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let c: FeatureConfig = toml::from_str(text).map_err(|e| Error::FeatureConfig(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    fn hist_len(bins: usize, embed: usize) -> usize {
        if embed > 0 {
            embed
        } else {
            bins
        }
    }

    /// Length contributed by `kind` under this configuration.
    pub fn feature_len(&self, kind: FeatureKind) -> usize {
        match kind {
            FeatureKind::Moments => 4,
            FeatureKind::Position => 3,
            FeatureKind::LbpTop => 3 * Self::hist_len(LBP_BINS, self.embed.lbp),
            FeatureKind::Curvature => Self::hist_len(self.curvature_bins, self.embed.curvature),
            FeatureKind::LineFit | FeatureKind::PlaneFit => 2 + Self::hist_len(self.fit_bins, self.embed.fit),
            FeatureKind::Inertia => 3,
            FeatureKind::CenterDistance => Self::hist_len(self.distance_bins, self.embed.distance),
            FeatureKind::Hog => Self::hist_len(HOG_BINS, self.embed.hog),
        }
    }

    pub fn layout(&self) -> Layout {
        let mut entries = Vec::new();
        let mut offset = 0;
        for kind in FeatureKind::ALL {
            if self.enables(kind) {
                let len = self.feature_len(kind);
                entries.push(LayoutEntry { kind, offset, len });
                offset += len;
            }
        }
        Layout { entries, len: offset }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayoutEntry {
    pub kind: FeatureKind,
    pub offset: usize,
    pub len: usize,
}

/// Position of each enabled feature inside a vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub entries: Vec<LayoutEntry>,
    pub len: usize,
}

impl Layout {
    /// `(name, offset, length)` triples in vector order.
    pub fn describe(&self) -> Vec<(&'static str, usize, usize)> {
        self.entries.iter().map(|e| (e.kind.name(), e.offset, e.len)).collect()
    }

    /// Scaling groups: one per scalar entry, one per histogram block.
    pub fn groups(&self) -> Vec<Range<usize>> {
        let mut groups = Vec::new();
        for e in &self.entries {
            let o = e.offset;
            match e.kind {
                FeatureKind::Moments | FeatureKind::Position | FeatureKind::Inertia => {
                    groups.extend((o..o + e.len).map(|i| i..i + 1));
                }
                FeatureKind::LineFit | FeatureKind::PlaneFit => {
                    groups.push(o..o + 1);
                    groups.push(o + 1..o + 2);
                    groups.push(o + 2..o + e.len);
                }
                FeatureKind::LbpTop | FeatureKind::Curvature | FeatureKind::CenterDistance | FeatureKind::Hog => {
                    groups.push(o..o + e.len);
                }
            }
        }
        groups
    }

    /// Column names for CSV export.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.len);
        for e in &self.entries {
            for i in 0..e.len {
                names.push(format!("{}_{}", e.kind.name(), i));
            }
        }
        names
    }
}

/// Computes feature vectors for one configuration.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    layout: Layout,
    curvature_hist: Histogram,
    fit_hist: Histogram,
    distance_hist: Histogram,
}

fn push_hist(out: &mut Vec<f64>, points: &[f64], counts: &[f64], embed: usize) {
    if embed == 0 {
        out.extend_from_slice(counts);
        return;
    }
    let mut e = Vec::with_capacity(embed);
    match embed_atoms(points, counts, embed, &mut e) {
        Ok(()) => out.extend_from_slice(&e),
        Err(_) => out.extend(std::iter::repeat_n(0.0, embed)),
    }
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        let dmax = max_distance(config.env_size);
        Ok(FeatureExtractor {
            curvature_hist: Histogram::uniform(config.curvature_range[0], config.curvature_range[1], config.curvature_bins)?,
            fit_hist: Histogram::uniform(0.0, dmax, config.fit_bins)?,
            distance_hist: Histogram::uniform(0.0, dmax, config.distance_bins)?,
            config,
            layout,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.layout.len
    }

    pub fn is_empty(&self) -> bool {
        self.layout.len == 0
    }

    pub fn env_size(&self) -> usize {
        self.config.env_size
    }

    /// Feature vector of `env`; panics if its size differs from the config.
    pub fn extract(&self, env: &LocalEnvironment) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layout.len);
        self.extract_into(env, &mut out);
        out
    }

    pub fn extract_into(&self, env: &LocalEnvironment, out: &mut Vec<f64>) {
        assert_eq!(env.size, self.config.env_size, "environment size differs from feature config");
        out.clear();
        let c = &self.config;
        let needs_fit = c.enables(FeatureKind::LineFit) || c.enables(FeatureKind::PlaneFit);
        let fit = if needs_fit { fit_structures(env, c.threshold) } else { None };
        for entry in &self.layout.entries {
            match entry.kind {
                FeatureKind::Moments => out.extend_from_slice(&moments(env)),
                FeatureKind::Position => out.extend_from_slice(&position_feature(env.center)),
                FeatureKind::LbpTop => {
                    let centers: Vec<f64> = (0..LBP_BINS).map(|i| i as f64).collect();
                    for h in lbp_top(env) {
                        push_hist(out, &centers, &h, c.embed.lbp);
                    }
                }
                FeatureKind::Curvature => {
                    let mut h = self.curvature_hist.clone();
                    curvature_histogram(env, c.curvature_size, c.gradient_threshold, &mut h);
                    push_hist(out, &h.centers(), h.counts(), c.embed.curvature);
                }
                FeatureKind::LineFit | FeatureKind::PlaneFit => match &fit {
                    None => out.extend(std::iter::repeat_n(0.0, entry.len)),
                    Some(f) => {
                        let d = if entry.kind == FeatureKind::LineFit {
                            &f.line_distances
                        } else {
                            &f.plane_distances
                        };
                        let (f1, f2) = structure_characteristics(d, c.env_size);
                        out.push(f1);
                        out.push(f2);
                        let mut h = self.fit_hist.clone();
                        d.iter().for_each(|&x| h.add(x, 1.0));
                        push_hist(out, &h.centers(), h.counts(), c.embed.fit);
                    }
                },
                FeatureKind::Inertia => out.extend_from_slice(&inertia_features(env)),
                FeatureKind::CenterDistance => {
                    let mut h = self.distance_hist.clone();
                    center_distances(env, c.threshold).into_iter().for_each(|x| h.add(x, 1.0));
                    push_hist(out, &h.centers(), h.counts(), c.embed.distance);
                }
                FeatureKind::Hog => {
                    let h = hog_sphere(env, c.gradient_threshold);
                    if c.embed.hog == 0 {
                        out.extend_from_slice(&h);
                    } else {
                        let centers: Vec<f64> = (0..HOG_BINS).map(|i| i as f64).collect();
                        push_hist(out, &centers, &h, c.embed.hog);
                    }
                }
            }
            debug_assert_eq!(out.len(), entry.offset + entry.len);
        }
    }
}

/// Feature vector of `env` under `config`.
pub fn assemble(env: &LocalEnvironment, config: &FeatureConfig) -> Result<Vec<f64>> {
    if env.size != config.env_size {
        return Err(Error::FeatureConfig(format!(
            "environment size {} differs from configured {}",
            env.size, config.env_size
        )));
    }
    Ok(FeatureExtractor::new(config.clone())?.extract(env))
}

/// Writes vectors as CSV with one header column per vector entry.
pub fn write_csv<W: Write>(mut w: W, layout: &Layout, vectors: &[Vec<f64>]) -> std::io::Result<()> {
    writeln!(w, "{}", layout.column_names().join(","))?;
    for v in vectors {
        let row: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
