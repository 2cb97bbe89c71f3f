use std::fs;
use std::path::{Path, PathBuf};

use alseg::learner::SessionParams;
use alseg::postproc::PostChain;
use alseg::volume::{LoadOptions, PhantomSpec, DEFAULT_BLOCK_SIZE};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// How input volumes are loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadSettings {
    /// Files above this size are read through the block cache.
    pub memory_budget_mb: u64,
    pub block_size: usize,
    pub cache_mb: usize,
}

impl Default for LoadSettings {
    fn default() -> Self {
        LoadSettings {
            memory_budget_mb: 1024,
            block_size: DEFAULT_BLOCK_SIZE,
            cache_mb: 256,
        }
    }
}

impl LoadSettings {
    pub fn options(&self) -> LoadOptions {
        LoadOptions {
            memory_budget: self.memory_budget_mb << 20,
            block_size: self.block_size,
            cache_bytes: self.cache_mb << 20,
        }
    }
}

/// One scripted run: an input volume, one seed file per iteration, and
/// everything needed to reproduce the outputs.
///
/// Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// Raw volume with a sidecar descriptor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<PathBuf>,
    /// Inline phantom used instead of `volume`; its foreground is the
    /// ground truth unless `ground_truth` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom: Option<PhantomSpec>,
    /// Nonzero voxels are foreground.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    pub seedfiles: Vec<PathBuf>,
    pub out: PathBuf,
    /// Cross-validation fold assignment seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub load: LoadSettings,
    #[serde(default)]
    pub params: SessionParams,
    #[serde(default)]
    pub postproc: PostChain,
}

/// Command-line values that take precedence over the manifest.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub workers: Option<usize>,
    pub delta: Option<f64>,
    pub levels: Option<usize>,
    pub block_size: Option<usize>,
    pub kernel_cache_mb: Option<usize>,
    pub seedfiles: Vec<PathBuf>,
    pub out: Option<PathBuf>,
}

impl RunManifest {
    pub fn from_text(text: &str) -> Result<Self> {
        toml::from_str(text).context("parsing run manifest")
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    /// Reads a manifest and makes its paths absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut m = Self::from_text(&text)?;
        let base = std::path::absolute(path).with_context(|| format!("resolving {}", path.display()))?;
        m.rebase(base.parent().unwrap_or(Path::new("/")));
        Ok(m)
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = &mut self.volume {
            join(p);
        }
        if let Some(p) = &mut self.ground_truth {
            join(p);
        }
        self.seedfiles.iter_mut().for_each(join);
        join(&mut self.out);
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(w) = o.workers {
            self.params.train.workers = w;
            self.params.classify.workers = w;
        }
        if let Some(d) = o.delta {
            self.params.delta = d;
        }
        if let Some(l) = o.levels {
            self.params.levels = l;
        }
        if let Some(b) = o.block_size {
            self.load.block_size = b;
            self.params.classify.brick = b;
        }
        if let Some(mb) = o.kernel_cache_mb {
            self.params.train.solver.cache_bytes = mb << 20;
        }
        if !o.seedfiles.is_empty() {
            self.seedfiles = o.seedfiles.clone();
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
    }

    /// Session parameters with `seed` applied.
    pub fn session_params(&self) -> SessionParams {
        let mut p = self.params.clone();
        if let Some(seed) = self.seed {
            p.train.cv_seed = seed;
        }
        p
    }

    /// Checks consistency and that every referenced input exists.
    pub fn validate(&self) -> Result<()> {
        match (&self.volume, &self.phantom) {
            (Some(_), Some(_)) => bail!("manifest gives both `volume` and `phantom`"),
            (None, None) => bail!("manifest gives neither `volume` nor `phantom`"),
            _ => {}
        }
        if self.seedfiles.is_empty() {
            bail!("manifest lists no seed files");
        }
        for p in self.volume.iter().chain(&self.ground_truth).chain(&self.seedfiles) {
            if !p.exists() {
                bail!("{} does not exist", p.display());
            }
        }
        if self.load.block_size == 0 {
            bail!("block size must be positive");
        }
        self.params.validate()?;
        Ok(())
    }
}
