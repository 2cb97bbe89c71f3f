use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureExtractor};
use crate::svm::{self, CvReport, SvmModel, TrainOptions, TrainingSet};
use crate::volume::{extract_environment, MultiresView, VoxelSource, VoxelVolume};

use super::classify::{ClassifyOptions, ConfidenceBuffer, Progress};
use super::multires::{multires_segment, CandidateRegion, MultiresStats};
use super::seeds::{parse_seeds, emit_seeds, Seed, SeedSet};
use super::threshold::confidence_threshold;
use super::uncertainty::uncertainty_volume;

pub const DEFAULT_DELTA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionParams {
    pub features: FeatureConfig,
    /// Width δ of the uncertainty window.
    pub delta: f64,
    /// Number of resolution levels ℓ_max.
    pub levels: usize,
    pub train: TrainOptions,
    pub classify: ClassifyOptions,
}

impl Default for SessionParams {
    fn default() -> Self {
        SessionParams {
            features: FeatureConfig::default(),
            delta: DEFAULT_DELTA,
            levels: 1,
            train: TrainOptions::default(),
            classify: ClassifyOptions::default(),
        }
    }
}

impl SessionParams {
    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta = {} must be finite and >= 0", self.delta)));
        }
        if self.levels == 0 {
            return Err(Error::InvalidParameter("at least one resolution level is required".into()));
        }
        if self.classify.workers == 0 || self.classify.brick == 0 || self.train.workers == 0 {
            return Err(Error::InvalidParameter("workers and brick size must be positive".into()));
        }
        Ok(())
    }
}

/// Training state of one resolution level.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LevelState {
    pub training: TrainingSet,
    pub model: Option<SvmModel>,
    pub report: Option<CvReport>,
    /// `(ρ_ℓ, balanced training error)`.
    pub threshold: Option<(f64, f64)>,
}

/// Result of a classification pass, not yet visible in the session.
#[derive(Debug)]
pub struct SegmentOutput {
    pub confidence: VoxelVolume,
    pub uncertainty: VoxelVolume,
    pub stats: MultiresStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    iteration: u64,
    params: SessionParams,
}

const CHECKPOINT_FILE: &str = "session.toml";
const SEED_FILE: &str = "seeds.txt";

fn model_file(level: usize) -> String {
    format!("model_{level}.svm")
}

/// Active-learning state over one volume.
pub struct Session {
    volume: Arc<VoxelVolume>,
    params: SessionParams,
    extractor: FeatureExtractor,
    seeds: SeedSet,
    levels: Vec<LevelState>,
    confidence: Option<Arc<VoxelVolume>>,
    uncertainty: Option<Arc<VoxelVolume>>,
    candidates: Vec<CandidateRegion>,
    iteration: u64,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("dims", &self.volume.dims())
            .field("seeds", &self.seeds.len())
            .field("iteration", &self.iteration)
            .finish()
    }
}

impl Session {
    pub fn new(volume: Arc<VoxelVolume>, params: SessionParams) -> Result<Self> {
        params.validate()?;
        let extractor = FeatureExtractor::new(params.features.clone())?;
        Ok(Session {
            volume,
            extractor,
            seeds: SeedSet::new(),
            levels: vec![LevelState::default(); params.levels],
            params,
            confidence: None,
            uncertainty: None,
            candidates: Vec::new(),
            iteration: 0,
        })
    }

    pub fn volume(&self) -> &Arc<VoxelVolume> {
        &self.volume
    }

    pub fn params(&self) -> &SessionParams {
        &self.params
    }

    pub fn seeds(&self) -> &SeedSet {
        &self.seeds
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn levels(&self) -> usize {
        self.params.levels
    }

    /// State of `level` in `1..=ℓ_max`.
    pub fn level(&self, level: usize) -> Result<&LevelState> {
        level
            .checked_sub(1)
            .and_then(|i| self.levels.get(i))
            .ok_or(Error::InvalidLevel {
                level,
                max: self.params.levels,
            })
    }

    pub fn model(&self, level: usize) -> Option<&SvmModel> {
        self.level(level).ok()?.model.as_ref()
    }

    pub fn finest_model(&self) -> Option<&SvmModel> {
        self.model(self.params.levels)
    }

    pub fn threshold(&self, level: usize) -> Option<f64> {
        self.level(level).ok()?.threshold.map(|t| t.0)
    }

    pub fn confidence(&self) -> Option<&Arc<VoxelVolume>> {
        self.confidence.as_ref()
    }

    pub fn uncertainty(&self) -> Option<&Arc<VoxelVolume>> {
        self.uncertainty.as_ref()
    }

    pub fn candidates(&self) -> &[CandidateRegion] {
        &self.candidates
    }

    /// Feature vector of a finest-level position on `level`, or `None`
    /// without a full environment there.
    fn features_on(&self, pos: [usize; 3], level: usize) -> Result<Option<Vec<f64>>> {
        let shift = self.params.levels - level;
        let view = MultiresView::new(&*self.volume, level, self.params.levels)?;
        let p = pos.map(|c| c >> shift);
        Ok(extract_environment(&view, p, self.extractor.env_size())?.map(|env| self.extractor.extract(&env)))
    }

    /// Whether `seed` would be accepted: in range, with a full environment
    /// on the finest level and no conflicting label. `Ok(false)` marks a
    /// same-label duplicate.
    pub fn check_seed(&self, seed: &Seed) -> Result<bool> {
        let fresh = self.seeds.check(seed)?;
        let dims = self.volume.dims();
        if !crate::geom::in_bounds(dims, seed.pos) {
            return Err(Error::OutOfBounds { pos: seed.pos, dims });
        }
        if !crate::volume::has_full_environment(dims, seed.pos, self.extractor.env_size()) {
            return Err(Error::SeedWithoutEnvironment {
                pos: seed.pos,
                level: self.params.levels,
            });
        }
        Ok(fresh)
    }

    /// Appends the seeds to the training sets of every level and retrains
    /// all levels. Either everything is updated or nothing is.
    ///
    /// Coarse levels skip seeds without a full environment there and stay
    /// untrained while they lack one of the classes.
    pub fn train_iteration(&mut self, new: &[Seed]) -> Result<()> {
        let mut seeds = self.seeds.clone();
        let mut fresh = Vec::new();
        for &s in new {
            self.check_seed(&s)?;
            if seeds.insert(s)? {
                fresh.push(s);
            }
        }
        let mut sets: Vec<TrainingSet> = self.levels.iter().map(|l| l.training.clone()).collect();
        for s in &fresh {
            for level in 1..=self.params.levels {
                match self.features_on(s.pos, level)? {
                    Some(f) => sets[level - 1].push(f, s.label),
                    None if level == self.params.levels => {
                        return Err(Error::SeedWithoutEnvironment { pos: s.pos, level });
                    }
                    None => {}
                }
            }
        }
        let finest = &sets[self.params.levels - 1];
        if finest.positives() == 0 || finest.negatives() == 0 {
            return Err(Error::SingleClass {
                positives: finest.positives(),
                negatives: finest.negatives(),
            });
        }
        let levels = sets
            .into_iter()
            .map(|training| self.train_level(training))
            .collect::<Result<Vec<_>>>()?;
        self.seeds = seeds;
        self.levels = levels;
        Ok(())
    }

    fn train_level(&self, training: TrainingSet) -> Result<LevelState> {
        if training.positives() == 0 || training.negatives() == 0 {
            return Ok(LevelState {
                training,
                ..Default::default()
            });
        }
        let (model, report) = svm::train(&training, &self.params.features, &self.params.train)?;
        let threshold = Some(level_threshold(&model, &training)?);
        Ok(LevelState {
            training,
            model: Some(model),
            report: Some(report),
            threshold,
        })
    }

    /// Classifies the volume with the current models without touching the
    /// visible layers.
    pub fn segment(&self, progress: Option<&Progress>) -> Result<SegmentOutput> {
        let models: Vec<Option<&SvmModel>> = self.levels.iter().map(|l| l.model.as_ref()).collect();
        let thresholds: Vec<Option<f64>> = self.levels.iter().map(|l| l.threshold.map(|t| t.0)).collect();
        let mut buf = ConfidenceBuffer::new(self.volume.dims());
        let stats = multires_segment(&*self.volume, &models, &thresholds, &self.params.classify, &mut buf, progress)?;
        let confidence = buf.into_volume();
        let uncertainty = uncertainty_volume(&confidence, self.params.delta)?;
        Ok(SegmentOutput {
            confidence,
            uncertainty,
            stats,
        })
    }

    /// Makes a classification pass visible and counts the iteration.
    pub fn install(&mut self, out: SegmentOutput) {
        self.confidence = Some(Arc::new(out.confidence));
        self.uncertainty = Some(Arc::new(out.uncertainty));
        self.candidates = out.stats.candidates;
        self.iteration += 1;
    }

    /// Makes a classification pass visible without counting an iteration,
    /// as after [`Session::restore_checkpoint`].
    pub fn refresh(&mut self, out: SegmentOutput) {
        self.confidence = Some(Arc::new(out.confidence));
        self.uncertainty = Some(Arc::new(out.uncertainty));
        self.candidates = out.stats.candidates;
    }

    /// One loop body: train on the new seeds, classify, install.
    pub fn iterate(&mut self, new: &[Seed]) -> Result<MultiresStats> {
        self.train_iteration(new)?;
        let out = self.segment(None)?;
        let stats = out.stats.clone();
        self.install(out);
        Ok(stats)
    }

    /// Writes parameters, seeds and one model file per trained level.
    pub fn save_checkpoint(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let cp = Checkpoint {
            iteration: self.iteration,
            params: self.params.clone(),
        };
        let text = toml::to_string(&cp).map_err(|e| Error::InvalidParameter(format!("checkpoint: {e}")))?;
        write_atomic(&dir.join(CHECKPOINT_FILE), text.as_bytes())?;
        write_atomic(&dir.join(SEED_FILE), emit_seeds(self.seeds.entries()).as_bytes())?;
        for (i, l) in self.levels.iter().enumerate() {
            let path = dir.join(model_file(i + 1));
            match &l.model {
                Some(m) => svm::serialize_model(m, &l.training, &path)?,
                None if path.exists() => fs::remove_file(&path).map_err(|e| Error::io(&path, e))?,
                None => {}
            }
        }
        Ok(())
    }

    /// Rebuilds a session from [`Session::save_checkpoint`] output. Features
    /// are extracted again and must match the stored training sets.
    pub fn restore_checkpoint(dir: &Path, volume: Arc<VoxelVolume>) -> Result<Self> {
        let path = dir.join(CHECKPOINT_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let cp: Checkpoint = toml::from_str(&text).map_err(|e| Error::InvalidParameter(format!("checkpoint: {e}")))?;
        let mut session = Session::new(volume, cp.params)?;
        let path = dir.join(SEED_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let seeds = parse_seeds(&text)?;
        for &s in &seeds {
            session.check_seed(&s)?;
            if !session.seeds.insert(s)? {
                continue;
            }
            for level in 1..=session.params.levels {
                if let Some(f) = session.features_on(s.pos, level)? {
                    session.levels[level - 1].training.push(f, s.label);
                }
            }
        }
        for level in 1..=session.params.levels {
            let path = dir.join(model_file(level));
            if !path.exists() {
                continue;
            }
            let (model, training) = svm::deserialize_model(&path)?;
            let state = &mut session.levels[level - 1];
            if training != state.training {
                return Err(Error::CorruptModel(format!(
                    "training set of level {level} does not match the seed file"
                )));
            }
            state.threshold = Some(level_threshold(&model, &training)?);
            state.model = Some(model);
        }
        session.iteration = cp.iteration;
        Ok(session)
    }
}

/// `ρ_ℓ` from the model's confidences on its own training samples.
fn level_threshold(model: &SvmModel, training: &TrainingSet) -> Result<(f64, f64)> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (x, &y) in training.samples.iter().zip(&training.labels) {
        let s = model.predict_confidence(x)?;
        if y > 0 {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    confidence_threshold(&pos, &neg)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = std::path::PathBuf::from(partial);
    fs::write(&partial, bytes).map_err(|e| Error::io(&partial, e))?;
    fs::rename(&partial, path).map_err(|e| Error::io(path, e))
}
