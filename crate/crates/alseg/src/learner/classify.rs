use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureExtractor;
use crate::geom::{linear_index, voxel_count, Dims, Region};
use crate::svm::SvmModel;
use crate::volume::env::interior;
use crate::volume::{LocalEnvironment, RawWriter, Samples, VoxelSource, VoxelVolume};

pub const DEFAULT_BRICK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyOptions {
    pub workers: usize,
    /// Edge length of the bricks handed to workers.
    pub brick: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            workers: 1,
            brick: DEFAULT_BRICK,
        }
    }
}

impl ClassifyOptions {
    pub(crate) fn pool(&self) -> Result<rayon::ThreadPool> {
        if self.workers == 0 || self.brick == 0 {
            return Err(Error::InvalidParameter("workers and brick size must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
    }
}

/// Shared progress of a multi-stage job. Cloning shares the counters.
#[derive(Debug, Clone, Default)]
pub struct Progress {
    inner: Arc<[AtomicU64; 4]>,
}

impl Progress {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts stage `stage` of `stages` with `total` units of work.
    pub fn begin_stage(&self, stage: u64, stages: u64, total: u64) {
        let [s, n, d, t] = &*self.inner;
        d.store(0, Ordering::Relaxed);
        t.store(total, Ordering::Relaxed);
        n.store(stages, Ordering::Relaxed);
        s.store(stage, Ordering::Release);
    }

    pub fn advance(&self, units: u64) {
        self.inner[2].fetch_add(units, Ordering::Relaxed);
    }

    /// Completed fraction in `[0, 1]`.
    pub fn fraction(&self) -> f64 {
        let [s, n, d, t] = &*self.inner;
        let stage = s.load(Ordering::Acquire) as f64;
        let stages = n.load(Ordering::Relaxed);
        if stages == 0 {
            return 0.0;
        }
        let stages = stages as f64;
        let (done, total) = (d.load(Ordering::Relaxed), t.load(Ordering::Relaxed));
        let within = if total == 0 { 1.0 } else { (done as f64 / total as f64).min(1.0) };
        ((stage + within) / stages).min(1.0)
    }
}

/// Receives unquantized confidences for one region at a time, in raster
/// order of the region.
pub trait ConfidenceSink {
    fn put(&mut self, region: &Region, confidence: &[f64]) -> Result<()>;
}

impl<F: FnMut(&Region, &[f64]) -> Result<()>> ConfidenceSink for F {
    fn put(&mut self, region: &Region, confidence: &[f64]) -> Result<()> {
        self(region, confidence)
    }
}

/// `⌊100·S⌋`.
pub fn quantize(s: f64) -> u8 {
    (100.0 * s).floor().clamp(0.0, 100.0) as u8
}

/// In-memory percent confidence volume, zero where nothing was classified.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBuffer {
    pub dims: Dims,
    pub data: Vec<u8>,
}

impl ConfidenceBuffer {
    pub fn new(dims: Dims) -> Self {
        ConfidenceBuffer {
            dims,
            data: vec![0; voxel_count(dims)],
        }
    }

    pub fn into_volume(self) -> VoxelVolume {
        VoxelVolume::from_samples(self.dims, Samples::U8(self.data)).expect("length matches dims")
    }
}

impl ConfidenceSink for ConfidenceBuffer {
    fn put(&mut self, region: &Region, confidence: &[f64]) -> Result<()> {
        for (p, &s) in region.positions().zip(confidence) {
            self.data[linear_index(self.dims, p)] = quantize(s);
        }
        Ok(())
    }
}

/// Streams percent values to a raw file; the file starts zeroed.
impl ConfidenceSink for RawWriter {
    fn put(&mut self, region: &Region, confidence: &[f64]) -> Result<()> {
        let q: Vec<f64> = confidence.iter().map(|&s| quantize(s) as f64).collect();
        self.write_region(region, &q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassifyStats {
    /// Voxels whose confidence was evaluated.
    pub classified: u64,
    pub elapsed: Duration,
}

/// Scores raw feature vectors with a calibrated model.
pub(crate) struct Scorer<'a> {
    model: &'a SvmModel,
    extractor: FeatureExtractor,
}

impl<'a> Scorer<'a> {
    pub(crate) fn new(model: &'a SvmModel) -> Result<Self> {
        model.platt.ok_or(Error::Uncalibrated)?;
        let extractor = FeatureExtractor::new(model.config.clone())?;
        if extractor.len() != model.feature_len() {
            return Err(Error::LayoutMismatch {
                expected: model.feature_len(),
                actual: extractor.len(),
            });
        }
        Ok(Scorer { model, extractor })
    }

    fn env_size(&self) -> usize {
        self.extractor.env_size()
    }

    /// Confidences of every position in `item`, whose K-cubes must lie
    /// inside the volume.
    fn score_region<S: VoxelSource + ?Sized>(&self, src: &S, item: &Region) -> Result<Vec<f64>> {
        let k = self.env_size();
        let halo = item.dilate(k / 2, src.dims());
        let mut buf = Vec::with_capacity(halo.len());
        src.read_region(&halo, &mut buf)?;
        let mut fv = Vec::with_capacity(self.extractor.len());
        let mut out = Vec::with_capacity(item.len());
        for p in item.positions() {
            let env = LocalEnvironment::from_buffer(&buf, &halo, p, k).expect("item lies in the interior");
            self.extractor.extract_into(&env, &mut fv);
            let d = self.model.decision_in_place(&mut fv)?;
            out.push(self.model.confidence_of(d)?);
        }
        Ok(out)
    }
}

/// Pieces of `regions` that have full environments, cut at brick
/// boundaries, in deterministic order.
pub fn work_items(dims: Dims, regions: Option<&[Region]>, k: usize, brick: usize) -> Vec<Region> {
    let inner = interior(dims, k);
    let full = [Region::full(dims)];
    let regions = regions.unwrap_or(&full);
    let mut out = Vec::new();
    for r in regions {
        let r = r.intersect(&inner);
        if r.is_empty() {
            continue;
        }
        let lo = r.lo.map(|c| c / brick);
        let hi = r.hi.map(|c| c.div_ceil(brick));
        for bz in lo[2]..hi[2] {
            for by in lo[1]..hi[1] {
                for bx in lo[0]..hi[0] {
                    let b = Region::new(
                        [bx * brick, by * brick, bz * brick],
                        [(bx + 1) * brick, (by + 1) * brick, (bz + 1) * brick],
                    );
                    let piece = r.intersect(&b);
                    if !piece.is_empty() {
                        out.push(piece);
                    }
                }
            }
        }
    }
    out
}

/// Evaluates the model on every position with a full environment inside
/// `regions` (the whole volume when `None`) and feeds the confidences to
/// `sink`. Output is independent of the worker count.
pub fn classify_into<S: VoxelSource + ?Sized>(
    src: &S,
    model: &SvmModel,
    regions: Option<&[Region]>,
    opts: &ClassifyOptions,
    sink: &mut dyn ConfidenceSink,
    progress: Option<&Progress>,
) -> Result<ClassifyStats> {
    let start = Instant::now();
    let scorer = Scorer::new(model)?;
    let pool = opts.pool()?;
    let items = work_items(src.dims(), regions, scorer.env_size(), opts.brick);
    let batch = 4 * opts.workers;
    let mut classified = 0u64;
    for chunk in items.chunks(batch) {
        let results: Vec<Vec<f64>> = pool.install(|| {
            chunk
                .par_iter()
                .map(|item| {
                    let r = scorer.score_region(src, item);
                    if let Some(p) = progress {
                        p.advance(item.len() as u64);
                    }
                    r
                })
                .collect::<Result<_>>()
        })?;
        for (item, conf) in chunk.iter().zip(&results) {
            sink.put(item, conf)?;
            classified += conf.len() as u64;
        }
    }
    Ok(ClassifyStats {
        classified,
        elapsed: start.elapsed(),
    })
}

/// Number of positions [`classify_into`] would evaluate.
pub fn work_size(dims: Dims, regions: Option<&[Region]>, k: usize) -> u64 {
    let inner = interior(dims, k);
    match regions {
        None => inner.len() as u64,
        Some(rs) => rs.iter().map(|r| r.intersect(&inner).len() as u64).sum(),
    }
}

/// Percent confidence volume `⌊100·S⌋`, zero outside `regions` and where no
/// full environment exists.
pub fn classify_volume<S: VoxelSource + ?Sized>(
    src: &S,
    model: &SvmModel,
    regions: Option<&[Region]>,
    opts: &ClassifyOptions,
) -> Result<(VoxelVolume, ClassifyStats)> {
    let mut buf = ConfidenceBuffer::new(src.dims());
    let stats = classify_into(src, model, regions, opts, &mut buf, None)?;
    Ok((buf.into_volume(), stats))
}
