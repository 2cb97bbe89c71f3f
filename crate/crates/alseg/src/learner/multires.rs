use crate::error::{Error, Result};
use crate::geom::{merge_overlapping, Dims, Region};
use crate::postproc::{connected_components, BinaryVolume, Connectivity};
use crate::svm::SvmModel;
use crate::volume::{level_dims, MultiresView, VoxelSource};

use super::classify::{classify_into, work_size, ClassifyOptions, ClassifyStats, ConfidenceSink, Progress};

/// Axis-aligned box in the coordinates of `level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateRegion {
    pub level: usize,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSearch {
    /// Boxes in the coordinates of the next finer level, pairwise disjoint.
    pub regions: Vec<Region>,
    pub classified: u64,
    /// Voxels with confidence above the threshold.
    pub kept: u64,
}

/// Keeps the voxels inside `previous` whose confidence exceeds `rho`, groups
/// them by 26-connectivity and returns the bounding boxes dilated by ⌊K/2⌋,
/// merged where they overlap and scaled to `next_dims`.
pub fn find_candidates<S: VoxelSource + ?Sized>(
    view: &S,
    previous: &[Region],
    model: &SvmModel,
    rho: f64,
    next_dims: Dims,
    opts: &ClassifyOptions,
    progress: Option<&Progress>,
) -> Result<CandidateSearch> {
    let dims = view.dims();
    let mut mask = BinaryVolume::zeros(dims);
    let mut kept = 0u64;
    let mut sink = |r: &Region, conf: &[f64]| -> Result<()> {
        for (p, &s) in r.positions().zip(conf) {
            if s > rho {
                mask.set(p, true);
                kept += 1;
            }
        }
        Ok(())
    };
    let stats = classify_into(view, model, Some(previous), opts, &mut sink, progress)?;
    if kept == 0 {
        return Ok(CandidateSearch {
            regions: Vec::new(),
            classified: stats.classified,
            kept,
        });
    }
    let h = model.config.env_size / 2;
    let labels = connected_components(&mask, Connectivity::TwentySix);
    let boxes = merge_overlapping(labels.bounding_boxes().iter().map(|b| b.dilate(h, dims)).collect());
    let regions = merge_overlapping(boxes.iter().map(|b| b.refine(next_dims)).collect());
    Ok(CandidateSearch {
        regions,
        classified: stats.classified,
        kept,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultiresStats {
    /// Voxels classified on each level, index `ℓ − 1`.
    pub classified: Vec<u64>,
    /// Boxes searched on levels `2..=ℓ_max`.
    pub candidates: Vec<CandidateRegion>,
    /// Statistics of the finest pass.
    pub finest: ClassifyStats,
}

impl MultiresStats {
    pub fn finest_classified(&self) -> u64 {
        self.finest.classified
    }

    pub fn candidate_voxels(&self, level: usize) -> u64 {
        self.candidates
            .iter()
            .filter(|c| c.level == level)
            .map(|c| c.region.len() as u64)
            .sum()
    }
}

/// Coarse-to-fine segmentation with `models.len()` levels. A coarse level
/// without model or threshold passes its search regions on unchanged.
pub fn multires_segment<S: VoxelSource + ?Sized>(
    src: &S,
    models: &[Option<&SvmModel>],
    thresholds: &[Option<f64>],
    opts: &ClassifyOptions,
    sink: &mut dyn ConfidenceSink,
    progress: Option<&Progress>,
) -> Result<MultiresStats> {
    let levels = models.len();
    if levels == 0 || thresholds.len() != levels {
        return Err(Error::InvalidParameter(format!(
            "{levels} models and {} thresholds",
            thresholds.len()
        )));
    }
    let finest = models[levels - 1].ok_or(Error::Untrained(levels))?;
    let dims = src.dims();
    let mut stats = MultiresStats {
        classified: vec![0; levels],
        ..Default::default()
    };
    let mut regions = vec![Region::full(level_dims(dims, 1, levels)?)];
    let stages = levels as u64;
    for level in 1..levels {
        let view = MultiresView::new(src, level, levels)?;
        let next_dims = level_dims(dims, level + 1, levels)?;
        regions = match (models[level - 1], thresholds[level - 1]) {
            (Some(m), Some(rho)) => {
                if let Some(p) = progress {
                    p.begin_stage(level as u64 - 1, stages, work_size(view.dims(), Some(&regions), m.config.env_size));
                }
                let found = find_candidates(&view, &regions, m, rho, next_dims, opts, progress)?;
                stats.classified[level - 1] = found.classified;
                found.regions
            }
            _ => merge_overlapping(regions.iter().map(|r| r.refine(next_dims)).collect()),
        };
        stats.candidates.extend(regions.iter().map(|&region| CandidateRegion { level: level + 1, region }));
        if regions.is_empty() {
            break;
        }
    }
    let k = finest.config.env_size;
    if let Some(p) = progress {
        p.begin_stage(stages - 1, stages, work_size(dims, Some(&regions), k));
    }
    let finest_stats = if regions.is_empty() {
        ClassifyStats::default()
    } else if levels == 1 {
        classify_into(src, finest, None, opts, sink, progress)?
    } else {
        classify_into(src, finest, Some(&regions), opts, sink, progress)?
    };
    stats.classified[levels - 1] = finest_stats.classified;
    stats.finest = finest_stats;
    Ok(stats)
}
