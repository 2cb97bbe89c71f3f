use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use alseg::learner::{read_seed_file, Session};
use alseg::postproc::{metrics, BinaryVolume, MetricsReport, CSV_HEADER};
use alseg::volume::{make_phantom, open_volume, save_volume, VoxelSource, VoxelVolume};
use anyhow::{Context, Result};
use serde::Serialize;

use crate::manifest::RunManifest;

/// Wall time per phase of one iteration, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PhaseTimes {
    pub train: f64,
    pub classify: f64,
    pub postproc: f64,
    pub write: f64,
}

impl PhaseTimes {
    pub fn sum(&self) -> f64 {
        self.train + self.classify + self.postproc + self.write
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub seeds: usize,
    pub mean_uncertainty: f64,
    /// Voxels classified on the finest level.
    pub classified: u64,
    pub foreground: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    pub timing: PhaseTimes,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub load: f64,
    pub total: f64,
    pub iterations: Vec<PhaseTimes>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out: PathBuf,
    pub records: Vec<IterationRecord>,
    pub timing: TimingReport,
}

impl RunSummary {
    /// IoU of the postprocessed segmentation per iteration, if ground truth
    /// was given.
    pub fn ious(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.metrics.map(|m| m.iou)).collect()
    }
}

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.toml";
pub const ITERATIONS_FILE: &str = "iterations.toml";
pub const CHECKPOINT_DIR: &str = "checkpoint";

pub fn iteration_dir(out: &Path, iteration: usize) -> PathBuf {
    out.join(format!("iter_{iteration}"))
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn mean(v: &VoxelVolume) -> Result<f64> {
    let values = v.to_f64()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

fn partial_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    out.with_file_name(name)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_inputs(m: &RunManifest) -> Result<(VoxelVolume, Option<BinaryVolume>)> {
    let opts = m.load.options();
    let truth = |vol: Option<VoxelVolume>| -> Result<Option<BinaryVolume>> {
        match &m.ground_truth {
            Some(p) => Ok(Some(BinaryVolume::from_nonzero(&open_volume(p, &opts)?)?)),
            None => vol.map(|v| BinaryVolume::from_nonzero(&v)).transpose().map_err(Into::into),
        }
    };
    match (&m.volume, &m.phantom) {
        (Some(p), _) => Ok((open_volume(p, &opts)?, truth(None)?)),
        (None, Some(spec)) => {
            let ph = make_phantom(spec)?;
            let gt = truth(Some(ph.labels))?;
            Ok((ph.volume, gt))
        }
        (None, None) => unreachable!("validated manifest has an input"),
    }
}

/// Runs the manifest's iterations, one seed file each, and writes per
/// iteration the confidence, uncertainty and postprocessed segmentation,
/// plus metrics, timings, the resolved manifest and a final checkpoint.
///
/// Outputs go to `<out>.partial` and replace `out` only on success.
pub fn cmd_segment(m: &RunManifest) -> Result<RunSummary> {
    m.validate()?;
    let start = Instant::now();
    let tmp = partial_path(&m.out);
    if tmp.exists() {
        fs::remove_dir_all(&tmp).with_context(|| format!("removing {}", tmp.display()))?;
    }
    fs::create_dir_all(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    write_text(&tmp.join(MANIFEST_FILE), &m.to_text())?;

    let t = Instant::now();
    let (volume, truth) = load_inputs(m)?;
    if let Some(gt) = &truth {
        if gt.dims() != volume.dims() {
            anyhow::bail!("ground truth dims {:?} differ from volume dims {:?}", gt.dims(), volume.dims());
        }
    }
    let load = secs(t.elapsed());
    let mut session = Session::new(Arc::new(volume), m.session_params())?;

    let mut records = Vec::new();
    let mut csv = format!("{CSV_HEADER}\n");
    for (i, seedfile) in m.seedfiles.iter().enumerate() {
        let iteration = i + 1;
        let seeds = read_seed_file(seedfile)?;
        let mut timing = PhaseTimes::default();

        let t = Instant::now();
        session
            .train_iteration(&seeds)
            .with_context(|| format!("training iteration {iteration} on {}", seedfile.display()))?;
        timing.train = secs(t.elapsed());

        let t = Instant::now();
        let out = session.segment(None)?;
        let classified = out.stats.finest_classified();
        session.install(out);
        timing.classify = secs(t.elapsed());

        let confidence = session.confidence().expect("installed").clone();
        let uncertainty = session.uncertainty().expect("installed").clone();
        let t = Instant::now();
        let seg = m.postproc.apply(&*confidence)?;
        let report = truth.as_ref().map(|gt| metrics(&seg, gt)).transpose()?;
        timing.postproc = secs(t.elapsed());

        let t = Instant::now();
        let dir = iteration_dir(&tmp, iteration);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        save_volume(&dir.join("confidence.raw"), &confidence)?;
        save_volume(&dir.join("uncertainty.raw"), &uncertainty)?;
        save_volume(&dir.join("segmentation.raw"), &seg.to_volume(1))?;
        if let Some(r) = &report {
            write_text(&dir.join("metrics.toml"), &r.to_text())?;
            csv.push_str(&r.csv_row(&format!("iter_{iteration}")));
            csv.push('\n');
        }
        timing.write = secs(t.elapsed());

        records.push(IterationRecord {
            iteration,
            seeds: session.seeds().len(),
            mean_uncertainty: mean(&uncertainty)?,
            classified,
            foreground: seg.count_ones(),
            metrics: report,
            timing,
        });
    }
    session.save_checkpoint(&tmp.join(CHECKPOINT_DIR))?;
    if truth.is_some() {
        write_text(&tmp.join(METRICS_FILE), &csv)?;
    }
    #[derive(Serialize)]
    struct Iterations<'a> {
        iteration: &'a [IterationRecord],
    }
    write_text(
        &tmp.join(ITERATIONS_FILE),
        &toml::to_string(&Iterations { iteration: &records }).context("serializing iterations")?,
    )?;

    let timing = TimingReport {
        load,
        total: secs(start.elapsed()),
        iterations: records.iter().map(|r| r.timing).collect(),
    };
    write_text(&tmp.join(TIMING_FILE), &toml::to_string(&timing).context("serializing timings")?)?;

    if m.out.exists() {
        fs::remove_dir_all(&m.out).with_context(|| format!("removing {}", m.out.display()))?;
    }
    fs::rename(&tmp, &m.out).with_context(|| format!("renaming {} into place", tmp.display()))?;
    Ok(RunSummary {
        out: m.out.clone(),
        records,
        timing,
    })
}
