use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use alseg::geom::{voxel_count, Dims};
use alseg::learner::{classify_volume, ClassifyOptions, Session, SessionParams};
use alseg::postproc::BinaryVolume;
use alseg::scenario::{label_from_truth, plate_phantom, PLATE_EDGE, PLATE_SCHEDULE};
use alseg::svm::SvmModel;
use alseg::volume::{make_phantom, open_volume, save_volume, LoadOptions, PhantomSpec, Primitive, VoxelVolume};
use anyhow::{bail, Context, Result};

#[derive(Debug, Clone)]
pub struct BenchOptions {
    /// Timed runs per size; the median is reported.
    pub repeat: usize,
    pub workers: usize,
    /// When set, volumes are written here and classified file-backed.
    pub scratch: Option<PathBuf>,
    pub load: LoadOptions,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            repeat: 3,
            workers: 1,
            scratch: None,
            load: LoadOptions::file_backed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub dims: Dims,
    pub voxels: u64,
    /// Median classification wall time.
    pub seconds: f64,
    pub runs: Vec<f64>,
    /// Voxels relative to the first row.
    pub voxel_ratio: f64,
    /// Time relative to the first row.
    pub ratio: f64,
}

pub const BENCH_HEADER: &str = "size,voxels,seconds,voxel_ratio,ratio";

impl BenchRow {
    pub fn csv_row(&self) -> String {
        let [x, y, z] = self.dims;
        format!("{x}x{y}x{z},{},{},{},{}", self.voxels, self.seconds, self.voxel_ratio, self.ratio)
    }
}

pub fn table_csv(rows: &[BenchRow]) -> String {
    let mut s = format!("{BENCH_HEADER}\n");
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// `N` for a cube or `XxYxZ`.
pub fn parse_size(s: &str) -> Result<Dims> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse::<usize>().with_context(|| format!("bad size `{s}`")))
        .collect::<Result<_>>()?;
    let dims = match parts[..] {
        [n] => [n; 3],
        [x, y, z] => [x, y, z],
        _ => bail!("size `{s}` is neither N nor XxYxZ"),
    };
    if dims.contains(&0) {
        bail!("size `{s}` has a zero extent");
    }
    Ok(dims)
}

/// The plate phantom stretched to `dims`.
pub fn bench_phantom(dims: Dims) -> PhantomSpec {
    let mut spec = plate_phantom(1);
    let s = dims.map(|d| d as f64 / PLATE_EDGE as f64);
    spec.dims = dims;
    for p in &mut spec.primitives {
        if let Primitive::Box { min, max, .. } = p {
            for a in 0..3 {
                min[a] *= s[a];
                max[a] *= s[a];
            }
        }
    }
    spec
}

/// Model trained on all four rounds of the plate schedule.
pub fn reference_model(seed: u64) -> Result<SvmModel> {
    let spec = plate_phantom(seed);
    let ph = make_phantom(&spec)?;
    let truth = BinaryVolume::from_bools(spec.dims, &ph.foreground())?;
    let seeds: Vec<_> = PLATE_SCHEDULE.iter().flat_map(|r| label_from_truth(r, &truth)).collect();
    let mut session = Session::new(Arc::new(ph.volume), SessionParams::default())?;
    session.train_iteration(&seeds)?;
    Ok(session.finest_model().expect("trained").clone())
}

fn bench_volume(dims: Dims, opts: &BenchOptions) -> Result<VoxelVolume> {
    let ph = make_phantom(&bench_phantom(dims))?;
    match &opts.scratch {
        None => Ok(ph.volume),
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let [x, y, z] = dims;
            let path = dir.join(format!("bench_{x}x{y}x{z}.raw"));
            save_volume(&path, &ph.volume)?;
            drop(ph);
            Ok(open_volume(&path, &opts.load)?)
        }
    }
}

/// Times one full classification of `vol`.
pub fn time_classification(vol: &VoxelVolume, model: &SvmModel, workers: usize) -> Result<f64> {
    let copts = ClassifyOptions {
        workers,
        ..Default::default()
    };
    let t = Instant::now();
    classify_volume(vol, model, None, &copts)?;
    Ok(t.elapsed().as_secs_f64())
}

/// Median classification time per size with a fixed model.
pub fn cmd_bench(sizes: &[Dims], model: &SvmModel, opts: &BenchOptions) -> Result<Vec<BenchRow>> {
    if opts.repeat == 0 {
        bail!("repeat must be positive");
    }
    let mut rows: Vec<BenchRow> = Vec::new();
    for &dims in sizes {
        let vol = bench_volume(dims, opts)?;
        let runs = (0..opts.repeat)
            .map(|_| time_classification(&vol, model, opts.workers))
            .collect::<Result<Vec<_>>>()?;
        let mut sorted = runs.clone();
        sorted.sort_by(f64::total_cmp);
        let seconds = sorted[sorted.len() / 2];
        let voxels = voxel_count(dims) as u64;
        let (v0, t0) = rows.first().map_or((voxels, seconds), |r| (r.voxels, r.seconds));
        rows.push(BenchRow {
            dims,
            voxels,
            seconds,
            runs,
            voxel_ratio: voxels as f64 / v0 as f64,
            ratio: seconds / t0,
        });
    }
    Ok(rows)
}

/// Writes the table through a temporary name.
pub fn write_table(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, table_csv(rows)).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {}", tmp.display()))?;
    Ok(())
}
