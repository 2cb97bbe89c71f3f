use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use alseg::postproc::{metrics, threshold, BinaryVolume, MetricsReport, CSV_HEADER};
use alseg::volume::{open_volume, LoadOptions};
use anyhow::{Context, Result};

/// Compares a segmentation with ground truth and writes the report. Nonzero
/// voxels are foreground in both, unless `confidence_threshold` is given, in
/// which case `seg` is a percent confidence volume cut at that value.
pub fn cmd_eval(seg: &Path, gt: &Path, report: &Path, confidence_threshold: Option<u32>) -> Result<MetricsReport> {
    let opts = LoadOptions::default();
    let seg_vol = open_volume(seg, &opts)?;
    let s = match confidence_threshold {
        Some(t) => threshold(&seg_vol, t)?,
        None => BinaryVolume::from_nonzero(&seg_vol)?,
    };
    let g = BinaryVolume::from_nonzero(&open_volume(gt, &opts)?)?;
    let m = metrics(&s, &g)?;
    fs::write(report, m.to_text()).with_context(|| format!("writing {}", report.display()))?;
    Ok(m)
}

/// Appends `scan`'s row to a CSV table, writing the header into a new file.
pub fn append_csv(path: &Path, scan: &str, m: &MetricsReport) -> Result<()> {
    let fresh = !path.exists();
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    if fresh {
        writeln!(f, "{CSV_HEADER}")?;
    }
    writeln!(f, "{}", m.csv_row(scan))?;
    Ok(())
}
