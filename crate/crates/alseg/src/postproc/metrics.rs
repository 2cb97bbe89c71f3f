use serde::{Deserialize, Serialize};

use super::BinaryVolume;
use crate::error::{Error, Result};

/// Voxelwise confusion counts and derived scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

pub const CSV_HEADER: &str = "scan,iou,precision,recall,f1";

/// `num / den`, with `empty` when the denominator vanishes.
fn ratio(num: u64, den: u64, empty: f64) -> f64 {
    if den == 0 {
        empty
    } else {
        num as f64 / den as f64
    }
}

impl MetricsReport {
    /// Both masks empty scores 1 everywhere; an empty side otherwise scores 0.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let both_empty = tp + fp + fn_ == 0;
        let e = if both_empty { 1.0 } else { 0.0 };
        let precision = ratio(tp, tp + fp, e);
        let recall = ratio(tp, tp + fn_, e);
        let iou = ratio(tp, tp + fp + fn_, e);
        let f1 = ratio(2 * tp, 2 * tp + fp + fn_, e);
        MetricsReport {
            iou,
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
            tn,
        }
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("plain numbers serialize")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("metrics report: {e}")))
    }

    pub fn csv_row(&self, scan: &str) -> String {
        format!("{scan},{},{},{},{}", self.iou, self.precision, self.recall, self.f1)
    }

    /// Parses `scan,iou,precision,recall,f1`.
    pub fn parse_csv_row(line: &str) -> Result<(String, [f64; 4])> {
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 5 {
            return Err(Error::InvalidParameter(format!("expected 5 fields in `{line}`")));
        }
        let mut v = [0.0; 4];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| Error::InvalidParameter(format!("bad number `{f}`")))?;
        }
        Ok((fields[0].to_string(), v))
    }
}

pub fn metrics(seg: &BinaryVolume, gt: &BinaryVolume) -> Result<MetricsReport> {
    if seg.dims() != gt.dims() {
        return Err(Error::DimsMismatch(seg.dims(), gt.dims()));
    }
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for i in 0..seg.len() {
        match (seg.get_index(i), gt.get_index(i)) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let tn = seg.len() as u64 - tp - fp - fn_;
    Ok(MetricsReport::from_counts(tp, fp, fn_, tn))
}
