use crate::error::{Error, Result};

/// Balanced misclassification of threshold `rho`: the fraction of positives
/// with `S ≤ ρ` plus the fraction of negatives with `S ≥ ρ`.
pub fn threshold_error(positives: &[f64], negatives: &[f64], rho: f64) -> f64 {
    let missed = positives.iter().filter(|&&s| s <= rho).count();
    let false_alarms = negatives.iter().filter(|&&s| s >= rho).count();
    missed as f64 / positives.len() as f64 + false_alarms as f64 / negatives.len() as f64
}

/// Candidate thresholds: 0, 1 and the midpoints of consecutive distinct
/// confidences, ascending.
pub fn threshold_candidates(positives: &[f64], negatives: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = positives.iter().chain(negatives).copied().collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let mut out = vec![0.0];
    out.extend(v.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.push(1.0);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Smallest minimizer `ρ` of [`threshold_error`] and its error.
pub fn confidence_threshold(positives: &[f64], negatives: &[f64]) -> Result<(f64, f64)> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::SingleClass {
            positives: positives.len(),
            negatives: negatives.len(),
        });
    }
    if let Some(s) = positives.iter().chain(negatives).find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::InvalidParameter(format!("confidence {s} outside [0, 1]")));
    }
    let mut best = (f64::NAN, f64::INFINITY);
    for rho in threshold_candidates(positives, negatives) {
        let e = threshold_error(positives, negatives, rho);
        if e < best.1 {
            best = (rho, e);
        }
    }
    Ok(best)
}
