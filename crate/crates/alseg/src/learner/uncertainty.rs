use crate::error::Result;
use crate::geom::Region;
use crate::volume::{Samples, VoxelSource, VoxelVolume};

/// Largest distance from ½ fed into the tangent.
pub const CLAMP: f64 = 0.5 - 1e-9;

/// `exp(−δ·tan(π·|S − ½|))`, with `|S − ½|` clamped below ½.
pub fn uncertainty(s: f64, delta: f64) -> f64 {
    let t = (s - 0.5).abs().min(CLAMP);
    if t == 0.0 || delta == 0.0 {
        return 1.0;
    }
    (-delta * (std::f64::consts::PI * t).tan()).exp()
}

/// Voxelwise uncertainty of a percent confidence volume, as f32.
pub fn uncertainty_volume<S: VoxelSource + ?Sized>(confidence: &S, delta: f64) -> Result<VoxelVolume> {
    let dims = confidence.dims();
    // Only 101 distinct inputs.
    let table: Vec<f32> = (0..=100).map(|c| uncertainty(c as f64 / 100.0, delta) as f32).collect();
    let mut out = Vec::with_capacity(crate::geom::voxel_count(dims));
    let mut buf = Vec::new();
    for z in 0..dims[2] {
        confidence.read_region(&Region::new([0, 0, z], [dims[0], dims[1], z + 1]), &mut buf)?;
        out.extend(buf.iter().map(|&c| {
            let c = c.clamp(0.0, 100.0);
            if c.fract() == 0.0 {
                table[c as usize]
            } else {
                uncertainty(c / 100.0, delta) as f32
            }
        }));
    }
    VoxelVolume::from_samples(dims, Samples::F32(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_matches_direct_evaluation() {
        let v = VoxelVolume::from_samples([101, 1, 1], Samples::U8((0..=100).collect())).unwrap();
        let u = uncertainty_volume(&v, 2.5).unwrap();
        for c in 0..=100usize {
            assert_eq!(u.value([c, 0, 0]).unwrap(), uncertainty(c as f64 / 100.0, 2.5) as f32 as f64);
        }
    }
}
