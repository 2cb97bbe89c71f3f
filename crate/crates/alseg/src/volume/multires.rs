//! Coarse resolution levels computed on the fly.
//!
//! Level `max_level` is the source itself; each step down halves every axis
//! (rounding up). A coarse voxel is the mean of the fine voxels it covers;
//! cells at the upper boundary average only the positions that exist.

use super::VoxelSource;
use crate::error::{Error, Result};
use crate::geom::{in_bounds, linear_index, Dims, Pos, Region};

fn check_level(level: usize, max_level: usize) -> Result<usize> {
    if level == 0 || level > max_level {
        return Err(Error::InvalidLevel { level, max: max_level });
    }
    Ok(max_level - level)
}

/// Dims of `level` for a finest level of dims `dims`.
pub fn level_dims(dims: Dims, level: usize, max_level: usize) -> Result<Dims> {
    let s = check_level(level, max_level)?;
    let f = 1usize << s;
    Ok([dims[0].div_ceil(f), dims[1].div_ceil(f), dims[2].div_ceil(f)])
}

/// Fine positions covered by coarse position `alpha`, clipped to `dims`.
pub fn covered_set(alpha: Pos, level: usize, max_level: usize, dims: Dims) -> Result<Region> {
    let s = check_level(level, max_level)?;
    let f = 1usize << s;
    let mut lo = [0; 3];
    let mut hi = [0; 3];
    for a in 0..3 {
        lo[a] = (alpha[a] * f).min(dims[a]);
        hi[a] = ((alpha[a] + 1) * f).min(dims[a]);
    }
    Ok(Region { lo, hi })
}

/// Mean of the covered fine voxels of `alpha` on `level`.
pub fn downsample_value<S: VoxelSource + ?Sized>(src: &S, alpha: Pos, level: usize, max_level: usize) -> Result<f64> {
    MultiresView::new(src, level, max_level)?.value(alpha)
}

/// Read-only view of a source volume at a coarser level.
pub struct MultiresView<'a, S: VoxelSource + ?Sized> {
    source: &'a S,
    level: usize,
    max_level: usize,
    shift: usize,
    dims: Dims,
}

impl<'a, S: VoxelSource + ?Sized> MultiresView<'a, S> {
    pub fn new(source: &'a S, level: usize, max_level: usize) -> Result<Self> {
        let shift = check_level(level, max_level)?;
        let dims = level_dims(source.dims(), level, max_level)?;
        Ok(MultiresView {
            source,
            level,
            max_level,
            shift,
            dims,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// Edge length of the covered block of an interior cell.
    pub fn factor(&self) -> usize {
        1 << self.shift
    }

    pub fn source(&self) -> &'a S {
        self.source
    }
}

impl<S: VoxelSource + ?Sized> VoxelSource for MultiresView<'_, S> {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn value(&self, pos: Pos) -> Result<f64> {
        if !in_bounds(self.dims, pos) {
            return Err(Error::OutOfBounds { pos, dims: self.dims });
        }
        if self.shift == 0 {
            return self.source.value(pos);
        }
        let cover = covered_set(pos, self.level, self.max_level, self.source.dims())?;
        let mut buf = Vec::new();
        self.source.read_region(&cover, &mut buf)?;
        Ok(buf.iter().sum::<f64>() / buf.len() as f64)
    }

    fn read_region(&self, region: &Region, out: &mut Vec<f64>) -> Result<()> {
        super::check_region(self.dims, region)?;
        if self.shift == 0 {
            return self.source.read_region(region, out);
        }
        out.clear();
        if region.is_empty() {
            return Ok(());
        }
        let fine_dims = self.source.dims();
        let f = self.factor();
        let mut fine_lo = [0; 3];
        let mut fine_hi = [0; 3];
        for a in 0..3 {
            fine_lo[a] = region.lo[a] * f;
            fine_hi[a] = (region.hi[a] * f).min(fine_dims[a]);
        }
        let fine = Region::new(fine_lo, fine_hi);
        let mut buf = Vec::new();
        self.source.read_region(&fine, &mut buf)?;
        let ext = region.extent();
        let fext = fine.extent();
        let mut sums = vec![0.0; region.len()];
        let mut counts = vec![0u32; region.len()];
        for z in 0..fext[2] {
            for y in 0..fext[1] {
                let row = linear_index(fext, [0, y, z]);
                let cy = y / f;
                let cz = z / f;
                for x in 0..fext[0] {
                    let c = linear_index(ext, [x / f, cy, cz]);
                    sums[c] += buf[row + x];
                    counts[c] += 1;
                }
            }
        }
        out.extend(sums.iter().zip(&counts).map(|(s, &n)| s / n as f64));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Dtype, Samples, VoxelVolume};

    #[test]
    fn identity_level_is_singleton() {
        let r = covered_set([3, 4, 5], 2, 2, [10, 10, 10]).unwrap();
        assert_eq!(r.positions().collect::<Vec<_>>(), vec![[3, 4, 5]]);
    }

    #[test]
    fn one_step_covers_eight() {
        let r = covered_set([0, 0, 0], 1, 2, [100, 100, 100]).unwrap();
        assert_eq!(r.len(), 8);
        assert!(r.positions().all(|p| p.iter().all(|&c| c <= 1)));
    }

    #[test]
    fn clipped_cell_brute_force() {
        let dims = [6, 6, 6];
        let r = covered_set([1, 0, 0], 1, 3, dims).unwrap();
        let mut brute = Vec::new();
        for kz in 0..4 {
            for ky in 0..4 {
                for kx in 0..4 {
                    let b = [4 + kx, ky, kz];
                    if in_bounds(dims, b) {
                        brute.push(b);
                    }
                }
            }
        }
        let got: Vec<_> = r.positions().collect();
        assert_eq!(got.len(), 32);
        brute.sort_by_key(|p| linear_index(dims, *p));
        assert_eq!(got, brute);
    }

    #[test]
    fn invalid_level() {
        assert!(matches!(covered_set([0; 3], 0, 2, [4; 3]), Err(Error::InvalidLevel { .. })));
        assert!(matches!(covered_set([0; 3], 3, 2, [4; 3]), Err(Error::InvalidLevel { .. })));
    }

    #[test]
    fn mean_of_0_to_7() {
        let v = VoxelVolume::from_samples([2, 2, 2], Samples::U8((0..8).collect())).unwrap();
        assert_eq!(downsample_value(&v, [0, 0, 0], 1, 2).unwrap(), 3.5);
    }

    #[test]
    fn region_read_matches_pointwise() {
        let dims = [9, 7, 5];
        let vals: Vec<f64> = (0..9 * 7 * 5).map(|i| ((i * 37) % 101) as f64).collect();
        let v = VoxelVolume::from_samples(dims, Samples::from_f64(Dtype::U8, &vals)).unwrap();
        let view = MultiresView::new(&v, 1, 3).unwrap();
        assert_eq!(view.dims(), [3, 2, 2]);
        let r = Region::full(view.dims());
        let mut out = Vec::new();
        view.read_region(&r, &mut out).unwrap();
        for (i, p) in r.positions().enumerate() {
            assert_eq!(out[i], view.value(p).unwrap());
        }
        assert!(view.value([3, 0, 0]).is_err());
    }
}
