use super::VoxelSource;
use crate::error::{Error, Result};
use crate::geom::{linear_index, Dims, Pos, Region, RegionIter};

/// A K×K×K cube of voxel values around `center`, x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEnvironment {
    pub center: Pos,
    pub size: usize,
    pub values: Vec<f64>,
}

pub(crate) fn check_size(k: usize) -> Result<()> {
    if k < 3 || k % 2 == 0 {
        return Err(Error::InvalidEnvironmentSize(k));
    }
    Ok(())
}

impl LocalEnvironment {
    /// Wraps K³ values; panics if the length does not match.
    pub fn new(center: Pos, size: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), size * size * size, "environment needs K^3 values");
        LocalEnvironment { center, size, values }
    }

    /// Copies the cube out of `buf`, which holds `buf_region` in raster order.
    /// Returns `None` unless the cube lies inside `buf_region`.
    pub fn from_buffer(buf: &[f64], buf_region: &Region, center: Pos, k: usize) -> Option<Self> {
        let h = k / 2;
        let mut lo = [0; 3];
        for a in 0..3 {
            if center[a] < buf_region.lo[a] + h || center[a] + h >= buf_region.hi[a] {
                return None;
            }
            lo[a] = center[a] - h;
        }
        let ext = buf_region.extent();
        let mut values = Vec::with_capacity(k * k * k);
        for z in 0..k {
            for y in 0..k {
                let start = linear_index(
                    ext,
                    [lo[0] - buf_region.lo[0], lo[1] + y - buf_region.lo[1], lo[2] + z - buf_region.lo[2]],
                );
                values.extend_from_slice(&buf[start..start + k]);
            }
        }
        Some(LocalEnvironment { center, size: k, values })
    }

    #[inline]
    pub fn half(&self) -> usize {
        self.size / 2
    }

    /// Value at local coordinates `0..K` per axis.
    #[inline]
    pub fn at(&self, p: [usize; 3]) -> f64 {
        self.values[p[0] + self.size * (p[1] + self.size * p[2])]
    }

    pub fn center_value(&self) -> f64 {
        let h = self.half();
        self.at([h, h, h])
    }
}

pub fn has_full_environment(dims: Dims, center: Pos, k: usize) -> bool {
    let h = k / 2;
    (0..3).all(|a| center[a] >= h && center[a] + h < dims[a])
}

/// Extracts the environment, or `None` if the cube leaves the volume.
pub fn extract_environment<S: VoxelSource + ?Sized>(
    src: &S,
    center: Pos,
    k: usize,
) -> Result<Option<LocalEnvironment>> {
    check_size(k)?;
    let dims = src.dims();
    if !has_full_environment(dims, center, k) {
        return Ok(None);
    }
    let h = k / 2;
    let region = Region::new(
        [center[0] - h, center[1] - h, center[2] - h],
        [center[0] + h + 1, center[1] + h + 1, center[2] + h + 1],
    );
    let mut values = Vec::with_capacity(k * k * k);
    src.read_region(&region, &mut values)?;
    Ok(Some(LocalEnvironment { center, size: k, values }))
}

/// Box of all centers whose K-cube fits, possibly empty.
pub(crate) fn interior(dims: Dims, k: usize) -> Region {
    let h = k / 2;
    let mut lo = [0; 3];
    let mut hi = [0; 3];
    for a in 0..3 {
        lo[a] = h;
        hi[a] = dims[a].saturating_sub(h).max(h);
    }
    Region { lo, hi }
}

/// Positions with a full environment in raster order, optionally
/// restricted to `region`.
pub fn iterate_positions(dims: Dims, region: Option<Region>, k: usize) -> RegionIter {
    let inner = interior(dims, k);
    match region {
        Some(r) => inner.intersect(&r).positions(),
        None => inner.positions(),
    }
}
