use bitvec::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{in_bounds, linear_index, voxel_count, Dims, Pos, Region};
use crate::volume::{Samples, VoxelSource, VoxelVolume};

/// One bit per voxel in raster order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryVolume {
    dims: Dims,
    bits: BitVec,
}

impl BinaryVolume {
    pub fn zeros(dims: Dims) -> Self {
        BinaryVolume {
            dims,
            bits: bitvec![0; voxel_count(dims)],
        }
    }

    pub fn from_bools(dims: Dims, values: &[bool]) -> Result<Self> {
        if values.len() != voxel_count(dims) {
            return Err(Error::InvalidParameter(format!(
                "{} values for dims {dims:?}",
                values.len()
            )));
        }
        Ok(BinaryVolume {
            dims,
            bits: values.iter().copied().collect(),
        })
    }

    /// Nonzero voxels of `src` become ones.
    pub fn from_nonzero<S: VoxelSource + ?Sized>(src: &S) -> Result<Self> {
        let dims = src.dims();
        let mut out = Self::zeros(dims);
        let mut buf = Vec::new();
        let plane = dims[0] * dims[1];
        for z in 0..dims[2] {
            src.read_region(&Region::new([0, 0, z], [dims[0], dims[1], z + 1]), &mut buf)?;
            for (i, &v) in buf.iter().enumerate() {
                out.bits.set(z * plane + i, v != 0.0);
            }
        }
        Ok(out)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, pos: Pos) -> bool {
        in_bounds(self.dims, pos) && self.bits[linear_index(self.dims, pos)]
    }

    pub fn get_index(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, pos: Pos, value: bool) {
        let i = linear_index(self.dims, pos);
        self.bits.set(i, value);
    }

    pub fn set_index(&mut self, i: usize, value: bool) {
        self.bits.set(i, value);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones()
    }

    /// Linear indices of the ones, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter_ones()
    }

    pub fn to_bools(&self) -> Vec<bool> {
        self.bits.iter().map(|b| *b).collect()
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &BinaryVolume) -> bool {
        self.dims == other.dims && self.ones().all(|i| other.bits[i])
    }

    /// u8 volume holding 0 and `on`.
    pub fn to_volume(&self, on: u8) -> VoxelVolume {
        let v: Vec<u8> = self.bits.iter().map(|b| if *b { on } else { 0 }).collect();
        VoxelVolume::from_samples(self.dims, Samples::U8(v)).expect("dims match by construction")
    }
}

/// Voxel is one iff its value is at least `t` percent.
pub fn threshold<S: VoxelSource + ?Sized>(confidence: &S, t: u32) -> Result<BinaryVolume> {
    if t > 100 {
        return Err(Error::InvalidParameter(format!("threshold {t} outside 0..=100")));
    }
    let dims = confidence.dims();
    let mut out = BinaryVolume::zeros(dims);
    let mut buf = Vec::new();
    let plane = dims[0] * dims[1];
    for z in 0..dims[2] {
        confidence.read_region(&Region::new([0, 0, z], [dims[0], dims[1], z + 1]), &mut buf)?;
        for (i, &v) in buf.iter().enumerate() {
            if v >= t as f64 {
                out.bits.set(z * plane + i, true);
            }
        }
    }
    Ok(out)
}

/// Parameters of [`speckle_removal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Speckle {
    /// Odd cube edge K₂.
    pub size: usize,
    /// Minimal number of ones η.
    pub min_count: usize,
    /// Whether the voxel itself counts towards η.
    #[serde(default = "counts_center")]
    pub include_center: bool,
}

fn counts_center() -> bool {
    true
}

impl Speckle {
    pub fn new(size: usize, min_count: usize) -> Self {
        Speckle {
            size,
            min_count,
            include_center: true,
        }
    }
}

/// Clears every one whose K₂-cube holds fewer than η ones. One pass over a
/// snapshot; voxels outside the volume count as zero.
pub fn speckle_removal(b: &BinaryVolume, params: Speckle) -> Result<BinaryVolume> {
    let k = params.size;
    if k == 0 || k % 2 == 0 {
        return Err(Error::InvalidParameter(format!("speckle cube size {k} must be odd")));
    }
    if params.min_count >= k * k * k {
        return Err(Error::InvalidParameter(format!(
            "eta = {} must be below {}",
            params.min_count,
            k * k * k
        )));
    }
    if params.min_count == 0 {
        return Ok(b.clone());
    }
    let [nx, ny, nz] = b.dims;
    // Summed-volume table with a zero border.
    let (sx, sy) = (nx + 1, ny + 1);
    let mut sat = vec![0u32; sx * sy * (nz + 1)];
    let at = |x: usize, y: usize, z: usize| x + sx * (y + sy * z);
    for z in 0..nz {
        for y in 0..ny {
            let mut row = 0u32;
            for x in 0..nx {
                row += b.bits[linear_index(b.dims, [x, y, z])] as u32;
                sat[at(x + 1, y + 1, z + 1)] = row + sat[at(x + 1, y, z + 1)] + sat[at(x + 1, y + 1, z)] - sat[at(x + 1, y, z)];
            }
        }
    }
    let h = k / 2;
    let mut out = b.clone();
    for i in b.ones() {
        let [x, y, z] = crate::geom::position_of(b.dims, i);
        let (x0, y0, z0) = (x.saturating_sub(h), y.saturating_sub(h), z.saturating_sub(h));
        let (x1, y1, z1) = ((x + h + 1).min(nx), (y + h + 1).min(ny), (z + h + 1).min(nz));
        let s = sat[at(x1, y1, z1)] + sat[at(x0, y0, z1)] + sat[at(x0, y1, z0)] + sat[at(x1, y0, z0)]
            - sat[at(x0, y1, z1)]
            - sat[at(x1, y0, z1)]
            - sat[at(x1, y1, z0)]
            - sat[at(x0, y0, z0)];
        let count = s as usize - usize::from(!params.include_center);
        if count < params.min_count {
            out.bits.set(i, false);
        }
    }
    Ok(out)
}
