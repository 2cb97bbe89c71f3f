//! Dense 3D grayscale volumes.
//!
//! A [`VoxelVolume`] is either held in memory or streamed from a raw file
//! through a block cache. Both backings decode to the same `f64` values, so
//! everything downstream only sees the [`VoxelSource`] trait. Coarser
//! resolution levels are computed on demand by [`MultiresView`] and never
//! written to disk.

mod cache;
pub(crate) mod env;
mod multires;
mod phantom;
mod raw;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{in_bounds, linear_index, voxel_count, Dims, Pos, Region};

pub use cache::DEFAULT_BLOCK_SIZE;
pub use env::{extract_environment, has_full_environment, iterate_positions, LocalEnvironment};
pub use multires::{covered_set, downsample_value, level_dims, MultiresView};
pub use phantom::{make_phantom, Phantom, PhantomSpec, Primitive};
pub use raw::{descriptor_path, load_volume, open_volume, save_volume, LoadOptions, RawWriter};

use cache::BlockStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dtype {
    U8,
    U16,
    F32,
}

impl Dtype {
    pub fn bytes(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 => 2,
            Dtype::F32 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::U8 => "u8",
            Dtype::U16 => "u16",
            Dtype::F32 => "f32",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "u8" => Ok(Dtype::U8),
            "u16" => Ok(Dtype::U16),
            "f32" => Ok(Dtype::F32),
            other => Err(Error::UnknownDtype(other.to_string())),
        }
    }

    /// Largest representable value, used to clamp synthetic data.
    pub fn max_value(self) -> f64 {
        match self {
            Dtype::U8 => u8::MAX as f64,
            Dtype::U16 => u16::MAX as f64,
            Dtype::F32 => f32::MAX as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endianness {
    Little,
    Big,
}

/// Sidecar descriptor of a raw volume file.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeMeta {
    pub dims: Dims,
    pub dtype: Dtype,
    pub endianness: Endianness,
    pub spacing: [f64; 3],
}

impl VolumeMeta {
    pub fn new(dims: Dims, dtype: Dtype) -> Self {
        VolumeMeta {
            dims,
            dtype,
            endianness: Endianness::Little,
            spacing: [1.0; 3],
        }
    }

    pub fn byte_len(&self) -> u64 {
        voxel_count(self.dims) as u64 * self.dtype.bytes() as u64
    }

    pub fn to_text(&self) -> String {
        let doc = MetaDoc {
            dims: self.dims,
            dtype: self.dtype.name().to_string(),
            endianness: self.endianness,
            spacing: self.spacing,
        };
        toml::to_string(&doc).expect("descriptor serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let doc: MetaDoc = toml::from_str(text).map_err(|e| Error::Descriptor(e.to_string()))?;
        if doc.dims.iter().any(|&d| d == 0) {
            return Err(Error::Descriptor("dims must be positive".into()));
        }
        if doc.spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Descriptor("spacing must be positive".into()));
        }
        Ok(VolumeMeta {
            dims: doc.dims,
            dtype: Dtype::parse(&doc.dtype)?,
            endianness: doc.endianness,
            spacing: doc.spacing,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct MetaDoc {
    dims: Dims,
    dtype: String,
    endianness: Endianness,
    #[serde(default = "unit_spacing")]
    spacing: [f64; 3],
}

fn unit_spacing() -> [f64; 3] {
    [1.0; 3]
}

/// Typed in-memory voxel buffer in raster order.
#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    U8(Vec<u8>),
    U16(Vec<u16>),
    F32(Vec<f32>),
}

impl Samples {
    pub fn dtype(&self) -> Dtype {
        match self {
            Samples::U8(_) => Dtype::U8,
            Samples::U16(_) => Dtype::U16,
            Samples::F32(_) => Dtype::F32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Samples::U8(v) => v.len(),
            Samples::U16(v) => v.len(),
            Samples::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        match self {
            Samples::U8(v) => v[i] as f64,
            Samples::U16(v) => v[i] as f64,
            Samples::F32(v) => v[i] as f64,
        }
    }

    pub fn zeros(dtype: Dtype, len: usize) -> Self {
        match dtype {
            Dtype::U8 => Samples::U8(vec![0; len]),
            Dtype::U16 => Samples::U16(vec![0; len]),
            Dtype::F32 => Samples::F32(vec![0.0; len]),
        }
    }

    /// Converts reals to `dtype`; integer types round and saturate.
    pub fn from_f64(dtype: Dtype, values: &[f64]) -> Self {
        match dtype {
            Dtype::U8 => Samples::U8(values.iter().map(|&v| v.round() as u8).collect()),
            Dtype::U16 => Samples::U16(values.iter().map(|&v| v.round() as u16).collect()),
            Dtype::F32 => Samples::F32(values.iter().map(|&v| v as f32).collect()),
        }
    }

    pub fn set(&mut self, i: usize, value: f64) {
        match self {
            Samples::U8(v) => v[i] = value.round() as u8,
            Samples::U16(v) => v[i] = value.round() as u16,
            Samples::F32(v) => v[i] = value as f32,
        }
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        match self {
            Samples::U8(v) => v.clone(),
            Samples::U16(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Samples::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }

    pub(crate) fn decode(dtype: Dtype, endianness: Endianness, bytes: &[u8]) -> Self {
        match dtype {
            Dtype::U8 => Samples::U8(bytes.to_vec()),
            Dtype::U16 => Samples::U16(
                bytes
                    .chunks_exact(2)
                    .map(|c| {
                        let b = [c[0], c[1]];
                        match endianness {
                            Endianness::Little => u16::from_le_bytes(b),
                            Endianness::Big => u16::from_be_bytes(b),
                        }
                    })
                    .collect(),
            ),
            Dtype::F32 => Samples::F32(
                bytes
                    .chunks_exact(4)
                    .map(|c| {
                        let b = [c[0], c[1], c[2], c[3]];
                        match endianness {
                            Endianness::Little => f32::from_le_bytes(b),
                            Endianness::Big => f32::from_be_bytes(b),
                        }
                    })
                    .collect(),
            ),
        }
    }

    /// Index of the first voxel that is negative or not finite.
    pub(crate) fn first_invalid(&self) -> Option<usize> {
        match self {
            Samples::F32(v) => v.iter().position(|x| !(x.is_finite() && *x >= 0.0)),
            _ => None,
        }
    }
}

/// Read access shared by stored volumes and on-the-fly coarse views.
pub trait VoxelSource: Send + Sync {
    fn dims(&self) -> Dims;

    fn value(&self, pos: Pos) -> Result<f64>;

    /// Replaces `out` with the region's values in raster order. The region
    /// must lie inside the volume.
    fn read_region(&self, region: &Region, out: &mut Vec<f64>) -> Result<()>;
}

pub(crate) fn check_region(dims: Dims, region: &Region) -> Result<()> {
    if region.is_empty() {
        return Ok(());
    }
    let last = [region.hi[0] - 1, region.hi[1] - 1, region.hi[2] - 1];
    if !in_bounds(dims, last) {
        return Err(Error::OutOfBounds { pos: last, dims });
    }
    Ok(())
}

enum Backing {
    Memory(Samples),
    File(BlockStore),
}

pub struct VoxelVolume {
    meta: VolumeMeta,
    backing: Backing,
}

impl std::fmt::Debug for VoxelVolume {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VoxelVolume")
            .field("meta", &self.meta)
            .field("file_backed", &self.is_file_backed())
            .finish()
    }
}

impl VoxelVolume {
    /// Wraps an in-memory buffer. Fails if the length does not match `dims`
    /// or a float voxel is negative or not finite.
    pub fn from_samples(dims: Dims, samples: Samples) -> Result<Self> {
        let expected = voxel_count(dims);
        if samples.len() != expected || expected == 0 {
            return Err(Error::SizeMismatch {
                path: "<memory>".into(),
                expected: expected as u64,
                actual: samples.len() as u64,
            });
        }
        if let Some(i) = samples.first_invalid() {
            return Err(Error::InvalidVoxel {
                pos: crate::geom::position_of(dims, i),
                value: samples.get(i),
            });
        }
        Ok(VoxelVolume {
            meta: VolumeMeta::new(dims, samples.dtype()),
            backing: Backing::Memory(samples),
        })
    }

    pub fn constant(dims: Dims, dtype: Dtype, value: f64) -> Result<Self> {
        let n = voxel_count(dims);
        Self::from_samples(dims, Samples::from_f64(dtype, &vec![value; n]))
    }

    pub(crate) fn from_store(meta: VolumeMeta, store: BlockStore) -> Self {
        VoxelVolume {
            meta,
            backing: Backing::File(store),
        }
    }

    pub fn meta(&self) -> &VolumeMeta {
        &self.meta
    }

    pub fn dtype(&self) -> Dtype {
        self.meta.dtype
    }

    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Self {
        self.meta.spacing = spacing;
        self
    }

    pub fn is_file_backed(&self) -> bool {
        matches!(self.backing, Backing::File(_))
    }

    /// Bytes held by the block cache of a file-backed volume (0 in memory).
    pub fn cached_bytes(&self) -> usize {
        match &self.backing {
            Backing::Memory(_) => 0,
            Backing::File(store) => store.cached_bytes(),
        }
    }

    /// The in-memory buffer, if this volume is not file-backed.
    pub fn samples(&self) -> Option<&Samples> {
        match &self.backing {
            Backing::Memory(s) => Some(s),
            Backing::File(_) => None,
        }
    }

    /// Reads the whole volume into memory.
    pub fn to_samples(&self) -> Result<Samples> {
        match &self.backing {
            Backing::Memory(s) => Ok(s.clone()),
            Backing::File(_) => {
                let mut buf = Vec::new();
                self.read_region(&Region::full(self.meta.dims), &mut buf)?;
                Ok(Samples::from_f64(self.meta.dtype, &buf))
            }
        }
    }

    /// Values of the whole volume as reals (convenience for small volumes).
    pub fn to_f64(&self) -> Result<Vec<f64>> {
        let mut buf = Vec::new();
        self.read_region(&Region::full(self.meta.dims), &mut buf)?;
        Ok(buf)
    }
}

impl VoxelSource for VoxelVolume {
    fn dims(&self) -> Dims {
        self.meta.dims
    }

    fn value(&self, pos: Pos) -> Result<f64> {
        let dims = self.meta.dims;
        if !in_bounds(dims, pos) {
            return Err(Error::OutOfBounds { pos, dims });
        }
        match &self.backing {
            Backing::Memory(s) => Ok(s.get(linear_index(dims, pos))),
            Backing::File(store) => store.value(pos),
        }
    }

    fn read_region(&self, region: &Region, out: &mut Vec<f64>) -> Result<()> {
        let dims = self.meta.dims;
        check_region(dims, region)?;
        out.clear();
        out.reserve(region.len());
        match &self.backing {
            Backing::Memory(s) => {
                if region.is_empty() {
                    return Ok(());
                }
                for z in region.lo[2]..region.hi[2] {
                    for y in region.lo[1]..region.hi[1] {
                        let start = linear_index(dims, [region.lo[0], y, z]);
                        let end = start + (region.hi[0] - region.lo[0]);
                        match s {
                            Samples::U8(v) => out.extend(v[start..end].iter().map(|&x| x as f64)),
                            Samples::U16(v) => out.extend(v[start..end].iter().map(|&x| x as f64)),
                            Samples::F32(v) => out.extend(v[start..end].iter().map(|&x| x as f64)),
                        }
                    }
                }
                Ok(())
            }
            Backing::File(store) => store.read_region(region, out),
        }
    }
}

impl<T: VoxelSource + ?Sized> VoxelSource for std::sync::Arc<T> {
    fn dims(&self) -> Dims {
        (**self).dims()
    }
    fn value(&self, pos: Pos) -> Result<f64> {
        (**self).value(pos)
    }
    fn read_region(&self, region: &Region, out: &mut Vec<f64>) -> Result<()> {
        (**self).read_region(region, out)
    }
}

impl<T: VoxelSource + ?Sized> VoxelSource for &T {
    fn dims(&self) -> Dims {
        (**self).dims()
    }
    fn value(&self, pos: Pos) -> Result<f64> {
        (**self).value(pos)
    }
    fn read_region(&self, region: &Region, out: &mut Vec<f64>) -> Result<()> {
        (**self).read_region(region, out)
    }
}

/// Writes `samples` with a sidecar descriptor next to `raw_path`.
pub fn write_samples(raw_path: &Path, dims: Dims, samples: &Samples) -> Result<()> {
    let vol = VoxelVolume::from_samples(dims, samples.clone())?;
    save_volume(raw_path, &vol)
}
