//! Raw little-endian volume files with a TOML sidecar descriptor.
//!
//! `foo.raw` is described by `foo.toml`. Writers go through a `.partial`
//! temporary and are renamed into place only when complete.

use std::fs::{self, File};
use std::io::{Read, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use super::cache::{BlockStore, DEFAULT_BLOCK_SIZE};
use super::{Samples, VolumeMeta, VoxelSource, VoxelVolume};
use crate::error::{Error, Result};
use crate::geom::{linear_index, Region};

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Files larger than this many bytes are opened file-backed.
    pub memory_budget: u64,
    /// Edge length of a cache block in voxels.
    pub block_size: usize,
    /// Byte budget of the block cache for file-backed volumes.
    pub cache_bytes: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            memory_budget: 1 << 30,
            block_size: DEFAULT_BLOCK_SIZE,
            cache_bytes: 256 << 20,
        }
    }
}

impl LoadOptions {
    pub fn file_backed() -> Self {
        LoadOptions {
            memory_budget: 0,
            ..Default::default()
        }
    }
}

/// Sidecar path for a raw file: `foo.raw` -> `foo.toml`.
pub fn descriptor_path(raw: &Path) -> PathBuf {
    raw.with_extension("toml")
}

pub fn load_volume(raw: &Path, meta: &VolumeMeta, opts: &LoadOptions) -> Result<VoxelVolume> {
    let mut file = File::open(raw).map_err(|e| Error::io(raw, e))?;
    let actual = file.metadata().map_err(|e| Error::io(raw, e))?.len();
    let expected = meta.byte_len();
    if actual != expected {
        return Err(Error::SizeMismatch {
            path: raw.to_path_buf(),
            expected,
            actual,
        });
    }
    if actual > opts.memory_budget {
        let store = BlockStore::new(raw.to_path_buf(), file, meta.clone(), opts.block_size, opts.cache_bytes);
        return Ok(VoxelVolume::from_store(meta.clone(), store));
    }
    let mut bytes = Vec::with_capacity(actual as usize);
    file.read_to_end(&mut bytes).map_err(|e| Error::io(raw, e))?;
    let samples = Samples::decode(meta.dtype, meta.endianness, &bytes);
    Ok(VoxelVolume::from_samples(meta.dims, samples)?.with_spacing(meta.spacing))
}

/// Loads `raw` using its sidecar descriptor.
pub fn open_volume(raw: &Path, opts: &LoadOptions) -> Result<VoxelVolume> {
    let desc = descriptor_path(raw);
    let text = fs::read_to_string(&desc).map_err(|e| Error::io(&desc, e))?;
    let meta = VolumeMeta::from_text(&text)?;
    load_volume(raw, &meta, opts)
}

/// Writes `vol` as little-endian raw data plus descriptor.
pub fn save_volume(raw: &Path, vol: &VoxelVolume) -> Result<()> {
    let mut meta = vol.meta().clone();
    meta.endianness = super::Endianness::Little;
    let mut writer = RawWriter::create(raw, meta)?;
    match vol.samples() {
        Some(s) => writer.write_all_samples(s)?,
        None => {
            let dims = vol.dims();
            let mut buf = Vec::new();
            for z in 0..dims[2] {
                let slab = Region::new([0, 0, z], [dims[0], dims[1], z + 1]);
                vol.read_region(&slab, &mut buf)?;
                writer.write_region(&slab, &buf)?;
            }
        }
    }
    writer.finish()
}

/// Streams a raw volume to disk region by region.
pub struct RawWriter {
    target: PathBuf,
    partial: PathBuf,
    file: File,
    meta: VolumeMeta,
}

impl RawWriter {
    pub fn create(raw: &Path, meta: VolumeMeta) -> Result<Self> {
        let mut partial = raw.as_os_str().to_owned();
        partial.push(".partial");
        let partial = PathBuf::from(partial);
        let file = File::create(&partial).map_err(|e| Error::io(&partial, e))?;
        file.set_len(meta.byte_len()).map_err(|e| Error::io(&partial, e))?;
        Ok(RawWriter {
            target: raw.to_path_buf(),
            partial,
            file,
            meta,
        })
    }

    pub fn meta(&self) -> &VolumeMeta {
        &self.meta
    }

    fn write_all_samples(&mut self, s: &Samples) -> Result<()> {
        self.file
            .write_all(&s.to_le_bytes())
            .map_err(|e| Error::io(&self.partial, e))
    }

    /// Writes `values` (raster order of `region`) converted to the dtype.
    pub fn write_region(&self, region: &Region, values: &[f64]) -> Result<()> {
        super::check_region(self.meta.dims, region)?;
        debug_assert_eq!(values.len(), region.len());
        let row = region.hi[0] - region.lo[0];
        if row == 0 {
            return Ok(());
        }
        let bpv = self.meta.dtype.bytes() as u64;
        for (r, chunk) in values.chunks(row).enumerate() {
            let y = region.lo[1] + r % (region.hi[1] - region.lo[1]);
            let z = region.lo[2] + r / (region.hi[1] - region.lo[1]);
            let bytes = Samples::from_f64(self.meta.dtype, chunk).to_le_bytes();
            let offset = linear_index(self.meta.dims, [region.lo[0], y, z]) as u64 * bpv;
            self.file
                .write_all_at(&bytes, offset)
                .map_err(|e| Error::io(&self.partial, e))?;
        }
        Ok(())
    }

    /// Flushes data, writes the descriptor and moves the file into place.
    pub fn finish(self) -> Result<()> {
        self.file.sync_all().map_err(|e| Error::io(&self.partial, e))?;
        drop(self.file);
        let desc = descriptor_path(&self.target);
        let mut desc_partial = desc.as_os_str().to_owned();
        desc_partial.push(".partial");
        let desc_partial = PathBuf::from(desc_partial);
        fs::write(&desc_partial, self.meta.to_text()).map_err(|e| Error::io(&desc_partial, e))?;
        fs::rename(&self.partial, &self.target).map_err(|e| Error::io(&self.target, e))?;
        fs::rename(&desc_partial, &desc).map_err(|e| Error::io(&desc, e))?;
        Ok(())
    }
}
