//! File-backed block store with a byte-budgeted LRU cache.

use std::fs::File;
use std::os::unix::fs::FileExt;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use lru::LruCache;

use super::{Samples, VolumeMeta};
use crate::error::{Error, Result};
use crate::geom::{linear_index, Dims, Pos, Region};

pub const DEFAULT_BLOCK_SIZE: usize = 64;

type BlockKey = [usize; 3];

struct Block {
    region: Region,
    values: Vec<f32>,
}

impl Block {
    fn bytes(&self) -> usize {
        self.values.len() * std::mem::size_of::<f32>()
    }
}

struct CacheState {
    blocks: LruCache<BlockKey, Arc<Block>>,
    bytes: usize,
}

pub(crate) struct BlockStore {
    path: PathBuf,
    file: File,
    meta: VolumeMeta,
    block: usize,
    budget: usize,
    state: Mutex<CacheState>,
}

impl BlockStore {
    pub(crate) fn new(path: PathBuf, file: File, meta: VolumeMeta, block: usize, budget: usize) -> Self {
        BlockStore {
            path,
            file,
            meta,
            block: block.max(1),
            budget,
            state: Mutex::new(CacheState {
                blocks: LruCache::unbounded(),
                bytes: 0,
            }),
        }
    }

    fn dims(&self) -> Dims {
        self.meta.dims
    }

    fn block_region(&self, key: BlockKey) -> Region {
        let dims = self.dims();
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for a in 0..3 {
            lo[a] = key[a] * self.block;
            hi[a] = (lo[a] + self.block).min(dims[a]);
        }
        Region { lo, hi }
    }

    fn load_block(&self, key: BlockKey) -> Result<Block> {
        let region = self.block_region(key);
        let dims = self.dims();
        let bpv = self.meta.dtype.bytes();
        let row = region.hi[0] - region.lo[0];
        let mut bytes = vec![0u8; row * bpv];
        let mut values = Vec::with_capacity(region.len());
        for z in region.lo[2]..region.hi[2] {
            for y in region.lo[1]..region.hi[1] {
                let offset = linear_index(dims, [region.lo[0], y, z]) as u64 * bpv as u64;
                self.file
                    .read_exact_at(&mut bytes, offset)
                    .map_err(|e| Error::io(&self.path, e))?;
                let decoded = Samples::decode(self.meta.dtype, self.meta.endianness, &bytes);
                if let Some(i) = decoded.first_invalid() {
                    return Err(Error::InvalidVoxel {
                        pos: [region.lo[0] + i, y, z],
                        value: decoded.get(i),
                    });
                }
                values.extend((0..row).map(|i| decoded.get(i) as f32));
            }
        }
        Ok(Block { region, values })
    }

    fn block(&self, key: BlockKey) -> Result<Arc<Block>> {
        {
            let mut st = self.state.lock().expect("block cache poisoned");
            if let Some(b) = st.blocks.get(&key) {
                return Ok(Arc::clone(b));
            }
        }
        // Load outside the lock; a concurrent miss may load the same block twice.
        let block = Arc::new(self.load_block(key)?);
        let mut st = self.state.lock().expect("block cache poisoned");
        if let Some(b) = st.blocks.get(&key) {
            return Ok(Arc::clone(b));
        }
        st.bytes += block.bytes();
        st.blocks.put(key, Arc::clone(&block));
        while st.bytes > self.budget && st.blocks.len() > 1 {
            match st.blocks.pop_lru() {
                Some((_, old)) => st.bytes -= old.bytes(),
                None => break,
            }
        }
        Ok(block)
    }

    pub(crate) fn value(&self, pos: Pos) -> Result<f64> {
        let key = [pos[0] / self.block, pos[1] / self.block, pos[2] / self.block];
        let b = self.block(key)?;
        let local = [
            pos[0] - b.region.lo[0],
            pos[1] - b.region.lo[1],
            pos[2] - b.region.lo[2],
        ];
        Ok(b.values[linear_index(b.region.extent(), local)] as f64)
    }

    pub(crate) fn read_region(&self, region: &Region, out: &mut Vec<f64>) -> Result<()> {
        if region.is_empty() {
            return Ok(());
        }
        out.resize(region.len(), 0.0);
        let ext = region.extent();
        let first = [region.lo[0] / self.block, region.lo[1] / self.block, region.lo[2] / self.block];
        let last = [
            (region.hi[0] - 1) / self.block,
            (region.hi[1] - 1) / self.block,
            (region.hi[2] - 1) / self.block,
        ];
        for bz in first[2]..=last[2] {
            for by in first[1]..=last[1] {
                for bx in first[0]..=last[0] {
                    let b = self.block([bx, by, bz])?;
                    let part = b.region.intersect(region);
                    let bext = b.region.extent();
                    for z in part.lo[2]..part.hi[2] {
                        for y in part.lo[1]..part.hi[1] {
                            let src = linear_index(bext, [part.lo[0] - b.region.lo[0], y - b.region.lo[1], z - b.region.lo[2]]);
                            let dst = linear_index(ext, [part.lo[0] - region.lo[0], y - region.lo[1], z - region.lo[2]]);
                            let n = part.hi[0] - part.lo[0];
                            for i in 0..n {
                                out[dst + i] = b.values[src + i] as f64;
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Bytes currently held by the cache.
    pub(crate) fn cached_bytes(&self) -> usize {
        self.state.lock().expect("block cache poisoned").bytes
    }
}
