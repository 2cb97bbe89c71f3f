//! Grid positions, dimensions and axis-aligned regions.
//!
//! Positions are `[x, y, z]` triples. Raster order is x fastest, then y,
//! then z; every linear index in the crate uses [`linear_index`].

use serde::{Deserialize, Serialize};

pub type Pos = [usize; 3];
pub type Dims = [usize; 3];

#[inline]
pub fn voxel_count(dims: Dims) -> usize {
    dims[0] * dims[1] * dims[2]
}

#[inline]
pub fn linear_index(dims: Dims, pos: Pos) -> usize {
    pos[0] + dims[0] * (pos[1] + dims[1] * pos[2])
}

#[inline]
pub fn position_of(dims: Dims, index: usize) -> Pos {
    let x = index % dims[0];
    let rest = index / dims[0];
    [x, rest % dims[1], rest / dims[1]]
}

#[inline]
pub fn in_bounds(dims: Dims, pos: Pos) -> bool {
    pos[0] < dims[0] && pos[1] < dims[1] && pos[2] < dims[2]
}

/// Half-open axis-aligned box `lo <= p < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub lo: Pos,
    pub hi: Pos,
}

impl Region {
    pub fn new(lo: Pos, hi: Pos) -> Self {
        Region { lo, hi }
    }

    pub fn full(dims: Dims) -> Self {
        Region {
            lo: [0; 3],
            hi: dims,
        }
    }

    /// Inclusive corners, as used for candidate boxes.
    pub fn from_corners(min: Pos, max: Pos) -> Self {
        Region {
            lo: min,
            hi: [max[0] + 1, max[1] + 1, max[2] + 1],
        }
    }

    pub fn extent(&self) -> Dims {
        [
            self.hi[0].saturating_sub(self.lo[0]),
            self.hi[1].saturating_sub(self.lo[1]),
            self.hi[2].saturating_sub(self.lo[2]),
        ]
    }

    pub fn len(&self) -> usize {
        voxel_count(self.extent())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, pos: Pos) -> bool {
        (0..3).all(|a| pos[a] >= self.lo[a] && pos[a] < self.hi[a])
    }

    pub fn intersect(&self, other: &Region) -> Region {
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for a in 0..3 {
            lo[a] = self.lo[a].max(other.lo[a]);
            hi[a] = self.hi[a].min(other.hi[a]).max(lo[a]);
        }
        Region { lo, hi }
    }

    pub fn overlaps(&self, other: &Region) -> bool {
        !self.intersect(other).is_empty()
    }

    pub fn union_box(&self, other: &Region) -> Region {
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for a in 0..3 {
            lo[a] = self.lo[a].min(other.lo[a]);
            hi[a] = self.hi[a].max(other.hi[a]);
        }
        Region { lo, hi }
    }

    /// Grows the box by `margin` on every side, clipped to `dims`.
    pub fn dilate(&self, margin: usize, dims: Dims) -> Region {
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for a in 0..3 {
            lo[a] = self.lo[a].saturating_sub(margin);
            hi[a] = (self.hi[a] + margin).min(dims[a]);
        }
        Region { lo, hi }
    }

    /// Maps a box to the next finer level (factor 2 per axis), clipped.
    pub fn refine(&self, fine_dims: Dims) -> Region {
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for a in 0..3 {
            lo[a] = (2 * self.lo[a]).min(fine_dims[a]);
            hi[a] = (2 * self.hi[a]).min(fine_dims[a]);
        }
        Region { lo, hi }
    }

    pub fn positions(&self) -> RegionIter {
        RegionIter {
            region: *self,
            next: if self.is_empty() { None } else { Some(self.lo) },
        }
    }
}

/// Raster-order iterator over a region.
#[derive(Debug, Clone)]
pub struct RegionIter {
    region: Region,
    next: Option<Pos>,
}

impl Iterator for RegionIter {
    type Item = Pos;

    fn next(&mut self) -> Option<Pos> {
        let cur = self.next?;
        let r = &self.region;
        let mut p = cur;
        p[0] += 1;
        if p[0] == r.hi[0] {
            p[0] = r.lo[0];
            p[1] += 1;
            if p[1] == r.hi[1] {
                p[1] = r.lo[1];
                p[2] += 1;
            }
        }
        self.next = if p[2] == r.hi[2] { None } else { Some(p) };
        Some(cur)
    }
}

/// Merges boxes until no two overlap; the result is sorted by `lo` in
/// raster order so it does not depend on the input order.
pub fn merge_overlapping(mut boxes: Vec<Region>) -> Vec<Region> {
    boxes.retain(|b| !b.is_empty());
    loop {
        let mut merged = false;
        'outer: for i in 0..boxes.len() {
            for j in (i + 1)..boxes.len() {
                if boxes[i].overlaps(&boxes[j]) {
                    let u = boxes[i].union_box(&boxes[j]);
                    boxes.swap_remove(j);
                    boxes[i] = u;
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }
    boxes.sort_by_key(|b| (b.lo[2], b.lo[1], b.lo[0], b.hi[2], b.hi[1], b.hi[0]));
    boxes
}
