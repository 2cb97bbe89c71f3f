use serde::{Deserialize, Serialize};

use super::BinaryVolume;
use crate::error::{Error, Result};
use crate::geom::{in_bounds, linear_index, position_of, Dims, Pos, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    Six,
    #[default]
    TwentySix,
}

impl Connectivity {
    pub fn from_count(n: usize) -> Result<Self> {
        match n {
            6 => Ok(Connectivity::Six),
            26 => Ok(Connectivity::TwentySix),
            _ => Err(Error::InvalidParameter(format!("connectivity {n} is not 6 or 26"))),
        }
    }

    /// Neighbour offsets that precede the voxel in raster order.
    fn backward(self) -> Vec<[isize; 3]> {
        let mut out = Vec::new();
        for dz in -1..=1isize {
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let nonzero = (dx != 0) as u8 + (dy != 0) as u8 + (dz != 0) as u8;
                    let before = (dz, dy, dx) < (0, 0, 0);
                    if before && (self == Connectivity::TwentySix || nonzero == 1) {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

/// Component labels per voxel; 0 is background, labels `1..=L` are sorted
/// by decreasing size, ties by the smallest linear index in the component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVolume {
    pub dims: Dims,
    pub labels: Vec<u32>,
    /// `sizes[l - 1]` is the voxel count of label `l`.
    pub sizes: Vec<usize>,
}

impl LabelVolume {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn label_at(&self, pos: Pos) -> u32 {
        self.labels[linear_index(self.dims, pos)]
    }

    pub fn mask_of(&self, keep: impl Fn(u32) -> bool) -> BinaryVolume {
        let mut out = BinaryVolume::zeros(self.dims);
        for (i, &l) in self.labels.iter().enumerate() {
            if l != 0 && keep(l) {
                out.set_index(i, true);
            }
        }
        out
    }

    /// Inclusive bounding box of every label, indexed by `label - 1`.
    pub fn bounding_boxes(&self) -> Vec<Region> {
        let mut lo = vec![[usize::MAX; 3]; self.count()];
        let mut hi = vec![[0usize; 3]; self.count()];
        for (i, &l) in self.labels.iter().enumerate() {
            if l == 0 {
                continue;
            }
            let p = position_of(self.dims, i);
            let k = l as usize - 1;
            for a in 0..3 {
                lo[k][a] = lo[k][a].min(p[a]);
                hi[k][a] = hi[k][a].max(p[a]);
            }
        }
        lo.into_iter().zip(hi).map(|(l, h)| Region::from_corners(l, h)).collect()
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

/// Two-pass union-find labelling.
pub fn connected_components(b: &BinaryVolume, conn: Connectivity) -> LabelVolume {
    let dims = b.dims();
    let offsets = conn.backward();
    let mut provisional = vec![0u32; b.len()];
    // Index 0 is unused so that 0 can mean background.
    let mut parent: Vec<u32> = vec![0];
    for i in b.ones() {
        let p = position_of(dims, i);
        let mut mine = 0u32;
        for o in &offsets {
            let q = [p[0] as isize + o[0], p[1] as isize + o[1], p[2] as isize + o[2]];
            if q.iter().any(|&c| c < 0) {
                continue;
            }
            let q = [q[0] as usize, q[1] as usize, q[2] as usize];
            if !in_bounds(dims, q) {
                continue;
            }
            let n = provisional[linear_index(dims, q)];
            if n == 0 {
                continue;
            }
            if mine == 0 {
                mine = find(&mut parent, n);
            } else {
                let (ra, rb) = (find(&mut parent, mine), find(&mut parent, n));
                if ra != rb {
                    let (lo, hi) = (ra.min(rb), ra.max(rb));
                    parent[hi as usize] = lo;
                    mine = lo;
                }
            }
        }
        if mine == 0 {
            mine = parent.len() as u32;
            parent.push(mine);
        }
        provisional[i] = mine;
    }
    let mut size = vec![0usize; parent.len()];
    let mut first = vec![usize::MAX; parent.len()];
    for i in b.ones() {
        let r = find(&mut parent, provisional[i]) as usize;
        size[r] += 1;
        first[r] = first[r].min(i);
    }
    let mut roots: Vec<usize> = (1..parent.len()).filter(|&r| size[r] > 0).collect();
    roots.sort_by(|&a, &c| size[c].cmp(&size[a]).then(first[a].cmp(&first[c])));
    let mut label_of = vec![0u32; parent.len()];
    for (k, &r) in roots.iter().enumerate() {
        label_of[r] = k as u32 + 1;
    }
    let mut labels = provisional;
    for i in b.ones() {
        let r = find(&mut parent, labels[i]) as usize;
        labels[i] = label_of[r];
    }
    LabelVolume {
        dims,
        labels,
        sizes: roots.iter().map(|&r| size[r]).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selection {
    /// The `k` largest components.
    Largest(usize),
    /// Components with at least this many voxels.
    MinSize(usize),
    /// Components containing any of the positions.
    Contains(Vec<Pos>),
}

pub fn select_components(labels: &LabelVolume, rule: &Selection) -> Result<BinaryVolume> {
    match rule {
        Selection::Largest(k) => Ok(labels.mask_of(|l| (l as usize) <= *k)),
        Selection::MinSize(s) => Ok(labels.mask_of(|l| labels.sizes[l as usize - 1] >= *s)),
        Selection::Contains(ps) => {
            let mut keep = vec![false; labels.count() + 1];
            for &p in ps {
                if !in_bounds(labels.dims, p) {
                    return Err(Error::OutOfBounds { pos: p, dims: labels.dims });
                }
                keep[labels.label_at(p) as usize] = true;
            }
            Ok(labels.mask_of(|l| keep[l as usize]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_offset_counts() {
        assert_eq!(Connectivity::Six.backward().len(), 3);
        assert_eq!(Connectivity::TwentySix.backward().len(), 13);
    }
}
