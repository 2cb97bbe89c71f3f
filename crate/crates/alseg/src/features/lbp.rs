//! Rotation-invariant uniform LBP on three orthogonal sum projections.

use crate::volume::LocalEnvironment;

pub const LBP_BINS: usize = 10;

/// Neighbour offsets in circular order.
const RING: [(isize, isize); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

/// Maps an 8-bit circular pattern to its riu2 class: the number of set
/// bits for patterns with at most two 0/1 transitions, 9 otherwise.
pub fn riu2_code(pattern: u8) -> usize {
    let transitions = (pattern ^ pattern.rotate_right(1)).count_ones();
    if transitions <= 2 {
        pattern.count_ones() as usize
    } else {
        9
    }
}

/// Sum projection along `axis` as a K×K image indexed `[u + K*v]`, where
/// `(u, v)` are the remaining axes in increasing order.
pub fn projection(env: &LocalEnvironment, axis: usize) -> Vec<f64> {
    let k = env.size;
    let mut img = vec![0.0; k * k];
    for z in 0..k {
        for y in 0..k {
            for x in 0..k {
                let p = [x, y, z];
                let (u, v) = match axis {
                    0 => (y, z),
                    1 => (x, z),
                    _ => (x, y),
                };
                img[u + k * v] += env.at(p);
            }
        }
    }
    img
}

/// riu2 code of every interior pixel of a `k`×`k` image, row by row.
pub fn image_codes(img: &[f64], k: usize) -> Vec<usize> {
    let mut codes = Vec::with_capacity((k - 2) * (k - 2));
    for v in 1..k - 1 {
        for u in 1..k - 1 {
            let c = img[u + k * v];
            let mut pattern = 0u8;
            for (bit, (du, dv)) in RING.iter().enumerate() {
                let q = img[(u as isize + du) as usize + k * (v as isize + dv) as usize];
                if q > c {
                    pattern |= 1 << bit;
                }
            }
            codes.push(riu2_code(pattern));
        }
    }
    codes
}

/// Three concatenated 10-bin code histograms (projections along x, y, z).
pub fn lbp_top(env: &LocalEnvironment) -> [[f64; LBP_BINS]; 3] {
    let mut out = [[0.0; LBP_BINS]; 3];
    for (axis, hist) in out.iter_mut().enumerate() {
        for c in image_codes(&projection(env, axis), env.size) {
            hist[c] += 1.0;
        }
    }
    out
}
