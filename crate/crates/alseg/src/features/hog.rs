//! Gradient orientation histogram on an equal-cell-area sphere partition.

use std::f64::consts::TAU;

use crate::volume::LocalEnvironment;

pub const HOG_BINS: usize = 50;

/// Band boundaries in z = cos(polar angle), north to south. Each cap holds
/// 4 cells and each middle band 14, all of area 0.08π.
pub const BAND_EDGES: [f64; 6] = [1.0, 0.84, 0.28, -0.28, -0.84, -1.0];
pub const BAND_CELLS: [usize; 5] = [4, 14, 14, 14, 4];

/// Sphere cell of the unit direction `d`.
pub fn sphere_bin(d: [f64; 3]) -> usize {
    let z = d[2].clamp(-1.0, 1.0);
    let band = BAND_EDGES[1..].iter().position(|&e| z >= e).unwrap_or(4);
    let mut phi = d[1].atan2(d[0]);
    if phi < 0.0 {
        phi += TAU;
    }
    let cells = BAND_CELLS[band];
    let cell = ((phi / TAU * cells as f64) as usize).min(cells - 1);
    BAND_CELLS[..band].iter().sum::<usize>() + cell
}

/// Central-difference gradient at interior voxel `p` of the environment.
pub fn gradient(env: &LocalEnvironment, p: [usize; 3]) -> [f64; 3] {
    let mut g = [0.0; 3];
    for a in 0..3 {
        let mut hi = p;
        let mut lo = p;
        hi[a] += 1;
        lo[a] -= 1;
        g[a] = (env.at(hi) - env.at(lo)) / 2.0;
    }
    g
}

pub fn hog_sphere(env: &LocalEnvironment, grad_threshold: f64) -> [f64; HOG_BINS] {
    let mut hist = [0.0; HOG_BINS];
    let k = env.size;
    for z in 1..k - 1 {
        for y in 1..k - 1 {
            for x in 1..k - 1 {
                let g = gradient(env, [x, y, z]);
                let m = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                if m > grad_threshold {
                    hist[sphere_bin([g[0] / m, g[1] / m, g[2] / m])] += m;
                }
            }
        }
    }
    hist
}
