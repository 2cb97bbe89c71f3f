//! Mean curvature of the gray-level isosurfaces, estimated voxelwise from
//! central differences inside a k-cube.

use super::Histogram;
use crate::volume::LocalEnvironment;

/// Mean curvature from gradient `g` and Hessian `h`; 0 when |g| is at or
/// below `grad_threshold`. Positive on bright convex blobs.
pub fn mean_curvature(g: [f64; 3], h: [[f64; 3]; 3], grad_threshold: f64) -> f64 {
    let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
    let gn = g2.sqrt();
    if !(gn > grad_threshold) || gn == 0.0 {
        return 0.0;
    }
    let mut ghg = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            ghg += g[i] * h[i][j] * g[j];
        }
    }
    let tr = h[0][0] + h[1][1] + h[2][2];
    (ghg - g2 * tr) / (2.0 * g2 * gn)
}

/// One estimate per voxel of `env` whose k-cube lies inside `env`, raster order.
pub fn curvature_estimates(env: &LocalEnvironment, k: usize, grad_threshold: f64) -> Vec<f64> {
    let s = k / 2;
    let n = env.size;
    let mut out = Vec::new();
    if n < 2 * s + 1 || s == 0 {
        return out;
    }
    let sf = s as f64;
    for z in s..n - s {
        for y in s..n - s {
            for x in s..n - s {
                let p = [x, y, z];
                let at = |d: [isize; 3]| {
                    env.at([
                        (p[0] as isize + d[0] * s as isize) as usize,
                        (p[1] as isize + d[1] * s as isize) as usize,
                        (p[2] as isize + d[2] * s as isize) as usize,
                    ])
                };
                let c = at([0, 0, 0]);
                let mut g = [0.0; 3];
                let mut h = [[0.0; 3]; 3];
                for a in 0..3 {
                    let mut e = [0isize; 3];
                    e[a] = 1;
                    let plus = at(e);
                    let minus = at([-e[0], -e[1], -e[2]]);
                    g[a] = (plus - minus) / (2.0 * sf);
                    h[a][a] = (plus - 2.0 * c + minus) / (sf * sf);
                    for b in (a + 1)..3 {
                        let mut pp = [0isize; 3];
                        pp[a] = 1;
                        pp[b] = 1;
                        let mut pm = pp;
                        pm[b] = -1;
                        let v = (at(pp) - at(pm) - at([-pm[0], -pm[1], -pm[2]]) + at([-pp[0], -pp[1], -pp[2]]))
                            / (4.0 * sf * sf);
                        h[a][b] = v;
                        h[b][a] = v;
                    }
                }
                out.push(mean_curvature(g, h, grad_threshold));
            }
        }
    }
    out
}

pub fn curvature_histogram(env: &LocalEnvironment, k: usize, grad_threshold: f64, hist: &mut Histogram) {
    hist.clear();
    for c in curvature_estimates(env, k, grad_threshold) {
        hist.add(c, 1.0);
    }
}
