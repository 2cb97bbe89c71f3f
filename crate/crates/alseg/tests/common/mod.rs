//! Independent reference implementations shared by the test targets.
#![allow(dead_code)]

use std::collections::VecDeque;

use alseg::geom::{linear_index, position_of, voxel_count, Dims};
use alseg::postproc::{BinaryVolume, Connectivity};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn gram(x: &[Vec<f64>], y: &[i8], gamma: f64) -> Vec<Vec<f64>> {
    x.iter()
        .zip(y)
        .map(|(a, &ya)| {
            x.iter()
                .zip(y)
                .map(|(b, &yb)| {
                    let d: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
                    (ya * yb) as f64 * (-gamma * d).exp()
                })
                .collect()
        })
        .collect()
}

pub fn quad(q: &[Vec<f64>], a: &[f64]) -> f64 {
    0.5 * q.iter().zip(a).map(|(row, ai)| ai * row.iter().zip(a).map(|(qij, aj)| qij * aj).sum::<f64>()).sum::<f64>()
}

/// Euclidean projection onto `{0 ≤ v ≤ cap, Σ v = total}` by bisection on the shift.
pub fn project_capped(v: &[f64], cap: f64, total: f64) -> Vec<f64> {
    let lo0 = v.iter().cloned().fold(f64::INFINITY, f64::min) - cap - 1.0;
    let hi0 = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let (mut lo, mut hi) = (lo0, hi0);
    let mass = |t: f64| v.iter().map(|x| (x - t).clamp(0.0, cap)).sum::<f64>();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    v.iter().map(|x| (x - t).clamp(0.0, cap)).collect()
}

/// Accelerated projected gradient on the dual with `1ᵀα = ν`, split into
/// the per-class constraints `Σ_{y=±1} α = ν/2`.
pub fn qp_oracle(q: &[Vec<f64>], y: &[i8], nu: f64) -> f64 {
    let m = y.len();
    let cap = 1.0 / m as f64;
    let pos: Vec<usize> = (0..m).filter(|&i| y[i] > 0).collect();
    let neg: Vec<usize> = (0..m).filter(|&i| y[i] < 0).collect();
    let project = |v: &[f64]| {
        let mut out = vec![0.0; m];
        for idx in [&pos, &neg] {
            let sub: Vec<f64> = idx.iter().map(|&i| v[i]).collect();
            for (k, p) in project_capped(&sub, cap, nu / 2.0).into_iter().enumerate() {
                out[idx[k]] = p;
            }
        }
        out
    };
    let lip = q.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut a = project(&vec![0.0; m]);
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut best = quad(q, &a);
    for _ in 0..30_000 {
        let g: Vec<f64> = q.iter().map(|r| r.iter().zip(&z).map(|(x, y)| x * y).sum()).collect();
        let step: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - gi / lip).collect();
        let next = project(&step);
        let tn = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = next.iter().zip(&a).map(|(n, o)| n + (t - 1.0) / tn * (n - o)).collect();
        a = next;
        t = tn;
        best = best.min(quad(q, &a));
    }
    best
}

pub fn random_binary(rng: &mut ChaCha8Rng, dims: Dims, p: f64) -> BinaryVolume {
    let v: Vec<bool> = (0..voxel_count(dims)).map(|_| rng.random_bool(p)).collect();
    BinaryVolume::from_bools(dims, &v).unwrap()
}

pub fn neighbours(conn: Connectivity) -> Vec<[isize; 3]> {
    let mut out = Vec::new();
    for dz in -1..=1isize {
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let n = dx.abs() + dy.abs() + dz.abs();
                if n == 0 || (conn == Connectivity::Six && n > 1) {
                    continue;
                }
                out.push([dx, dy, dz]);
            }
        }
    }
    out
}

/// Breadth-first flood fill from every unvisited one in raster order.
pub fn flood_fill(b: &BinaryVolume, conn: Connectivity) -> Vec<usize> {
    let dims = b.dims();
    let offs = neighbours(conn);
    let mut comp = vec![0usize; b.len()];
    let mut next = 0;
    for start in 0..b.len() {
        if !b.get_index(start) || comp[start] != 0 {
            continue;
        }
        next += 1;
        comp[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let p = position_of(dims, i);
            for o in &offs {
                let q = [p[0] as isize + o[0], p[1] as isize + o[1], p[2] as isize + o[2]];
                if (0..3).any(|a| q[a] < 0 || q[a] >= dims[a] as isize) {
                    continue;
                }
                let j = linear_index(dims, [q[0] as usize, q[1] as usize, q[2] as usize]);
                if b.get_index(j) && comp[j] == 0 {
                    comp[j] = next;
                    queue.push_back(j);
                }
            }
        }
    }
    comp
}

pub fn speckle_oracle(b: &BinaryVolume, k: usize, eta: usize, include_center: bool) -> BinaryVolume {
    let dims = b.dims();
    let h = k as isize / 2;
    let mut out = b.clone();
    for i in b.ones() {
        let p = position_of(dims, i);
        let mut n = 0;
        for dz in -h..=h {
            for dy in -h..=h {
                for dx in -h..=h {
                    if !include_center && (dx, dy, dz) == (0, 0, 0) {
                        continue;
                    }
                    let q = [p[0] as isize + dx, p[1] as isize + dy, p[2] as isize + dz];
                    if (0..3).all(|a| q[a] >= 0 && q[a] < dims[a] as isize)
                        && b.get([q[0] as usize, q[1] as usize, q[2] as usize])
                    {
                        n += 1;
                    }
                }
            }
        }
        if n < eta {
            out.set_index(i, false);
        }
    }
    out
}
