//! Line/plane fits, inertia tensor and centre distances of the voxels
//! above the threshold τ.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::volume::LocalEnvironment;

/// Offsets from the environment centre of all voxels with value > τ.
pub fn selected_offsets(env: &LocalEnvironment, tau: f64) -> Vec<[f64; 3]> {
    let k = env.size;
    let h = env.half() as f64;
    let mut pts = Vec::new();
    for z in 0..k {
        for y in 0..k {
            for x in 0..k {
                if env.at([x, y, z]) > tau {
                    pts.push([x as f64 - h, y as f64 - h, z as f64 - h]);
                }
            }
        }
    }
    pts
}

/// Eigenpairs sorted by descending eigenvalue.
fn sorted_eigen(m: Matrix3<f64>) -> ([f64; 3], [Vector3<f64>; 3]) {
    let eig = SymmetricEigen::new(m);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = idx.map(|i| eig.eigenvalues[i]);
    let vecs = idx.map(|i| eig.eigenvectors.column(i).into_owned());
    (vals, vecs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureFit {
    /// Direction of the least-squares line.
    pub u1: [f64; 3],
    /// Normal of the least-squares plane.
    pub u3: [f64; 3],
    /// Distances to the line through the centre voxel with direction `u1`.
    pub line_distances: Vec<f64>,
    /// Distances to the plane through the centre voxel with normal `u3`.
    pub plane_distances: Vec<f64>,
}

/// Fits line and plane to the selected voxels; `None` for fewer than 3.
pub fn fit_structures(env: &LocalEnvironment, tau: f64) -> Option<StructureFit> {
    let pts = selected_offsets(env, tau);
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mut mean = Vector3::zeros();
    for p in &pts {
        mean += Vector3::from(*p);
    }
    mean /= m;
    let mut scatter = Matrix3::zeros();
    for p in &pts {
        let d = Vector3::from(*p) - mean;
        scatter += d * d.transpose();
    }
    let (_, vecs) = sorted_eigen(scatter);
    let u1 = vecs[0];
    let u3 = vecs[2];
    let mut line_distances = Vec::with_capacity(pts.len());
    let mut plane_distances = Vec::with_capacity(pts.len());
    for p in &pts {
        let v = Vector3::from(*p);
        line_distances.push((v - u1 * v.dot(&u1)).norm());
        plane_distances.push(v.dot(&u3).abs());
    }
    Some(StructureFit {
        u1: [u1[0], u1[1], u1[2]],
        u3: [u3[0], u3[1], u3[2]],
        line_distances,
        plane_distances,
    })
}

/// `(f1, f2)` = (exp(-mean D), (max D - min D + 1) / (2√3⌊K/2⌋)).
pub fn structure_characteristics(distances: &[f64], k: usize) -> (f64, f64) {
    let n = distances.len() as f64;
    let mean = distances.iter().sum::<f64>() / n;
    let max = distances.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = distances.iter().cloned().fold(f64::INFINITY, f64::min);
    let denom = 2.0 * 3f64.sqrt() * (k / 2) as f64;
    ((-mean).exp(), (max - min + 1.0) / denom)
}

/// Largest possible distance to a structure through the centre.
pub fn max_distance(k: usize) -> f64 {
    3f64.sqrt() * (k / 2) as f64
}

/// Eigenvalues at or below this (in squared voxels) count as zero.
const DEGENERATE: f64 = 1e-12;

/// Linearity, planarity and isotropy `(f_l, f_p, f_s)` of the
/// intensity-weighted inertia tensor. Weights are values above the
/// environment minimum, so adding a constant changes nothing.
pub fn inertia_features(env: &LocalEnvironment) -> [f64; 3] {
    let min = env.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let k = env.size;
    let mut total = 0.0;
    let mut first = Vector3::zeros();
    for z in 0..k {
        for y in 0..k {
            for x in 0..k {
                let w = env.at([x, y, z]) - min;
                total += w;
                first += Vector3::new(x as f64, y as f64, z as f64) * w;
            }
        }
    }
    if !(total > 0.0) {
        return [0.0; 3];
    }
    let c = first / total;
    let mut t = Matrix3::zeros();
    for z in 0..k {
        for y in 0..k {
            for x in 0..k {
                let w = env.at([x, y, z]) - min;
                if w > 0.0 {
                    let d = Vector3::new(x as f64, y as f64, z as f64) - c;
                    t += d * d.transpose() * w;
                }
            }
        }
    }
    t /= total;
    let (l, _) = sorted_eigen(t);
    let l3 = l[2].max(0.0);
    let l2 = l[1].max(l3);
    let l1 = l[0];
    // A single weighted voxel leaves a rounding residue, not a shape.
    if !(l1 > DEGENERATE) {
        return [0.0; 3];
    }
    [(l1 - l2) / l1, (l2 - l3) / l1, l3 / l1]
}

/// Euclidean distances of the selected voxels to the centre.
pub fn center_distances(env: &LocalEnvironment, tau: f64) -> Vec<f64> {
    selected_offsets(env, tau)
        .into_iter()
        .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
        .collect()
}
