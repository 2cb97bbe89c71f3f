//! Synthetic test volumes with ground truth.
//!
//! A phantom is a list of primitives painted in order onto a constant
//! background, followed by optional Gaussian noise from a seeded ChaCha
//! stream drawn in raster order. Each primitive's voxels are labelled with
//! its 1-based index; later primitives overwrite earlier ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dtype, Samples, VoxelVolume};
use crate::error::{Error, Result};
use crate::geom::{linear_index, voxel_count, Dims, Pos, Region};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Primitive {
    /// Axis-aligned slab `center - thickness/2 <= p[axis] < center + thickness/2`.
    Slab {
        axis: usize,
        center: f64,
        thickness: f64,
        value: f64,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
        value: f64,
    },
    /// Finite cylinder around `center` with direction `axis`.
    Cylinder {
        center: [f64; 3],
        axis: [f64; 3],
        radius: f64,
        length: f64,
        value: f64,
    },
    /// Voxels with `min <= p < max`.
    Box {
        min: [f64; 3],
        max: [f64; 3],
        value: f64,
    },
    /// Tube of radius `tube_radius` around a helix winding about the z axis
    /// through `center`, `turns` full turns long.
    Helix {
        center: [f64; 3],
        radius: f64,
        pitch: f64,
        turns: f64,
        tube_radius: f64,
        value: f64,
    },
}

impl Primitive {
    pub fn value(&self) -> f64 {
        match *self {
            Primitive::Slab { value, .. }
            | Primitive::Sphere { value, .. }
            | Primitive::Cylinder { value, .. }
            | Primitive::Box { value, .. }
            | Primitive::Helix { value, .. } => value,
        }
    }

    fn anchor(&self) -> Option<[f64; 3]> {
        match *self {
            Primitive::Slab { .. } => None,
            Primitive::Sphere { center, .. }
            | Primitive::Cylinder { center, .. }
            | Primitive::Helix { center, .. } => Some(center),
            Primitive::Box { min, max, .. } => Some([
                (min[0] + max[0]) / 2.0,
                (min[1] + max[1]) / 2.0,
                (min[2] + max[2]) / 2.0,
            ]),
        }
    }

    /// Conservative bounding region in voxel coordinates.
    fn bounds(&self, dims: Dims) -> Region {
        let clip = |lo: [f64; 3], hi: [f64; 3]| {
            let mut r = Region::full(dims);
            for a in 0..3 {
                r.lo[a] = lo[a].floor().max(0.0).min(dims[a] as f64) as usize;
                r.hi[a] = (hi[a].ceil() + 1.0).max(0.0).min(dims[a] as f64) as usize;
            }
            r
        };
        match *self {
            Primitive::Slab { axis, center, thickness, .. } => {
                let mut lo = [0.0; 3];
                let mut hi = [dims[0] as f64, dims[1] as f64, dims[2] as f64];
                lo[axis] = center - thickness / 2.0;
                hi[axis] = center + thickness / 2.0;
                clip(lo, hi)
            }
            Primitive::Sphere { center, radius, .. } => {
                clip(center.map(|c| c - radius), center.map(|c| c + radius))
            }
            Primitive::Cylinder { center, length, radius, .. } => {
                let e = (length / 2.0).hypot(radius);
                clip(center.map(|c| c - e), center.map(|c| c + e))
            }
            Primitive::Box { min, max, .. } => clip(min, max),
            Primitive::Helix { center, radius, pitch, turns, tube_radius, .. } => {
                let r = radius + tube_radius;
                let hz = pitch * turns / 2.0 + tube_radius;
                clip(
                    [center[0] - r, center[1] - r, center[2] - hz],
                    [center[0] + r, center[1] + r, center[2] + hz],
                )
            }
        }
    }

    fn contains(&self, p: Pos) -> bool {
        let q = [p[0] as f64, p[1] as f64, p[2] as f64];
        match *self {
            Primitive::Slab { axis, center, thickness, .. } => {
                let t = thickness / 2.0;
                q[axis] >= center - t && q[axis] < center + t
            }
            Primitive::Sphere { center, radius, .. } => dist2(q, center) <= radius * radius,
            Primitive::Cylinder { center, axis, radius, length, .. } => {
                let n = norm(axis);
                let u = axis.map(|c| c / n);
                let d = sub(q, center);
                let t = dot(d, u);
                let perp2 = dot(d, d) - t * t;
                t.abs() <= length / 2.0 && perp2 <= radius * radius
            }
            Primitive::Box { min, max, .. } => (0..3).all(|a| q[a] >= min[a] && q[a] < max[a]),
            Primitive::Helix { center, radius, pitch, turns, tube_radius, .. } => {
                helix_distance(q, center, radius, pitch, turns) <= tube_radius
            }
        }
    }

    fn validate(&self, dims: Dims) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Phantom(format!("{name} must be positive")))
            }
        };
        match *self {
            Primitive::Slab { axis, center, thickness, .. } => {
                if axis > 2 {
                    return Err(Error::Phantom(format!("slab axis {axis} not in 0..3")));
                }
                positive("thickness", thickness)?;
                if !(center >= 0.0 && center < dims[axis] as f64) {
                    return Err(Error::Phantom(format!("slab center {center} outside volume")));
                }
            }
            Primitive::Sphere { radius, .. } => positive("radius", radius)?,
            Primitive::Cylinder { axis, radius, length, .. } => {
                positive("radius", radius)?;
                positive("length", length)?;
                positive("axis length", norm(axis))?;
            }
            Primitive::Box { min, max, .. } => {
                if (0..3).any(|a| max[a] <= min[a]) {
                    return Err(Error::Phantom("box max must exceed min".into()));
                }
            }
            Primitive::Helix { radius, pitch, turns, tube_radius, .. } => {
                positive("radius", radius)?;
                positive("pitch", pitch)?;
                positive("turns", turns)?;
                positive("tube_radius", tube_radius)?;
            }
        }
        if let Some(c) = self.anchor() {
            if (0..3).any(|a| !(c[a] >= 0.0 && c[a] < dims[a] as f64)) {
                return Err(Error::Phantom(format!("primitive center {c:?} outside volume {dims:?}")));
            }
        }
        if !self.value().is_finite() || self.value() < 0.0 {
            return Err(Error::Phantom("value must be finite and non-negative".into()));
        }
        Ok(())
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = sub(a, b);
    dot(d, d)
}

fn helix_point(center: [f64; 3], radius: f64, pitch: f64, turns: f64, t: f64) -> [f64; 3] {
    let z0 = center[2] - pitch * turns / 2.0;
    [
        center[0] + radius * t.cos(),
        center[1] + radius * t.sin(),
        z0 + pitch * t / std::f64::consts::TAU,
    ]
}

/// Distance to the helix curve: dense sampling, then golden-section
/// refinement around the best sample.
fn helix_distance(q: [f64; 3], center: [f64; 3], radius: f64, pitch: f64, turns: f64) -> f64 {
    let t_max = std::f64::consts::TAU * turns;
    let n = (64.0 * turns).ceil().max(16.0) as usize;
    let f = |t: f64| dist2(q, helix_point(center, radius, pitch, turns, t));
    let mut best = (0.0, f(0.0));
    for i in 1..=n {
        let t = t_max * i as f64 / n as f64;
        let d = f(t);
        if d < best.1 {
            best = (t, d);
        }
    }
    let step = t_max / n as f64;
    let (mut a, mut b) = ((best.0 - step).max(0.0), (best.0 + step).min(t_max));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..40 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f((a + b) / 2.0).min(best.1).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: Dims,
    #[serde(default = "default_dtype")]
    pub dtype: String,
    #[serde(default)]
    pub background: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub primitives: Vec<Primitive>,
}

fn default_dtype() -> String {
    "u8".into()
}

impl PhantomSpec {
    pub fn new(dims: Dims) -> Self {
        PhantomSpec {
            dims,
            dtype: default_dtype(),
            background: 0.0,
            noise_sigma: 0.0,
            seed: 0,
            primitives: Vec::new(),
        }
    }

    pub fn with(mut self, p: Primitive) -> Self {
        self.primitives.push(p);
        self
    }

    pub fn from_text(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Phantom(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("phantom spec serializes")
    }
}

/// A generated volume with its per-primitive label volume (u8, 0 = background).
#[derive(Debug)]
pub struct Phantom {
    pub volume: VoxelVolume,
    pub labels: VoxelVolume,
}

impl Phantom {
    /// Voxels carrying label `id`, in raster order.
    pub fn mask(&self, id: u8) -> Vec<bool> {
        match self.labels.samples() {
            Some(Samples::U8(v)) => v.iter().map(|&l| l == id).collect(),
            _ => unreachable!("phantom labels are in-memory u8"),
        }
    }

    /// Voxels carrying any label.
    pub fn foreground(&self) -> Vec<bool> {
        match self.labels.samples() {
            Some(Samples::U8(v)) => v.iter().map(|&l| l != 0).collect(),
            _ => unreachable!("phantom labels are in-memory u8"),
        }
    }
}

pub fn make_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    let dims = spec.dims;
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::Phantom("dims must be positive".into()));
    }
    if spec.primitives.len() > u8::MAX as usize {
        return Err(Error::Phantom("at most 255 primitives".into()));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::Phantom("noise_sigma must be non-negative".into()));
    }
    let dtype = Dtype::parse(&spec.dtype)?;
    let n = voxel_count(dims);
    let mut values = vec![spec.background; n];
    let mut labels = vec![0u8; n];
    for (i, prim) in spec.primitives.iter().enumerate() {
        prim.validate(dims)?;
        let mut painted = 0usize;
        for p in prim.bounds(dims).positions() {
            if prim.contains(p) {
                let li = linear_index(dims, p);
                values[li] = prim.value();
                labels[li] = (i + 1) as u8;
                painted += 1;
            }
        }
        if painted == 0 {
            return Err(Error::Phantom(format!("primitive {} covers no voxel", i + 1)));
        }
    }
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sigma).expect("sigma is finite");
        for v in values.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    let max = dtype.max_value();
    for v in values.iter_mut() {
        *v = v.clamp(0.0, max);
    }
    Ok(Phantom {
        volume: VoxelVolume::from_samples(dims, Samples::from_f64(dtype, &values))?,
        labels: VoxelVolume::from_samples(dims, Samples::U8(labels))?,
    })
}
