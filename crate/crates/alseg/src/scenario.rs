//! The plate-in-noise phantom and its fixed four-round seed schedule, shared
//! by the tests, the benchmarks and the command line.

use crate::geom::Pos;
use crate::learner::Seed;
use crate::postproc::BinaryVolume;
use crate::volume::{PhantomSpec, Primitive};

pub const PLATE_EDGE: usize = 64;

/// 64³ u8 volume, background 60, a 52×52×10 plate of value 140 and
/// Gaussian noise σ = 20.
pub fn plate_phantom(seed: u64) -> PhantomSpec {
    let mut spec = PhantomSpec::new([PLATE_EDGE; 3]).with(Primitive::Box {
        min: [6.0, 6.0, 27.0],
        max: [58.0, 58.0, 37.0],
        value: 140.0,
    });
    spec.background = 60.0;
    spec.noise_sigma = 20.0;
    spec.seed = seed;
    spec
}

/// Seed positions per round: plate core, near the large faces, near the
/// rims, and directly on both sides of the boundary.
pub const PLATE_SCHEDULE: [[Pos; 10]; 4] = [
    [
        [20, 20, 32], [40, 44, 30], [12, 50, 33], [50, 12, 31], [32, 32, 32],
        [20, 20, 10], [44, 40, 50], [10, 50, 20], [50, 10, 45], [32, 32, 55],
    ],
    [
        [16, 30, 28], [30, 16, 36], [44, 24, 29], [24, 44, 35], [48, 48, 32],
        [16, 30, 24], [30, 16, 40], [44, 24, 23], [24, 44, 41], [48, 48, 20],
    ],
    [
        [8, 32, 32], [56, 32, 31], [32, 8, 33], [32, 56, 32], [10, 10, 30],
        [3, 32, 32], [60, 32, 31], [32, 3, 33], [32, 60, 32], [3, 3, 30],
    ],
    [
        [20, 40, 27], [40, 20, 36], [7, 20, 32], [57, 44, 32], [36, 36, 28],
        [20, 40, 26], [40, 20, 37], [5, 20, 32], [58, 44, 32], [36, 36, 25],
    ],
];

/// Seeds at `positions` labelled by `truth`.
pub fn label_from_truth(positions: &[Pos], truth: &BinaryVolume) -> Vec<Seed> {
    positions
        .iter()
        .map(|&p| Seed::new(p, if truth.get(p) { 1 } else { -1 }))
        .collect()
}
