//! Batch entry points: phantom generation, scripted active-learning runs,
//! evaluation against ground truth and classification timing.

pub mod bench;
pub mod eval;
pub mod manifest;
pub mod phantom;
pub mod segment;

pub use bench::{cmd_bench, BenchOptions, BenchRow};
pub use eval::cmd_eval;
pub use manifest::{LoadSettings, Overrides, RunManifest};
pub use phantom::{cmd_phantom, write_plate_scenario, PhantomFiles};
pub use segment::{cmd_segment, RunSummary};
