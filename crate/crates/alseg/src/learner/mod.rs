//! The active-learning loop: seeds, training per level, classification,
//! uncertainty and coarse-to-fine candidate pruning.

mod classify;
mod multires;
mod seeds;
mod session;
mod threshold;
mod uncertainty;

pub use classify::{
    classify_into, classify_volume, quantize, work_items, work_size, ClassifyOptions, ClassifyStats, ConfidenceBuffer,
    ConfidenceSink, Progress, DEFAULT_BRICK,
};
pub use multires::{find_candidates, multires_segment, CandidateRegion, CandidateSearch, MultiresStats};
pub use seeds::{emit_seeds, parse_seeds, read_seed_file, write_seed_file, Seed, SeedSet};
pub use session::{LevelState, SegmentOutput, Session, SessionParams, DEFAULT_DELTA};
pub use threshold::{confidence_threshold, threshold_candidates, threshold_error};
pub use uncertainty::{uncertainty, uncertainty_volume, CLAMP};
