//! Thresholding, speckle removal, component selection and overlap metrics.

mod binary;
mod chain;
mod components;
mod metrics;

pub use binary::{speckle_removal, threshold, BinaryVolume, Speckle};
pub use chain::PostChain;
pub use components::{connected_components, select_components, Connectivity, LabelVolume, Selection};
pub use metrics::{metrics, MetricsReport, CSV_HEADER};
