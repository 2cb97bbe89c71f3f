use serde::{Deserialize, Serialize};

use super::{connected_components, select_components, speckle_removal, threshold, BinaryVolume, Connectivity, Selection, Speckle};
use crate::error::Result;
use crate::volume::VoxelSource;

/// Threshold, optional speckle removal, optional component selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostChain {
    /// Percent threshold t.
    pub threshold: u32,
    pub speckle: Option<Speckle>,
    pub connectivity: Connectivity,
    pub selection: Option<Selection>,
}

impl Default for PostChain {
    fn default() -> Self {
        PostChain {
            threshold: 50,
            speckle: Some(Speckle::new(3, 18)),
            connectivity: Connectivity::TwentySix,
            selection: Some(Selection::Largest(1)),
        }
    }
}

impl PostChain {
    pub fn apply<S: VoxelSource + ?Sized>(&self, confidence: &S) -> Result<BinaryVolume> {
        let mut b = threshold(confidence, self.threshold)?;
        if let Some(sp) = self.speckle {
            b = speckle_removal(&b, sp)?;
        }
        if let Some(rule) = &self.selection {
            b = select_components(&connected_components(&b, self.connectivity), rule)?;
        }
        Ok(b)
    }
}
