//! Active-learning segmentation of 3D grayscale volumes: geometric voxel
//! features, a ν-SVM with calibrated confidences, uncertainty-driven seed
//! selection and multiresolution classification.

pub mod error;
pub mod geom;
pub mod learner;
pub mod postproc;
pub mod scenario;
pub mod features;
pub mod svm;
pub mod volume;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/volumes.md")]
    mod volumes {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/svm.md")]
    mod svm {}
    #[doc = include_str!("../../../book/src/learner.md")]
    mod learner {}
    #[doc = include_str!("../../../book/src/postproc.md")]
    mod postproc {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/server.md")]
    mod server {}
}
