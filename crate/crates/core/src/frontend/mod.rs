//! Direct photometric frontend: image pyramids, multi-level patches, linear
//! warping, Gauss-Newton pre-alignment and QR error reduction.

mod detect;
mod patch;
mod pyramid;
mod qr;
mod warp;

pub use detect::{detect_features, DetectParams};
pub use patch::{
    extract_patch, photometric_error, prealign, stack_and_linearize, MultiLevelPatch,
    PrealignResult,
};
pub use pyramid::{build_pyramid, ImagePyramid};
pub use qr::{qr_reduce, ReducedError};
pub use warp::compute_warp;

/// Frontend failure modes.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrontendError {
    #[error("image {width}x{height} too small for {levels} pyramid levels")]
    ImageTooSmall { width: usize, height: usize, levels: usize },
    #[error("patch footprint leaves the image at pyramid level {level}")]
    OutOfBounds { level: usize },
    #[error("no pyramid level keeps the warped patch in bounds")]
    AllLevelsOutOfBounds,
    #[error("normal equations singular (textureless patch)")]
    RankDeficient,
    #[error("patch has no usable gradient")]
    NoGradient,
    #[error("alignment diverged after {iterations} iterations")]
    Diverged { iterations: usize },
    #[error("need at least two stacked rows, got {rows}")]
    TooFewRows { rows: usize },
}
