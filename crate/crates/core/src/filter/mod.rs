//! Robocentric iterated extended Kalman filter with the refractive index as
//! a state variable.
//!
//! The error state stacks position, attitude, velocity, both IMU biases, the
//! camera-IMU extrinsics (carried but pinned), the refractive index and a
//! bearing/inverse-distance block per landmark. Attitude and extrinsic
//! rotation errors are minimal 3-vectors, bearing errors live in the local
//! 2D tangent plane of the unit sphere.

mod propagate;
mod state;
mod update;

pub use propagate::{propagate, GRAVITY};
pub use state::{
    FeatureState, FilterCovariance, FilterState, ImuMeasurement, NoiseConfig, CORE_DIM, IDX_BF,
    IDX_BW, IDX_C, IDX_N, IDX_Q, IDX_R, IDX_V, IDX_Z,
};
pub use update::{
    feature_innovation, iterated_update, FeatureInnovation, FeatureObservation,
    FeatureUpdateStatus, InnovationError, UpdateConfig, UpdateOutcome,
};
