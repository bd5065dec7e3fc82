//! Monocular visual-inertial odometry that co-estimates the refractive index
//! of the surrounding medium as a filter state.
//!
//! The camera is modelled as a flat-port refractive interface composed with an
//! equidistant fisheye lens and pinhole intrinsics, calibrated in air only.
//! The backend is a robocentric iterated extended Kalman filter driven by
//! direct multi-level photometric patch errors; the refractive index enters
//! the filter through the analytic projection Jacobians. A synthetic pool
//! simulator provides imagery, IMU data and ground truth for verification.

pub mod camera;
pub mod estimator;
pub mod filter;
pub mod frontend;
pub mod image;
pub mod io;
pub mod math;
pub mod sensitivity;
pub mod sim;

pub use camera::{EquidistantParams, Intrinsics, RefractiveCamera, RefractiveIndex};
pub use image::GrayImage;
