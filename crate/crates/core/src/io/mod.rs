//! On-disk dataset format, run outputs and trajectory evaluation.
//!
//! A dataset directory holds `config.txt` (camera calibration in air, IMU
//! noise densities, image size), `imu.csv`, binary 8-bit PGM frames under
//! `cam0/` named by their nanosecond timestamp, and an optional
//! `groundtruth.csv`. Parsers reject malformed input instead of repairing it,
//! naming the file and line.

mod ape;
mod config;
pub(crate) mod dataset;
mod pgm;
mod state_log;

pub use ape::{compute_ape, path_length, AlignMode, ApeReport, TrajectorySample};
pub use config::CameraCalibration;
pub use dataset::{
    read_dataset, write_groundtruth_csv, write_imu_csv, Dataset, FrameEntry, GROUNDTRUTH_HEADER,
    IMU_HEADER,
};
pub use pgm::{read_pgm, write_pgm};
pub use state_log::{read_state_log, write_state_log, StateRecord, STATE_LOG_HEADER};

/// Dataset and log I/O failures; parse errors carry file and line.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("missing file or directory: {0}")]
    Missing(std::path::PathBuf),
    #[error("{file}:{line}: {message}")]
    Parse { file: std::path::PathBuf, line: usize, message: String },
    #[error("{file}:{line}: timestamps not strictly increasing")]
    NonMonotone { file: std::path::PathBuf, line: usize },
    #[error("frame at {t_ns} ns lies outside the IMU span [{imu_first}, {imu_last}] ns")]
    FrameOutsideImuSpan { t_ns: i64, imu_first: i64, imu_last: i64 },
    #[error("trajectories do not overlap in time")]
    NoTemporalOverlap,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IoError {
    pub(crate) fn parse(file: &std::path::Path, line: usize, message: impl Into<String>) -> Self {
        IoError::Parse { file: file.to_path_buf(), line, message: message.into() }
    }
}

/// Format a float with 17 significant digits; parses back to the same bits.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
