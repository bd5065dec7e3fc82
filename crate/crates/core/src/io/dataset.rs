//! Dataset directory reading and validation.

use super::{config::CameraCalibration, fmt_f64, pgm::read_pgm, IoError, TrajectorySample};
use crate::filter::ImuMeasurement;
use crate::image::GrayImage;
use nalgebra::{Quaternion, Unit, Vector3};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const IMU_HEADER: &str = "t_ns,ax,ay,az,gx,gy,gz";
pub const GROUNDTRUTH_HEADER: &str = "t_ns,px,py,pz,qw,qx,qy,qz";

/// One frame of the recording: timestamp and image path.
#[derive(Debug, Clone)]
pub struct FrameEntry {
    pub t_ns: i64,
    pub path: PathBuf,
}

/// Validated dataset handle; images load lazily via [`Dataset::load_frame`].
#[derive(Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub calibration: CameraCalibration,
    pub imu: Vec<(i64, ImuMeasurement)>,
    pub frames: Vec<FrameEntry>,
    pub groundtruth: Option<Vec<TrajectorySample>>,
}

impl Dataset {
    pub fn load_frame(&self, index: usize) -> Result<GrayImage, IoError> {
        read_pgm(&self.frames[index].path)
    }
}

/// Read and validate a dataset directory.
pub fn read_dataset(root: &Path) -> Result<Dataset, IoError> {
    if !root.is_dir() {
        return Err(IoError::Missing(root.to_path_buf()));
    }
    let calibration = CameraCalibration::read(&root.join("config.txt"))?;
    let imu = read_imu_csv(&root.join("imu.csv"))?;
    if imu.is_empty() {
        return Err(IoError::TooFewSamples { needed: 2, got: 0 });
    }

    let cam_dir = root.join("cam0");
    if !cam_dir.is_dir() {
        return Err(IoError::Missing(cam_dir));
    }
    let mut frames = Vec::new();
    for entry in std::fs::read_dir(&cam_dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.extension().map(|e| e == "pgm") != Some(true) {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| IoError::Missing(path.clone()))?;
        let t_ns: i64 = stem.parse().map_err(|_| {
            IoError::parse(&path, 0, "frame filename must be a nanosecond timestamp")
        })?;
        frames.push(FrameEntry { t_ns, path });
    }
    frames.sort_by_key(|f| f.t_ns);
    for pair in frames.windows(2) {
        if pair[1].t_ns <= pair[0].t_ns {
            return Err(IoError::NonMonotone { file: cam_dir.clone(), line: 0 });
        }
    }
    let imu_first = imu.first().map(|(t, _)| *t).unwrap();
    let imu_last = imu.last().map(|(t, _)| *t).unwrap();
    for f in &frames {
        if f.t_ns < imu_first || f.t_ns > imu_last {
            return Err(IoError::FrameOutsideImuSpan { t_ns: f.t_ns, imu_first, imu_last });
        }
    }

    let gt_path = root.join("groundtruth.csv");
    let groundtruth = if gt_path.exists() {
        Some(read_groundtruth_csv(&gt_path)?)
    } else {
        None
    };

    Ok(Dataset { root: root.to_path_buf(), calibration, imu, frames, groundtruth })
}

pub fn read_imu_csv(path: &Path) -> Result<Vec<(i64, ImuMeasurement)>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|_| IoError::Missing(path.to_path_buf()))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == IMU_HEADER => {}
        Some((_, other)) => return Err(IoError::parse(path, 1, format!("bad header: {other}"))),
        None => return Err(IoError::parse(path, 1, "empty IMU file")),
    }
    let mut out = Vec::new();
    let mut last_t = i64::MIN;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(IoError::parse(
                path,
                line_no,
                format!("expected 7 columns, got {}", cols.len()),
            ));
        }
        let t_ns: i64 = cols[0]
            .parse()
            .map_err(|_| IoError::parse(path, line_no, "bad timestamp"))?;
        if t_ns <= last_t {
            return Err(IoError::NonMonotone { file: path.to_path_buf(), line: line_no });
        }
        last_t = t_ns;
        let f = |i: usize| -> Result<f64, IoError> {
            cols[i]
                .parse::<f64>()
                .map_err(|_| IoError::parse(path, line_no, format!("bad float in column {i}")))
        };
        out.push((
            t_ns,
            ImuMeasurement {
                t: t_ns as f64 * 1e-9,
                specific_force: Vector3::new(f(1)?, f(2)?, f(3)?),
                angular_rate: Vector3::new(f(4)?, f(5)?, f(6)?),
            },
        ));
    }
    Ok(out)
}

pub fn write_imu_csv(path: &Path, rows: &[(i64, Vector3<f64>, Vector3<f64>)]) -> Result<(), IoError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{IMU_HEADER}")?;
    for (t_ns, accel, gyro) in rows {
        writeln!(
            f,
            "{},{},{},{},{},{},{}",
            t_ns,
            fmt_f64(accel.x),
            fmt_f64(accel.y),
            fmt_f64(accel.z),
            fmt_f64(gyro.x),
            fmt_f64(gyro.y),
            fmt_f64(gyro.z)
        )?;
    }
    Ok(())
}

pub fn read_groundtruth_csv(path: &Path) -> Result<Vec<TrajectorySample>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|_| IoError::Missing(path.to_path_buf()))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == GROUNDTRUTH_HEADER => {}
        Some((_, other)) => return Err(IoError::parse(path, 1, format!("bad header: {other}"))),
        None => return Err(IoError::parse(path, 1, "empty ground truth")),
    }
    let mut out: Vec<TrajectorySample> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(IoError::parse(
                path,
                line_no,
                format!("expected 8 columns, got {}", cols.len()),
            ));
        }
        let t_ns: i64 = cols[0]
            .parse()
            .map_err(|_| IoError::parse(path, line_no, "bad timestamp"))?;
        if let Some(prev) = out.last() {
            if t_ns <= prev.t_ns {
                return Err(IoError::NonMonotone { file: path.to_path_buf(), line: line_no });
            }
        }
        let f = |i: usize| -> Result<f64, IoError> {
            cols[i]
                .parse::<f64>()
                .map_err(|_| IoError::parse(path, line_no, format!("bad float in column {i}")))
        };
        let q = Quaternion::new(f(4)?, f(5)?, f(6)?, f(7)?);
        if (q.norm() - 1.0).abs() > 1e-6 {
            return Err(IoError::parse(path, line_no, "attitude quaternion not unit norm"));
        }
        out.push(TrajectorySample {
            t_ns,
            position: Vector3::new(f(1)?, f(2)?, f(3)?),
            attitude: Unit::new_unchecked(q),
        });
    }
    Ok(out)
}

pub fn write_groundtruth_csv(path: &Path, rows: &[TrajectorySample]) -> Result<(), IoError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{GROUNDTRUTH_HEADER}")?;
    for s in rows {
        let q = s.attitude.quaternion();
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            s.t_ns,
            fmt_f64(s.position.x),
            fmt_f64(s.position.y),
            fmt_f64(s.position.z),
            fmt_f64(q.w),
            fmt_f64(q.i),
            fmt_f64(q.j),
            fmt_f64(q.k)
        )?;
    }
    Ok(())
}
