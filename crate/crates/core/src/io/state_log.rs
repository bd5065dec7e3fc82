//! Estimator output records and their CSV form.

use super::{fmt_f64, IoError};
use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};
use std::io::Write;
use std::path::Path;

pub const STATE_LOG_HEADER: &str = "t_ns,px,py,pz,qw,qx,qy,qz,n,n_std,num_features";

/// One per-frame estimator output row.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRecord {
    pub t_ns: i64,
    pub position: Vector3<f64>,
    pub attitude: UnitQuaternion<f64>,
    pub n: f64,
    pub n_std: f64,
    pub num_features: usize,
}

/// Write records as CSV with full (17 significant digit) precision.
pub fn write_state_log(records: &[StateRecord], path: &Path) -> Result<(), IoError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{STATE_LOG_HEADER}")?;
    for r in records {
        let q = r.attitude.quaternion();
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.t_ns,
            fmt_f64(r.position.x),
            fmt_f64(r.position.y),
            fmt_f64(r.position.z),
            fmt_f64(q.w),
            fmt_f64(q.i),
            fmt_f64(q.j),
            fmt_f64(q.k),
            fmt_f64(r.n),
            fmt_f64(r.n_std),
            r.num_features
        )?;
    }
    Ok(())
}

pub fn read_state_log(path: &Path) -> Result<Vec<StateRecord>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|_| IoError::Missing(path.to_path_buf()))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == STATE_LOG_HEADER => {}
        Some((_, other)) => {
            return Err(IoError::parse(path, 1, format!("bad header: {other}")));
        }
        None => return Err(IoError::parse(path, 1, "empty state log")),
    }
    let mut out = Vec::new();
    let mut last_t = i64::MIN;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 11 {
            return Err(IoError::parse(path, line_no, format!("expected 11 columns, got {}", cols.len())));
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
        let q = Quaternion::new(f(4)?, f(5)?, f(6)?, f(7)?);
        if (q.norm() - 1.0).abs() > 1e-6 {
            return Err(IoError::parse(path, line_no, "attitude quaternion not unit norm"));
        }
        // Not renormalized: the writer emits unit quaternions and the log
        // round-trips bit for bit.
        let attitude = Unit::new_unchecked(q);
        out.push(StateRecord {
            t_ns,
            position: Vector3::new(f(1)?, f(2)?, f(3)?),
            attitude,
            n: f(8)?,
            n_std: f(9)?,
            num_features: cols[10]
                .parse()
                .map_err(|_| IoError::parse(path, line_no, "bad feature count"))?,
        });
    }
    Ok(out)
}
