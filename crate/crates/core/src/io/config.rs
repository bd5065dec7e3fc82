//! `config.txt`: in-air camera calibration, camera-IMU extrinsics, IMU noise
//! densities and image size, as strict `key=value` lines.

use super::{fmt_f64, IoError};
use crate::camera::{EquidistantParams, Intrinsics, RefractiveCamera};
use crate::filter::NoiseConfig;
use nalgebra::{Matrix3, Matrix4, Rotation3, Vector3};
use std::collections::BTreeMap;
use std::path::Path;

/// Everything the estimator needs to know about the rig, minus the medium.
#[derive(Debug, Clone)]
pub struct CameraCalibration {
    pub intrinsics: Intrinsics,
    pub lens: EquidistantParams,
    /// Homogeneous camera-to-body transform: `p_body = T_BC p_cam`.
    pub t_bc: Matrix4<f64>,
    pub accel_noise_density: f64,
    pub gyro_noise_density: f64,
    pub accel_bias_random_walk: f64,
    pub gyro_bias_random_walk: f64,
    pub image_width: usize,
    pub image_height: usize,
}

impl CameraCalibration {
    pub fn camera(&self) -> RefractiveCamera {
        RefractiveCamera::new(self.intrinsics, self.lens)
    }

    /// Camera origin expressed in the body frame.
    pub fn cam_position_in_body(&self) -> Vector3<f64> {
        self.t_bc.fixed_view::<3, 1>(0, 3).into_owned()
    }

    /// Rotation taking body-frame vectors into camera-frame vectors.
    pub fn rot_cam_from_body(&self) -> Rotation3<f64> {
        let r_bc: Matrix3<f64> = self.t_bc.fixed_view::<3, 3>(0, 0).into_owned();
        Rotation3::from_matrix_unchecked(r_bc.transpose())
    }

    /// Noise configuration seeded from the calibration densities.
    pub fn noise_config(&self) -> NoiseConfig {
        NoiseConfig {
            accel_density: self.accel_noise_density,
            gyro_density: self.gyro_noise_density,
            accel_bias_rw: self.accel_bias_random_walk,
            gyro_bias_rw: self.gyro_bias_random_walk,
            ..NoiseConfig::default()
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let mut out = String::new();
        out.push_str(&format!("fx={}\n", fmt_f64(self.intrinsics.fx)));
        out.push_str(&format!("fy={}\n", fmt_f64(self.intrinsics.fy)));
        out.push_str(&format!("cx={}\n", fmt_f64(self.intrinsics.cx)));
        out.push_str(&format!("cy={}\n", fmt_f64(self.intrinsics.cy)));
        out.push_str(&format!("k1={}\n", fmt_f64(self.lens.k1)));
        out.push_str(&format!("k2={}\n", fmt_f64(self.lens.k2)));
        out.push_str(&format!("k3={}\n", fmt_f64(self.lens.k3)));
        out.push_str(&format!("k4={}\n", fmt_f64(self.lens.k4)));
        let flat: Vec<String> = self.t_bc.transpose().iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&format!("T_BC={}\n", flat.join(" ")));
        out.push_str(&format!(
            "accel_noise_density={}\n",
            fmt_f64(self.accel_noise_density)
        ));
        out.push_str(&format!(
            "gyro_noise_density={}\n",
            fmt_f64(self.gyro_noise_density)
        ));
        out.push_str(&format!(
            "accel_bias_random_walk={}\n",
            fmt_f64(self.accel_bias_random_walk)
        ));
        out.push_str(&format!(
            "gyro_bias_random_walk={}\n",
            fmt_f64(self.gyro_bias_random_walk)
        ));
        out.push_str(&format!("image_width={}\n", self.image_width));
        out.push_str(&format!("image_height={}\n", self.image_height));
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| IoError::Missing(path.to_path_buf()))?;
        let mut map: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(IoError::parse(path, line_no, "expected key=value"));
            };
            if map.insert(key.trim().to_string(), (line_no, value.trim().to_string())).is_some() {
                return Err(IoError::parse(path, line_no, format!("duplicate key {key}")));
            }
        }
        let mut take = |key: &str| -> Result<(usize, String), IoError> {
            map.remove(key)
                .ok_or_else(|| IoError::parse(path, 0, format!("missing key {key}")))
        };
        let scalar = |entry: (usize, String), key: &str| -> Result<f64, IoError> {
            entry.1.parse::<f64>().map_err(|_| {
                IoError::parse(path, entry.0, format!("bad float for {key}: {}", entry.1))
            })
        };
        let fx = scalar(take("fx")?, "fx")?;
        let fy = scalar(take("fy")?, "fy")?;
        let cx = scalar(take("cx")?, "cx")?;
        let cy = scalar(take("cy")?, "cy")?;
        let k1 = scalar(take("k1")?, "k1")?;
        let k2 = scalar(take("k2")?, "k2")?;
        let k3 = scalar(take("k3")?, "k3")?;
        let k4 = scalar(take("k4")?, "k4")?;
        let (t_line, t_text) = take("T_BC")?;
        let elems: Vec<f64> = t_text
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| IoError::parse(path, t_line, format!("bad T_BC element {tok}")))
            })
            .collect::<Result<_, _>>()?;
        if elems.len() != 16 {
            return Err(IoError::parse(
                path,
                t_line,
                format!("T_BC needs 16 row-major elements, got {}", elems.len()),
            ));
        }
        let t_bc = Matrix4::from_row_slice(&elems);
        let accel_noise_density = scalar(take("accel_noise_density")?, "accel_noise_density")?;
        let gyro_noise_density = scalar(take("gyro_noise_density")?, "gyro_noise_density")?;
        let accel_bias_random_walk =
            scalar(take("accel_bias_random_walk")?, "accel_bias_random_walk")?;
        let gyro_bias_random_walk =
            scalar(take("gyro_bias_random_walk")?, "gyro_bias_random_walk")?;
        let (w_line, w_text) = take("image_width")?;
        let image_width = w_text
            .parse()
            .map_err(|_| IoError::parse(path, w_line, "bad image_width"))?;
        let (h_line, h_text) = take("image_height")?;
        let image_height = h_text
            .parse()
            .map_err(|_| IoError::parse(path, h_line, "bad image_height"))?;
        if let Some((key, (line_no, _))) = map.into_iter().next() {
            return Err(IoError::parse(path, line_no, format!("unknown key {key}")));
        }
        Ok(Self {
            intrinsics: Intrinsics::new(fx, fy, cx, cy),
            lens: EquidistantParams::new(k1, k2, k3, k4),
            t_bc,
            accel_noise_density,
            gyro_noise_density,
            accel_bias_random_walk,
            gyro_bias_random_walk,
            image_width,
            image_height,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CameraCalibration {
        let mut t_bc = Matrix4::identity();
        t_bc.fixed_view_mut::<3, 3>(0, 0).copy_from(
            Rotation3::from_scaled_axis(Vector3::new(0.1, -1.5, 0.3)).matrix(),
        );
        t_bc.fixed_view_mut::<3, 1>(0, 3).copy_from(&Vector3::new(0.21, -0.007, 0.093));
        CameraCalibration {
            intrinsics: Intrinsics::new(140.25, 141.5, 159.5, 127.5),
            lens: EquidistantParams::new(0.013, -0.0021, 0.0004, -6e-5),
            t_bc,
            accel_noise_density: 2.0e-3,
            gyro_noise_density: 2.4e-4,
            accel_bias_random_walk: 1e-4,
            gyro_bias_random_walk: 1e-5,
            image_width: 320,
            image_height: 256,
        }
    }

    #[test]
    fn roundtrip_preserves_every_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.txt");
        let cal = sample();
        cal.write(&path).unwrap();
        let back = CameraCalibration::read(&path).unwrap();
        assert_eq!(back.intrinsics, cal.intrinsics);
        assert_eq!(back.lens, cal.lens);
        assert_eq!(back.t_bc, cal.t_bc);
        assert_eq!(back.image_width, 320);
        assert_eq!(back.accel_noise_density, cal.accel_noise_density);
    }

    #[test]
    fn missing_and_unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.txt");
        let cal = sample();
        cal.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replace("fx=", "zz=")).unwrap();
        let err = CameraCalibration::read(&path).unwrap_err();
        assert!(err.to_string().contains("missing key fx"), "{err}");

        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, format!("{text}extra=1\nfx=140.25\n")).unwrap();
        // Restores fx but leaves zz and extra: still rejected.
        assert!(CameraCalibration::read(&path).is_err());
    }

    #[test]
    fn truncated_transform_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.txt");
        let cal = sample();
        cal.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mangled: Vec<String> = text
            .lines()
            .map(|l| {
                if l.starts_with("T_BC=") {
                    let mut parts: Vec<&str> = l.split_whitespace().collect();
                    parts.pop();
                    parts.join(" ")
                } else {
                    l.to_string()
                }
            })
            .collect();
        std::fs::write(&path, mangled.join("\n")).unwrap();
        let err = CameraCalibration::read(&path).unwrap_err();
        assert!(err.to_string().contains("16 row-major"), "{err}");
    }

    #[test]
    fn extrinsics_accessors_are_consistent() {
        let cal = sample();
        let r_cb = cal.rot_cam_from_body();
        let c = cal.cam_position_in_body();
        // p_body = R_BC p_cam + c  <=>  p_cam = R_CB (p_body - c)
        let p_cam = Vector3::new(0.3, -0.2, 1.4);
        let p_body = cal.t_bc.fixed_view::<3, 3>(0, 0) * p_cam + c;
        let back = r_cb * (p_body - c);
        approx::assert_relative_eq!(back, p_cam, epsilon = 1e-12);
    }
}
