//! Refraction-aware raycasting renderer.
//!
//! Every pixel is unprojected once through the full refractive model (the
//! same code path the estimator uses, so any estimator-simulator discrepancy
//! isolates filter behaviour rather than model mismatch). The per-pixel
//! bearings depend only on the camera and the true index, so they are cached
//! across frames.

use super::{SimConfig, SimScene};
use crate::camera::{PixelPoint, RefractiveCamera, RefractiveIndex};
use crate::image::GrayImage;
use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

/// Intensity of pixels with no wall hit or outside the refractive cone.
pub const BACKGROUND_GRAY: f64 = 128.0;

/// Frame renderer with a cached per-pixel bearing table.
pub struct Renderer {
    width: usize,
    height: usize,
    bearings: Vec<Option<Vector3<f64>>>,
    ambient: f64,
    noise_std: f64,
    seed: u64,
}

impl Renderer {
    pub fn new(cam: &RefractiveCamera, n_true: RefractiveIndex, cfg: &SimConfig) -> Self {
        let (width, height) = (cfg.calibration.image_width, cfg.calibration.image_height);
        let bearings = (0..width * height)
            .into_par_iter()
            .map(|i| {
                let (x, y) = (i % width, i / width);
                cam.unproject(n_true, PixelPoint::new(x as f64, y as f64))
                    .ok()
                    .map(|b| b.into_inner())
            })
            .collect();
        Self {
            width,
            height,
            bearings,
            ambient: cfg.ambient,
            noise_std: cfg.image_noise_std,
            seed: cfg.seed,
        }
    }

    /// Render the scene from a camera pose (camera-to-world rotation and
    /// camera position in world). `frame_index` seeds the pixel noise.
    pub fn render(
        &self,
        scene: &SimScene,
        rot_wc: &Rotation3<f64>,
        cam_pos: &Vector3<f64>,
        frame_index: u64,
    ) -> GrayImage {
        let rot: Matrix3<f64> = *rot_wc.matrix();
        let mut noise = vec![0.0f32; self.width * self.height];
        if self.noise_std > 0.0 {
            let mut rng = ChaCha12Rng::seed_from_u64(self.seed ^ (frame_index.wrapping_mul(0x9e3779b97f4a7c15)));
            let normal = Normal::new(0.0, self.noise_std).unwrap();
            for v in noise.iter_mut() {
                *v = normal.sample(&mut rng) as f32;
            }
        }
        let data: Vec<f32> = (0..self.width * self.height)
            .into_par_iter()
            .map(|i| {
                let value = match &self.bearings[i] {
                    Some(b) => {
                        let dir = rot * b;
                        match scene.trace(cam_pos, &dir) {
                            Some((_, intensity)) => 255.0 * self.ambient * intensity,
                            None => BACKGROUND_GRAY,
                        }
                    }
                    None => BACKGROUND_GRAY,
                };
                (value + noise[i] as f64).round().clamp(0.0, 255.0) as f32
            })
            .collect();
        GrayImage::from_raw(self.width, self.height, data)
    }
}

/// One-off frame render without caching.
pub fn render_frame(
    scene: &SimScene,
    cam: &RefractiveCamera,
    n_true: RefractiveIndex,
    rot_wc: &Rotation3<f64>,
    cam_pos: &Vector3<f64>,
    cfg: &SimConfig,
    frame_index: u64,
) -> GrayImage {
    Renderer::new(cam, n_true, cfg).render(scene, rot_wc, cam_pos, frame_index)
}

/// Depth of the nearest wall hit per pixel (meters along the ray), NaN where
/// nothing is hit. Debug channel for geometry verification.
pub fn render_depth(
    scene: &SimScene,
    cam: &RefractiveCamera,
    n_true: RefractiveIndex,
    rot_wc: &Rotation3<f64>,
    cam_pos: &Vector3<f64>,
    width: usize,
    height: usize,
) -> Vec<f64> {
    let rot: Matrix3<f64> = *rot_wc.matrix();
    (0..width * height)
        .map(|i| {
            let (x, y) = (i % width, i / width);
            cam.unproject(n_true, PixelPoint::new(x as f64, y as f64))
                .ok()
                .and_then(|b| scene.trace(cam_pos, &(rot * b.into_inner())))
                .map(|(t, _)| t)
                .unwrap_or(f64::NAN)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::rectification_map;
    use crate::sim::pool_scene;

    fn look_at_floor() -> (Rotation3<f64>, Vector3<f64>) {
        // Camera looking straight down from mid-water.
        let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[
            Vector3::x(),
            -Vector3::y(),
            -Vector3::z(),
        ]));
        (rot, Vector3::new(5.0, 3.0, 0.75))
    }

    fn test_cfg() -> SimConfig {
        SimConfig { image_noise_std: 0.0, ..SimConfig::default() }
    }

    #[test]
    fn rendering_is_deterministic() {
        let cfg = SimConfig::default();
        let scene = pool_scene(11);
        let cam = cfg.calibration.camera();
        let renderer = Renderer::new(&cam, RefractiveIndex(1.33), &cfg);
        let (rot, pos) = look_at_floor();
        let a = renderer.render(&scene, &rot, &pos, 3);
        let b = renderer.render(&scene, &rot, &pos, 3);
        assert_eq!(a, b);
        let c = renderer.render(&scene, &rot, &pos, 4);
        assert_ne!(a, c, "different frames draw different noise");
    }

    #[test]
    fn depth_matches_analytic_plane_distance() {
        let cfg = test_cfg();
        let scene = pool_scene(11);
        let cam = cfg.calibration.camera();
        let (rot, pos) = look_at_floor();
        let depth = render_depth(&scene, &cam, RefractiveIndex(1.33), &rot, &pos, 320, 256);
        for (i, d) in depth.iter().enumerate() {
            if d.is_nan() {
                continue;
            }
            let (x, y) = (i % 320, i / 320);
            let bearing = cam
                .unproject(RefractiveIndex(1.33), PixelPoint::new(x as f64, y as f64))
                .unwrap();
            let dir = rot * bearing.into_inner();
            let hit = pos + dir * *d;
            // Every ray either hits the floor (z = 0) or a side wall.
            let on_floor = hit.z.abs() < 1e-9;
            let on_side = hit.x.abs() < 1e-9
                || (hit.x - 10.0).abs() < 1e-9
                || hit.y.abs() < 1e-9
                || (hit.y - 6.0).abs() < 1e-9;
            assert!(on_floor || on_side, "hit {hit:?} not on any wall");
        }
    }

    #[test]
    fn ambient_gain_scales_intensities_linearly() {
        let scene = pool_scene(11);
        let full = test_cfg();
        let half = SimConfig { ambient: 0.5, ..test_cfg() };
        let cam = full.calibration.camera();
        let (rot, pos) = look_at_floor();
        let bright = render_frame(&scene, &cam, RefractiveIndex(1.33), &rot, &pos, &full, 0);
        let dim = render_frame(&scene, &cam, RefractiveIndex(1.33), &rot, &pos, &half, 0);
        let mut checked = 0;
        for (b, d) in bright.data().iter().zip(dim.data()) {
            if *b == 128.0 {
                continue; // background
            }
            assert!((b - 2.0 * d).abs() <= 2.0, "bright {b} vs dim {d}");
            checked += 1;
        }
        assert!(checked > 10_000);
    }

    #[test]
    fn refraction_warp_consistency_with_rectification() {
        // A frame rendered at n = 1.33 resampled through the rectification
        // map must reproduce the n = 1 render of the same pose, up to
        // interpolation and quantization.
        let cfg = test_cfg();
        let scene = pool_scene(11);
        let cam = cfg.calibration.camera();
        let (rot, pos) = look_at_floor();
        let wet = render_frame(&scene, &cam, RefractiveIndex(1.33), &rot, &pos, &cfg, 0);
        let dry = render_frame(&scene, &cam, RefractiveIndex::AIR, &rot, &pos, &cfg, 0);
        let map = rectification_map(&cam, RefractiveIndex(1.33), &cam, 320, 256);
        let rectified = map.apply(&wet);
        let mut worst = 0.0f32;
        let mut count = 0;
        for y in 4..252 {
            for x in 4..316 {
                if map.source(x, y).is_none() {
                    continue;
                }
                // Skip pixels whose source or reference touches background.
                let r = rectified.get(x, y);
                let d = dry.get(x, y);
                if d == 128.0 || r == 128.0 {
                    continue;
                }
                worst = worst.max((r - d).abs());
                count += 1;
            }
        }
        assert!(count > 20_000, "too few comparable pixels: {count}");
        assert!(worst <= 2.0, "max rectification discrepancy {worst} levels");
    }

    #[test]
    fn constant_texture_wall_renders_flat() {
        use crate::sim::Texture;
        let mut scene = pool_scene(5);
        // Keep only the floor and make it uniform.
        scene.walls.truncate(1);
        scene.walls[0].texture = Texture::constant(0.7);
        let cfg = test_cfg();
        let cam = cfg.calibration.camera();
        let (rot, pos) = look_at_floor();
        let img = render_frame(&scene, &cam, RefractiveIndex(1.33), &rot, &pos, &cfg, 0);
        let expected = (255.0f64 * 0.7).round() as f32;
        let mut on_wall = 0;
        for &v in img.data() {
            if v == 128.0 {
                continue; // rays that left the single wall
            }
            assert_eq!(v, expected);
            on_wall += 1;
        }
        assert!(on_wall > 10_000);
    }
}
