//! Per-pixel remap from an ideal in-air view into a refractive source image.

use super::{PixelPoint, RefractiveCamera, RefractiveIndex};
use crate::image::GrayImage;

/// Intensity written to pixels with no valid source (outside the refractive
/// field of view or the lens model).
pub const INVALID_GRAY: f32 = 128.0;

/// Per-pixel source lookup table produced by [`rectification_map`].
#[derive(Debug, Clone)]
pub struct RectifyMap {
    width: usize,
    height: usize,
    map: Vec<Option<(f32, f32)>>,
}

impl RectifyMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Source pixel feeding output pixel `(x, y)`, if any.
    pub fn source(&self, x: usize, y: usize) -> Option<(f32, f32)> {
        self.map[y * self.width + x]
    }

    /// Resample `src` through the map; invalid or out-of-bounds pixels get
    /// [`INVALID_GRAY`].
    pub fn apply(&self, src: &GrayImage) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            match self.map[y * self.width + x] {
                Some((su, sv)) => src
                    .bilinear(su as f64, sv as f64)
                    .map(|v| v as f32)
                    .unwrap_or(INVALID_GRAY),
                None => INVALID_GRAY,
            }
        })
    }
}

/// For every pixel of an ideal in-air output camera, find the pixel of the
/// refractive source camera observing the same ray. Rays beyond the
/// refractive field of view are marked invalid.
pub fn rectification_map(
    source: &RefractiveCamera,
    n: RefractiveIndex,
    output: &RefractiveCamera,
    width: usize,
    height: usize,
) -> RectifyMap {
    let mut map = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let u_out = PixelPoint::new(x as f64, y as f64);
            let entry = output
                .unproject(RefractiveIndex::AIR, u_out)
                .ok()
                .and_then(|bearing| source.project(n, &bearing.into_inner()).ok())
                .map(|u_src| (u_src.u as f32, u_src.v as f32));
            map.push(entry);
        }
    }
    RectifyMap { width, height, map }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{EquidistantParams, Intrinsics};

    fn camera() -> RefractiveCamera {
        RefractiveCamera::new(
            Intrinsics::new(140.0, 140.0, 159.5, 127.5),
            EquidistantParams::new(0.013, -0.0021, 0.0004, -6e-5),
        )
    }

    #[test]
    fn air_with_identical_models_is_identity() {
        let cam = camera();
        let map = rectification_map(&cam, RefractiveIndex::AIR, &cam, 320, 256);
        for (x, y) in [(0usize, 0usize), (160, 128), (319, 255), (40, 200)] {
            let (su, sv) = map.source(x, y).expect("valid in air");
            assert!((su as f64 - x as f64).abs() < 1e-4);
            assert!((sv as f64 - y as f64).abs() < 1e-4);
        }
    }

    #[test]
    fn center_pixel_maps_to_center_for_any_n() {
        let cam = camera();
        for n in [1.0, 1.2, 1.33, 1.6] {
            let map = rectification_map(&cam, RefractiveIndex(n), &cam, 320, 256);
            let (su, sv) = map.source(160, 128).unwrap();
            // (159.5, 127.5) is the principal point; pixel (160, 128) sits
            // half a pixel off axis, so allow a gentle tolerance.
            assert!((su - 160.0).abs() < 1.5 && (sv - 128.0).abs() < 1.5);
        }
    }

    #[test]
    fn valid_region_bounded_by_critical_angle() {
        // Output camera with a wide in-air view (corner incidence ~81 deg,
        // still below the 90 deg lens limit): rays beyond the critical
        // incidence angle asin(1/1.33) ~ 48.75 deg must be invalid.
        let out = RefractiveCamera::new(
            Intrinsics::new(200.0, 200.0, 200.0, 200.0),
            EquidistantParams::zero(),
        );
        let src = camera();
        let n = RefractiveIndex(1.33);
        let map = rectification_map(&src, n, &out, 401, 401);
        let critical = (1.0f64 / 1.33).asin();
        let mut valid_max: f64 = 0.0;
        let mut invalid_min = f64::MAX;
        for y in 0..401 {
            for x in 0..401 {
                let bearing = out
                    .unproject(RefractiveIndex::AIR, PixelPoint::new(x as f64, y as f64))
                    .unwrap();
                let incidence = bearing.z.acos();
                match map.source(x, y) {
                    Some(_) => valid_max = valid_max.max(incidence),
                    None => invalid_min = invalid_min.min(incidence),
                }
            }
        }
        assert!(valid_max < critical + 1e-3, "valid ray past critical angle");
        assert!(invalid_min > critical - 1e-3, "invalid ray inside the cone");
    }

    #[test]
    fn apply_fills_invalid_with_midgray() {
        let src_cam = camera();
        let out = RefractiveCamera::new(
            Intrinsics::new(60.0, 60.0, 100.0, 100.0),
            EquidistantParams::zero(),
        );
        let map = rectification_map(&src_cam, RefractiveIndex(1.33), &out, 201, 201);
        let img = GrayImage::from_fn(320, 256, |x, _| x as f32);
        let rect = map.apply(&img);
        // Corner rays exceed the critical angle for this wide output model.
        assert_eq!(rect.get(0, 0), INVALID_GRAY);
    }
}
