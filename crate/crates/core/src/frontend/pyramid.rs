//! Image pyramid with 2x box-filter downsampling.

use super::FrontendError;
use crate::image::GrayImage;

/// Pyramid of grayscale images; level `l` is the input downsampled by `2^l`.
#[derive(Debug, Clone)]
pub struct ImagePyramid {
    levels: Vec<GrayImage>,
}

impl ImagePyramid {
    pub fn levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &GrayImage {
        &self.levels[l]
    }

    /// Coordinate scale from level 0 to level `l` (`0.5^l`).
    #[inline]
    pub fn scale(l: usize) -> f64 {
        0.5f64.powi(l as i32)
    }

    /// Map a level-0 coordinate to level `l`.
    ///
    /// The 2x2 box filter places the sample point of level-l pixel `q` at
    /// level-0 position `q / c_l + (2^l - 1) / 2`, so the scale comes with a
    /// constant half-pixel cascade; ignoring it misregisters the pyramid
    /// levels against each other.
    #[inline]
    pub fn to_level(p: f64, l: usize) -> f64 {
        let c = Self::scale(l);
        p * c - 0.5 * (1.0 - c)
    }
}

/// Build an `levels + 1`-deep pyramid by repeated 2x2 box filtering.
pub fn build_pyramid(image: &GrayImage, levels: usize) -> Result<ImagePyramid, FrontendError> {
    let min_dim = 1usize << levels;
    if image.width() < min_dim || image.height() < min_dim || image.width() == 0 {
        return Err(FrontendError::ImageTooSmall {
            width: image.width(),
            height: image.height(),
            levels,
        });
    }
    let mut out = Vec::with_capacity(levels + 1);
    out.push(image.clone());
    for l in 1..=levels {
        let prev = &out[l - 1];
        let w = prev.width() / 2;
        let h = prev.height() / 2;
        let down = GrayImage::from_fn(w, h, |x, y| {
            let (x2, y2) = (2 * x, 2 * y);
            0.25 * (prev.get(x2, y2)
                + prev.get(x2 + 1, y2)
                + prev.get(x2, y2 + 1)
                + prev.get(x2 + 1, y2 + 1))
        });
        out.push(down);
    }
    Ok(ImagePyramid { levels: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_stays_constant_at_all_levels() {
        let img = GrayImage::from_fn(32, 32, |_, _| 77.0);
        let pyr = build_pyramid(&img, 3).unwrap();
        for l in 0..4 {
            assert!(pyr.level(l).data().iter().all(|&v| v == 77.0));
        }
    }

    #[test]
    fn zero_levels_is_the_input_alone() {
        let img = GrayImage::from_fn(7, 5, |x, y| (x + y) as f32);
        let pyr = build_pyramid(&img, 0).unwrap();
        assert_eq!(pyr.levels(), 1);
        assert_eq!(pyr.level(0), &img);
    }

    #[test]
    fn checkerboard_dimensions_halve() {
        let img = GrayImage::from_fn(64, 64, |x, y| if (x / 8 + y / 8) % 2 == 0 { 255.0 } else { 0.0 });
        let pyr = build_pyramid(&img, 2).unwrap();
        assert_eq!(pyr.levels(), 3);
        assert_eq!((pyr.level(0).width(), pyr.level(0).height()), (64, 64));
        assert_eq!((pyr.level(1).width(), pyr.level(1).height()), (32, 32));
        assert_eq!((pyr.level(2).width(), pyr.level(2).height()), (16, 16));
    }

    #[test]
    fn too_small_image_is_rejected() {
        let img = GrayImage::from_fn(7, 64, |_, _| 0.0);
        assert!(matches!(
            build_pyramid(&img, 3),
            Err(FrontendError::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn odd_dimensions_floor() {
        let img = GrayImage::from_fn(65, 33, |x, _| x as f32);
        let pyr = build_pyramid(&img, 1).unwrap();
        assert_eq!((pyr.level(1).width(), pyr.level(1).height()), (32, 16));
    }
}
