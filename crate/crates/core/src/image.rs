//! Grayscale image container with bilinear sub-pixel access.
//!
//! Intensities are stored as `f32` in the 0..=255 range; a pixel with integer
//! index `(x, y)` is the sample point at continuous coordinates `(x, y)`.

/// Row-major 8-bit-range grayscale image.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height, "pixel buffer size mismatch");
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Bilinear interpolation at `(x, y)`; `None` outside `[0, w-1] x [0, h-1]`.
    pub fn bilinear(&self, x: f64, y: f64) -> Option<f64> {
        if !(x >= 0.0 && y >= 0.0) {
            return None;
        }
        let w1 = (self.width - 1) as f64;
        let h1 = (self.height - 1) as f64;
        if x > w1 || y > h1 {
            return None;
        }
        let x0 = (x.floor() as usize).min(self.width - 2).min(self.width - 1);
        let y0 = (y.floor() as usize).min(self.height - 2).min(self.height - 1);
        // For a 1-pixel-wide image the clamp above would underflow; images
        // that small are rejected by the pyramid builder.
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let i00 = self.get(x0, y0) as f64;
        let i10 = self.get(x0 + 1, y0) as f64;
        let i01 = self.get(x0, y0 + 1) as f64;
        let i11 = self.get(x0 + 1, y0 + 1) as f64;
        Some(i00 * (1.0 - fx) * (1.0 - fy) + i10 * fx * (1.0 - fy)
            + i01 * (1.0 - fx) * fy + i11 * fx * fy)
    }

    /// Central-difference intensity gradient at `(x, y)` using bilinear reads.
    /// `None` if the stencil leaves the image.
    pub fn gradient(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let gx = (self.bilinear(x + 1.0, y)? - self.bilinear(x - 1.0, y)?) * 0.5;
        let gy = (self.bilinear(x, y + 1.0)? - self.bilinear(x, y - 1.0)?) * 0.5;
        Some((gx, gy))
    }

    /// Catmull-Rom interpolation with its analytic gradient.
    ///
    /// Needs `x, y` in `[1, dim-2]`; returns `(value, d/dx, d/dy)`. Third-
    /// order accurate, which keeps the sub-pixel bias of smooth image
    /// content an order of magnitude below bilinear interpolation; direct
    /// photometric alignment integrates such bias into the slow filter
    /// states otherwise.
    pub fn bicubic_with_gradient(&self, x: f64, y: f64) -> Option<(f64, f64, f64)> {
        if !(x >= 1.0 && y >= 1.0 && x <= (self.width - 2) as f64 && y <= (self.height - 2) as f64)
        {
            return None;
        }
        let x0 = (x.floor() as usize).min(self.width - 3).max(1);
        let y0 = (y.floor() as usize).min(self.height - 3).max(1);
        let u = x - x0 as f64;
        let v = y - y0 as f64;

        #[inline]
        fn weights(t: f64) -> ([f64; 4], [f64; 4]) {
            let t2 = t * t;
            let t3 = t2 * t;
            let w = [
                -0.5 * t + t2 - 0.5 * t3,
                1.0 - 2.5 * t2 + 1.5 * t3,
                0.5 * t + 2.0 * t2 - 1.5 * t3,
                -0.5 * t2 + 0.5 * t3,
            ];
            let d = [
                -0.5 + 2.0 * t - 1.5 * t2,
                -5.0 * t + 4.5 * t2,
                0.5 + 4.0 * t - 4.5 * t2,
                -t + 1.5 * t2,
            ];
            (w, d)
        }
        let (wx, dx) = weights(u);
        let (wy, dy) = weights(v);

        let mut value = 0.0;
        let mut gx = 0.0;
        let mut gy = 0.0;
        for (j, (&wyj, &dyj)) in wy.iter().zip(dy.iter()).enumerate() {
            let row = (y0 + j - 1) * self.width + (x0 - 1);
            let p = &self.data[row..row + 4];
            let mut rv = 0.0;
            let mut rg = 0.0;
            for i in 0..4 {
                rv += wx[i] * p[i] as f64;
                rg += dx[i] * p[i] as f64;
            }
            value += wyj * rv;
            gx += wyj * rg;
            gy += dyj * rv;
        }
        Some((value, gx, gy))
    }
}
