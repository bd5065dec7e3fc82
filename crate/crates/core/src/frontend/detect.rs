//! Shi-Tomasi corner detection with greedy spatial suppression.

use crate::camera::PixelPoint;
use crate::image::GrayImage;

#[derive(Debug, Clone, Copy)]
pub struct DetectParams {
    /// Maximum number of corners to return.
    pub max_features: usize,
    /// Minimum pixel distance between any two returned/existing corners.
    pub min_separation: f64,
    /// Border kept clear so multi-level patches fit around detections.
    pub margin: usize,
    /// Minimum-eigenvalue score threshold of the 5x5 structure tensor.
    pub min_score: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        // The score floor sits above the gradient noise of a few intensity
        // levels of pixel noise but accepts smooth band-limited texture.
        Self { max_features: 25, min_separation: 20.0, margin: 20, min_score: 4.0 }
    }
}

/// Detect up to `max_features` corners, skipping the neighbourhood of
/// `existing` points. Deterministic: candidates are ranked by score with
/// (y, x) as the tie-breaker.
pub fn detect_features(
    img: &GrayImage,
    existing: &[PixelPoint],
    params: &DetectParams,
) -> Vec<PixelPoint> {
    let w = img.width();
    let h = img.height();
    if params.max_features == 0 || w < 2 * params.margin || h < 2 * params.margin {
        return Vec::new();
    }
    // Gradient product images over the interior.
    let mut gxx = vec![0.0f64; w * h];
    let mut gyy = vec![0.0f64; w * h];
    let mut gxy = vec![0.0f64; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let gx = 0.5 * (img.get(x + 1, y) as f64 - img.get(x - 1, y) as f64);
            let gy = 0.5 * (img.get(x, y + 1) as f64 - img.get(x, y - 1) as f64);
            gxx[y * w + x] = gx * gx;
            gyy[y * w + x] = gy * gy;
            gxy[y * w + x] = gx * gy;
        }
    }
    // Minimum eigenvalue of the structure tensor summed over a 5x5 window,
    // normalized by the window area.
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    let lo = params.margin.max(3);
    for y in lo..h - lo {
        for x in lo..w - lo {
            let mut sxx = 0.0;
            let mut syy = 0.0;
            let mut sxy = 0.0;
            for dy in 0..5 {
                for dx in 0..5 {
                    let i = (y + dy - 2) * w + (x + dx - 2);
                    sxx += gxx[i];
                    syy += gyy[i];
                    sxy += gxy[i];
                }
            }
            let inv = 1.0 / 25.0;
            let (a, c, b) = (sxx * inv, syy * inv, sxy * inv);
            let score = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt();
            if score >= params.min_score {
                candidates.push((score, y, x));
            }
        }
    }
    candidates.sort_by(|l, r| {
        r.0.partial_cmp(&l.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(l.1.cmp(&r.1))
            .then(l.2.cmp(&r.2))
    });

    let min_sep2 = params.min_separation * params.min_separation;
    let mut picked: Vec<PixelPoint> = Vec::new();
    let far_enough = |p: &PixelPoint, set: &[PixelPoint]| {
        set.iter().all(|q| {
            let (du, dv) = (p.u - q.u, p.v - q.v);
            du * du + dv * dv >= min_sep2
        })
    };
    for (_, y, x) in candidates {
        if picked.len() >= params.max_features {
            break;
        }
        let p = PixelPoint::new(x as f64, y as f64);
        if far_enough(&p, existing) && far_enough(&p, &picked) {
            picked.push(p);
        }
    }
    picked
}
