use std::f64::consts::{FRAC_PI_2, PI};

use crate::raster::{sobel, ChannelImage};

/// Block-wise ridge orientation. Angles are in `[0, π)`, measured in pixel coordinates
/// (x right, y down), so `π/2` is a vertical ridge.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationField {
    pub block_size: usize,
    pub cols: usize,
    pub rows: usize,
    pub angles: Vec<f64>,
    pub coherence: Vec<f64>,
}

impl OrientationField {
    pub fn angle(&self, bx: usize, by: usize) -> f64 {
        self.angles[by * self.cols + bx]
    }

    pub fn coherence_at(&self, bx: usize, by: usize) -> f64 {
        self.coherence[by * self.cols + bx]
    }

    /// Orientation of the block containing pixel `(x, y)`.
    pub fn angle_at(&self, x: usize, y: usize) -> f64 {
        let bx = (x / self.block_size).min(self.cols - 1);
        let by = (y / self.block_size).min(self.rows - 1);
        self.angle(bx, by)
    }
}

/// Gradient-square averaging per block; ridges run perpendicular to the mean gradient.
pub fn orientation_field(gray: &ChannelImage, block_size: usize) -> OrientationField {
    let bs = block_size.max(1);
    let (w, h) = (gray.width(), gray.height());
    let cols = w.div_ceil(bs);
    let rows = h.div_ceil(bs);
    let (gx, gy) = sobel(gray);
    let mut sxx = vec![0f64; cols * rows];
    let mut syy = vec![0f64; cols * rows];
    let mut sxy = vec![0f64; cols * rows];
    for y in 0..h {
        let row = (y / bs) * cols;
        for x in 0..w {
            let (a, b) = (gx[y * w + x] as f64, gy[y * w + x] as f64);
            let k = row + x / bs;
            sxx[k] += a * a;
            syy[k] += b * b;
            sxy[k] += a * b;
        }
    }
    let mut angles = Vec::with_capacity(cols * rows);
    let mut coherence = Vec::with_capacity(cols * rows);
    for k in 0..cols * rows {
        let (c, s) = (sxx[k] - syy[k], 2.0 * sxy[k]);
        let energy = sxx[k] + syy[k];
        angles.push((0.5 * s.atan2(c) + FRAC_PI_2).rem_euclid(PI));
        coherence.push(if energy > 0.0 { (c.hypot(s) / energy).min(1.0) } else { 0.0 });
    }
    OrientationField {
        block_size: bs,
        cols,
        rows,
        angles,
        coherence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_dist(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(PI);
        d.min(PI - d)
    }

    #[test]
    fn stripes() {
        let v = ChannelImage::from_fn(64, 48, |x, _| (128.0 + 100.0 * (x as f64 * 0.8).sin()) as u8);
        let of = orientation_field(&v, 16);
        assert_eq!((of.cols, of.rows), (4, 3));
        for k in 0..of.angles.len() {
            assert!(line_dist(of.angles[k], FRAC_PI_2) < 0.02);
            assert!(of.coherence[k] >= 0.9);
        }
        let hz = ChannelImage::from_fn(50, 50, |_, y| (128.0 + 100.0 * (y as f64 * 0.8).sin()) as u8);
        let of = orientation_field(&hz, 16);
        assert_eq!((of.cols, of.rows), (4, 4));
        for &a in &of.angles {
            assert!(line_dist(a, 0.0) < 0.02);
        }
    }

    #[test]
    fn diagonal_and_flat() {
        // ridges along x == y run at π/4 in y-down pixel coordinates
        let d = ChannelImage::from_fn(64, 64, |x, y| (128.0 + 100.0 * ((x as f64 - y as f64) * 0.6).sin()) as u8);
        let of = orientation_field(&d, 16);
        assert!(line_dist(of.angle(1, 1), PI / 4.0) < 0.05);
        let flat = orientation_field(&ChannelImage::filled(32, 32, 70), 16);
        for k in 0..flat.angles.len() {
            assert!(flat.coherence[k] < 1e-9);
            assert!((0.0..PI).contains(&flat.angles[k]));
        }
    }
}
