//! Finger crop → touch-equivalent fingerprint: grayscale, CLAHE, border-eroded ROI,
//! width normalization.

use crate::config::EnhancementConfig;
use crate::error::{Error, Result};
use crate::geometry::{FingerCrop, FingerId};
use crate::raster::{resize_channel_to_width, resize_mask_to_width, to_grayscale, BinaryMask, ChannelImage};

/// Normalized fingerprint sample plus the region of interest it was cut from.
#[derive(Clone, Debug, PartialEq)]
pub struct FingerprintImage {
    pub gray: ChannelImage,
    /// ROI after normalization; every pixel outside it is 0 in `gray`.
    pub roi: BinaryMask,
    pub finger_id: Option<FingerId>,
    /// ROI bounding box before width normalization.
    pub roi_width: usize,
    pub roi_height: usize,
}

impl FingerprintImage {
    /// Wraps an already normalized gray image. The ROI is taken as the horizontal span
    /// of nonzero pixels in each row.
    pub fn from_gray(gray: ChannelImage, finger_id: Option<FingerId>) -> Self {
        let (w, h) = (gray.width(), gray.height());
        let mut roi = BinaryMask::new(w, h);
        for y in 0..h {
            let row = &gray.values()[y * w..(y + 1) * w];
            if let (Some(a), Some(b)) = (row.iter().position(|&v| v != 0), row.iter().rposition(|&v| v != 0)) {
                for x in a..=b {
                    roi.set(x, y, true);
                }
            }
        }
        Self {
            gray,
            roi,
            finger_id,
            roi_width: w,
            roi_height: h,
        }
    }

    pub fn width(&self) -> usize {
        self.gray.width()
    }

    pub fn height(&self) -> usize {
        self.gray.height()
    }
}

/// Per-tile equalization lookup table with clipping and uniform redistribution.
/// A tile holding a single gray level maps through the identity.
pub fn clahe_tile_lut(hist: &[u32; 256], clip_limit: f64) -> [u8; 256] {
    let area: u64 = hist.iter().map(|&v| v as u64).sum();
    let mut lut = [0u8; 256];
    if area == 0 || hist.iter().filter(|&&v| v > 0).count() <= 1 {
        lut.iter_mut().enumerate().for_each(|(i, v)| *v = i as u8);
        return lut;
    }
    let clip = ((clip_limit * area as f64 / 256.0) as u64).max(1);
    let mut h: [u64; 256] = std::array::from_fn(|i| hist[i] as u64);
    let mut excess = 0u64;
    for v in h.iter_mut() {
        if *v > clip {
            excess += *v - clip;
            *v = clip;
        }
    }
    let redist = excess / 256;
    let mut residual = excess % 256;
    h.iter_mut().for_each(|v| *v += redist);
    if residual > 0 {
        let step = (256 / residual as usize).max(1);
        let mut i = 0;
        while i < 256 && residual > 0 {
            h[i] += 1;
            residual -= 1;
            i += step;
        }
    }
    let scale = 255.0 / area as f64;
    let mut cdf = 0u64;
    for (i, out) in lut.iter_mut().enumerate() {
        cdf += h[i];
        *out = (cdf as f64 * scale).round().min(255.0) as u8;
    }
    lut
}

struct TileGrid {
    tx: usize,
    ty: usize,
    tw: f64,
    th: f64,
}

impl TileGrid {
    fn new(w: usize, h: usize, tiles_x: usize, tiles_y: usize) -> Self {
        let tx = tiles_x.clamp(1, w);
        let ty = tiles_y.clamp(1, h);
        Self {
            tx,
            ty,
            tw: w as f64 / tx as f64,
            th: h as f64 / ty as f64,
        }
    }

    fn tile_of(&self, x: usize, y: usize) -> (usize, usize) {
        (
            ((x as f64 / self.tw) as usize).min(self.tx - 1),
            ((y as f64 / self.th) as usize).min(self.ty - 1),
        )
    }
}

/// Lookup tables of every tile, row-major over the tile grid.
pub fn clahe_tile_luts(gray: &ChannelImage, clip_limit: f64, tiles_x: usize, tiles_y: usize) -> Vec<[u8; 256]> {
    let (w, h) = (gray.width(), gray.height());
    let grid = TileGrid::new(w, h, tiles_x, tiles_y);
    let mut hists = vec![[0u32; 256]; grid.tx * grid.ty];
    for y in 0..h {
        for x in 0..w {
            let (i, j) = grid.tile_of(x, y);
            hists[j * grid.tx + i][gray.get(x, y) as usize] += 1;
        }
    }
    hists.iter().map(|hist| clahe_tile_lut(hist, clip_limit)).collect()
}

/// Contrast-limited adaptive histogram equalization with bilinear blending of the tile
/// mappings between tile centers.
pub fn apply_clahe(gray: &ChannelImage, clip_limit: f64, tiles_x: usize, tiles_y: usize) -> ChannelImage {
    let (w, h) = (gray.width(), gray.height());
    let grid = TileGrid::new(w, h, tiles_x, tiles_y);
    let luts = clahe_tile_luts(gray, clip_limit, tiles_x, tiles_y);
    let neighbors = |pos: usize, size: f64, n: usize| -> (usize, usize, f64) {
        let f = (pos as f64 + 0.5) / size - 0.5;
        if f <= 0.0 {
            return (0, 0, 0.0);
        }
        let i0 = (f.floor() as usize).min(n - 1);
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, (f - i0 as f64).min(1.0))
    };
    let xs: Vec<(usize, usize, f64)> = (0..w).map(|x| neighbors(x, grid.tw, grid.tx)).collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (j0, j1, ay) = neighbors(y, grid.th, grid.ty);
        for (x, &(i0, i1, ax)) in xs.iter().enumerate() {
            let v = gray.get(x, y) as usize;
            let l = |i: usize, j: usize| luts[j * grid.tx + i][v] as f64;
            let top = l(i0, j0) * (1.0 - ax) + l(i1, j0) * ax;
            let bot = l(i0, j1) * (1.0 - ax) + l(i1, j1) * ax;
            out.push((top * (1.0 - ay) + bot * ay).round().clamp(0.0, 255.0) as u8);
        }
    }
    ChannelImage::new(w, h, out).unwrap()
}

fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64);
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0: replace the only parabola
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        d[q] = dq * dq + f[p];
    }
}

/// Squared Euclidean distance from each pixel to the nearest background pixel, where
/// everything outside the image counts as background.
pub fn squared_distance_to_background(mask: &BinaryMask) -> Vec<f64> {
    let (w, h) = (mask.width() + 2, mask.height() + 2);
    const INF: f64 = 1e20;
    let mut grid = vec![0f64; w * h];
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                grid[(y + 1) * w + x + 1] = INF;
            }
        }
    }
    let n = w.max(h);
    let (mut f, mut d) = (vec![0f64; n], vec![0f64; n]);
    let (mut v, mut z) = (vec![0usize; n], vec![0f64; n + 1]);
    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        edt_1d(&f[..h], &mut d[..h], &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = d[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&grid[y * w..(y + 1) * w]);
        edt_1d(&f[..w], &mut d[..w], &mut v, &mut z);
        grid[y * w..(y + 1) * w].copy_from_slice(&d[..w]);
    }
    let mut out = Vec::with_capacity(mask.width() * mask.height());
    for y in 0..mask.height() {
        out.extend_from_slice(&grid[(y + 1) * w + 1..(y + 1) * w + 1 + mask.width()]);
    }
    out
}

/// Erosion by a disk of radius `px`: a pixel survives when no background pixel (or the
/// outside of the image) lies within distance `px`.
pub fn erode_mask_border(mask: &BinaryMask, px: usize) -> BinaryMask {
    if px == 0 {
        return mask.clone();
    }
    let dist = squared_distance_to_background(mask);
    let r2 = (px * px) as f64;
    let bits: Vec<u8> = dist.iter().map(|&d| (d > r2) as u8).collect();
    BinaryMask::from_bytes(mask.width(), mask.height(), &bits).unwrap()
}

/// Grayscale → CLAHE → zero outside the eroded mask → crop to its bbox (at most twice
/// as tall as wide, keeping the tip) → resize to the normalized width.
pub fn render_fingerprint(crop: &FingerCrop, finger_id: Option<FingerId>, cfg: &EnhancementConfig) -> Result<FingerprintImage> {
    let gray = to_grayscale(&crop.image);
    let eq = apply_clahe(&gray, cfg.clahe_clip, cfg.clahe_tiles_x, cfg.clahe_tiles_y);
    let roi = erode_mask_border(&crop.mask, cfg.border_px);
    let mut bbox = roi.bbox().ok_or(Error::EmptyRoi)?;
    if bbox.height() > 2 * bbox.width() {
        bbox.y1 = bbox.y0 + 2 * bbox.width();
    }
    let roi = roi.crop(bbox.x0, bbox.y0, bbox.width(), bbox.height());
    let mut cut = eq.crop(bbox.x0, bbox.y0, bbox.width(), bbox.height());
    for (v, &m) in cut.values_mut().iter_mut().zip(roi.bits()) {
        if m == 0 {
            *v = 0;
        }
    }
    let mut norm = resize_channel_to_width(&cut, cfg.norm_width);
    let norm_roi = resize_mask_to_width(&roi, cfg.norm_width);
    for (v, &m) in norm.values_mut().iter_mut().zip(norm_roi.bits()) {
        if m == 0 {
            *v = 0;
        }
    }
    Ok(FingerprintImage {
        gray: norm,
        roi: norm_roi,
        finger_id,
        roi_width: bbox.width(),
        roi_height: bbox.height(),
    })
}

/// Shannon entropy in bits of the gray-level histogram.
pub fn entropy_bits(ch: &ChannelImage) -> f64 {
    let n = (ch.width() * ch.height()) as f64;
    ch.histogram()
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}
