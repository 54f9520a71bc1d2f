//! Pixel containers and the basic pixel operations shared by every stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interleaved 8-bit image with one (gray) or three (RGB) channels, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("zero dimension {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!("{channels} channels")));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "buffer of {} bytes for {width}x{height}x{channels}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    /// Solid RGB image.
    pub fn filled_rgb(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let pixels = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, 3, pixels).expect("valid dimensions")
    }

    pub fn from_gray(gray: &ChannelImage) -> Self {
        Self {
            width: gray.width,
            height: gray.height,
            channels: 1,
            pixels: gray.values.clone(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.pixels[i..i + self.channels]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, value: &[u8]) {
        let i = (y * self.width + x) * self.channels;
        self.pixels[i..i + self.channels].copy_from_slice(value);
    }

    /// Copy of the rectangle `[x0, x0+w) × [y0, y0+h)`; the rectangle must lie inside the image.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> RasterImage {
        assert!(x0 + w <= self.width && y0 + h <= self.height && w > 0 && h > 0);
        let c = self.channels;
        let mut pixels = Vec::with_capacity(w * h * c);
        for y in y0..y0 + h {
            let start = (y * self.width + x0) * c;
            pixels.extend_from_slice(&self.pixels[start..start + w * c]);
        }
        RasterImage {
            width: w,
            height: h,
            channels: c,
            pixels,
        }
    }
}

/// Single 8-bit plane.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelImage {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl ChannelImage {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} values for {width}x{height} channel",
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("valid dimensions")
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values).expect("valid dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [u8] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<u8> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.values[y * self.width + x] = v;
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> ChannelImage {
        assert!(x0 + w <= self.width && y0 + h <= self.height && w > 0 && h > 0);
        let mut values = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let start = y * self.width + x0;
            values.extend_from_slice(&self.values[start..start + w]);
        }
        ChannelImage {
            width: w,
            height: h,
            values,
        }
    }

    pub fn histogram(&self) -> [u64; 256] {
        let mut hist = [0u64; 256];
        for &v in &self.values {
            hist[v as usize] += 1;
        }
        hist
    }
}

/// Axis-aligned pixel rectangle, inclusive of `x0,y0` and exclusive of `x1,y1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }
}

/// One bit per pixel, stored as 0/1 bytes; foreground is 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            bits: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.bits[y * width + x] = f(x, y) as u8;
            }
        }
        m
    }

    /// Builds a mask from 0/1 (or 0/nonzero) bytes.
    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if width == 0 || height == 0 || bytes.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} mask bytes for {width}x{height}",
                bytes.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits: bytes.iter().map(|&b| (b != 0) as u8).collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Raw 0/1 bytes, row-major.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x] != 0
    }

    /// Out-of-bounds coordinates read as background.
    #[inline]
    pub fn get_or_zero(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v as u8;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    pub fn bbox(&self) -> Option<Rect> {
        let mut r: Option<Rect> = None;
        for y in 0..self.height {
            let row = &self.bits[y * self.width..(y + 1) * self.width];
            let Some(first) = row.iter().position(|&b| b != 0) else {
                continue;
            };
            let last = row.iter().rposition(|&b| b != 0).unwrap();
            r = Some(match r {
                None => Rect {
                    x0: first,
                    y0: y,
                    x1: last + 1,
                    y1: y + 1,
                },
                Some(r) => Rect {
                    x0: r.x0.min(first),
                    y0: r.y0,
                    x1: r.x1.max(last + 1),
                    y1: y + 1,
                },
            });
        }
        r
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> BinaryMask {
        assert!(x0 + w <= self.width && y0 + h <= self.height && w > 0 && h > 0);
        let mut bits = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let start = y * self.width + x0;
            bits.extend_from_slice(&self.bits[start..start + w]);
        }
        BinaryMask {
            width: w,
            height: h,
            bits,
        }
    }

    pub fn and(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a & b).collect(),
        }
    }

    /// Foreground as 0/255 gray plane.
    pub fn to_channel(&self) -> ChannelImage {
        ChannelImage::new(
            self.width,
            self.height,
            self.bits.iter().map(|&b| if b != 0 { 255 } else { 0 }).collect(),
        )
        .expect("valid dimensions")
    }
}

/// Channels derivable from an RGB frame for skin segmentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelKind {
    /// Red-difference chroma of BT.601 YCbCr.
    Cr,
    /// HSV hue, 0..360 degrees scaled onto 0..255.
    Hue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Nearest,
    #[default]
    Bilinear,
}

/// Rounds half up and saturates; NaN maps to 0.
#[inline]
fn clamp_round(v: f64) -> u8 {
    // `f64::round` is a libm call on baseline x86-64; truncation after +0.5 is not
    (v + 0.5).clamp(0.0, 255.0) as u8
}

/// BT.601 luma. Single-channel input is returned unchanged.
pub fn to_grayscale(img: &RasterImage) -> ChannelImage {
    if img.channels == 1 {
        return ChannelImage::new(img.width, img.height, img.pixels.clone()).unwrap();
    }
    let values = img
        .pixels
        .chunks_exact(3)
        .map(|p| clamp_round(0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64))
        .collect();
    ChannelImage::new(img.width, img.height, values).unwrap()
}

#[inline]
pub(crate) fn cr_of(r: u8, g: u8, b: u8) -> u8 {
    clamp_round(128.0 + 0.5 * r as f64 - 0.418688 * g as f64 - 0.081312 * b as f64)
}

#[inline]
pub(crate) fn hue_of(r: u8, g: u8, b: u8) -> u8 {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    if delta == 0.0 {
        return 0;
    }
    let h = if max == r {
        let q = (g - b) / delta;
        60.0 * if q < 0.0 { q + 6.0 } else { q }
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    clamp_round(h * 255.0 / 360.0)
}

pub fn extract_channel(img: &RasterImage, kind: ChannelKind) -> Result<ChannelImage> {
    if img.channels != 3 {
        return Err(Error::GrayInput);
    }
    let px = img.pixels.chunks_exact(3);
    let values = match kind {
        ChannelKind::Cr => px.map(|p| cr_of(p[0], p[1], p[2])).collect(),
        ChannelKind::Hue => px.map(|p| hue_of(p[0], p[1], p[2])).collect(),
    };
    ChannelImage::new(img.width, img.height, values)
}

/// Linear map of `[min, max]` onto `[0, 255]`. A constant plane is returned unchanged.
pub fn stretch_histogram(ch: &ChannelImage) -> ChannelImage {
    let (min, max) = ch
        .values
        .iter()
        .fold((255u8, 0u8), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if min == max || (min == 0 && max == 255) {
        return ch.clone();
    }
    let lut = stretch_lut(min, max);
    ChannelImage {
        width: ch.width,
        height: ch.height,
        values: ch.values.iter().map(|&v| lut[v as usize]).collect(),
    }
}

pub(crate) fn stretch_lut(min: u8, max: u8) -> [u8; 256] {
    let mut lut = [0u8; 256];
    let span = (max - min) as f64;
    for (v, out) in lut.iter_mut().enumerate() {
        let t = (v as f64 - min as f64) * 255.0 / span;
        *out = clamp_round(t);
    }
    lut
}

/// Geometry of a rotation about the image center onto an expanded canvas.
///
/// Angles are counter-clockwise as seen on screen (y axis pointing down).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    pub src_width: usize,
    pub src_height: usize,
    pub dst_width: usize,
    pub dst_height: usize,
    cos: f64,
    sin: f64,
}

impl Rotation {
    pub fn new(src_width: usize, src_height: usize, angle_ccw_deg: f64) -> Self {
        assert!(angle_ccw_deg.is_finite(), "rotation angle must be finite");
        let a = angle_ccw_deg.rem_euclid(360.0);
        let quarter = (a / 90.0).round();
        let (cos, sin) = if (a - quarter * 90.0).abs() < 1e-9 {
            match quarter as i64 % 4 {
                0 => (1.0, 0.0),
                1 => (0.0, 1.0),
                2 => (-1.0, 0.0),
                _ => (0.0, -1.0),
            }
        } else {
            let r = a.to_radians();
            (r.cos(), r.sin())
        };
        let (w, h) = (src_width as f64, src_height as f64);
        let dw = w * cos.abs() + h * sin.abs();
        let dh = w * sin.abs() + h * cos.abs();
        // matching the parity of the nearer source side keeps the two pixel grids aligned
        // at small angles instead of half a pixel apart
        let (pw, ph) = if cos.abs() >= sin.abs() { (src_width, src_height) } else { (src_height, src_width) };
        let fit = |d: f64, parity: usize| {
            let n = ((d - 1e-6).ceil() as usize).max(1);
            n + (n + parity) % 2
        };
        Self {
            src_width,
            src_height,
            dst_width: fit(dw, pw),
            dst_height: fit(dh, ph),
            cos,
            sin,
        }
    }

    fn src_center(&self) -> (f64, f64) {
        ((self.src_width as f64 - 1.0) / 2.0, (self.src_height as f64 - 1.0) / 2.0)
    }

    fn dst_center(&self) -> (f64, f64) {
        ((self.dst_width as f64 - 1.0) / 2.0, (self.dst_height as f64 - 1.0) / 2.0)
    }

    /// Maps a source pixel coordinate into the rotated canvas.
    pub fn forward(&self, x: f64, y: f64) -> (f64, f64) {
        let (cx, cy) = self.src_center();
        let (ox, oy) = self.dst_center();
        let (dx, dy) = (x - cx, y - cy);
        (
            ox + dx * self.cos + dy * self.sin,
            oy - dx * self.sin + dy * self.cos,
        )
    }

    /// Maps a rotated-canvas coordinate back into the source.
    pub fn inverse(&self, x: f64, y: f64) -> (f64, f64) {
        let (cx, cy) = self.src_center();
        let (ox, oy) = self.dst_center();
        let (dx, dy) = (x - ox, y - oy);
        (
            cx + dx * self.cos - dy * self.sin,
            cy + dx * self.sin + dy * self.cos,
        )
    }
}

fn rotate_buffer(
    src: &[u8],
    rot: &Rotation,
    channels: usize,
    interp: Interpolation,
    only: Option<&BinaryMask>,
) -> Vec<u8> {
    let (sw, sh) = (rot.src_width, rot.src_height);
    let mut out = vec![0u8; rot.dst_width * rot.dst_height * channels];
    let (cx, cy) = rot.src_center();
    let (ox, oy) = rot.dst_center();
    for y in 0..rot.dst_height {
        let dy = y as f64 - oy;
        // source position advances linearly along a row
        let mut sx = cx + (0.0 - ox) * rot.cos - dy * rot.sin;
        let mut sy = cy + (0.0 - ox) * rot.sin + dy * rot.cos;
        for x in 0..rot.dst_width {
            let (px, py) = (sx, sy);
            sx += rot.cos;
            sy += rot.sin;
            if let Some(m) = only {
                if !m.get(x, y) {
                    continue;
                }
            }
            if px < -0.5 || py < -0.5 || px > sw as f64 - 0.5 || py > sh as f64 - 0.5 {
                continue;
            }
            let o = (y * rot.dst_width + x) * channels;
            match interp {
                Interpolation::Nearest => {
                    let ix = (px.round() as usize).min(sw - 1);
                    let iy = (py.round() as usize).min(sh - 1);
                    let i = (iy * sw + ix) * channels;
                    out[o..o + channels].copy_from_slice(&src[i..i + channels]);
                }
                Interpolation::Bilinear => {
                    let fx = px.clamp(0.0, (sw - 1) as f64);
                    let fy = py.clamp(0.0, (sh - 1) as f64);
                    let x0 = fx.floor() as usize;
                    let y0 = fy.floor() as usize;
                    let x1 = (x0 + 1).min(sw - 1);
                    let y1 = (y0 + 1).min(sh - 1);
                    let ax = fx - x0 as f64;
                    let ay = fy - y0 as f64;
                    for c in 0..channels {
                        let p = |xx: usize, yy: usize| src[(yy * sw + xx) * channels + c] as f64;
                        let top = p(x0, y0) * (1.0 - ax) + p(x1, y0) * ax;
                        let bot = p(x0, y1) * (1.0 - ax) + p(x1, y1) * ax;
                        out[o + c] = clamp_round(top * (1.0 - ay) + bot * ay);
                    }
                }
            }
        }
    }
    out
}

/// Rotates about the image center; the canvas grows to hold the whole rotated extent.
pub fn rotate_image(img: &RasterImage, angle_ccw_deg: f64, interp: Interpolation) -> RasterImage {
    let rot = Rotation::new(img.width, img.height, angle_ccw_deg);
    let pixels = rotate_buffer(&img.pixels, &rot, img.channels, interp, None);
    RasterImage::new(rot.dst_width, rot.dst_height, img.channels, pixels).unwrap()
}

/// Like [`rotate_image`], but only samples pixels inside `dst_mask` (already in rotated
/// coordinates); the rest stay 0.
pub fn rotate_image_within(
    img: &RasterImage,
    angle_ccw_deg: f64,
    interp: Interpolation,
    dst_mask: &BinaryMask,
) -> RasterImage {
    let rot = Rotation::new(img.width, img.height, angle_ccw_deg);
    assert_eq!((rot.dst_width, rot.dst_height), (dst_mask.width, dst_mask.height));
    let pixels = rotate_buffer(&img.pixels, &rot, img.channels, interp, Some(dst_mask));
    RasterImage::new(rot.dst_width, rot.dst_height, img.channels, pixels).unwrap()
}

/// Masks always rotate with nearest-neighbour sampling.
pub fn rotate_mask(mask: &BinaryMask, angle_ccw_deg: f64) -> BinaryMask {
    let rot = Rotation::new(mask.width, mask.height, angle_ccw_deg);
    let bits = rotate_buffer(&mask.bits, &rot, 1, Interpolation::Nearest, None);
    BinaryMask {
        width: rot.dst_width,
        height: rot.dst_height,
        bits,
    }
}

fn resize_height(w: usize, h: usize, target_width: usize) -> usize {
    ((h as f64 * target_width as f64 / w as f64).round() as usize).max(1)
}

fn resize_bilinear(src: &[u8], w: usize, h: usize, c: usize, tw: usize, th: usize) -> Vec<u8> {
    let sx = w as f64 / tw as f64;
    let sy = h as f64 / th as f64;
    let xs: Vec<(usize, usize, f64)> = (0..tw)
        .map(|x| {
            let f = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = f.floor() as usize;
            (x0, (x0 + 1).min(w - 1), f - x0 as f64)
        })
        .collect();
    let mut out = Vec::with_capacity(tw * th * c);
    for y in 0..th {
        let f = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = f.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ay = f - y0 as f64;
        for &(x0, x1, ax) in &xs {
            for ch in 0..c {
                let p = |xx: usize, yy: usize| src[(yy * w + xx) * c + ch] as f64;
                let top = p(x0, y0) * (1.0 - ax) + p(x1, y0) * ax;
                let bot = p(x0, y1) * (1.0 - ax) + p(x1, y1) * ax;
                out.push(clamp_round(top * (1.0 - ay) + bot * ay));
            }
        }
    }
    out
}

/// Bilinear resample to an exact width, keeping the aspect ratio.
pub fn resize_to_width(img: &RasterImage, target_width: usize) -> RasterImage {
    assert!(target_width >= 1);
    let th = resize_height(img.width, img.height, target_width);
    let pixels = resize_bilinear(&img.pixels, img.width, img.height, img.channels, target_width, th);
    RasterImage::new(target_width, th, img.channels, pixels).unwrap()
}

pub fn resize_channel_to_width(ch: &ChannelImage, target_width: usize) -> ChannelImage {
    assert!(target_width >= 1);
    let th = resize_height(ch.width, ch.height, target_width);
    let values = resize_bilinear(&ch.values, ch.width, ch.height, 1, target_width, th);
    ChannelImage::new(target_width, th, values).unwrap()
}

/// Nearest-neighbour resample of a mask to an exact width.
pub fn resize_mask_to_width(mask: &BinaryMask, target_width: usize) -> BinaryMask {
    assert!(target_width >= 1);
    let (w, h) = (mask.width, mask.height);
    let th = resize_height(w, h, target_width);
    let sx = w as f64 / target_width as f64;
    let sy = h as f64 / th as f64;
    BinaryMask::from_fn(target_width, th, |x, y| {
        let ix = (((x as f64 + 0.5) * sx) as usize).min(w - 1);
        let iy = (((y as f64 + 0.5) * sy) as usize).min(h - 1);
        mask.get(ix, iy)
    })
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

fn blur_plane(src: &[u8], w: usize, h: usize, c: usize, sigma: f64) -> Vec<u8> {
    let k = gaussian_kernel(sigma);
    let r = k.len() / 2;
    let row_len = w * c;
    let mut tmp = vec![0f64; src.len()];
    let mut padded = vec![0f64; (w + 2 * r) * c];
    for y in 0..h {
        let row = &src[y * row_len..(y + 1) * row_len];
        for px in 0..w + 2 * r {
            let sx = px.saturating_sub(r).min(w - 1);
            for ch in 0..c {
                padded[px * c + ch] = row[sx * c + ch] as f64;
            }
        }
        let out = &mut tmp[y * row_len..(y + 1) * row_len];
        for (i, kv) in k.iter().enumerate() {
            let taps = &padded[i * c..i * c + row_len];
            for (o, &v) in out.iter_mut().zip(taps) {
                *o += kv * v;
            }
        }
    }
    let mut out = vec![0u8; src.len()];
    let mut acc = vec![0f64; row_len];
    for y in 0..h {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for (i, kv) in k.iter().enumerate() {
            let yy = (y + i).saturating_sub(r).min(h - 1);
            for (a, &v) in acc.iter_mut().zip(&tmp[yy * row_len..(yy + 1) * row_len]) {
                *a += kv * v;
            }
        }
        for (o, &a) in out[y * row_len..(y + 1) * row_len].iter_mut().zip(&acc) {
            *o = clamp_round(a);
        }
    }
    out
}

/// Separable Gaussian blur with replicated borders. `sigma <= 0` is a copy.
pub fn gaussian_blur(img: &RasterImage, sigma: f64) -> RasterImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let pixels = blur_plane(&img.pixels, img.width, img.height, img.channels, sigma);
    RasterImage::new(img.width, img.height, img.channels, pixels).unwrap()
}

pub fn gaussian_blur_channel(ch: &ChannelImage, sigma: f64) -> ChannelImage {
    if sigma <= 0.0 {
        return ch.clone();
    }
    let values = blur_plane(&ch.values, ch.width, ch.height, 1, sigma);
    ChannelImage::new(ch.width, ch.height, values).unwrap()
}

/// 3×3 Sobel responses with replicated borders.
pub fn sobel(ch: &ChannelImage) -> (Vec<f32>, Vec<f32>) {
    let (w, h) = (ch.width, ch.height);
    let mut gx = vec![0f32; w * h];
    let mut gy = vec![0f32; w * h];
    let at = |x: isize, y: isize| -> f32 {
        let xx = x.clamp(0, w as isize - 1) as usize;
        let yy = y.clamp(0, h as isize - 1) as usize;
        ch.values[yy * w + xx] as f32
    };
    for y in 0..h as isize {
        for x in 0..w as isize {
            let sx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let sy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = y as usize * w + x as usize;
            gx[i] = sx;
            gy[i] = sy;
        }
    }
    (gx, gy)
}
