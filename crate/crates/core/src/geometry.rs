//! Rotation correction, finger separation, fingertip cropping and finger-ID assignment.

use serde::{Deserialize, Serialize};

use crate::config::GeometryConfig;
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::raster::{gaussian_blur_channel, rotate_image_within, rotate_mask, sobel, BinaryMask, Interpolation, RasterImage, Rect, Rotation};
use crate::segmentation::{component_order, Runs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandSide {
    Left,
    Right,
}

impl std::str::FromStr for HandSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(HandSide::Left),
            "right" | "r" => Ok(HandSide::Right),
            other => Err(Error::Config(format!("unknown hand `{other}`"))),
        }
    }
}

/// ISO/IEC 19794-4 finger position: 2–5 right index..little, 7–10 left index..little.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct FingerId(u8);

impl FingerId {
    pub fn new(code: u8) -> Result<Self> {
        match code {
            2..=5 | 7..=10 => Ok(Self(code)),
            other => Err(Error::InvalidFingerId(other)),
        }
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn hand(self) -> HandSide {
        if self.0 <= 5 {
            HandSide::Right
        } else {
            HandSide::Left
        }
    }
}

impl TryFrom<u8> for FingerId {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FingerId> for u8 {
    fn from(f: FingerId) -> u8 {
        f.0
    }
}

impl std::fmt::Display for FingerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Finger IDs of a hand in left-to-right order of the upright frame, palm toward the camera.
pub fn finger_order(hand: HandSide) -> [FingerId; 4] {
    match hand {
        HandSide::Right => [FingerId(2), FingerId(3), FingerId(4), FingerId(5)],
        HandSide::Left => [FingerId(10), FingerId(9), FingerId(8), FingerId(7)],
    }
}

/// 2D affine map `(x, y) -> (a x + b y + c, d x + e y + f)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        e: 1.0,
        f: 0.0,
    };

    pub fn translation(tx: f64, ty: f64) -> Self {
        Affine {
            c: tx,
            f: ty,
            ..Self::IDENTITY
        }
    }

    /// Rotated-canvas coordinates back to source coordinates.
    pub fn rotation_inverse(rot: &Rotation) -> Self {
        let (c0x, c0y) = rot.inverse(0.0, 0.0);
        let (c1x, c1y) = rot.inverse(1.0, 0.0);
        let (c2x, c2y) = rot.inverse(0.0, 1.0);
        Affine {
            a: c1x - c0x,
            b: c2x - c0x,
            c: c0x,
            d: c1y - c0y,
            e: c2y - c0y,
            f: c0y,
        }
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.a * x + self.b * y + self.c, self.d * x + self.e * y + self.f)
    }

    /// `self ∘ inner`: applies `inner` first.
    pub fn then_from(&self, inner: &Affine) -> Affine {
        Affine {
            a: self.a * inner.a + self.b * inner.d,
            b: self.a * inner.b + self.b * inner.e,
            c: self.a * inner.c + self.b * inner.f + self.c,
            d: self.d * inner.a + self.e * inner.d,
            e: self.d * inner.b + self.e * inner.e,
            f: self.d * inner.c + self.e * inner.f + self.f,
        }
    }
}

/// One separated finger: color crop, its mask, and its left-to-right position.
#[derive(Clone, Debug, PartialEq)]
pub struct FingerCrop {
    pub image: RasterImage,
    pub mask: BinaryMask,
    pub order_index: usize,
    /// Maps crop pixel coordinates back to the frame the crop came from.
    pub to_frame: Affine,
}

impl FingerCrop {
    /// Mask centroid in frame coordinates.
    pub fn frame_centroid(&self) -> (f64, f64) {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for y in 0..self.mask.height() {
            for x in 0..self.mask.width() {
                if self.mask.get(x, y) {
                    sx += x as f64;
                    sy += y as f64;
                    n += 1;
                }
            }
        }
        if n == 0 {
            return self.to_frame.apply(0.0, 0.0);
        }
        self.to_frame.apply(sx / n as f64, sy / n as f64)
    }
}

/// Quadrant rotation (CCW degrees) that brings the border with the most foreground to
/// the bottom. Ties resolve bottom, left, top, right.
pub fn coarse_rotation_angle(mask: &BinaryMask) -> Result<u32> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let (w, h) = (mask.width(), mask.height());
    let bottom = (0..w).filter(|&x| mask.get(x, h - 1)).count();
    let left = (0..h).filter(|&y| mask.get(0, y)).count();
    let top = (0..w).filter(|&x| mask.get(x, 0)).count();
    let right = (0..h).filter(|&y| mask.get(w - 1, y)).count();
    let mut best = (bottom, 0u32);
    for (count, angle) in [(left, 90u32), (top, 180), (right, 270)] {
        if count > best.0 {
            best = (count, angle);
        }
    }
    Ok(best.1)
}

/// Dominant boundary direction of a mask, as a screen angle in degrees within `[0, 180)`.
///
/// Finger sides dominate the outline of a hand mask, so this is the finger axis.
/// The image border is not part of the outline.
pub fn dominant_axis_angle(mask: &BinaryMask) -> Option<f64> {
    let (w, h) = (mask.width(), mask.height());
    if w < 3 || h < 3 {
        return None;
    }
    // gradients vanish a few pixels away from the outline, so a padded bbox suffices
    let b = mask.bbox()?;
    let pad = 8;
    let (x0, y0) = (b.x0.saturating_sub(pad), b.y0.saturating_sub(pad));
    let (x1, y1) = ((b.x1 + pad).min(w), (b.y1 + pad).min(h));
    let region = mask.crop(x0, y0, x1 - x0, y1 - y0);
    // smoothing turns the staircase outline into gradients with continuous direction
    let soft = gaussian_blur_channel(&region.to_channel(), 1.5);
    let (gx, gy) = sobel(&soft);
    let (mut jxx, mut jyy, mut jxy) = (0f64, 0f64, 0f64);
    for (&a, &b) in gx.iter().zip(&gy) {
        let (a, b) = (a as f64, b as f64);
        jxx += a * a;
        jyy += b * b;
        jxy += a * b;
    }
    if jxx + jyy == 0.0 {
        return None;
    }
    // gradient direction in y-down coordinates; the outline runs perpendicular to it
    let grad = 0.5 * (2.0 * jxy).atan2(jxx - jyy);
    let edge_down = grad + std::f64::consts::FRAC_PI_2;
    Some((-edge_down).to_degrees().rem_euclid(180.0))
}

/// Total CCW rotation for an upright hand: the quadrant from border voting, plus the
/// residual tilt of the finger axis when `tilt_correction` is on.
pub fn upright_rotation_angle(mask: &BinaryMask, cfg: &GeometryConfig) -> Result<f64> {
    let coarse = coarse_rotation_angle(mask)? as f64;
    if !cfg.tilt_correction {
        return Ok(coarse);
    }
    let Some(axis) = dominant_axis_angle(mask) else {
        return Ok(coarse);
    };
    let residual = canonical_half_turn(90.0 - (axis + coarse));
    Ok(coarse + residual)
}

/// Maps an angle onto `(-90, 90]`.
fn canonical_half_turn(a: f64) -> f64 {
    let r = a.rem_euclid(180.0);
    if r > 90.0 {
        r - 180.0
    } else {
        r
    }
}

/// Rotates an image/mask pair and crops both to the rotated mask's bounding box.
/// The returned affine maps the new coordinates back to the input ones.
pub fn rotate_and_crop(img: &RasterImage, mask: &BinaryMask, angle_ccw: f64) -> Result<(RasterImage, BinaryMask, Affine)> {
    let rot = Rotation::new(mask.width(), mask.height(), angle_ccw);
    let rmask = rotate_mask(mask, angle_ccw);
    let bbox = rmask.bbox().ok_or(Error::EmptyMask)?;
    let rimg = rotate_image_within(img, angle_ccw, Interpolation::Bilinear, &rmask);
    let to_src = Affine::rotation_inverse(&rot).then_from(&Affine::translation(bbox.x0 as f64, bbox.y0 as f64));
    Ok((
        rimg.crop(bbox.x0, bbox.y0, bbox.width(), bbox.height()),
        rmask.crop(bbox.x0, bbox.y0, bbox.width(), bbox.height()),
        to_src,
    ))
}

/// Trims rows off the bottom until exactly `expected_fingers` dominant components
/// remain, then crops each of them, ordered left to right by centroid.
pub fn separate_fingers(img: &RasterImage, mask: &BinaryMask, cfg: &GeometryConfig) -> Result<Vec<FingerCrop>> {
    assert_eq!((img.width(), img.height()), (mask.width(), mask.height()));
    let h = mask.height();
    let hand_area = mask.count();
    if hand_area == 0 {
        return Err(Error::EmptyMask);
    }
    let min_area = cfg.finger_min_fraction * hand_area as f64;
    let step = ((cfg.trim_step * h as f64).round() as usize).max(1);
    let budget = (cfg.max_trim * h as f64).floor() as usize;
    let runs = Runs::from_mask(mask);
    let mut trimmed = 0usize;
    loop {
        let limit = h - trimmed;
        let labels = runs.label(limit);
        let dominant: Vec<usize> = component_order(&labels.stats)
            .into_iter()
            .filter(|&c| labels.stats[c].area as f64 >= min_area)
            .collect();
        if dominant.len() > cfg.expected_fingers {
            return Err(Error::DiscardFrame {
                found: dominant.len(),
                expected: cfg.expected_fingers,
            });
        }
        if dominant.len() == cfg.expected_fingers {
            let mut fingers: Vec<usize> = dominant;
            fingers.sort_by(|&a, &b| {
                let ca = labels.stats[a].sx / labels.stats[a].area as f64;
                let cb = labels.stats[b].sx / labels.stats[b].area as f64;
                ca.total_cmp(&cb)
            });
            return Ok(fingers
                .iter()
                .enumerate()
                .map(|(order_index, &c)| {
                    let st = &labels.stats[c];
                    let bbox = Rect {
                        x0: st.x0,
                        y0: st.y0,
                        x1: st.x1,
                        y1: st.y1,
                    };
                    let mut m = BinaryMask::new(bbox.width(), bbox.height());
                    for (r, &rc) in labels.run_comp.iter().enumerate() {
                        if rc == c {
                            let (y, s, e) = runs.runs[r];
                            for x in s..e {
                                m.set(x - bbox.x0, y - bbox.y0, true);
                            }
                        }
                    }
                    FingerCrop {
                        image: img.crop(bbox.x0, bbox.y0, bbox.width(), bbox.height()),
                        mask: m,
                        order_index,
                        to_frame: Affine::translation(bbox.x0 as f64, bbox.y0 as f64),
                    }
                })
                .collect());
        }
        if trimmed + step > budget || trimmed + step >= h {
            return Err(Error::SeparationFailed { trimmed_rows: trimmed });
        }
        trimmed += step;
    }
}

/// Convex hull (counter-clockwise in y-down coordinates, no collinear points).
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len() + 1);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Minimum-area enclosing rectangle found by rotating calipers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinRect {
    /// Unit direction of the long side (y-down coordinates).
    pub long_dir: (f64, f64),
    pub long: f64,
    pub short: f64,
}

impl MinRect {
    pub fn area(&self) -> f64 {
        self.long * self.short
    }
}

pub fn min_area_rect(hull: &[(f64, f64)]) -> Option<MinRect> {
    if hull.is_empty() {
        return None;
    }
    if hull.len() == 1 {
        return Some(MinRect {
            long_dir: (0.0, 1.0),
            long: 0.0,
            short: 0.0,
        });
    }
    let mut best: Option<MinRect> = None;
    for i in 0..hull.len() {
        let p = hull[i];
        let q = hull[(i + 1) % hull.len()];
        let (dx, dy) = (q.0 - p.0, q.1 - p.1);
        let len = dx.hypot(dy);
        if len == 0.0 {
            continue;
        }
        let u = (dx / len, dy / len);
        let v = (-u.1, u.0);
        let (mut umin, mut umax, mut vmin, mut vmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(x, y) in hull {
            let pu = x * u.0 + y * u.1;
            let pv = x * v.0 + y * v.1;
            umin = umin.min(pu);
            umax = umax.max(pu);
            vmin = vmin.min(pv);
            vmax = vmax.max(pv);
        }
        let (eu, ev) = (umax - umin, vmax - vmin);
        let rect = if eu >= ev {
            MinRect { long_dir: u, long: eu, short: ev }
        } else {
            MinRect { long_dir: v, long: ev, short: eu }
        };
        let better = match &best {
            None => true,
            Some(b) => rect.area() < b.area() * (1.0 - 1e-12),
        };
        if better {
            best = Some(rect);
        }
    }
    best
}

/// Pixel-square corners of the leftmost and rightmost pixel in each row; their hull is
/// the hull of the whole foreground.
fn outline_corners(mask: &BinaryMask) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for y in 0..mask.height() {
        let row = &mask.bits()[y * mask.width()..(y + 1) * mask.width()];
        let Some(first) = row.iter().position(|&b| b != 0) else {
            continue;
        };
        let last = row.iter().rposition(|&b| b != 0).unwrap();
        let (yf, yt) = (y as f64, y as f64 + 1.0);
        for x in [first as f64, last as f64 + 1.0] {
            pts.push((x, yf));
            pts.push((x, yt));
        }
    }
    pts
}

/// CCW rotation in `(-90, 90]` degrees that makes the long side of the component's
/// minimum-area rectangle vertical. Square rectangles give 0.
pub fn fine_rotation_angle(mask: &BinaryMask) -> Result<f64> {
    let hull = convex_hull(&outline_corners(mask));
    let rect = min_area_rect(&hull).ok_or(Error::EmptyMask)?;
    if rect.long - rect.short <= 1e-9 * rect.long.max(1.0) {
        return Ok(0.0);
    }
    let (dx, dy) = rect.long_dir;
    let mut screen = (-dy).atan2(dx).to_degrees().rem_euclid(180.0);
    // on a staircase outline the rectangle snaps to the pixel grid at small tilts and on
    // diagonals; splitting the difference with the principal axis of the pixels damps that
    if let Some(axis) = principal_axis(mask) {
        let d = (axis - screen + 90.0).rem_euclid(180.0) - 90.0;
        if d.abs() <= MOMENT_REFINE_DEG {
            screen = (screen + d / 2.0).rem_euclid(180.0);
        }
    }
    Ok(canonical_half_turn(90.0 - screen))
}

const MOMENT_REFINE_DEG: f64 = 5.0;

/// Screen angle in `[0, 180)` of the long principal axis of the set pixels, `None` when
/// the second moments are isotropic.
fn principal_axis(mask: &BinaryMask) -> Option<f64> {
    let (w, h) = (mask.width(), mask.height());
    let (mut n, mut sx, mut sy) = (0f64, 0f64, 0f64);
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                n += 1.0;
                sx += x as f64;
                sy += y as f64;
            }
        }
    }
    if n == 0.0 {
        return None;
    }
    let (cx, cy) = (sx / n, sy / n);
    let (mut mxx, mut myy, mut mxy) = (0f64, 0f64, 0f64);
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                let (u, v) = (x as f64 - cx, y as f64 - cy);
                mxx += u * u;
                myy += v * v;
                mxy += u * v;
            }
        }
    }
    if (mxx - myy).abs() < 1e-9 * (mxx + myy) && mxy.abs() < 1e-9 * (mxx + myy) {
        return None;
    }
    // y grows downward, so the screen angle flips the sign of the image-frame angle
    let img = 0.5 * (2.0 * mxy).atan2(mxx - myy);
    Some((-img).to_degrees().rem_euclid(180.0))
}

/// Keeps the topmost `2 × width` rows when the crop is taller than that.
pub fn crop_fingertip(finger: &FingerCrop) -> FingerCrop {
    let (w, h) = (finger.mask.width(), finger.mask.height());
    if h <= 2 * w {
        return finger.clone();
    }
    FingerCrop {
        image: finger.image.crop(0, 0, w, 2 * w),
        mask: finger.mask.crop(0, 0, w, 2 * w),
        order_index: finger.order_index,
        to_frame: finger.to_frame,
    }
}

/// Keeps only the largest component of a mask.
fn largest_component(mask: &BinaryMask) -> BinaryMask {
    let runs = Runs::from_mask(mask);
    let labels = runs.label(runs.height);
    let Some(&big) = component_order(&labels.stats).first() else {
        return mask.clone();
    };
    if labels.stats.len() == 1 {
        return mask.clone();
    }
    let mut out = BinaryMask::new(mask.width(), mask.height());
    for (r, &c) in labels.run_comp.iter().enumerate() {
        if c == big {
            let (y, s, e) = runs.runs[r];
            for x in s..e {
                out.set(x, y, true);
            }
        }
    }
    out
}

/// Fine rotation of one separated finger followed by the fingertip crop.
pub fn upright_fingertip(finger: &FingerCrop) -> Result<FingerCrop> {
    let angle = fine_rotation_angle(&finger.mask)?;
    let rotated = if angle == 0.0 {
        finger.clone()
    } else {
        let (image, mask, to_src) = rotate_and_crop(&finger.image, &finger.mask, angle)?;
        let mask = largest_component(&mask);
        let bbox = mask.bbox().ok_or(Error::EmptyMask)?;
        FingerCrop {
            image: image.crop(bbox.x0, bbox.y0, bbox.width(), bbox.height()),
            mask: mask.crop(bbox.x0, bbox.y0, bbox.width(), bbox.height()),
            order_index: finger.order_index,
            to_frame: finger
                .to_frame
                .then_from(&to_src)
                .then_from(&Affine::translation(bbox.x0 as f64, bbox.y0 as f64)),
        }
    };
    Ok(crop_fingertip(&rotated))
}

/// Finger IDs for four left-to-right crops.
pub fn assign_finger_ids(crops: &[FingerCrop], hand: HandSide) -> Result<Vec<FingerId>> {
    if crops.len() != 4 {
        return Err(Error::WrongFingerCount(crops.len()));
    }
    let order = finger_order(hand);
    Ok(crops.iter().map(|c| order[c.order_index.min(3)]).collect())
}

/// Whole geometry stage on a segmented frame: upright rotation, separation, and per-finger
/// fine rotation plus fingertip crop. Crops map back to `frame` coordinates.
pub fn locate_fingers(frame: &RasterImage, mask: &BinaryMask, cfg: &GeometryConfig, exec: Exec) -> Result<Vec<FingerCrop>> {
    let angle = upright_rotation_angle(mask, cfg)?;
    let bbox = mask.bbox().ok_or(Error::EmptyMask)?;
    let img = frame.crop(bbox.x0, bbox.y0, bbox.width(), bbox.height());
    let m = mask.crop(bbox.x0, bbox.y0, bbox.width(), bbox.height());
    let (img, m, to_bbox) = rotate_and_crop(&img, &m, angle)?;
    let to_frame = Affine::translation(bbox.x0 as f64, bbox.y0 as f64).then_from(&to_bbox);
    let fingers = separate_fingers(&img, &m, cfg)?;
    exec.map(&fingers, |f| {
        let mut f = f.clone();
        f.to_frame = to_frame.then_from(&f.to_frame);
        upright_fingertip(&f)
    })
    .into_iter()
    .collect()
}
