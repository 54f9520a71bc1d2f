//! Hand segmentation from a color frame and the first plausibility check.
//!
//! The Cr plane of YCbCr and the hue plane of HSV are stretched to the full range and
//! thresholded with Otsu's method; the two binary masks are intersected and cleaned by
//! a 3×3 opening and closing.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

pub use crate::raster::BinaryMask;
use crate::config::SegmentationConfig;
use crate::error::{Error, Result};
use crate::raster::{extract_channel, stretch_histogram, stretch_lut, ChannelImage, ChannelKind, RasterImage, Rect};

/// Threshold maximizing the between-class variance, class A being bins `<= t`.
/// Ties go to the smallest threshold.
pub fn otsu_threshold(hist: &[u64; 256]) -> Result<u8> {
    if hist.iter().all(|&h| h == 0) {
        return Err(Error::EmptyHistogram);
    }
    Ok(otsu_u128(hist).unwrap_or_else(|| otsu_big(hist)))
}

// Between-class variance of a split is (s0·w1 − s1·w0)² / (w0·w1 · total²); the common
// total² is dropped and candidates are compared as exact fractions num / den.

/// `None` when an intermediate value leaves u128.
fn otsu_u128(hist: &[u64; 256]) -> Option<u8> {
    let total = hist.iter().try_fold(0u64, |a, &h| a.checked_add(h))?;
    let sum_all: u128 = hist.iter().enumerate().map(|(i, &h)| i as u128 * h as u128).sum();
    let mut best_t = 0u8;
    let (mut best_num, mut best_den) = (0u128, 1u64);
    let (mut w0, mut s0) = (0u64, 0u128);
    for t in 0..256usize {
        w0 += hist[t];
        s0 += t as u128 * hist[t] as u128;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let a = s0.checked_mul(w1 as u128)?;
        let b = (sum_all - s0).checked_mul(w0 as u128)?;
        let d = a.abs_diff(b);
        let num = d.checked_mul(d)?;
        let den = w0.checked_mul(w1)?;
        if wide_mul(num, best_den) > wide_mul(best_num, den) {
            best_num = num;
            best_den = den;
            best_t = t as u8;
        }
    }
    Some(best_t)
}

fn otsu_big(hist: &[u64; 256]) -> u8 {
    let total: BigUint = hist.iter().map(|&h| BigUint::from(h)).sum();
    let sum_all: BigUint = hist.iter().enumerate().map(|(i, &h)| BigUint::from(h) * i as u32).sum();
    let mut best_t = 0u8;
    let (mut best_num, mut best_den) = (BigUint::ZERO, BigUint::from(1u8));
    let (mut w0, mut s0) = (BigUint::ZERO, BigUint::ZERO);
    for (t, &h) in hist.iter().enumerate() {
        w0 += h;
        s0 += BigUint::from(h) * t as u32;
        let w1 = &total - &w0;
        if w0 == BigUint::ZERO || w1 == BigUint::ZERO {
            continue;
        }
        let a = &s0 * &w1;
        let b = (&sum_all - &s0) * &w0;
        let d = if a > b { a - b } else { b - a };
        let num = &d * &d;
        let den = &w0 * &w1;
        if &num * &best_den > &best_num * &den {
            best_num = num;
            best_den = den;
            best_t = t as u8;
        }
    }
    best_t
}

/// Full 256-bit product as (high, low).
fn wide_mul(a: u128, b: u64) -> (u128, u128) {
    let (ah, al) = (a >> 64, a & u64::MAX as u128);
    let p0 = al * b as u128;
    let p1 = ah * b as u128;
    let lo = p0.wrapping_add(p1 << 64);
    let carry = (lo < p0) as u128;
    ((p1 >> 64).wrapping_add(carry), lo)
}

/// Binary mask of skin-colored pixels.
pub fn segment_hand(img: &RasterImage, cfg: &SegmentationConfig) -> Result<BinaryMask> {
    let cr = extract_channel(img, ChannelKind::Cr)?;
    let hue = extract_channel(img, ChannelKind::Hue)?;
    let (w, h) = (img.width(), img.height());

    let cr_st = stretch_histogram(&cr);
    let t_cr = otsu_threshold(&cr_st.histogram())?;
    let cr_bits: Vec<u8> = cr_st
        .values()
        .iter()
        .zip(cr.values())
        .map(|(&s, &raw)| (s > t_cr && raw >= cfg.cr_min) as u8)
        .collect();

    let hue_bits = hue_skin_band(&hue, cfg.hue_band);
    let bits: Vec<u8> = cr_bits.iter().zip(&hue_bits).map(|(a, b)| a & b).collect();
    let mut mask = BinaryMask::from_bytes(w, h, &bits)?;
    mask = open3(&mask);
    mask = close3(&mask);
    Ok(mask)
}

/// Hue is circular with red at both ends; shifting by half a turn puts red mid-range so a
/// single Otsu split separates the skin band from the background hues.
fn hue_skin_band(hue: &ChannelImage, band: u8) -> Vec<u8> {
    let shifted: Vec<u8> = hue.values().iter().map(|&v| v.wrapping_add(128)).collect();
    let (min, max) = shifted
        .iter()
        .fold((255u8, 0u8), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let lut = if min == max {
        let mut id = [0u8; 256];
        id.iter_mut().enumerate().for_each(|(i, v)| *v = i as u8);
        id
    } else {
        stretch_lut(min, max)
    };
    let mut hist = [0u64; 256];
    for &v in &shifted {
        hist[lut[v as usize] as usize] += 1;
    }
    let t = otsu_threshold(&hist).unwrap_or(0);
    // red (shifted 128) position after stretching
    let red_pos = if min == max { 128.0 } else { (128.0 - min as f64) * 255.0 / (max - min) as f64 };
    let (mut n_lo, mut s_lo, mut n_hi, mut s_hi) = (0u64, 0f64, 0u64, 0f64);
    for (i, &c) in hist.iter().enumerate() {
        if i <= t as usize {
            n_lo += c;
            s_lo += i as f64 * c as f64;
        } else {
            n_hi += c;
            s_hi += i as f64 * c as f64;
        }
    }
    let take_high = if n_lo == 0 {
        true
    } else if n_hi == 0 {
        false
    } else {
        (s_hi / n_hi as f64 - red_pos).abs() <= (s_lo / n_lo as f64 - red_pos).abs()
    };
    hue.values()
        .iter()
        .zip(&shifted)
        .map(|(&raw, &sh)| {
            let s = lut[sh as usize];
            let in_class = if take_high { s > t } else { s <= t };
            let red_dist = raw.min(raw.wrapping_neg());
            (in_class && red_dist <= band) as u8
        })
        .collect()
}

fn morph3(mask: &BinaryMask, dilate: bool) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let src = mask.bits();
    let pick = |a: u8, b: u8| if dilate { a | b } else { a & b };
    let mut tmp = src.to_vec();
    for (row, out) in src.chunks_exact(w).zip(tmp.chunks_exact_mut(w)) {
        for x in 1..w {
            out[x] = pick(out[x], row[x - 1]);
            out[x - 1] = pick(out[x - 1], row[x]);
        }
    }
    let mut out = tmp.clone();
    for y in 0..h {
        let (lo, hi) = (y.saturating_sub(1), (y + 1).min(h - 1));
        let row = &mut out[y * w..(y + 1) * w];
        for nb in [lo, hi] {
            for (o, &v) in row.iter_mut().zip(&tmp[nb * w..(nb + 1) * w]) {
                *o = pick(*o, v);
            }
        }
    }
    BinaryMask::from_bytes(w, h, &out).unwrap()
}

/// 3×3 opening; out-of-image neighbors are ignored.
pub fn open3(mask: &BinaryMask) -> BinaryMask {
    morph3(&morph3(mask, false), true)
}

/// 3×3 closing; out-of-image neighbors are ignored.
pub fn close3(mask: &BinaryMask) -> BinaryMask {
    morph3(&morph3(mask, true), false)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BorderSet {
    pub top: bool,
    pub bottom: bool,
    pub left: bool,
    pub right: bool,
}

impl BorderSet {
    pub fn intersect(self, o: BorderSet) -> BorderSet {
        BorderSet {
            top: self.top && o.top,
            bottom: self.bottom && o.bottom,
            left: self.left && o.left,
            right: self.right && o.right,
        }
    }

    pub fn any(self) -> bool {
        self.top || self.bottom || self.left || self.right
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub id: u32,
    pub area: usize,
    pub bbox: Rect,
    pub centroid: (f64, f64),
    pub border_touch: BorderSet,
}

/// Labeled 8-connected components, largest first, ids dense from 1.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentSet {
    pub width: usize,
    pub height: usize,
    /// Per-pixel component id, 0 for background.
    pub labels: Vec<u32>,
    pub components: Vec<Component>,
}

impl ComponentSet {
    /// Mask of a single component.
    pub fn component_mask(&self, id: u32) -> BinaryMask {
        let bits: Vec<u8> = self.labels.iter().map(|&l| (l == id) as u8).collect();
        BinaryMask::from_bytes(self.width, self.height, &bits).unwrap()
    }

    pub fn foreground(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }
}

/// Horizontal foreground runs of a mask, the unit of run-based labeling.
#[derive(Clone, Debug)]
pub(crate) struct Runs {
    pub width: usize,
    pub height: usize,
    /// (row, start, end-exclusive), sorted by row then start
    pub runs: Vec<(usize, usize, usize)>,
    /// index of the first run of each row, plus a final sentinel
    pub row_start: Vec<usize>,
}

#[derive(Clone, Debug)]
pub(crate) struct RunLabels {
    /// dense component index per run (only for rows below the limit)
    pub run_comp: Vec<usize>,
    pub stats: Vec<RawStats>,
}

#[derive(Clone, Debug)]
pub(crate) struct RawStats {
    pub area: usize,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub sx: f64,
    pub sy: f64,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

impl Runs {
    pub fn from_mask(mask: &BinaryMask) -> Self {
        let (w, h) = (mask.width(), mask.height());
        let bits = mask.bits();
        let mut runs = Vec::new();
        let mut row_start = Vec::with_capacity(h + 1);
        for y in 0..h {
            row_start.push(runs.len());
            let row = &bits[y * w..(y + 1) * w];
            let mut x = 0;
            while x < w {
                if row[x] != 0 {
                    let s = x;
                    while x < w && row[x] != 0 {
                        x += 1;
                    }
                    runs.push((y, s, x));
                } else {
                    x += 1;
                }
            }
        }
        row_start.push(runs.len());
        Self {
            width: w,
            height: h,
            runs,
            row_start,
        }
    }

    /// Labels the runs of rows `0..row_limit` with 8-connectivity.
    pub fn label(&self, row_limit: usize) -> RunLabels {
        let row_limit = row_limit.min(self.height);
        let n = self.row_start[row_limit];
        let mut parent: Vec<usize> = (0..n).collect();
        for y in 1..row_limit {
            let (mut i, ie) = (self.row_start[y], self.row_start[y + 1]);
            let (mut j, je) = (self.row_start[y - 1], self.row_start[y]);
            while i < ie && j < je {
                let (_, s, e) = self.runs[i];
                let (_, ps, pe) = self.runs[j];
                if s <= pe && ps <= e {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
                if e < pe {
                    i += 1;
                } else {
                    j += 1;
                }
            }
        }
        let mut root_comp = vec![usize::MAX; n];
        let mut run_comp = vec![0usize; n];
        let mut stats: Vec<RawStats> = Vec::new();
        for r in 0..n {
            let root = find(&mut parent, r);
            if root_comp[root] == usize::MAX {
                root_comp[root] = stats.len();
                stats.push(RawStats {
                    area: 0,
                    x0: usize::MAX,
                    y0: usize::MAX,
                    x1: 0,
                    y1: 0,
                    sx: 0.0,
                    sy: 0.0,
                });
            }
            let c = root_comp[root];
            run_comp[r] = c;
            let (y, s, e) = self.runs[r];
            let st = &mut stats[c];
            let len = e - s;
            st.area += len;
            st.x0 = st.x0.min(s);
            st.x1 = st.x1.max(e);
            st.y0 = st.y0.min(y);
            st.y1 = st.y1.max(y + 1);
            st.sx += (s + e - 1) as f64 * len as f64 / 2.0;
            st.sy += y as f64 * len as f64;
        }
        RunLabels { run_comp, stats }
    }
}

/// Component order: area descending, then top-left bbox corner (row, column).
pub(crate) fn component_order(stats: &[RawStats]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..stats.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (&stats[a], &stats[b]);
        sb.area
            .cmp(&sa.area)
            .then(sa.y0.cmp(&sb.y0))
            .then(sa.x0.cmp(&sb.x0))
    });
    order
}

/// 8-connectivity labeling.
pub fn connected_components(mask: &BinaryMask) -> ComponentSet {
    let runs = Runs::from_mask(mask);
    components_from_runs(&runs, runs.height)
}

pub(crate) fn components_from_runs(runs: &Runs, row_limit: usize) -> ComponentSet {
    let (w, h) = (runs.width, runs.height);
    let rl = runs.label(row_limit);
    let order = component_order(&rl.stats);
    let mut id_of = vec![0u32; rl.stats.len()];
    for (rank, &c) in order.iter().enumerate() {
        id_of[c] = rank as u32 + 1;
    }
    let mut labels = vec![0u32; w * h];
    for (r, &c) in rl.run_comp.iter().enumerate() {
        let (y, s, e) = runs.runs[r];
        labels[y * w + s..y * w + e].fill(id_of[c]);
    }
    let components = order
        .iter()
        .map(|&c| {
            let st = &rl.stats[c];
            Component {
                id: id_of[c],
                area: st.area,
                bbox: Rect {
                    x0: st.x0,
                    y0: st.y0,
                    x1: st.x1,
                    y1: st.y1,
                },
                centroid: (st.sx / st.area as f64, st.sy / st.area as f64),
                border_touch: BorderSet {
                    top: st.y0 == 0,
                    bottom: st.y1 == h,
                    left: st.x0 == 0,
                    right: st.x1 == w,
                },
            }
        })
        .collect();
    ComponentSet {
        width: w,
        height: h,
        labels,
        components,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskReason {
    Ok,
    TooManyComponents,
    NoComponent,
    BadShape,
    BadSize,
    BadPosition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskVerdict {
    pub pass: bool,
    pub reason: MaskReason,
}

impl MaskVerdict {
    fn fail(reason: MaskReason) -> Self {
        Self { pass: false, reason }
    }
}

/// Components at least `min_component_fraction` of the frame.
pub fn dominant_components<'a>(cs: &'a ComponentSet, cfg: &SegmentationConfig) -> Vec<&'a Component> {
    let frame = (cs.width * cs.height) as f64;
    cs.components
        .iter()
        .filter(|c| c.area as f64 >= cfg.min_component_fraction * frame)
        .collect()
}

/// Count, shape, size and position rules on the dominant components, checked in that order.
pub fn check_mask_plausibility(cs: &ComponentSet, cfg: &SegmentationConfig) -> MaskVerdict {
    let frame = (cs.width * cs.height) as f64;
    let dominant = dominant_components(cs, cfg);
    if dominant.len() > cfg.max_dominant {
        return MaskVerdict::fail(MaskReason::TooManyComponents);
    }
    if dominant.is_empty() {
        return MaskVerdict::fail(MaskReason::NoComponent);
    }
    for c in &dominant {
        let aspect = c.bbox.width() as f64 / c.bbox.height() as f64;
        let fill = c.area as f64 / c.bbox.area() as f64;
        if aspect < cfg.min_aspect || aspect > cfg.max_aspect || fill < cfg.min_fill_ratio {
            return MaskVerdict::fail(MaskReason::BadShape);
        }
    }
    let combined: usize = dominant.iter().map(|c| c.area).sum();
    let frac = combined as f64 / frame;
    if frac < cfg.min_fill || frac > cfg.max_fill {
        return MaskVerdict::fail(MaskReason::BadSize);
    }
    let common = dominant
        .iter()
        .map(|c| c.border_touch)
        .reduce(BorderSet::intersect)
        .unwrap_or_default();
    if !common.any() {
        return MaskVerdict::fail(MaskReason::BadPosition);
    }
    MaskVerdict {
        pass: true,
        reason: MaskReason::Ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist_with(spikes: &[(usize, u64)]) -> [u64; 256] {
        let mut h = [0u64; 256];
        for &(i, c) in spikes {
            h[i] = c;
        }
        h
    }

    #[test]
    fn otsu_examples() {
        assert_eq!(otsu_threshold(&hist_with(&[(50, 100), (200, 100)])).unwrap(), 50);
        assert_eq!(otsu_threshold(&hist_with(&[(10, 7)])).unwrap(), 0);
        assert_eq!(otsu_threshold(&[5u64; 256]).unwrap(), 127);
        assert!(matches!(otsu_threshold(&[0u64; 256]), Err(Error::EmptyHistogram)));
    }

    #[test]
    fn wide_mul_matches_u128_when_small() {
        assert_eq!(wide_mul(123_456_789, 987_654_321), (0, 123_456_789u128 * 987_654_321));
        let (hi, lo) = wide_mul(u128::MAX, 2);
        assert_eq!((hi, lo), (1, u128::MAX - 1));
    }

    fn skin_rect_frame() -> RasterImage {
        let mut img = RasterImage::filled_rgb(80, 60, [30, 60, 160]);
        for y in 15..45 {
            for x in 20..60 {
                img.set_pixel(x, y, &[200, 140, 120]);
            }
        }
        img
    }

    #[test]
    fn segments_skin_rectangle() {
        let mask = segment_hand(&skin_rect_frame(), &SegmentationConfig::default()).unwrap();
        assert_eq!((mask.width(), mask.height()), (80, 60));
        for y in 0..60 {
            for x in 0..80 {
                let inside = (20..60).contains(&x) && (15..45).contains(&y);
                let near_edge = (19..=60).contains(&x) && (14..=45).contains(&y) && !((21..59).contains(&x) && (16..44).contains(&y));
                if !near_edge {
                    assert_eq!(mask.get(x, y), inside, "pixel {x},{y}");
                }
            }
        }
    }

    #[test]
    fn background_and_skin_only_frames() {
        let cfg = SegmentationConfig::default();
        let bg = segment_hand(&RasterImage::filled_rgb(50, 40, [30, 60, 160]), &cfg).unwrap();
        assert!(bg.count() * 100 < 50 * 40);
        let skin = segment_hand(&RasterImage::filled_rgb(50, 40, [200, 140, 120]), &cfg).unwrap();
        assert!(skin.count() * 100 > 99 * 50 * 40);
    }

    #[test]
    fn gray_input_rejected() {
        let gray = RasterImage::new(4, 4, 1, vec![0; 16]).unwrap();
        assert!(matches!(segment_hand(&gray, &SegmentationConfig::default()), Err(Error::GrayInput)));
    }

    #[test]
    fn components_examples() {
        let sq = BinaryMask::from_fn(20, 20, |x, y| (5..12).contains(&x) && (3..10).contains(&y));
        let cs = connected_components(&sq);
        assert_eq!(cs.components.len(), 1);
        assert_eq!(cs.components[0].area, 49);

        let mut diag = BinaryMask::new(4, 4);
        diag.set(1, 1, true);
        diag.set(2, 2, true);
        assert_eq!(connected_components(&diag).components.len(), 1);

        assert!(connected_components(&BinaryMask::new(5, 5)).components.is_empty());
    }

    #[test]
    fn component_ids_by_area_then_position() {
        let m = BinaryMask::from_fn(30, 10, |x, y| {
            (y < 2 && x < 2) || (y < 2 && (10..12).contains(&x)) || ((20..25).contains(&x) && (5..9).contains(&y))
        });
        let cs = connected_components(&m);
        let areas: Vec<usize> = cs.components.iter().map(|c| c.area).collect();
        assert_eq!(areas, vec![20, 4, 4]);
        assert_eq!(cs.components[1].bbox.x0, 0);
        assert_eq!(cs.components[2].bbox.x0, 10);
        assert_eq!(cs.labels[0], 2);
        assert!(cs.components[0].border_touch == BorderSet::default());
        assert!(cs.components[1].border_touch.top && cs.components[1].border_touch.left);
    }

    fn blobs(rects: &[(usize, usize, usize, usize)], w: usize, h: usize) -> ComponentSet {
        let m = BinaryMask::from_fn(w, h, |x, y| {
            rects.iter().any(|&(x0, y0, x1, y1)| (x0..x1).contains(&x) && (y0..y1).contains(&y))
        });
        connected_components(&m)
    }

    #[test]
    fn plausibility_examples() {
        let cfg = SegmentationConfig::default();
        // 30% of a 100x100 frame touching the bottom
        let v = check_mask_plausibility(&blobs(&[(20, 70, 80, 100)], 100, 100), &cfg);
        assert_eq!(v, MaskVerdict { pass: true, reason: MaskReason::Ok });

        let six: Vec<_> = (0..6).map(|i| (i * 16, 50, i * 16 + 10, 100)).collect();
        let v = check_mask_plausibility(&blobs(&six, 100, 100), &cfg);
        assert_eq!(v.reason, MaskReason::TooManyComponents);
        assert!(!v.pass);

        let v = check_mask_plausibility(&blobs(&[(0, 95, 10, 100)], 100, 100), &cfg);
        assert_eq!(v.reason, MaskReason::NoComponent);
    }

    #[test]
    fn plausibility_shape_size_position() {
        let cfg = SegmentationConfig::default();
        // 1-row wide band: aspect 100
        let v = check_mask_plausibility(&blobs(&[(0, 97, 100, 100)], 100, 100), &cfg);
        assert_eq!(v.reason, MaskReason::BadShape);
        // 5% of frame: dominant but too small overall
        let v = check_mask_plausibility(&blobs(&[(40, 90, 90, 100)], 100, 100), &cfg);
        assert_eq!(v.reason, MaskReason::BadSize);
        // two blobs on different borders
        let v = check_mask_plausibility(&blobs(&[(0, 0, 30, 30), (70, 70, 100, 100)], 100, 100), &cfg);
        assert_eq!(v.reason, MaskReason::BadPosition);
    }
}
