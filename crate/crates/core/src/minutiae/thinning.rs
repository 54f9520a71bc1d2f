use crate::config::MinutiaeConfig;
use crate::raster::{BinaryMask, ChannelImage};

use super::orientation::OrientationField;

/// Neighbors in the order P2..P9: N, NE, E, SE, S, SW, W, NW.
pub(crate) const RING: [(isize, isize); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

pub(crate) fn ring_bits(m: &BinaryMask, x: usize, y: usize) -> [bool; 8] {
    RING.map(|(dx, dy)| m.get_or_zero(x as isize + dx, y as isize + dy))
}

/// Oriented mean along the block ridge direction, then a local-mean threshold over ROI
/// pixels. Ridges (darker than their surroundings) become foreground.
pub fn binarize(gray: &ChannelImage, roi: &BinaryMask, of: &OrientationField, cfg: &MinutiaeConfig) -> BinaryMask {
    let (w, h) = (gray.width(), gray.height());
    let half = (cfg.smooth_len / 2) as isize;
    let taps = (2 * half + 1) as f32;
    let mut smooth = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            if !roi.get(x, y) {
                continue;
            }
            let t = of.angle_at(x, y);
            let (dx, dy) = (t.cos(), t.sin());
            let mut acc = 0u32;
            for k in -half..=half {
                let sx = (x as f64 + k as f64 * dx).round().clamp(0.0, (w - 1) as f64) as usize;
                let sy = (y as f64 + k as f64 * dy).round().clamp(0.0, (h - 1) as f64) as usize;
                acc += gray.get(sx, sy) as u32;
            }
            smooth[y * w + x] = acc as f32 / taps;
        }
    }

    // integral images of ROI values and ROI counts
    let iw = w + 1;
    let mut sum = vec![0f64; iw * (h + 1)];
    let mut cnt = vec![0u32; iw * (h + 1)];
    for y in 0..h {
        let (mut rs, mut rc) = (0f64, 0u32);
        for x in 0..w {
            if roi.get(x, y) {
                rs += smooth[y * w + x] as f64;
                rc += 1;
            }
            sum[(y + 1) * iw + x + 1] = sum[y * iw + x + 1] + rs;
            cnt[(y + 1) * iw + x + 1] = cnt[y * iw + x + 1] + rc;
        }
    }
    let r = cfg.threshold_block / 2;
    let mut out = BinaryMask::new(w, h);
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        for x in 0..w {
            if !roi.get(x, y) {
                continue;
            }
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
            let s = sum[y1 * iw + x1] - sum[y0 * iw + x1] - sum[y1 * iw + x0] + sum[y0 * iw + x0];
            let n = cnt[y1 * iw + x1] + cnt[y0 * iw + x0] - cnt[y0 * iw + x1] - cnt[y1 * iw + x0];
            let mean = s / n as f64;
            if (smooth[y * w + x] as f64) < mean - cfg.threshold_offset {
                out.set(x, y, true);
            }
        }
    }
    out
}

/// Zhang–Suen thinning; pixels outside the image count as background.
pub fn zhang_suen(mask: &BinaryMask) -> BinaryMask {
    let mut m = mask.clone();
    let (w, h) = (m.width(), m.height());
    let mut candidates: Vec<(usize, usize)> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| m.get(x, y)).collect();
    loop {
        let mut changed = false;
        for step in 0..2 {
            let mut del = Vec::new();
            for &(x, y) in &candidates {
                if !m.get(x, y) {
                    continue;
                }
                let p = ring_bits(&m, x, y);
                let b = p.iter().filter(|&&v| v).count();
                if !(2..=6).contains(&b) {
                    continue;
                }
                let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
                if a != 1 {
                    continue;
                }
                // p[0]=P2 (N), p[2]=P4 (E), p[4]=P6 (S), p[6]=P8 (W)
                let ok = if step == 0 {
                    !(p[0] && p[2] && p[4]) && !(p[2] && p[4] && p[6])
                } else {
                    !(p[0] && p[2] && p[6]) && !(p[0] && p[4] && p[6])
                };
                if ok {
                    del.push((x, y));
                }
            }
            if !del.is_empty() {
                changed = true;
            }
            for &(x, y) in &del {
                m.set(x, y, false);
            }
        }
        if !changed {
            break;
        }
        candidates.retain(|&(x, y)| m.get(x, y));
    }
    m
}

/// Top-left corner of the first fully set 2×2 block in raster order.
pub fn find_thick(m: &BinaryMask) -> Option<(usize, usize)> {
    let (w, h) = (m.width(), m.height());
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            if m.get(x, y) && m.get(x + 1, y) && m.get(x, y + 1) && m.get(x + 1, y + 1) {
                return Some((x, y));
            }
        }
    }
    None
}

/// Removal keeps the local 8-connectivity when the foreground neighbors form one group.
fn is_simple(m: &BinaryMask, x: usize, y: usize) -> bool {
    let p = ring_bits(m, x, y);
    let mut seen = [false; 8];
    let mut groups = 0;
    for s in 0..8 {
        if !p[s] || seen[s] {
            continue;
        }
        groups += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(i) = stack.pop() {
            for j in 0..8 {
                let (a, b) = (RING[i], RING[j]);
                if p[j] && !seen[j] && (a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    groups == 1
}

/// Clears remaining 2×2 blocks by deleting one connectivity-preserving pixel of each.
pub fn remove_thick_blocks(m: &mut BinaryMask) {
    let (w, h) = (m.width(), m.height());
    loop {
        let mut changed = false;
        for y in 0..h.saturating_sub(1) {
            for x in 0..w.saturating_sub(1) {
                let block = [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)];
                if !block.iter().all(|&(a, b)| m.get(a, b)) {
                    continue;
                }
                if let Some(&(a, b)) = block.iter().find(|&&(a, b)| is_simple(m, a, b)) {
                    m.set(a, b, false);
                    changed = true;
                }
            }
        }
        if !changed {
            return;
        }
    }
}

/// Thins a binary ridge map to a skeleton without 2×2 blocks.
pub fn thin(mask: &BinaryMask) -> BinaryMask {
    let mut s = zhang_suen(mask);
    remove_thick_blocks(&mut s);
    s
}

/// Enhancement, binarization and thinning of a fingerprint ROI.
pub fn binarize_and_thin(gray: &ChannelImage, roi: &BinaryMask, of: &OrientationField, cfg: &MinutiaeConfig) -> BinaryMask {
    thin(&binarize(gray, roi, of, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minutiae::orientation::orientation_field;

    #[test]
    fn bar_thins_to_vertical_line() {
        let bar = BinaryMask::from_fn(20, 40, |x, y| (8..11).contains(&x) && (5..35).contains(&y));
        let s = thin(&bar);
        assert!(s.count() >= 25);
        let xs: Vec<usize> = (0..40 * 20).filter(|&i| s.bits()[i] != 0).map(|i| i % 20).collect();
        assert!(xs.iter().all(|&x| x == 9));
    }

    #[test]
    fn empty_and_disk() {
        assert!(thin(&BinaryMask::new(10, 10)).is_empty());
        let disk = BinaryMask::from_fn(60, 60, |x, y| {
            let (dx, dy) = (x as f64 - 30.0, y as f64 - 30.0);
            dx * dx + dy * dy <= 400.0
        });
        let s = thin(&disk);
        assert!(!s.is_empty() && s.count() <= 5, "{}", s.count());
    }

    #[test]
    fn thinned_output_has_no_thick_blocks() {
        let blob = BinaryMask::from_fn(50, 50, |x, y| (x * 7 + y * 13) % 11 < 6 || (x + y) % 9 < 4);
        assert!(find_thick(&thin(&blob)).is_none());
    }

    #[test]
    fn binarize_marks_dark_ridges() {
        let g = ChannelImage::from_fn(64, 64, |x, _| if x % 8 < 3 { 40 } else { 200 });
        let roi = BinaryMask::from_fn(64, 64, |_, _| true);
        let cfg = MinutiaeConfig::default();
        let of = orientation_field(&g, cfg.block_size);
        let b = binarize(&g, &roi, &of, &cfg);
        for y in 0..64 {
            for x in 8..56 {
                assert_eq!(b.get(x, y), x % 8 < 3, "({x},{y})");
            }
        }
        let outside = BinaryMask::new(64, 64);
        assert!(binarize(&g, &outside, &of, &cfg).is_empty());
    }
}
