//! Classical minutiae extraction: orientation field, oriented smoothing and adaptive
//! binarization, thinning, crossing numbers, pruning, and the `.mtft` template format.

mod orientation;
mod template;
mod thinning;

use std::f64::consts::PI;

pub use orientation::{orientation_field, OrientationField};
pub use template::{
    decode_template, encode_template, quantize_angle, read_template, write_template, Minutia, MinutiaTemplate, HEADER_LEN,
    MAX_MINUTIAE, RECORD_LEN,
};
pub use thinning::{binarize, binarize_and_thin, find_thick, thin, zhang_suen};

use crate::config::MinutiaeConfig;
use crate::enhancement::{squared_distance_to_background, FingerprintImage};
use crate::error::{Error, Result};
use crate::geometry::FingerId;
use crate::raster::BinaryMask;
use thinning::{ring_bits, RING};

/// Steps followed along the skeleton when estimating a minutia direction.
const TRACE_LEN: usize = 10;

/// Half the number of value changes around the 8-neighborhood cycle of `(x, y)`.
pub fn crossing_number(skel: &BinaryMask, x: usize, y: usize) -> u8 {
    let p = ring_bits(skel, x, y);
    let changes = (0..8).filter(|&i| p[i] != p[(i + 1) % 8]).count();
    (changes / 2) as u8
}

fn foreground_groups(skel: &BinaryMask, x: usize, y: usize) -> Vec<Vec<usize>> {
    let p = ring_bits(skel, x, y);
    let Some(start) = (0..8).find(|&i| !p[i]) else {
        return vec![(0..8).collect()];
    };
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for k in 1..=8 {
        let i = (start + k) % 8;
        if p[i] {
            current.push(i);
        } else if !current.is_empty() {
            groups.push(std::mem::take(&mut current));
        }
    }
    groups
}

fn is_axial(i: usize) -> bool {
    i.is_multiple_of(2)
}

/// Follows the skeleton from `p` through the neighbor group `group` and returns the last
/// pixel reached within `TRACE_LEN` steps.
fn trace(skel: &BinaryMask, p: (usize, usize), group: &[usize]) -> (f64, f64) {
    let step = |(x, y): (usize, usize), i: usize| ((x as isize + RING[i].0) as usize, (y as isize + RING[i].1) as usize);
    let mut visited = vec![p];
    let first = group.iter().copied().find(|&i| is_axial(i)).unwrap_or(group[0]);
    visited.extend(group.iter().map(|&i| step(p, i)));
    let mut cur = step(p, first);
    for _ in 1..TRACE_LEN {
        let next: Vec<usize> = (0..8)
            .filter(|&i| skel.get_or_zero(cur.0 as isize + RING[i].0, cur.1 as isize + RING[i].1))
            .filter(|&i| !visited.contains(&step(cur, i)))
            .collect();
        let pick = match next.len() {
            0 => break,
            1 => next[0],
            _ => {
                let axial: Vec<usize> = next.iter().copied().filter(|&i| is_axial(i)).collect();
                if axial.len() != 1 {
                    break;
                }
                axial[0]
            }
        };
        visited.extend(next.iter().map(|&i| step(cur, i)));
        cur = step(cur, pick);
    }
    (cur.0 as f64, cur.1 as f64)
}

fn minutia_direction(skel: &BinaryMask, of: &OrientationField, x: usize, y: usize, cn: u8) -> f64 {
    let groups = foreground_groups(skel, x, y);
    let dirs: Vec<(f64, f64)> = groups
        .iter()
        .map(|g| {
            let e = trace(skel, (x, y), g);
            (e.0 - x as f64, e.1 - y as f64)
        })
        .collect();
    let theta = of.angle_at(x, y);
    let u = (theta.cos(), theta.sin());
    let along = |d: &(f64, f64)| (d.0 * u.0 + d.1 * u.1) / d.0.hypot(d.1).max(1e-9);
    let score = if cn == 1 {
        // an ending points away from the ridge it terminates
        -along(&dirs[0])
    } else {
        // a bifurcation points toward its fork: the side most branches leave on
        let votes: i32 = dirs.iter().map(along).map(|a| (a > 0.0) as i32 - (a < 0.0) as i32).sum();
        if votes != 0 { votes as f64 } else { dirs.iter().map(along).sum() }
    };
    if score >= 0.0 {
        theta
    } else {
        theta + PI
    }
}

/// Endings (CN 1) and bifurcations (CN 3) of a thin skeleton, untyped, sorted by `(y, x)`.
pub fn extract_minutiae(skel: &BinaryMask, of: &OrientationField) -> Result<Vec<Minutia>> {
    if let Some((x, y)) = find_thick(skel) {
        return Err(Error::NotThin { x, y });
    }
    let mut out = Vec::new();
    for y in 0..skel.height() {
        for x in 0..skel.width() {
            if !skel.get(x, y) {
                continue;
            }
            let cn = crossing_number(skel, x, y);
            if cn == 1 || cn == 3 {
                out.push(Minutia::new(x as u16, y as u16, minutia_direction(skel, of, x, y, cn)));
            }
        }
    }
    Ok(out)
}

/// Drops minutiae near the ROI boundary, merges close pairs in favor of the one nearer
/// the ROI centroid, and caps the count; output sorted by `(y, x)`.
pub fn prune_minutiae(ms: &[Minutia], roi: &BinaryMask, cfg: &MinutiaeConfig) -> Vec<Minutia> {
    if ms.is_empty() || roi.is_empty() {
        return Vec::new();
    }
    let dist = squared_distance_to_background(roi);
    let border2 = cfg.border_px * cfg.border_px;
    let (mut cx, mut cy, mut n) = (0f64, 0f64, 0f64);
    for y in 0..roi.height() {
        for x in 0..roi.width() {
            if roi.get(x, y) {
                cx += x as f64;
                cy += y as f64;
                n += 1.0;
            }
        }
    }
    let (cx, cy) = (cx / n, cy / n);
    let mut inner: Vec<(f64, Minutia)> = ms
        .iter()
        .filter(|m| (m.x as usize) < roi.width() && (m.y as usize) < roi.height())
        .filter(|m| dist[m.y as usize * roi.width() + m.x as usize] > border2)
        .map(|&m| ((m.x as f64 - cx).powi(2) + (m.y as f64 - cy).powi(2), m))
        .collect();
    inner.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1.y, a.1.x, a.1.angle).cmp(&(b.1.y, b.1.x, b.1.angle))));
    let merge2 = cfg.merge_px * cfg.merge_px;
    let mut kept: Vec<Minutia> = Vec::new();
    for (_, m) in inner {
        if kept.len() >= cfg.max_minutiae.min(MAX_MINUTIAE) {
            break;
        }
        let close = kept.iter().any(|k| {
            let (dx, dy) = (k.x as f64 - m.x as f64, k.y as f64 - m.y as f64);
            dx * dx + dy * dy < merge2
        });
        if !close {
            kept.push(m);
        }
    }
    kept.sort_by_key(|m| (m.y, m.x, m.angle));
    kept
}

/// Skeleton of a fingerprint ROI, with the orientation field it was built from.
pub fn skeletonize(fp: &FingerprintImage, cfg: &MinutiaeConfig) -> (OrientationField, BinaryMask) {
    let of = orientation_field(&fp.gray, cfg.block_size);
    let skel = binarize_and_thin(&fp.gray, &fp.roi, &of, cfg);
    (of, skel)
}

/// Full extraction: orientation field → binarization and thinning → crossing numbers →
/// pruning.
pub fn extract_template(fp: &FingerprintImage, finger_id: FingerId, cfg: &MinutiaeConfig) -> Result<MinutiaTemplate> {
    let (of, skel) = skeletonize(fp, cfg);
    let ms = extract_minutiae(&skel, &of)?;
    let kept = prune_minutiae(&ms, &fp.roi, cfg);
    MinutiaTemplate::new(finger_id, fp.width() as u16, fp.height() as u16, kept)
}
