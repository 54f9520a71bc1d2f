//! Minutiae pairing comparison and score-level fusion.
//!
//! Root pairs come from local neighborhood descriptors; each root fixes a rigid transform
//! under which minutiae are mated greedily one-to-one. The score is the Dice ratio
//! `2m / (|A| + |B|)` of the best root.

use std::cmp::Ordering;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::config::{FusionRule, MatcherConfig};
use crate::error::{Error, Result};
use crate::minutiae::{encode_template, MinutiaTemplate};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub value: f64,
    pub mated: usize,
}

#[derive(Clone, Copy, Debug)]
struct Point {
    x: f64,
    y: f64,
    a: f64,
}

fn points(t: &MinutiaTemplate) -> Vec<Point> {
    t.minutiae()
        .iter()
        .map(|m| Point {
            x: m.x as f64,
            y: m.y as f64,
            a: m.radians(),
        })
        .collect()
}

fn angle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Neighbor features relative to a minutia: distance, bearing of the neighbor relative
/// to the minutia direction, and the neighbor's relative direction.
type Descriptor = Vec<(f64, f64, f64)>;

fn descriptors(ps: &[Point], k: usize) -> Vec<Descriptor> {
    ps.iter()
        .enumerate()
        .map(|(i, p)| {
            let mut nb: Vec<(f64, usize)> = ps
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, q)| ((q.x - p.x).hypot(q.y - p.y), j))
                .collect();
            nb.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            nb.truncate(k);
            nb.iter()
                .map(|&(d, j)| {
                    let q = ps[j];
                    let bearing = ((q.y - p.y).atan2(q.x - p.x) - p.a).rem_euclid(TAU);
                    let rel = (q.a - p.a).rem_euclid(TAU);
                    (d, bearing, rel)
                })
                .collect()
        })
        .collect()
}

/// Pixels of distance mismatch per radian of angular mismatch.
const ANGLE_WEIGHT: f64 = 10.0;

fn descriptor_cost(a: &Descriptor, b: &Descriptor) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return f64::INFINITY;
    }
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| (p.0 - q.0).abs() + ANGLE_WEIGHT * (angle_dist(p.1, q.1) + angle_dist(p.2, q.2)))
        .sum();
    sum / n as f64
}

/// Greedy one-to-one mating of `a` (already transformed) against `b`.
fn mate_count(a: &[Point], b: &[Point], cfg: &MatcherConfig) -> usize {
    let tol2 = cfg.dist_tol * cfg.dist_tol;
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            let (dx, dy) = (p.x - q.x, p.y - q.y);
            let d2 = dx * dx + dy * dy;
            if d2 > tol2 {
                continue;
            }
            let da = angle_dist(p.a, q.a);
            if da > cfg.angle_tol {
                continue;
            }
            cand.push((d2.sqrt() / cfg.dist_tol + da / cfg.angle_tol, i, j));
        }
    }
    cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut m = 0;
    for (_, i, j) in cand {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            m += 1;
        }
    }
    m
}

fn align(a: &[Point], root_a: Point, root_b: Point) -> Vec<Point> {
    let rot = root_b.a - root_a.a;
    let (s, c) = rot.sin_cos();
    a.iter()
        .map(|p| {
            let (dx, dy) = (p.x - root_a.x, p.y - root_a.y);
            Point {
                x: root_b.x + c * dx - s * dy,
                y: root_b.y + s * dx + c * dy,
                a: (p.a + rot).rem_euclid(TAU),
            }
        })
        .collect()
}

pub fn compare_templates(a: &MinutiaTemplate, b: &MinutiaTemplate, cfg: &MatcherConfig) -> Result<MatchScore> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyTemplate);
    }
    // a fixed argument order makes the score exactly symmetric
    let (a, b) = if encode_template(a) <= encode_template(b) { (a, b) } else { (b, a) };
    let (pa, pb) = (points(a), points(b));
    let (da, db) = (descriptors(&pa, cfg.neighbors), descriptors(&pb, cfg.neighbors));
    let mut roots: Vec<(f64, usize, usize)> = Vec::with_capacity(pa.len() * pb.len());
    for (i, di) in da.iter().enumerate() {
        for (j, dj) in db.iter().enumerate() {
            roots.push((descriptor_cost(di, dj), i, j));
        }
    }
    let by_cost = |x: &(f64, usize, usize), y: &(f64, usize, usize)| -> Ordering {
        x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2))
    };
    let limit = cfg.root_limit.max(1).min(roots.len());
    if limit < roots.len() {
        roots.select_nth_unstable_by(limit - 1, by_cost);
        roots.truncate(limit);
    }
    roots.sort_by(by_cost);
    let mut best = 0usize;
    for &(_, i, j) in &roots {
        let moved = align(&pa, pa[i], pb[j]);
        best = best.max(mate_count(&moved, &pb, cfg));
        if best == pa.len().min(pb.len()) {
            break;
        }
    }
    Ok(MatchScore {
        value: 2.0 * best as f64 / (pa.len() + pb.len()) as f64,
        mated: best,
    })
}

/// Combines per-finger comparison scores into one decision score.
pub fn fuse_scores(scores: &[f64], rule: FusionRule) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    Ok(match rule {
        FusionRule::Mean | FusionRule::SumNormalized => scores.iter().sum::<f64>() / scores.len() as f64,
        FusionRule::Max => scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}
