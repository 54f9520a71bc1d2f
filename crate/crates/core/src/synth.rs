//! Procedural test data: phase-model fingerprint patterns, touch-equivalent prints with
//! session jitter, and four-finger hand frames with ground truth.
//!
//! A pattern's ridge phase is `2π·ρ/period` around a core (ρ an anisotropic radius)
//! plus a smooth wave term and one `±atan2` spiral per minutia. Every spiral of unit
//! charge ends or splits exactly one ridge.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::enhancement::FingerprintImage;
use crate::geometry::{finger_order, FingerId, HandSide};
use crate::par::Exec;
use crate::raster::{gaussian_blur, gaussian_blur_channel, BinaryMask, ChannelImage, RasterImage};

/// Width and height of rendered prints.
pub const PRINT_WIDTH: usize = 300;
pub const PRINT_HEIGHT: usize = 450;

#[derive(Clone, Debug, PartialEq)]
pub struct FingerPattern {
    pub core: (f64, f64),
    pub period: f64,
    pub aniso: f64,
    /// Wave term amplitudes (radians) and phases.
    pub waves: [(f64, f64, f64); 2],
    /// Spiral centers with charge ±1.
    pub spirals: Vec<(f64, f64, f64)>,
}

/// Fingertip-shaped region of a print: a half disk on top of a rectangle.
pub fn print_roi_contains(u: f64, v: f64) -> bool {
    let r = PRINT_WIDTH as f64 / 2.0;
    if !(0.0..PRINT_WIDTH as f64).contains(&u) || !(0.0..PRINT_HEIGHT as f64).contains(&v) {
        return false;
    }
    v >= r || (u - r).powi(2) + (v - r).powi(2) <= r * r
}

impl FingerPattern {
    pub fn random(rng: &mut impl Rng) -> Self {
        let core = (rng.random_range(120.0..180.0), rng.random_range(170.0..250.0));
        let mut spirals: Vec<(f64, f64, f64)> = Vec::new();
        let target = rng.random_range(34..46);
        let mut tries = 0;
        while spirals.len() < target && tries < 5000 {
            tries += 1;
            let (u, v) = (rng.random_range(0.0..PRINT_WIDTH as f64), rng.random_range(0.0..PRINT_HEIGHT as f64));
            let inset = [(-24.0, 0.0), (24.0, 0.0), (0.0, -24.0), (0.0, 24.0), (17.0, 17.0), (-17.0, 17.0), (17.0, -17.0), (-17.0, -17.0)];
            if !inset.iter().all(|&(du, dv)| print_roi_contains(u + du, v + dv)) {
                continue;
            }
            if (u - core.0).hypot(v - core.1) < 30.0 {
                continue;
            }
            if spirals.iter().any(|s| (s.0 - u).hypot(s.1 - v) < 20.0) {
                continue;
            }
            let charge = if spirals.len().is_multiple_of(2) { 1.0 } else { -1.0 };
            spirals.push((u, v, charge));
        }
        Self {
            core,
            period: rng.random_range(8.5..10.5),
            aniso: rng.random_range(1.0..1.5),
            waves: [
                (rng.random_range(1.0..3.0), rng.random_range(40.0..90.0), rng.random_range(0.0..TAU)),
                (rng.random_range(1.0..3.0), rng.random_range(40.0..90.0), rng.random_range(0.0..TAU)),
            ],
            spirals,
        }
    }

    pub fn phase(&self, u: f64, v: f64) -> f64 {
        let rho = (u - self.core.0).hypot((v - self.core.1) / self.aniso);
        let mut psi = TAU * rho / self.period;
        psi += self.waves[0].0 * (u / self.waves[0].1 + self.waves[0].2).sin();
        psi += self.waves[1].0 * (v / self.waves[1].1 + self.waves[1].2).sin();
        for &(su, sv, q) in &self.spirals {
            psi += q * (v - sv).atan2(u - su);
        }
        psi
    }

    /// Ridge strength in `[-1, 1]`; 1 on a ridge center.
    pub fn ridge(&self, u: f64, v: f64) -> f64 {
        self.phase(u, v).cos()
    }
}

/// Session-to-session distortion of a print.
#[derive(Clone, Debug, PartialEq)]
pub struct Jitter {
    pub rotation_deg: f64,
    pub shift: (f64, f64),
    /// Elastic displacement amplitude (print pixels) and its wavelengths and phases.
    pub warp: f64,
    pub warp_shape: [(f64, f64); 2],
    pub blur_sigma: f64,
    pub noise_sigma: f64,
}

impl Jitter {
    pub fn none() -> Self {
        Self {
            rotation_deg: 0.0,
            shift: (0.0, 0.0),
            warp: 0.0,
            warp_shape: [(1.0, 0.0), (1.0, 0.0)],
            blur_sigma: 0.0,
            noise_sigma: 6.0,
        }
    }

    /// Second-session re-render: elastic warp, small rotation and shift, mild blur.
    pub fn random(rng: &mut impl Rng) -> Self {
        Self {
            rotation_deg: rng.random_range(-5.0..5.0),
            shift: (rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)),
            warp: rng.random_range(1.5..3.0),
            warp_shape: [
                (rng.random_range(60.0..110.0), rng.random_range(0.0..TAU)),
                (rng.random_range(60.0..110.0), rng.random_range(0.0..TAU)),
            ],
            blur_sigma: 0.8,
            noise_sigma: 6.0,
        }
    }

    /// Print coordinates of the pattern seen at output pixel `(u, v)`.
    fn source(&self, u: f64, v: f64) -> (f64, f64) {
        let (cu, cv) = (PRINT_WIDTH as f64 / 2.0, PRINT_HEIGHT as f64 / 2.0);
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        let (du, dv) = (u - cu, v - cv);
        let mut x = cu + c * du - s * dv + self.shift.0;
        let mut y = cv + s * du + c * dv + self.shift.1;
        x += self.warp * (v / self.warp_shape[0].0 + self.warp_shape[0].1).sin();
        y += self.warp * (u / self.warp_shape[1].0 + self.warp_shape[1].1).sin();
        (x, y)
    }
}

/// Renders a touch-equivalent print: dark ridges on a bright background inside the
/// fingertip ROI, zero outside.
pub fn render_print(pattern: &FingerPattern, jitter: &Jitter, finger_id: Option<FingerId>, rng: &mut impl Rng) -> FingerprintImage {
    let (w, h) = (PRINT_WIDTH, PRINT_HEIGHT);
    let roi = BinaryMask::from_fn(w, h, |x, y| print_roi_contains(x as f64 + 0.5, y as f64 + 0.5));
    let noise = Normal::new(0.0, jitter.noise_sigma.max(1e-9)).expect("valid sigma");
    let mut gray = ChannelImage::from_fn(w, h, |x, y| {
        if !roi.get(x, y) {
            return 0;
        }
        let (su, sv) = jitter.source(x as f64, y as f64);
        let v = 130.0 - 95.0 * pattern.ridge(su, sv) + noise.sample(rng);
        v.round().clamp(0.0, 255.0) as u8
    });
    gray = gaussian_blur_channel(&gray, jitter.blur_sigma);
    for (v, &m) in gray.values_mut().iter_mut().zip(roi.bits()) {
        if m == 0 {
            *v = 0;
        }
    }
    FingerprintImage {
        gray,
        roi,
        finger_id,
        roi_width: w,
        roi_height: h,
    }
}

/// Ground truth for one finger of a synthetic hand frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FingerTruth {
    pub id: FingerId,
    /// Frame position one finger width below the tip, on the finger axis.
    pub tip_center: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct SynthFrame {
    pub image: RasterImage,
    pub truth: Vec<FingerTruth>,
}

/// Parameters of a synthetic hand frame. Hand coordinates: x across the hand, y from the
/// knuckle line toward the wrist; fingers point to negative y, the palm extends without
/// end to positive y.
#[derive(Clone, Debug)]
pub struct HandSpec {
    pub width: usize,
    pub height: usize,
    pub hand: HandSide,
    /// CCW screen rotation of the hand; 0 is fingers up, entering from the bottom edge.
    pub rotation_deg: f64,
    pub finger_width: f64,
    pub gaps: [f64; 3],
    pub lengths: [f64; 4],
    pub patterns: [FingerPattern; 4],
    pub skin: [f64; 3],
    pub background: [f64; 3],
    pub blur_sigma: f64,
    pub noise_sigma: f64,
}

impl HandSpec {
    /// Random hand: rotation uniform over the full turn unless given, jittered finger
    /// spacing and lengths.
    pub fn random(rng: &mut impl Rng, width: usize, height: usize, finger_width: f64, hand: HandSide, rotation_deg: Option<f64>) -> Self {
        let w = finger_width;
        // left-to-right in the upright view: right hand index..little, left hand little..index
        let base = [0.92, 1.0, 0.94, 0.76];
        let mut lengths: [f64; 4] = std::array::from_fn(|i| base[i] * 3.1 * w * rng.random_range(0.96..1.04));
        if hand == HandSide::Left {
            lengths.reverse();
        }
        Self {
            width,
            height,
            hand,
            rotation_deg: rotation_deg.unwrap_or_else(|| rng.random_range(0.0..360.0)),
            finger_width: w,
            gaps: std::array::from_fn(|_| w * rng.random_range(0.12..0.28)),
            lengths,
            patterns: std::array::from_fn(|_| FingerPattern::random(rng)),
            skin: [rng.random_range(190.0..220.0), rng.random_range(135.0..160.0), rng.random_range(110.0..135.0)],
            background: [rng.random_range(20.0..45.0), rng.random_range(50.0..80.0), rng.random_range(140.0..180.0)],
            blur_sigma: 0.0,
            noise_sigma: 2.0,
        }
    }

    fn finger_centers(&self) -> [f64; 4] {
        let w = self.finger_width;
        let mut xs = [0.0; 4];
        for i in 1..4 {
            xs[i] = xs[i - 1] + w + self.gaps[i - 1];
        }
        let mid = (xs[0] + xs[3]) / 2.0;
        xs.map(|x| x - mid)
    }

    fn palm_half_width(&self) -> f64 {
        let xs = self.finger_centers();
        xs[3] + self.finger_width / 2.0 + 0.05 * self.finger_width
    }
}

/// Distance from `p` along unit `d` to the frame boundary (`p` inside).
fn exit_distance(p: (f64, f64), d: (f64, f64), w: f64, h: f64) -> f64 {
    let mut t = f64::INFINITY;
    if d.0 > 1e-12 {
        t = t.min((w - p.0) / d.0);
    } else if d.0 < -1e-12 {
        t = t.min(-p.0 / d.0);
    }
    if d.1 > 1e-12 {
        t = t.min((h - p.1) / d.1);
    } else if d.1 < -1e-12 {
        t = t.min(-p.1 / d.1);
    }
    t
}

/// Renders a hand frame. The knuckle line is placed so the palm reaches the frame
/// border across its whole width with at least a fifth of a finger length visible.
pub fn render_hand(spec: &HandSpec, rng: &mut impl Rng) -> SynthFrame {
    let (fw, fh) = (spec.width as f64, spec.height as f64);
    let a = spec.rotation_deg.to_radians();
    // screen rotation CCW with y down: hand axes in frame coordinates
    let ex = (a.cos(), -a.sin());
    let ey = (a.sin(), a.cos());
    let hw = spec.palm_half_width();
    let centre = (fw / 2.0, fh / 2.0);
    let l_max = spec.lengths.iter().copied().fold(0.0, f64::max);
    let palm_min = 0.25 * l_max;
    let at = |p: (f64, f64), s: f64, q: (f64, f64)| (p.0 + s * q.0, p.1 + s * q.1);
    let t_min = [-hw, hw]
        .iter()
        .map(|&lat| exit_distance(at(centre, lat, ex), ey, fw, fh))
        .fold(f64::INFINITY, f64::min);
    let s = t_min - palm_min;
    let knuckle = at(centre, s, ey);

    let xs = spec.finger_centers();
    let wf = spec.finger_width;
    let r = wf / 2.0;
    let ids = finger_order(spec.hand);
    let bg_noise = Normal::new(0.0, spec.noise_sigma.max(1e-9)).expect("valid sigma");
    let mut px = vec![0u8; spec.width * spec.height * 3];
    for y in 0..spec.height {
        for x in 0..spec.width {
            let (dx, dy) = (x as f64 + 0.5 - knuckle.0, y as f64 + 0.5 - knuckle.1);
            let hx = dx * ex.0 + dy * ex.1;
            let hy = dx * ey.0 + dy * ey.1;
            let mut color = spec.background;
            let mut shade = 1.0;
            let mut inside = false;
            if hy >= 0.0 && hx.abs() <= hw {
                inside = true;
                shade = 0.9 + 0.1 * (1.0 - (hx / hw).powi(2)).max(0.0).sqrt();
            }
            for i in 0..4 {
                let tip = -spec.lengths[i];
                let across = hx - xs[i];
                if across.abs() > r || hy > wf || hy < tip {
                    continue;
                }
                // capsule: rounded top of radius r
                let cy = tip + r;
                if hy < cy && across * across + (hy - cy) * (hy - cy) > r * r {
                    continue;
                }
                inside = true;
                let n = across / r;
                shade = 0.82 + 0.18 * (1.0 - n * n).max(0.0).sqrt();
                let along = hy - tip;
                if along < 2.3 * wf {
                    let u = PRINT_WIDTH as f64 / 2.0 + across * PRINT_WIDTH as f64 / wf;
                    let v = along * PRINT_WIDTH as f64 / wf;
                    shade *= 1.0 - 0.2 * (1.0 + spec.patterns[i].ridge(u, v));
                }
                break;
            }
            if inside {
                color = spec.skin.map(|c| c * shade);
            }
            let o = (y * spec.width + x) * 3;
            for k in 0..3 {
                px[o + k] = (color[k] + bg_noise.sample(rng)).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    let mut image = RasterImage::new(spec.width, spec.height, 3, px).expect("valid frame");
    if spec.blur_sigma > 0.0 {
        image = gaussian_blur(&image, spec.blur_sigma);
    }
    let truth = (0..4)
        .map(|i| {
            let hy = -spec.lengths[i] + wf;
            let p = (knuckle.0 + xs[i] * ex.0 + hy * ey.0, knuckle.1 + xs[i] * ex.1 + hy * ey.1);
            FingerTruth { id: ids[i], tip_center: p }
        })
        .collect();
    SynthFrame { image, truth }
}

/// Default capture-scale hand: 1920×1080, fingers 200 px wide, entering from the right.
pub fn capture_hand(rng: &mut impl Rng, hand: HandSide) -> HandSpec {
    let rotation = rng.random_range(80.0..100.0);
    HandSpec::random(rng, 1920, 1080, 200.0, hand, Some(rotation))
}

/// One print of a synthetic corpus.
#[derive(Clone, Debug)]
pub struct CorpusSample {
    pub subject: String,
    pub finger: FingerId,
    pub session: String,
    pub image: FingerprintImage,
}

/// `subjects` right hands, four fingers each, two sessions; session 2 is a jittered,
/// blurred re-render. Each sample draws from its own seeded stream, so the output does
/// not depend on the execution mode.
pub fn corpus(subjects: usize, seed: u64, exec: Exec) -> Vec<CorpusSample> {
    let fingers = finger_order(HandSide::Right);
    let jobs: Vec<(usize, usize, usize)> = (0..subjects)
        .flat_map(|s| (0..4).flat_map(move |f| (0..2).map(move |k| (s, f, k))))
        .collect();
    exec.map(&jobs, |&(s, f, k)| {
        let mut prng = ChaCha8Rng::seed_from_u64(seed ^ ((s as u64) << 8 | f as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let pattern = FingerPattern::random(&mut prng);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1 + (s * 8 + f * 2 + k) as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
        let jitter = if k == 0 { Jitter::none() } else { Jitter::random(&mut rng) };
        CorpusSample {
            subject: format!("s{s:03}"),
            finger: fingers[f],
            session: (k + 1).to_string(),
            image: render_print(&pattern, &jitter, Some(fingers[f]), &mut rng),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn print_shape_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = FingerPattern::random(&mut rng);
        assert!(p.spirals.len() >= 30);
        let a = render_print(&p, &Jitter::none(), None, &mut ChaCha8Rng::seed_from_u64(1));
        let b = render_print(&p, &Jitter::none(), None, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        assert_eq!((a.width(), a.height()), (PRINT_WIDTH, PRINT_HEIGHT));
        assert_eq!(a.gray.get(0, 0), 0);
        assert!(a.gray.get(150, 300) > 0 || a.gray.get(151, 300) > 0);
    }

    #[test]
    fn corpus_is_mode_independent() {
        let s = corpus(2, 9, Exec::Sequential);
        let p = corpus(2, 9, Exec::Parallel);
        assert_eq!(s.len(), 16);
        for (a, b) in s.iter().zip(&p) {
            assert_eq!(a.image, b.image);
            assert_eq!((&a.subject, a.finger, &a.session), (&b.subject, b.finger, &b.session));
        }
    }

    #[test]
    fn hand_frame_truth_lies_on_skin() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for rot in [0.0, 37.0, 90.0, 200.0, 300.0] {
            let spec = HandSpec::random(&mut rng, 480, 360, 36.0, HandSide::Right, Some(rot));
            let f = render_hand(&spec, &mut rng);
            assert_eq!(f.truth.len(), 4);
            for t in &f.truth {
                let (x, y) = (t.tip_center.0 as usize, t.tip_center.1 as usize);
                assert!(x < 480 && y < 360, "{rot}: {t:?}");
                let p = f.image.pixel(x, y);
                assert!(p[0] > p[2], "{rot}: skin expected at {t:?}");
            }
        }
    }
}
