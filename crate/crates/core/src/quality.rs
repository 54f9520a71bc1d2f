//! Sample quality: center sharpness, ROI size, a 0–100 composite score, and best-of-N
//! selection.

use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::config::QualityConfig;
use crate::enhancement::FingerprintImage;
use crate::error::{Error, Result};
use crate::imageio::encode_png;
use crate::raster::{sobel, ChannelImage, RasterImage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub sharpness: f64,
    pub size_ok: bool,
    pub composite: u8,
    pub passed: bool,
}

/// Sobel magnitudes (0–255 scale) of the centered `window`×`window` square.
fn center_magnitudes(gray: &ChannelImage, window: usize) -> Result<Vec<f64>> {
    let (w, h) = (gray.width(), gray.height());
    if w < window || h < window || window == 0 {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: window,
        });
    }
    // one pixel of context around the window keeps its gradients exact
    let x0 = (w - window) / 2;
    let y0 = (h - window) / 2;
    let cx0 = x0.saturating_sub(1);
    let cy0 = y0.saturating_sub(1);
    let cw = (x0 + window + 1).min(w) - cx0;
    let ch = (y0 + window + 1).min(h) - cy0;
    let patch = gray.crop(cx0, cy0, cw, ch);
    let (gx, gy) = sobel(&patch);
    let mut mags = Vec::with_capacity(window * window);
    for y in y0 - cy0..y0 - cy0 + window {
        for x in x0 - cx0..x0 - cx0 + window {
            let i = y * cw + x;
            mags.push((gx[i] as f64).hypot(gy[i] as f64) / 4.0);
        }
    }
    Ok(mags)
}

/// Fraction of center-window pixels whose gradient magnitude exceeds `grad_min`.
pub fn sharpness_score(fp: &FingerprintImage, cfg: &QualityConfig) -> Result<f64> {
    let mags = center_magnitudes(&fp.gray, cfg.window)?;
    let over = mags.iter().filter(|&&m| m > cfg.grad_min).count();
    Ok(over as f64 / mags.len() as f64)
}

/// Histogram of center-window gradient magnitudes, one bin per integer level 0–255.
pub fn gradient_histogram(fp: &FingerprintImage, cfg: &QualityConfig) -> Result<Vec<u32>> {
    let mut hist = vec![0u32; 256];
    for m in center_magnitudes(&fp.gray, cfg.window)? {
        hist[(m.round() as usize).min(255)] += 1;
    }
    Ok(hist)
}

pub fn histogram_csv(hist: &[u32]) -> String {
    let mut out = String::from("magnitude,count\n");
    for (i, c) in hist.iter().enumerate() {
        out.push_str(&format!("{i},{c}\n"));
    }
    out
}

/// ROI size check on the pre-normalization ROI; both bounds inclusive.
pub fn check_size(fp: &FingerprintImage, cfg: &QualityConfig) -> bool {
    fp.roi_height >= cfg.min_roi_height && fp.roi_width * fp.roi_height >= cfg.min_roi_area
}

/// `round(100·(0.4·s + 0.4·c + 0.2·f))` with every term clamped to `[0, 1]`.
pub fn composite_score(s: f64, c: f64, f: f64) -> u8 {
    let s = s.clamp(0.0, 1.0);
    let c = c.clamp(0.0, 1.0);
    let f = f.clamp(0.0, 1.0);
    (100.0 * (0.4 * s + 0.4 * c + 0.2 * f)).round() as u8
}

/// Internal composite quality of a sample: sharpness, ROI contrast and ROI fill.
pub fn quality_score(fp: &FingerprintImage, cfg: &QualityConfig) -> u8 {
    let s = sharpness_score(fp, cfg).unwrap_or(0.0);
    let inside: Vec<f64> = fp
        .gray
        .values()
        .iter()
        .zip(fp.roi.bits())
        .filter(|(_, &m)| m != 0)
        .map(|(&v, _)| v as f64)
        .collect();
    let c = if inside.is_empty() {
        0.0
    } else {
        let n = inside.len() as f64;
        let mean = inside.iter().sum::<f64>() / n;
        let var = inside.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (var.sqrt() / 64.0).min(1.0)
    };
    let area = (fp.width() * fp.height()) as f64;
    let f = if area > 0.0 { inside.len() as f64 / area } else { 0.0 };
    composite_score(s, c, f)
}

/// Runs `cmd` through the shell with the sample as PNG on stdin and reads an integer
/// score from stdout, clamped to 0–100.
pub fn external_score(fp: &FingerprintImage, cmd: &str) -> Result<u8> {
    let png = encode_png(&RasterImage::from_gray(&fp.gray))?;
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| Error::ExternalScorer(e.to_string()))?;
    {
        let mut stdin = child.stdin.take().expect("piped stdin");
        // a scorer may exit without draining stdin; its exit status decides
        let _ = stdin.write_all(&png);
    }
    let out = child.wait_with_output().map_err(|e| Error::ExternalScorer(e.to_string()))?;
    if !out.status.success() {
        return Err(Error::ExternalScorer(format!("`{cmd}` exited with {}", out.status)));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let v: i64 = text
        .trim()
        .parse()
        .map_err(|_| Error::ExternalScorer(format!("`{cmd}` printed {:?}, expected an integer", text.trim())))?;
    Ok(v.clamp(0, 100) as u8)
}

/// Full report; the composite comes from `external_cmd` when configured.
pub fn assess_quality(fp: &FingerprintImage, cfg: &QualityConfig) -> Result<QualityReport> {
    let sharpness = sharpness_score(fp, cfg)?;
    let size_ok = check_size(fp, cfg);
    let composite = match &cfg.external_cmd {
        Some(cmd) => external_score(fp, cmd)?,
        None => quality_score(fp, cfg),
    };
    Ok(QualityReport {
        sharpness,
        size_ok,
        composite,
        passed: sharpness >= cfg.sharp_min && size_ok,
    })
}

/// Index of the highest composite score; ties go to the lowest index.
pub fn select_best(reports: &[QualityReport]) -> Result<usize> {
    let mut best: Option<(usize, u8)> = None;
    for (i, r) in reports.iter().enumerate() {
        if best.is_none_or(|(_, s)| r.composite > s) {
            best = Some((i, r.composite));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::NoCandidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{gaussian_blur_channel, BinaryMask};

    fn fp_of(gray: ChannelImage) -> FingerprintImage {
        let (w, h) = (gray.width(), gray.height());
        FingerprintImage {
            roi: BinaryMask::from_fn(w, h, |_, _| true),
            gray,
            finger_id: None,
            roi_width: w,
            roi_height: h,
        }
    }

    fn stripes(w: usize, h: usize, half_period: usize) -> ChannelImage {
        ChannelImage::from_fn(w, h, |x, _| if (x / half_period) % 2 == 0 { 0 } else { 255 })
    }

    #[test]
    fn sharpness_examples() {
        let cfg = QualityConfig::default();
        assert_eq!(sharpness_score(&fp_of(ChannelImage::filled(64, 64, 90)), &cfg).unwrap(), 0.0);
        let sharp = sharpness_score(&fp_of(stripes(64, 64, 2)), &cfg).unwrap();
        assert!(sharp >= 0.9, "{sharp}");
        let blurred = gaussian_blur_channel(&stripes(64, 64, 2), 4.0);
        assert!(sharpness_score(&fp_of(blurred), &cfg).unwrap() < sharp);
        assert!(matches!(
            sharpness_score(&fp_of(ChannelImage::filled(20, 64, 0)), &cfg),
            Err(Error::TooSmall { .. })
        ));
    }

    #[test]
    fn single_pixel_stripes_cancel_under_central_differences() {
        let cfg = QualityConfig::default();
        assert_eq!(sharpness_score(&fp_of(stripes(64, 64, 1)), &cfg).unwrap(), 0.0);
    }

    #[test]
    fn histogram_counts_window() {
        let cfg = QualityConfig::default();
        let hist = gradient_histogram(&fp_of(stripes(64, 64, 2)), &cfg).unwrap();
        assert_eq!(hist.iter().sum::<u32>(), 32 * 32);
        assert_eq!(hist[255], 32 * 32);
        assert!(histogram_csv(&hist).starts_with("magnitude,count\n0,0\n"));
    }

    #[test]
    fn size_examples() {
        let cfg = QualityConfig::default();
        let with_roi = |w, h| FingerprintImage {
            roi_width: w,
            roi_height: h,
            ..fp_of(ChannelImage::filled(40, 40, 1))
        };
        assert!(check_size(&with_roi(300, 450), &cfg));
        assert!(!check_size(&with_roi(300, 100), &cfg));
        let w = cfg.min_roi_area.div_ceil(cfg.min_roi_height);
        let exact = FingerprintImage {
            roi_width: w,
            roi_height: cfg.min_roi_height,
            ..fp_of(ChannelImage::filled(40, 40, 1))
        };
        assert!(check_size(&exact, &QualityConfig {
            min_roi_area: w * cfg.min_roi_height,
            ..cfg.clone()
        }));
        assert!(!check_size(&with_roi(w, cfg.min_roi_height - 1), &cfg));
    }

    #[test]
    fn composite_examples() {
        let cfg = QualityConfig::default();
        assert_eq!(quality_score(&fp_of(ChannelImage::filled(64, 64, 100)), &cfg), 20);
        assert_eq!(quality_score(&fp_of(stripes(64, 64, 2)), &cfg), 100);
        let empty = FingerprintImage {
            roi: BinaryMask::new(64, 64),
            ..fp_of(ChannelImage::filled(64, 64, 0))
        };
        assert_eq!(quality_score(&empty, &cfg), 0);
    }

    #[test]
    fn composite_is_monotone() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        for &a in &grid {
            for &b in &grid {
                for w in grid.windows(2) {
                    assert!(composite_score(w[0], a, b) <= composite_score(w[1], a, b));
                    assert!(composite_score(a, w[0], b) <= composite_score(a, w[1], b));
                    assert!(composite_score(a, b, w[0]) <= composite_score(a, b, w[1]));
                }
            }
        }
    }

    fn reports(scores: &[u8]) -> Vec<QualityReport> {
        scores
            .iter()
            .map(|&c| QualityReport {
                sharpness: 1.0,
                size_ok: true,
                composite: c,
                passed: true,
            })
            .collect()
    }

    #[test]
    fn select_examples() {
        assert_eq!(select_best(&reports(&[40, 55, 30, 62, 50])).unwrap(), 3);
        assert_eq!(select_best(&reports(&[50, 50])).unwrap(), 0);
        assert!(matches!(select_best(&[]), Err(Error::NoCandidates)));
    }

    #[test]
    fn external_scorer() {
        let cfg = QualityConfig {
            external_cmd: Some("cat > /dev/null; echo 77".into()),
            ..QualityConfig::default()
        };
        let r = assess_quality(&fp_of(stripes(64, 64, 2)), &cfg).unwrap();
        assert_eq!(r.composite, 77);
        let bad = QualityConfig {
            external_cmd: Some("echo nope".into()),
            ..QualityConfig::default()
        };
        assert!(matches!(assess_quality(&fp_of(stripes(64, 64, 2)), &bad), Err(Error::ExternalScorer(_))));
    }
}
