//! Frame-level composition of the stages: hand mask, finger location, rendering and
//! quality assessment.

use crate::config::PipelineConfig;
use crate::enhancement::{render_fingerprint, FingerprintImage};
use crate::error::{Error, Result};
use crate::geometry::{assign_finger_ids, locate_fingers, FingerCrop, FingerId, HandSide};
use crate::par::Exec;
use crate::quality::{assess_quality, QualityReport};
use crate::raster::{BinaryMask, RasterImage};
use crate::segmentation::{check_mask_plausibility, connected_components, dominant_components, segment_hand};

/// One rendered finger with its ID and quality.
#[derive(Clone, Debug, PartialEq)]
pub struct FingerSample {
    pub finger_id: FingerId,
    pub image: FingerprintImage,
    pub quality: QualityReport,
}

/// Segments the frame, applies the plausibility rules and keeps the dominant components.
pub fn hand_mask(frame: &RasterImage, cfg: &PipelineConfig) -> Result<BinaryMask> {
    let raw = segment_hand(frame, &cfg.segmentation)?;
    let cs = connected_components(&raw);
    let verdict = check_mask_plausibility(&cs, &cfg.segmentation);
    if !verdict.pass {
        return Err(Error::ImplausibleMask(verdict.reason));
    }
    let mut keep = vec![false; cs.components.len() + 1];
    for c in dominant_components(&cs, &cfg.segmentation) {
        keep[c.id as usize] = true;
    }
    let bits: Vec<u8> = cs.labels.iter().map(|&l| keep[l as usize] as u8).collect();
    BinaryMask::from_bytes(cs.width, cs.height, &bits)
}

/// Upright fingertip crops of the four fingers, left to right, with their IDs.
pub fn locate_hand(frame: &RasterImage, hand: HandSide, cfg: &PipelineConfig, exec: Exec) -> Result<Vec<(FingerCrop, FingerId)>> {
    let mask = hand_mask(frame, cfg)?;
    let crops = locate_fingers(frame, &mask, &cfg.geometry, exec)?;
    let ids = assign_finger_ids(&crops, hand)?;
    Ok(crops.into_iter().zip(ids).collect())
}

/// Frame → four normalized fingerprints, left to right, each tagged with its finger ID.
pub fn process_hand(frame: &RasterImage, hand: HandSide, cfg: &PipelineConfig, exec: Exec) -> Result<Vec<FingerprintImage>> {
    let located = locate_hand(frame, hand, cfg, exec)?;
    exec.map(&located, |(crop, id)| render_fingerprint(crop, Some(*id), &cfg.enhancement))
        .into_iter()
        .collect()
}

/// Quality of one sample. Images too small for the sharpness window fail every check
/// instead of aborting the frame.
pub fn assess_sample(fp: &FingerprintImage, cfg: &PipelineConfig) -> Result<QualityReport> {
    match assess_quality(fp, &cfg.quality) {
        Err(Error::TooSmall { .. }) => Ok(QualityReport {
            sharpness: 0.0,
            size_ok: false,
            composite: 0,
            passed: false,
        }),
        other => other,
    }
}

/// Full per-frame pipeline: segmentation, geometry, four renders and their quality.
pub fn analyze_frame(frame: &RasterImage, hand: HandSide, cfg: &PipelineConfig, exec: Exec) -> Result<Vec<FingerSample>> {
    let images = process_hand(frame, hand, cfg, exec)?;
    let reports: Vec<Result<QualityReport>> = exec.map(&images, |fp| assess_sample(fp, cfg));
    images
        .into_iter()
        .zip(reports)
        .map(|(image, q)| {
            Ok(FingerSample {
                finger_id: image.finger_id.expect("rendered with an id"),
                image,
                quality: q?,
            })
        })
        .collect()
}
