//! Every tunable of the pipeline, grouped by stage, with JSON (de)serialization.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable consulted for a config path when none is given explicitly.
pub const CONFIG_ENV: &str = "TOUCHPRINT_CONFIG";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentationConfig {
    /// Component area, as a fraction of the frame, above which it counts as dominant.
    pub min_component_fraction: f64,
    pub max_dominant: usize,
    pub min_aspect: f64,
    pub max_aspect: f64,
    /// Minimum component area / bbox area.
    pub min_fill_ratio: f64,
    /// Combined dominant area bounds, as a fraction of the frame.
    pub min_fill: f64,
    pub max_fill: f64,
    /// Lower Cr bound for skin; rejects frames whose "bright" Otsu class is not skin at all.
    pub cr_min: u8,
    /// Half-width, in hue bytes, of the band around red that skin may occupy.
    pub hue_band: u8,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            min_component_fraction: 0.02,
            max_dominant: 4,
            min_aspect: 0.15,
            max_aspect: 8.0,
            min_fill_ratio: 0.3,
            min_fill: 0.10,
            max_fill: 0.90,
            cr_min: 135,
            hue_band: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub expected_fingers: usize,
    /// Rows removed per separation attempt, as a fraction of the hand height.
    pub trim_step: f64,
    /// Total trimming budget, as a fraction of the hand height.
    pub max_trim: f64,
    /// Component area, as a fraction of the whole hand area, to count as a finger.
    pub finger_min_fraction: f64,
    /// Straighten the residual hand tilt left after the quadrant rotation.
    pub tilt_correction: bool,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            expected_fingers: 4,
            trim_step: 0.04,
            max_trim: 0.60,
            finger_min_fraction: 0.03,
            tilt_correction: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnhancementConfig {
    pub clahe_clip: f64,
    pub clahe_tiles_x: usize,
    pub clahe_tiles_y: usize,
    pub border_px: usize,
    pub norm_width: usize,
}

impl Default for EnhancementConfig {
    fn default() -> Self {
        Self {
            clahe_clip: 2.0,
            clahe_tiles_x: 8,
            clahe_tiles_y: 8,
            border_px: 15,
            norm_width: 300,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QualityConfig {
    /// Side of the centered sharpness window.
    pub window: usize,
    /// Gradient magnitude threshold on the 0–255 scale.
    pub grad_min: f64,
    pub sharp_min: f64,
    pub min_roi_height: usize,
    pub min_roi_area: usize,
    /// Candidates collected per finger before the best one is kept.
    pub candidates: usize,
    /// Optional scorer: reads a PNG on stdin, prints an integer 0–100.
    pub external_cmd: Option<String>,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self {
            window: 32,
            grad_min: 48.0,
            sharp_min: 0.05,
            min_roi_height: 240,
            min_roi_area: 50_000,
            candidates: 5,
            external_cmd: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinutiaeConfig {
    pub block_size: usize,
    /// Length of the along-ridge smoothing window.
    pub smooth_len: usize,
    pub threshold_block: usize,
    pub threshold_offset: f64,
    pub border_px: f64,
    pub merge_px: f64,
    pub max_minutiae: usize,
}

impl Default for MinutiaeConfig {
    fn default() -> Self {
        Self {
            block_size: 16,
            smooth_len: 7,
            threshold_block: 16,
            threshold_offset: 0.0,
            border_px: 15.0,
            merge_px: 6.0,
            max_minutiae: 1024,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionRule {
    #[default]
    Mean,
    Max,
    SumNormalized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatcherConfig {
    pub root_limit: usize,
    pub dist_tol: f64,
    /// Radians.
    pub angle_tol: f64,
    pub neighbors: usize,
    pub fusion: FusionRule,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            root_limit: 64,
            dist_tol: 15.0,
            angle_tol: std::f64::consts::PI / 8.0,
            neighbors: 3,
            fusion: FusionRule::Mean,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaptureConfig {
    pub max_frames: usize,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        Self { max_frames: 300 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub segmentation: SegmentationConfig,
    pub geometry: GeometryConfig,
    pub enhancement: EnhancementConfig,
    pub quality: QualityConfig,
    pub minutiae: MinutiaeConfig,
    pub matcher: MatcherConfig,
    pub capture: CaptureConfig,
}

fn check(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} out of range")))
    }
}

fn unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Explicit path first, then `TOUCHPRINT_CONFIG`, then defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::from_file(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::from_file(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies a `section.key=value` override. The value is parsed as JSON, falling back
    /// to a plain string.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut doc = serde_json::to_value(&*self).expect("config serializes");
        let mut slot = &mut doc;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|o| o.get_mut(part))
                .ok_or_else(|| Error::Config(format!("unknown config key `{key}`")))?;
        }
        *slot = serde_json::from_str(value)
            .unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        let updated: Self =
            serde_json::from_value(doc).map_err(|e| Error::Config(format!("{key}: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.segmentation;
        check(unit(s.min_component_fraction), "segmentation.min_component_fraction")?;
        check(s.max_dominant >= 1, "segmentation.max_dominant")?;
        check(s.min_aspect > 0.0 && s.min_aspect <= s.max_aspect, "segmentation.min_aspect/max_aspect")?;
        check(unit(s.min_fill_ratio), "segmentation.min_fill_ratio")?;
        check(unit(s.min_fill) && unit(s.max_fill) && s.min_fill <= s.max_fill, "segmentation.min_fill/max_fill")?;
        let g = &self.geometry;
        check(g.expected_fingers >= 1, "geometry.expected_fingers")?;
        check(g.trim_step > 0.0 && g.trim_step <= 1.0, "geometry.trim_step")?;
        check(unit(g.max_trim), "geometry.max_trim")?;
        check(unit(g.finger_min_fraction), "geometry.finger_min_fraction")?;
        let e = &self.enhancement;
        check(e.clahe_clip >= 1.0 && e.clahe_clip.is_finite(), "enhancement.clahe_clip")?;
        check(e.clahe_tiles_x >= 1 && e.clahe_tiles_y >= 1, "enhancement.clahe_tiles")?;
        check(e.norm_width >= 1, "enhancement.norm_width")?;
        let q = &self.quality;
        check(q.window >= 3, "quality.window")?;
        check(q.grad_min >= 0.0, "quality.grad_min")?;
        check(unit(q.sharp_min), "quality.sharp_min")?;
        check(q.candidates >= 1, "quality.candidates")?;
        let m = &self.minutiae;
        check(m.block_size >= 4, "minutiae.block_size")?;
        check(m.smooth_len >= 1, "minutiae.smooth_len")?;
        check(m.threshold_block >= 2, "minutiae.threshold_block")?;
        check(m.border_px >= 0.0 && m.merge_px >= 0.0, "minutiae.border_px/merge_px")?;
        check((1..=1024).contains(&m.max_minutiae), "minutiae.max_minutiae")?;
        let t = &self.matcher;
        check(t.root_limit >= 1, "matcher.root_limit")?;
        check(t.dist_tol > 0.0, "matcher.dist_tol")?;
        check(t.angle_tol > 0.0 && t.angle_tol <= std::f64::consts::PI, "matcher.angle_tol")?;
        check(t.neighbors >= 1, "matcher.neighbors")?;
        check(self.capture.max_frames >= 1, "capture.max_frames")?;
        Ok(())
    }
}
