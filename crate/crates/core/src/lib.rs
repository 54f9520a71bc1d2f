//! Touchless fingerprint toolkit: hand-photo segmentation, finger separation and
//! normalization, quality checks, minutiae extraction and matching, and biometric
//! evaluation.
//!
//! With the default `parallel` feature, per-finger work and cross-comparisons can fan
//! out over a rayon pool; [`par::Exec`] selects the mode at run time.

pub mod capture;
pub mod config;
pub mod enhancement;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod imageio;
pub mod matcher;
pub mod minutiae;
pub mod par;
pub mod pipeline;
pub mod quality;
pub mod raster;
pub mod segmentation;
pub mod synth;

pub use config::PipelineConfig;
pub use error::{Error, Result};
