//! Capture-session state machine: frames stream in, passing fingers fill per-finger
//! candidate buffers, and the best candidate of each full buffer becomes the sample.

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::geometry::{finger_order, FingerId, HandSide};
use crate::minutiae::{extract_template, MinutiaTemplate};
use crate::par::Exec;
use crate::pipeline::{analyze_frame, FingerSample};
use crate::quality::select_best;
use crate::raster::RasterImage;
use crate::segmentation::MaskReason;

/// Candidates collected per finger before selection.
pub const CANDIDATES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    WaitingForHand,
    /// Candidates held per finger, in finger order.
    Collecting([u8; 4]),
    Done,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    NoHand,
    Blurry,
    BadPose,
    Progress,
    Complete,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionState {
    pub hand: HandSide,
    pub fingers: [FingerId; 4],
    pub buffers: [Vec<FingerSample>; 4],
    pub status: SessionStatus,
    pub frames_seen: usize,
    pub feedback: Option<Feedback>,
    /// Index of the selected candidate per finger once the session is done.
    pub best: Option<[usize; 4]>,
    cfg: PipelineConfig,
    exec: Exec,
}

pub fn start_session(hand: HandSide, cfg: &PipelineConfig) -> SessionState {
    SessionState {
        hand,
        fingers: finger_order(hand),
        buffers: Default::default(),
        status: SessionStatus::WaitingForHand,
        frames_seen: 0,
        feedback: None,
        best: None,
        cfg: cfg.clone(),
        exec: Exec::default(),
    }
}

fn counts(buffers: &[Vec<FingerSample>; 4]) -> [u8; 4] {
    std::array::from_fn(|i| buffers[i].len() as u8)
}

impl SessionState {
    /// Execution mode for the per-finger work inside each frame.
    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn is_closed(&self) -> bool {
        matches!(self.status, SessionStatus::Done | SessionStatus::Failed)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    /// Advances the session by one frame.
    pub fn process_frame(&mut self, frame: &RasterImage) -> Result<Feedback> {
        if self.is_closed() {
            return Err(Error::SessionClosed);
        }
        self.frames_seen += 1;
        let feedback = match analyze_frame(frame, self.hand, &self.cfg, self.exec) {
            Ok(samples) => self.absorb(samples),
            Err(Error::ImplausibleMask(MaskReason::NoComponent)) | Err(Error::EmptyHistogram) => Feedback::NoHand,
            Err(
                Error::ImplausibleMask(_)
                | Error::DiscardFrame { .. }
                | Error::SeparationFailed { .. }
                | Error::WrongFingerCount(_)
                | Error::EmptyMask
                | Error::EmptyRoi,
            ) => {
                self.mark_hand_seen();
                Feedback::BadPose
            }
            Err(e) => return Err(e),
        };
        if self.status != SessionStatus::Done && self.frames_seen >= self.cfg.capture.max_frames {
            self.status = SessionStatus::Failed;
        }
        self.feedback = Some(feedback);
        Ok(feedback)
    }

    fn mark_hand_seen(&mut self) {
        if self.status == SessionStatus::WaitingForHand {
            self.status = SessionStatus::Collecting(counts(&self.buffers));
        }
    }

    fn absorb(&mut self, samples: Vec<FingerSample>) -> Feedback {
        let mut any_failed = false;
        for s in samples {
            let Some(slot) = self.fingers.iter().position(|&f| f == s.finger_id) else {
                continue;
            };
            if !s.quality.passed {
                any_failed = true;
                continue;
            }
            if self.buffers[slot].len() < CANDIDATES {
                self.buffers[slot].push(s);
            }
        }
        if self.buffers.iter().all(|b| b.len() == CANDIDATES) {
            let reports = |b: &Vec<FingerSample>| b.iter().map(|s| s.quality.clone()).collect::<Vec<_>>();
            let best: [usize; 4] = std::array::from_fn(|i| select_best(&reports(&self.buffers[i])).expect("full buffer"));
            self.best = Some(best);
            self.status = SessionStatus::Done;
            return Feedback::Complete;
        }
        self.status = SessionStatus::Collecting(counts(&self.buffers));
        if any_failed {
            Feedback::Blurry
        } else {
            Feedback::Progress
        }
    }

    /// Best sample per finger and its minutiae template.
    pub fn finalize(&self) -> Result<Vec<(FingerSample, MinutiaTemplate)>> {
        let Some(best) = self.best.filter(|_| self.status == SessionStatus::Done) else {
            return Err(Error::NotDone);
        };
        let chosen: Vec<&FingerSample> = (0..4).map(|i| &self.buffers[i][best[i]]).collect();
        self.exec
            .map(&chosen, |s| extract_template(&s.image, s.finger_id, &self.cfg.minutiae).map(|t| ((*s).clone(), t)))
            .into_iter()
            .collect()
    }

    /// JSON summary of the session for logs.
    pub fn log(&self) -> serde_json::Value {
        let quality: Vec<serde_json::Value> = (0..4)
            .map(|i| {
                serde_json::json!({
                    "finger_id": self.fingers[i].code(),
                    "candidates": self.buffers[i].iter().map(|s| s.quality.composite).collect::<Vec<_>>(),
                    "selected": self.best.map(|b| self.buffers[i][b[i]].quality.composite),
                })
            })
            .collect();
        serde_json::json!({
            "hand": self.hand,
            "status": self.status,
            "frames_seen": self.frames_seen,
            "feedback": self.feedback,
            "fingers": quality,
        })
    }
}

pub fn finalize_session(st: &SessionState) -> Result<Vec<(FingerSample, MinutiaTemplate)>> {
    st.finalize()
}
