use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRACE_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    /// The target class stopped being the top prediction.
    Flipped,
    /// Every token was removed without a flip.
    Exhausted,
    /// The iteration cap was hit first.
    MaxItersReached,
}

impl std::fmt::Display for TraceStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Flipped => "flipped",
            Self::Exhausted => "exhausted",
            Self::MaxItersReached => "max_iters_reached",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributionStep {
    /// 1-based iteration counter.
    #[serde(rename = "i")]
    pub iteration: usize,
    pub token: usize,
    /// Target-class confidence with this and all earlier tokens removed.
    pub confidence: f32,
    /// Previous confidence minus `confidence`.
    pub drop: f32,
}

/// Ordered record of one greedy token-removal run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionTrace {
    pub schema: u32,
    pub target_class: usize,
    pub initial_confidence: f32,
    pub status: TraceStatus,
    pub steps: Vec<AttributionStep>,
}

impl AttributionTrace {
    pub fn removed_tokens(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|s| s.token)
    }

    pub fn final_confidence(&self) -> f32 {
        self.steps
            .last()
            .map_or(self.initial_confidence, |s| s.confidence)
    }

    /// Largest single-step drop, or 0 for an empty trace.
    pub fn max_single_drop(&self) -> f32 {
        self.steps.iter().map(|s| s.drop).fold(0.0, f32::max)
    }

    /// Structural checks: schema version, 1-based contiguous iterations,
    /// distinct tokens, confidences in `[0, 1]`.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.schema != TRACE_SCHEMA {
            return Err(format!("unsupported schema {}", self.schema));
        }
        if !(0.0..=1.0).contains(&self.initial_confidence) {
            return Err(format!(
                "initial_confidence {} outside [0, 1]",
                self.initial_confidence
            ));
        }
        let mut seen = HashSet::new();
        for (idx, step) in self.steps.iter().enumerate() {
            if step.iteration != idx + 1 {
                return Err(format!("step {} has i = {}", idx + 1, step.iteration));
            }
            if !seen.insert(step.token) {
                return Err(format!("token {} removed twice", step.token));
            }
            if !(0.0..=1.0).contains(&step.confidence) {
                return Err(format!("confidence {} outside [0, 1]", step.confidence));
            }
        }
        Ok(())
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let trace: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        trace.check()?;
        Ok(trace)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|message| Error::TraceParse {
            path: path.to_owned(),
            message,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}
