//! Signal cycles replayed by the controller emulator.
//!
//! A cycle file is a JSON array of steps, each holding the eight phase
//! colors and a dwell time in deciseconds:
//!
//! ```json
//! [
//!   {"phases": ["green","red","red","red","green","red","red","red"], "dwell_ds": 20},
//!   {"phases": ["yellow","red","red","red","yellow","red","red","red"], "dwell_ds": 5}
//! ]
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{IntersectionState, PhaseColor};

pub const DEFAULT_GREEN_DS: u32 = 20;
pub const DEFAULT_YELLOW_DS: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleStep {
    pub phases: IntersectionState,
    pub dwell_ds: u32,
}

#[derive(Debug, Error)]
pub enum CycleError {
    #[error("cycle has no steps")]
    Empty,
    #[error("step {0} has zero dwell")]
    ZeroDwell(usize),
    #[error("invalid cycle file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleSpec {
    steps: Vec<CycleStep>,
    period_ds: u64,
}

impl CycleSpec {
    pub fn new(steps: Vec<CycleStep>) -> Result<Self, CycleError> {
        if steps.is_empty() {
            return Err(CycleError::Empty);
        }
        if let Some(i) = steps.iter().position(|s| s.dwell_ds == 0) {
            return Err(CycleError::ZeroDwell(i));
        }
        let period_ds = steps.iter().map(|s| u64::from(s.dwell_ds)).sum();
        Ok(Self { steps, period_ds })
    }

    /// Phase pairs 1&5, 2&6, 3&7, 4&8 in turn, each green then yellow.
    pub fn phase_pairs(green_ds: u32, yellow_ds: u32) -> Result<Self, CycleError> {
        let steps = [[1, 5], [2, 6], [3, 7], [4, 8]]
            .iter()
            .flat_map(|pair| {
                [
                    CycleStep {
                        phases: IntersectionState::with(PhaseColor::Green, pair),
                        dwell_ds: green_ds,
                    },
                    CycleStep {
                        phases: IntersectionState::with(PhaseColor::Yellow, pair),
                        dwell_ds: yellow_ds,
                    },
                ]
            })
            .collect();
        Self::new(steps)
    }

    pub fn from_json(text: &str) -> Result<Self, CycleError> {
        Self::new(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.steps).expect("cycle serializes")
    }

    pub fn steps(&self) -> &[CycleStep] {
        &self.steps
    }

    pub fn period_ds(&self) -> u64 {
        self.period_ds
    }

    /// State shown `elapsed_ds` deciseconds after the cycle starts.
    pub fn state_at(&self, elapsed_ds: u64) -> IntersectionState {
        let mut t = elapsed_ds % self.period_ds;
        for step in &self.steps {
            let dwell = u64::from(step.dwell_ds);
            if t < dwell {
                return step.phases;
            }
            t -= dwell;
        }
        unreachable!("offset within period")
    }
}

impl Default for CycleSpec {
    fn default() -> Self {
        Self::phase_pairs(DEFAULT_GREEN_DS, DEFAULT_YELLOW_DS).expect("default cycle is valid")
    }
}
