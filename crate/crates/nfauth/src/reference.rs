//! Adaptive per-user reference for anomaly scores.
//!
//! Each score stream (foreground and background separately) carries an ESB
//! state: a preparation window measures the user's baseline, setting the
//! initial reference to mean minus population standard deviation; afterwards
//! scores are grouped into fixed-size blocks and each completed block's
//! average is folded into the reference by an exponentially weighted moving
//! average, so the reference tracks slow behavioral drift without chasing
//! single outliers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::Timestamp;

const SECS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EsbPhase {
    Preparing,
    Ready,
}

/// Reference-computation state for one score stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsbState {
    phase: EsbPhase,
    prep_scores: Vec<f64>,
    prep_start: Option<Timestamp>,
    prep_len_days: f64,
    block_size: u32,
    block_sum: f64,
    block_count: u32,
    reference: Option<f64>,
    ewma_alpha: f64,
}

impl EsbState {
    pub fn new(prep_len_days: f64, block_size: u32, ewma_alpha: f64) -> Result<EsbState> {
        if prep_len_days < 0.0
            || block_size < 1
            || !(0.0..1.0).contains(&ewma_alpha)
            || ewma_alpha == 0.0
        {
            return Err(Error::Config(
                "ESB needs prep_len_days >= 0, block_size >= 1, ewma_alpha in (0,1)".into(),
            ));
        }
        Ok(EsbState {
            phase: EsbPhase::Preparing,
            prep_scores: Vec::new(),
            prep_start: None,
            prep_len_days,
            block_size,
            block_sum: 0.0,
            block_count: 0,
            reference: None,
            ewma_alpha,
        })
    }

    pub fn phase(&self) -> EsbPhase {
        self.phase
    }

    pub fn is_ready(&self) -> bool {
        self.phase == EsbPhase::Ready
    }

    /// Current reference; defined once the preparation window has closed.
    pub fn reference(&self) -> Option<f64> {
        self.reference
    }

    /// Fold one anomaly score into the state; returns the reference that now
    /// applies, or `None` while still preparing.
    ///
    /// The score that closes the preparation window is excluded from both the
    /// baseline statistics and the first block; a score that lands on a full
    /// block finalizes that block's average into the reference and becomes
    /// the first member of the next block.
    pub fn update(&mut self, as_value: f64, now: Timestamp) -> Option<f64> {
        let start = *self.prep_start.get_or_insert(now);
        match self.phase {
            EsbPhase::Preparing => {
                let elapsed_days = now.saturating_sub(start) as f64 / SECS_PER_DAY;
                if elapsed_days < self.prep_len_days {
                    self.prep_scores.push(as_value);
                    return None;
                }
                let reference = if self.prep_scores.is_empty() {
                    // Nothing observed during preparation: anchor on the
                    // first score we have.
                    as_value
                } else {
                    let n = self.prep_scores.len() as f64;
                    let mean = self.prep_scores.iter().sum::<f64>() / n;
                    let variance = self
                        .prep_scores
                        .iter()
                        .map(|s| (s - mean).powi(2))
                        .sum::<f64>()
                        / n;
                    mean - variance.sqrt()
                };
                self.prep_scores = Vec::new();
                self.phase = EsbPhase::Ready;
                self.reference = Some(reference);
                Some(reference)
            }
            EsbPhase::Ready => {
                if self.block_count < self.block_size {
                    self.block_sum += as_value;
                    self.block_count += 1;
                } else {
                    let ave = self.block_sum / self.block_size as f64;
                    self.block_sum = as_value;
                    self.block_count = 1;
                    let prev = self.reference.expect("Ready implies a reference");
                    self.reference = Some(self.ewma_alpha * ave + (1.0 - self.ewma_alpha) * prev);
                }
                self.reference
            }
        }
    }
}
