//! Synthetic acoustic-segmentation noise.
//!
//! Gold boundary sequences are corrupted by two error modes: dropping true
//! boundaries (under-segmentation) and inserting spurious ones
//! (over-segmentation). Every operation consumes exactly one uniform draw
//! per position. Drop decisions fire on the bottom of the unit interval
//! (`u < under_rate`) and insert decisions on the top (`u >= 1 - over_rate`),
//! so as long as the rates sum to at most 1 the two passes act on disjoint
//! events and composing them in either order equals the joint sampler.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SegError};

/// Which error modes the synthesizer simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Both,
    UnderOnly,
    OverOnly,
    None,
}

impl std::str::FromStr for NoiseMode {
    type Err = SegError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(NoiseMode::Both),
            "under_only" => Ok(NoiseMode::UnderOnly),
            "over_only" => Ok(NoiseMode::OverOnly),
            "none" => Ok(NoiseMode::None),
            other => Err(SegError::data(format!(
                "unknown noise mode {other:?}; expected both|under_only|over_only|none"
            ))),
        }
    }
}

impl std::fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NoiseMode::Both => "both",
            NoiseMode::UnderOnly => "under_only",
            NoiseMode::OverOnly => "over_only",
            NoiseMode::None => "none",
        };
        f.write_str(s)
    }
}

/// Rates and mode for synthetic segmentation noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Probability of dropping a true boundary.
    pub under_rate: f64,
    /// Probability of inserting a boundary at a non-boundary position.
    pub over_rate: f64,
    pub mode: NoiseMode,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            under_rate: 0.25,
            over_rate: 0.25,
            mode: NoiseMode::Both,
            seed: 0,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        for (name, rate) in [("under_rate", self.under_rate), ("over_rate", self.over_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(SegError::data(format!("{name} must be in [0, 1], got {rate}")));
            }
        }
        Ok(())
    }

    /// Effective drop rate after accounting for the mode switch.
    pub fn effective_under(&self) -> f64 {
        match self.mode {
            NoiseMode::Both | NoiseMode::UnderOnly => self.under_rate,
            NoiseMode::OverOnly | NoiseMode::None => 0.0,
        }
    }

    /// Effective insert rate after accounting for the mode switch.
    pub fn effective_over(&self) -> f64 {
        match self.mode {
            NoiseMode::Both | NoiseMode::OverOnly => self.over_rate,
            NoiseMode::UnderOnly | NoiseMode::None => 0.0,
        }
    }
}

fn uniform_draws<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

fn drop_fires(u: f64, under_rate: f64) -> bool {
    u < under_rate
}

fn insert_fires(u: f64, over_rate: f64) -> bool {
    u >= 1.0 - over_rate
}

/// Under-segmentation given one uniform draw per position: true boundaries
/// are dropped where the draw fires; non-boundaries are untouched.
pub fn apply_under_segmentation_from_draws(tags: &[u8], under_rate: f64, draws: &[f64]) -> Vec<u8> {
    assert_eq!(tags.len(), draws.len(), "one draw per position");
    tags.iter()
        .zip(draws)
        .map(|(&t, &u)| {
            if t == 1 && drop_fires(u, under_rate) {
                0
            } else {
                t
            }
        })
        .collect()
}

/// Over-segmentation given one uniform draw per position: boundaries are
/// inserted at non-boundary positions where the draw fires; true boundaries
/// are untouched.
pub fn apply_over_segmentation_from_draws(tags: &[u8], over_rate: f64, draws: &[f64]) -> Vec<u8> {
    assert_eq!(tags.len(), draws.len(), "one draw per position");
    tags.iter()
        .zip(draws)
        .map(|(&t, &u)| {
            if t == 0 && insert_fires(u, over_rate) {
                1
            } else {
                t
            }
        })
        .collect()
}

/// Joint sampler given one uniform draw per position: positions with a true
/// boundary keep it unless the drop decision fires; positions without one
/// gain a boundary when the insert decision fires.
pub fn synthesize_gamma_from_draws(labels: &[u8], params: &NoiseParams, draws: &[f64]) -> Vec<u8> {
    assert_eq!(labels.len(), draws.len(), "one draw per position");
    let under = params.effective_under();
    let over = params.effective_over();
    labels
        .iter()
        .zip(draws)
        .map(|(&y, &u)| match y {
            1 => u8::from(!drop_fires(u, under)),
            _ => u8::from(insert_fires(u, over)),
        })
        .collect()
}

/// [`apply_under_segmentation_from_draws`] with rng-generated draws.
pub fn apply_under_segmentation<R: Rng>(tags: &[u8], under_rate: f64, rng: &mut R) -> Vec<u8> {
    let draws = uniform_draws(tags.len(), rng);
    apply_under_segmentation_from_draws(tags, under_rate, &draws)
}

/// [`apply_over_segmentation_from_draws`] with rng-generated draws.
pub fn apply_over_segmentation<R: Rng>(tags: &[u8], over_rate: f64, rng: &mut R) -> Vec<u8> {
    let draws = uniform_draws(tags.len(), rng);
    apply_over_segmentation_from_draws(tags, over_rate, &draws)
}

/// [`synthesize_gamma_from_draws`] with rng-generated draws.
pub fn synthesize_gamma<R: Rng>(labels: &[u8], params: &NoiseParams, rng: &mut R) -> Vec<u8> {
    let draws = uniform_draws(labels.len(), rng);
    synthesize_gamma_from_draws(labels, params, &draws)
}
