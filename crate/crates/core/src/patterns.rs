//! Classification of an obstacle encounter into one of the four avoidance
//! patterns.
//!
//! | passed | ever broke | reunited | label            |
//! |--------|------------|----------|------------------|
//! | no     | no         | -        | Rebound          |
//! | no     | yes        | yes      | Pullback         |
//! | no     | yes        | no       | Unclassified     |
//! | yes    | -          | yes      | PassAndReunion   |
//! | yes    | -          | no       | Separation       |
//!
//! "Passed" means the centroid got further than `ρ + margin` beyond the
//! obstacle center along the approach axis, with `margin` half the initial
//! school diameter. "Reunited" means one ε-component at the end with velocity
//! spread below [`REUNION_THETA_FACTOR`]`·θ`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::TrajectorySummary;
use crate::model::{Obstacle, SchoolingCriteria};
use crate::vector::Vector;

pub const REUNION_THETA_FACTOR: f64 = 1e3;
pub const PASS_MARGIN_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternLabel {
    Rebound,
    Pullback,
    PassAndReunion,
    Separation,
    Unclassified,
    BlowUp,
}

impl PatternLabel {
    /// Roman numeral of the four proper patterns.
    pub fn numeral(self) -> Option<&'static str> {
        match self {
            PatternLabel::Rebound => Some("I"),
            PatternLabel::Pullback => Some("II"),
            PatternLabel::PassAndReunion => Some("III"),
            PatternLabel::Separation => Some("IV"),
            _ => None,
        }
    }

    /// 1..=4 for the proper patterns.
    pub fn rank(self) -> Option<u8> {
        match self {
            PatternLabel::Rebound => Some(1),
            PatternLabel::Pullback => Some(2),
            PatternLabel::PassAndReunion => Some(3),
            PatternLabel::Separation => Some(4),
            _ => None,
        }
    }
}

impl fmt::Display for PatternLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PatternLabel::Rebound => "Rebound",
            PatternLabel::Pullback => "Pullback",
            PatternLabel::PassAndReunion => "PassAndReunion",
            PatternLabel::Separation => "Separation",
            PatternLabel::Unclassified => "Unclassified",
            PatternLabel::BlowUp => "BlowUp",
        };
        f.write_str(name)
    }
}

impl FromStr for PatternLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "Rebound" | "I" => PatternLabel::Rebound,
            "Pullback" | "II" => PatternLabel::Pullback,
            "PassAndReunion" | "III" => PatternLabel::PassAndReunion,
            "Separation" | "IV" => PatternLabel::Separation,
            "Unclassified" => PatternLabel::Unclassified,
            "BlowUp" => PatternLabel::BlowUp,
            other => return Err(Error::config("label", format!("unknown pattern `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncounterFeatures {
    pub ever_broke: bool,
    pub final_components: usize,
    pub final_sigma_v: f64,
    pub passed: bool,
    /// Unit vector of the final mean velocity, if it is non-zero.
    pub final_heading: Option<[f64; 3]>,
}

/// Largest signed progress of the centroid past the obstacle center along
/// `axis`.
pub fn max_progress(summary: &TrajectorySummary, obstacle: &Obstacle, axis: Vector) -> f64 {
    summary
        .samples
        .iter()
        .map(|s| (s.centroid - obstacle.center).dot(axis))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn pass_margin(summary: &TrajectorySummary) -> f64 {
    summary.first().map_or(0.0, |s| PASS_MARGIN_FRACTION * s.diameter)
}

/// Whether the centroid ever got beyond `ρ + margin` past the center.
pub fn passed_obstacle(
    summary: &TrajectorySummary,
    obstacle: &Obstacle,
    axis: Vector,
    margin: f64,
) -> bool {
    max_progress(summary, obstacle, axis) > obstacle.radius + margin
}

pub fn encounter_features(
    summary: &TrajectorySummary,
    obstacle: &Obstacle,
    axis: Vector,
    criteria: &SchoolingCriteria,
) -> Result<EncounterFeatures> {
    let last = summary.last().ok_or(Error::HorizonTooShort {
        t_end: f64::NEG_INFINITY,
        required: criteria.t_onset,
    })?;
    if last.time < criteria.t_onset {
        return Err(Error::HorizonTooShort {
            t_end: last.time,
            required: criteria.t_onset,
        });
    }
    Ok(EncounterFeatures {
        ever_broke: summary.samples.iter().any(|s| s.n_components >= 2),
        final_components: last.n_components,
        final_sigma_v: last.sigma_v,
        passed: passed_obstacle(summary, obstacle, axis, pass_margin(summary)),
        final_heading: last.mean_velocity.normalized().map(|v| v.0),
    })
}

fn label_from_features(features: &EncounterFeatures, criteria: &SchoolingCriteria) -> PatternLabel {
    let reunited = features.final_components == 1
        && features.final_sigma_v <= REUNION_THETA_FACTOR * criteria.theta;
    match (features.passed, features.ever_broke, reunited) {
        (false, false, _) => PatternLabel::Rebound,
        (false, true, true) => PatternLabel::Pullback,
        (false, true, false) => PatternLabel::Unclassified,
        (true, _, true) => PatternLabel::PassAndReunion,
        (true, _, false) => PatternLabel::Separation,
    }
}

/// Applies the decision table to a finished encounter.
pub fn classify(
    summary: &TrajectorySummary,
    obstacle: &Obstacle,
    axis: Vector,
    criteria: &SchoolingCriteria,
) -> Result<PatternLabel> {
    if !summary.termination.is_completed() {
        return Ok(PatternLabel::BlowUp);
    }
    let features = encounter_features(summary, obstacle, axis, criteria)?;
    Ok(label_from_features(&features, criteria))
}
