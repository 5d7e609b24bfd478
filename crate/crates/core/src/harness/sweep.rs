//! Parameter sweeps over encounters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patterns::PatternLabel;

use super::encounter::{run_encounter, BootstrapCache, EncounterSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid {
    pub const fn new(lo: f64, hi: f64, step: f64) -> Self {
        Grid { lo, hi, step }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::config("grid.step", "must be > 0"));
        }
        if !(self.lo < self.hi && self.lo.is_finite() && self.hi.is_finite()) {
            return Err(Error::config("grid", "need lo < hi"));
        }
        Ok(())
    }

    /// `lo + k·step` for every `k` with the value not beyond `hi`.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.lo + k as f64 * self.step).collect()
    }
}

/// A regular grid or an explicit list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Range(Grid),
    Values { values: Vec<f64> },
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            GridSpec::Range(g) => g.validate(),
            GridSpec::Values { values } => {
                if values.is_empty() {
                    return Err(Error::config("grid.values", "must not be empty"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config("grid.values", "must be finite"));
                }
                Ok(())
            }
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            GridSpec::Range(g) => g.values(),
            GridSpec::Values { values } => values.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// `p`, with `q − p` held fixed and obstacle exponents tied to `p`, `q`.
    Exponent,
    /// Initial school speed.
    Speed,
    /// `r`, with `ε = R = r`.
    CriticalDistance,
}

impl SweepParameter {
    /// Desk-scale default grids.
    pub fn default_grid(self) -> Grid {
        match self {
            SweepParameter::Exponent => Grid::new(1.2, 8.0, 0.1),
            SweepParameter::Speed => Grid::new(0.25, 20.0, 0.25),
            SweepParameter::CriticalDistance => Grid::new(0.2, 2.8, 0.1),
        }
    }

    /// Full-resolution grids.
    pub fn full_grid(self) -> Grid {
        match self {
            SweepParameter::Exponent => Grid::new(1.001, 8.0, 0.001),
            SweepParameter::Speed => Grid::new(0.001, 20.0, 0.001),
            SweepParameter::CriticalDistance => Grid::new(0.2, 2.8, 0.1),
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &EncounterSpec, value: f64) -> EncounterSpec {
        let mut spec = base.clone();
        match self {
            SweepParameter::Exponent => {
                let offset = base.model.q_exp - base.model.p_exp;
                spec.model.p_exp = value;
                spec.model.q_exp = value + offset;
                spec.setup.p_obs = None;
                spec.setup.q_obs = None;
            }
            SweepParameter::Speed => spec.setup.speed = value,
            SweepParameter::CriticalDistance => {
                spec.model.r_crit = value;
                spec.criteria.epsilon = value;
                spec.setup.r_obs = None;
            }
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub label: PatternLabel,
    pub obstacle_radius: Option<f64>,
    pub school_diameter: Option<f64>,
    /// Set when the point could not be run; its label is then `Unclassified`.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter: SweepParameter,
    pub grid_values: Vec<f64>,
    pub labels: Vec<PatternLabel>,
    /// Midpoints between consecutive grid values whose labels differ.
    pub transition_boundaries: Vec<f64>,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn from_points(parameter: SweepParameter, points: Vec<SweepPoint>) -> Self {
        let grid_values: Vec<f64> = points.iter().map(|p| p.value).collect();
        let labels: Vec<PatternLabel> = points.iter().map(|p| p.label).collect();
        let transition_boundaries = points
            .windows(2)
            .filter(|w| w[0].label != w[1].label)
            .map(|w| 0.5 * (w[0].value + w[1].value))
            .collect();
        SweepReport {
            parameter,
            grid_values,
            labels,
            transition_boundaries,
            points,
        }
    }

    pub fn failed_points(&self) -> usize {
        self.points.iter().filter(|p| p.error.is_some()).count()
    }

    /// Label at `value`, if it is on the grid.
    pub fn label_at(&self, value: f64) -> Option<PatternLabel> {
        self.points
            .iter()
            .find(|p| (p.value - value).abs() < 1e-9)
            .map(|p| p.label)
    }
}

pub fn run_point(parameter: SweepParameter, base: &EncounterSpec, value: f64, cache: &BootstrapCache) -> SweepPoint {
    let spec = parameter.apply(base, value);
    match run_encounter(&spec, cache) {
        Ok(outcome) => SweepPoint {
            value,
            label: outcome.label,
            obstacle_radius: Some(outcome.obstacle.radius),
            school_diameter: Some(outcome.school_diameter),
            error: None,
        },
        Err(err) => SweepPoint {
            value,
            label: PatternLabel::Unclassified,
            obstacle_radius: None,
            school_diameter: None,
            error: Some(err.to_string()),
        },
    }
}

/// Runs every grid point in parallel; results are merged by grid index.
pub fn sweep(
    parameter: SweepParameter,
    base: &EncounterSpec,
    values: &[f64],
    cache: &BootstrapCache,
) -> SweepReport {
    let points = values
        .par_iter()
        .map(|&value| run_point(parameter, base, value, cache))
        .collect();
    SweepReport::from_points(parameter, points)
}

pub fn sweep_exponent(base: &EncounterSpec, grid: &Grid, cache: &BootstrapCache) -> SweepReport {
    sweep(SweepParameter::Exponent, base, &grid.values(), cache)
}

pub fn sweep_speed(base: &EncounterSpec, grid: &Grid, cache: &BootstrapCache) -> SweepReport {
    sweep(SweepParameter::Speed, base, &grid.values(), cache)
}

pub fn sweep_critical_distance(
    base: &EncounterSpec,
    grid: &Grid,
    cache: &BootstrapCache,
) -> SweepReport {
    sweep(SweepParameter::CriticalDistance, base, &grid.values(), cache)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_values_include_both_ends() {
        let v = Grid::new(1.2, 8.0, 0.1).values();
        assert_eq!(v.len(), 69);
        assert!((v[68] - 8.0).abs() < 1e-12);
        assert_eq!(Grid::new(2.0, 2.0, 0.1).values(), vec![2.0]);
        assert!(Grid::new(2.0, 2.0, 0.1).validate().is_err());
        assert_eq!(Grid::new(0.25, 20.0, 0.25).values().len(), 80);
        assert_eq!(Grid::new(0.2, 2.8, 0.1).values().len(), 27);
        assert!(Grid::new(1.0, 0.0, 0.1).validate().is_err());
    }

    #[test]
    fn grid_spec_accepts_both_shapes() {
        let range: GridSpec = serde_json::from_str(r#"{"lo":1,"hi":2,"step":0.5}"#).unwrap();
        assert_eq!(range.values(), vec![1.0, 1.5, 2.0]);
        let list: GridSpec = serde_json::from_str(r#"{"values":[2,3,3.62,4]}"#).unwrap();
        assert_eq!(list.values(), vec![2.0, 3.0, 3.62, 4.0]);
        assert!(serde_json::from_str::<GridSpec>(r#"{"lo":1,"hi":2}"#).is_err());
        assert!(GridSpec::Values { values: vec![] }.validate().is_err());
    }

    #[test]
    fn boundaries_are_midpoints_of_label_changes() {
        let labels = [
            PatternLabel::Rebound,
            PatternLabel::Rebound,
            PatternLabel::Pullback,
            PatternLabel::Separation,
        ];
        let points = labels
            .iter()
            .enumerate()
            .map(|(k, &label)| SweepPoint {
                value: k as f64,
                label,
                obstacle_radius: None,
                school_diameter: None,
                error: None,
            })
            .collect();
        let report = SweepReport::from_points(SweepParameter::Speed, points);
        assert_eq!(report.transition_boundaries, vec![1.5, 2.5]);
        assert_eq!(report.label_at(2.0), Some(PatternLabel::Pullback));
        assert_eq!(report.labels.len(), report.grid_values.len());
    }
}
