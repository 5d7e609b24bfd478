//! School observables: ε-graph components, velocity variance, centroid and
//! diameter, and the ε,θ-schooling decision.

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SchoolingCriteria, SwarmState};
use crate::sde::Termination;
use crate::vector::{self, Vector};

/// Number of connected components of the graph joining agents within `epsilon`.
pub fn epsilon_components(state: &SwarmState, epsilon: f64) -> usize {
    epsilon_components_of(&state.positions, epsilon)
}

pub fn epsilon_components_of(positions: &[Vector], epsilon: f64) -> usize {
    let n = positions.len();
    let eps2 = epsilon * epsilon;
    let mut sets = UnionFind::<usize>::new(n);
    let mut components = n;
    for i in 0..n {
        for j in (i + 1)..n {
            if (positions[i] - positions[j]).norm_squared() <= eps2 && sets.union(i, j) {
                components -= 1;
            }
        }
    }
    components
}

/// Root-mean-square deviation of velocities from their mean.
pub fn sigma_v(state: &SwarmState) -> f64 {
    sigma_v_of(&state.velocities)
}

pub fn sigma_v_of(velocities: &[Vector]) -> f64 {
    let mean = vector::mean(velocities);
    let sum: f64 = velocities.iter().map(|v| (*v - mean).norm_squared()).sum();
    (sum / velocities.len() as f64).sqrt()
}

pub fn centroid(state: &SwarmState) -> Vector {
    vector::mean(&state.positions)
}

/// Largest distance from an agent to the centroid.
pub fn diameter(state: &SwarmState) -> f64 {
    diameter_of(&state.positions)
}

pub fn diameter_of(positions: &[Vector]) -> f64 {
    let c = vector::mean(positions);
    positions.iter().map(|x| x.distance(c)).fold(0.0, f64::max)
}

/// One recorded sample of a trajectory's observables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time: f64,
    pub n_components: usize,
    pub sigma_v: f64,
    #[serde(with = "centroid_serde")]
    pub centroid: Vector,
    pub diameter: f64,
    #[serde(with = "centroid_serde")]
    pub mean_velocity: Vector,
}

impl Sample {
    pub fn of(state: &SwarmState, epsilon: f64) -> Self {
        Sample {
            time: state.time,
            n_components: epsilon_components(state, epsilon),
            sigma_v: sigma_v(state),
            centroid: centroid(state),
            diameter: diameter(state),
            mean_velocity: vector::mean(&state.velocities),
        }
    }
}

/// Per-sample metric series of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub epsilon: f64,
    pub samples: Vec<Sample>,
    pub termination: Termination,
}

impl TrajectorySummary {
    pub fn new(epsilon: f64) -> Self {
        TrajectorySummary {
            epsilon,
            samples: Vec::new(),
            termination: Termination::Completed,
        }
    }

    pub fn from_states<'a>(
        states: impl IntoIterator<Item = &'a SwarmState>,
        epsilon: f64,
        termination: Termination,
    ) -> Self {
        TrajectorySummary {
            epsilon,
            samples: states.into_iter().map(|s| Sample::of(s, epsilon)).collect(),
            termination,
        }
    }

    pub fn push(&mut self, state: &SwarmState) {
        self.samples.push(Sample::of(state, self.epsilon));
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.time)
    }

    pub fn first(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(f64::NEG_INFINITY, |s| s.time)
    }
}

/// Why a summary fails the schooling test, if it does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchoolingVerdict {
    Schooling,
    /// Some sample at or after the onset has `n_ε ≥ 2`.
    Fragmented,
    /// Connected throughout, but some sample has `σV > θ`.
    VelocitySpread,
    /// The run blew up or penetrated the obstacle.
    Aborted,
}

impl SchoolingVerdict {
    pub fn is_schooling(self) -> bool {
        self == SchoolingVerdict::Schooling
    }
}

pub fn schooling_verdict(
    summary: &TrajectorySummary,
    criteria: &SchoolingCriteria,
) -> Result<SchoolingVerdict> {
    if !summary.termination.is_completed() {
        return Ok(SchoolingVerdict::Aborted);
    }
    let t_end = summary.end_time();
    if t_end < criteria.t_onset {
        return Err(Error::HorizonTooShort {
            t_end,
            required: criteria.t_onset,
        });
    }
    let tail = summary.samples.iter().filter(|s| s.time >= criteria.t_onset);
    let mut verdict = SchoolingVerdict::Schooling;
    for s in tail {
        if s.n_components != 1 {
            return Ok(SchoolingVerdict::Fragmented);
        }
        if !(s.sigma_v <= criteria.theta) {
            verdict = SchoolingVerdict::VelocitySpread;
        }
    }
    Ok(verdict)
}

/// True iff every sample at or after `t_onset` is connected with `σV ≤ θ`
/// and the run completed.
pub fn is_schooling(summary: &TrajectorySummary, criteria: &SchoolingCriteria) -> Result<bool> {
    Ok(schooling_verdict(summary, criteria)?.is_schooling())
}

mod centroid_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::vector::Vector;

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.0.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        Ok(Vector(<[f64; 3]>::deserialize(d)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state_at(points: &[(f64, f64)]) -> SwarmState {
        SwarmState::at_rest(0.0, 2, points.iter().map(|&(x, y)| Vector::xy(x, y)).collect()).unwrap()
    }

    #[test]
    fn chain_is_one_component() {
        let eps = 0.5;
        assert_eq!(epsilon_components(&state_at(&[(0.0, 0.0), (eps, 0.0), (2.0 * eps, 0.0)]), eps), 1);
    }

    #[test]
    fn threshold_is_inclusive_and_strict_beyond() {
        let eps = 0.5;
        assert_eq!(epsilon_components(&state_at(&[(0.0, 0.0), (eps + 1e-9, 0.0)]), eps), 2);
        assert_eq!(epsilon_components(&state_at(&[(0.0, 0.0), (eps, 0.0)]), eps), 1);
    }

    #[test]
    fn sigma_v_examples() {
        let mut s = state_at(&[(0.0, 0.0), (1.0, 0.0)]);
        s.velocities = vec![Vector::xy(1.0, 0.0), Vector::xy(-1.0, 0.0)];
        assert_eq!(sigma_v(&s), 1.0);
        s.velocities = vec![Vector::xy(0.3, 0.1); 2];
        assert_eq!(sigma_v(&s), 0.0);
        s.velocities = vec![Vector::xy(-3.0, 0.0), Vector::xy(3.0, 0.0)];
        assert_eq!(sigma_v(&s), 3.0);
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(diameter(&state_at(&[(4.0, -1.0)])), 0.0);
        assert_eq!(diameter(&state_at(&[(0.0, 0.0), (3.0, 0.0)])), 1.5);
        let square = state_at(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
        assert!((diameter(&square) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    fn summary(samples: &[(f64, usize, f64)], termination: Termination) -> TrajectorySummary {
        TrajectorySummary {
            epsilon: 0.5,
            samples: samples
                .iter()
                .map(|&(time, n_components, sigma_v)| Sample {
                    time,
                    n_components,
                    sigma_v,
                    centroid: Vector::ZERO,
                    diameter: 1.0,
                    mean_velocity: Vector::ZERO,
                })
                .collect(),
            termination,
        }
    }

    #[test]
    fn schooling_decision() {
        let crit = SchoolingCriteria::new(0.5, 0.05, 30.0).unwrap();
        let ok = summary(&[(0.0, 5, 1.0), (30.0, 1, 0.01), (35.0, 1, 0.05)], Termination::Completed);
        assert!(is_schooling(&ok, &crit).unwrap());

        let split = summary(&[(30.0, 1, 0.01), (32.0, 2, 0.01), (35.0, 1, 0.01)], Termination::Completed);
        assert_eq!(schooling_verdict(&split, &crit).unwrap(), SchoolingVerdict::Fragmented);

        let spread = summary(&[(30.0, 1, 0.06), (35.0, 1, 0.01)], Termination::Completed);
        assert_eq!(schooling_verdict(&spread, &crit).unwrap(), SchoolingVerdict::VelocitySpread);

        let blown = summary(&[(30.0, 1, 0.01), (35.0, 1, 0.01)], Termination::BlowUp { step: 9 });
        assert!(!is_schooling(&blown, &crit).unwrap());

        let short = summary(&[(0.0, 1, 0.0), (20.0, 1, 0.0)], Termination::Completed);
        assert!(matches!(is_schooling(&short, &crit), Err(Error::HorizonTooShort { .. })));
    }
}
