//! Domain types and parameter validation.

use std::ops::Deref;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::vector::Vector;

/// Positions and velocities of all agents at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub time: f64,
    dim: usize,
    pub positions: Vec<Vector>,
    pub velocities: Vec<Vector>,
}

impl SwarmState {
    pub fn new(
        time: f64,
        dim: usize,
        positions: Vec<Vector>,
        velocities: Vec<Vector>,
    ) -> Result<Self> {
        check_dim(dim)?;
        if positions.is_empty() {
            return Err(Error::InvalidParams("state needs at least one agent".into()));
        }
        if positions.len() != velocities.len() {
            return Err(Error::InvalidParams(format!(
                "{} positions but {} velocities",
                positions.len(),
                velocities.len()
            )));
        }
        let state = SwarmState {
            time,
            dim,
            positions,
            velocities,
        };
        if !state.is_finite() {
            return Err(Error::InvalidParams("state has non-finite coordinates".into()));
        }
        if dim == 2 && state.positions.iter().chain(&state.velocities).any(|v| v[2] != 0.0) {
            return Err(Error::InvalidParams(
                "2D state has a non-zero third component".into(),
            ));
        }
        Ok(state)
    }

    /// All agents at rest.
    pub fn at_rest(time: f64, dim: usize, positions: Vec<Vector>) -> Result<Self> {
        let velocities = vec![Vector::ZERO; positions.len()];
        Self::new(time, dim, positions, velocities)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_agents(&self) -> usize {
        self.positions.len()
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite()
            && self.positions.iter().all(|x| x.is_finite())
            && self.velocities.iter().all(|v| v.is_finite())
    }

    pub fn max_speed(&self) -> f64 {
        self.velocities.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SwarmStateRecord {
    time: f64,
    dim: usize,
    positions: Vec<Vec<f64>>,
    velocities: Vec<Vec<f64>>,
}

impl Serialize for SwarmState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SwarmStateRecord {
            time: self.time,
            dim: self.dim,
            positions: self.positions.iter().map(|x| x.to_vec(self.dim)).collect(),
            velocities: self.velocities.iter().map(|v| v.to_vec(self.dim)).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SwarmState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let record = SwarmStateRecord::deserialize(deserializer)?;
        let convert = |rows: Vec<Vec<f64>>| -> std::result::Result<Vec<Vector>, D::Error> {
            rows.into_iter()
                .map(|row| {
                    if row.len() != record.dim {
                        Err(D::Error::custom(format!(
                            "expected {} components, got {}",
                            record.dim,
                            row.len()
                        )))
                    } else {
                        Ok(Vector::from_slice(&row))
                    }
                })
                .collect()
        };
        let positions = convert(record.positions)?;
        let velocities = convert(record.velocities)?;
        SwarmState::new(record.time, record.dim, positions, velocities).map_err(D::Error::custom)
    }
}

/// A spherical obstacle; agents live outside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    #[serde(with = "vector_serde")]
    pub center: Vector,
    pub radius: f64,
}

impl Obstacle {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "obstacle radius must be > 0, got {radius}"
            )));
        }
        if !center.is_finite() {
            return Err(Error::InvalidParams("obstacle center is not finite".into()));
        }
        Ok(Obstacle { center, radius })
    }

    /// Distance from the surface, negative inside.
    pub fn clearance(&self, x: Vector) -> f64 {
        x.distance(self.center) - self.radius
    }
}

/// Reflection-based avoidance force toward a single obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleAvoidance {
    pub obstacle: Obstacle,
    pub gamma: f64,
    pub p_obs: f64,
    pub q_obs: f64,
    pub r_obs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExternalForce {
    #[default]
    Zero,
    /// `F_i = -kappa * v_i`.
    LinearDrag { kappa: f64 },
    ObstacleAvoidance(ObstacleAvoidance),
}

impl ExternalForce {
    pub fn obstacle(&self) -> Option<&Obstacle> {
        match self {
            ExternalForce::ObstacleAvoidance(cfg) => Some(&cfg.obstacle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub n_agents: usize,
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub p_exp: f64,
    pub q_exp: f64,
    pub r_crit: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub external_force: ExternalForce,
}

impl ModelParams {
    pub fn validate(self) -> Result<ValidatedParams> {
        if self.n_agents == 0 {
            return Err(Error::InvalidParams("n_agents must be >= 1".into()));
        }
        check_dim(self.dim)?;
        check_positive("alpha", self.alpha)?;
        check_positive("beta", self.beta)?;
        check_exponents("p_exp", self.p_exp, "q_exp", self.q_exp)?;
        check_positive("r_crit", self.r_crit)?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "sigma >= 0 violated (sigma = {})",
                self.sigma
            )));
        }
        match self.external_force {
            ExternalForce::Zero => {}
            ExternalForce::LinearDrag { kappa } => {
                if !(kappa >= 0.0 && kappa.is_finite()) {
                    return Err(Error::InvalidParams(format!(
                        "kappa >= 0 violated (kappa = {kappa})"
                    )));
                }
            }
            ExternalForce::ObstacleAvoidance(cfg) => {
                Obstacle::new(cfg.obstacle.center, cfg.obstacle.radius)?;
                if self.dim == 2 && cfg.obstacle.center[2] != 0.0 {
                    return Err(Error::InvalidParams(
                        "2D obstacle center has a third component".into(),
                    ));
                }
                check_positive("gamma", cfg.gamma)?;
                check_exponents("p_obs", cfg.p_obs, "q_obs", cfg.q_obs)?;
                check_positive("r_obs", cfg.r_obs)?;
            }
        }
        Ok(ValidatedParams(self))
    }

    /// Same parameters with a different noise magnitude (not revalidated).
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_force(mut self, force: ExternalForce) -> Self {
        self.external_force = force;
        self
    }
}

/// Parameters that passed [`ModelParams::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedParams(ModelParams);

impl ValidatedParams {
    /// The interaction-free limit (α = β = 0, no external force): pure
    /// Brownian motion of positions at constant velocity. `validate` rejects
    /// α = β = 0, so this is the only way to obtain it; it exists to check the
    /// integrator against the diffusion law.
    pub fn pure_diffusion(n_agents: usize, dim: usize, sigma: f64) -> Result<Self> {
        let mut params = ModelParams {
            n_agents,
            dim,
            alpha: 1.0,
            beta: 1.0,
            p_exp: 2.0,
            q_exp: 3.0,
            r_crit: 1.0,
            sigma,
            external_force: ExternalForce::Zero,
        }
        .validate()?
        .0;
        params.alpha = 0.0;
        params.beta = 0.0;
        Ok(ValidatedParams(params))
    }

    pub fn into_inner(self) -> ModelParams {
        self.0
    }

    /// Changes the noise magnitude, keeping every other coefficient.
    pub fn with_sigma(self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParams(format!("sigma >= 0 violated (sigma = {sigma})")));
        }
        Ok(ValidatedParams(self.0.with_sigma(sigma)))
    }

    pub fn with_force(self, force: ExternalForce) -> Result<Self> {
        if self.0.alpha == 0.0 && self.0.beta == 0.0 {
            let mut inner = self.0;
            inner.external_force = force;
            return Ok(ValidatedParams(inner));
        }
        self.0.with_force(force).validate()
    }
}

impl Deref for ValidatedParams {
    type Target = ModelParams;
    fn deref(&self) -> &ModelParams {
        &self.0
    }
}

/// Thresholds of the ε,θ-schooling test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchoolingCriteria {
    pub epsilon: f64,
    pub theta: f64,
    #[serde(default)]
    pub t_onset: f64,
}

impl SchoolingCriteria {
    pub fn new(epsilon: f64, theta: f64, t_onset: f64) -> Result<Self> {
        let criteria = SchoolingCriteria {
            epsilon,
            theta,
            t_onset,
        };
        criteria.validate()?;
        Ok(criteria)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("epsilon", self.epsilon)?;
        check_positive("theta", self.theta)?;
        if !(self.t_onset >= 0.0 && self.t_onset.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "t_onset >= 0 violated (t_onset = {})",
                self.t_onset
            )));
        }
        Ok(())
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("dim must be 2 or 3, got {dim}")))
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} > 0 violated ({name} = {value})")))
    }
}

fn check_exponents(p_name: &str, p: f64, q_name: &str, q: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParams(format!("1 < {p_name} violated ({p_name} = {p})")));
    }
    if !(q > p && q.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "{p_name} < {q_name} violated ({p_name} = {p}, {q_name} = {q})"
        )));
    }
    Ok(())
}

mod vector_serde {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    use crate::vector::Vector;

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        let len = if v[2] == 0.0 { 2 } else { 3 };
        s.collect_seq(&v.0[..len])
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        if raw.len() != 2 && raw.len() != 3 {
            return Err(D::Error::custom(format!(
                "expected 2 or 3 components, got {}",
                raw.len()
            )));
        }
        Ok(Vector::from_slice(&raw))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ModelParams {
        ModelParams {
            n_agents: 20,
            dim: 2,
            alpha: 1.0,
            beta: 1.0,
            p_exp: 2.0,
            q_exp: 3.0,
            r_crit: 0.5,
            sigma: 0.0,
            external_force: ExternalForce::Zero,
        }
    }

    #[test]
    fn accepts_pattern_panel_parameters() {
        let params = base();
        let validated = params.validate().unwrap();
        assert_eq!(*validated, params);
    }

    #[test]
    fn rejects_reversed_exponents() {
        let mut params = base();
        params.p_exp = 3.0;
        params.q_exp = 2.0;
        let err = params.validate().unwrap_err();
        assert!(matches!(&err, Error::InvalidParams(m) if m.contains("p_exp < q_exp")), "{err}");
    }

    #[test]
    fn rejects_zero_critical_distance() {
        let mut params = base();
        params.r_crit = 0.0;
        let err = params.validate().unwrap_err();
        assert!(matches!(&err, Error::InvalidParams(m) if m.contains("r_crit > 0")), "{err}");
    }

    #[test]
    fn rejects_bad_obstacle_and_dims() {
        let mut params = base();
        params.dim = 4;
        assert!(params.validate().is_err());
        let mut params = base();
        params.external_force = ExternalForce::ObstacleAvoidance(ObstacleAvoidance {
            obstacle: Obstacle {
                center: Vector::ZERO,
                radius: 0.0,
            },
            gamma: 1.0,
            p_obs: 2.0,
            q_obs: 3.0,
            r_obs: 0.5,
        });
        assert!(params.validate().is_err());
        let mut params = base();
        params.p_exp = 1.0;
        assert!(params.validate().is_err());
        let mut params = base();
        params.sigma = -0.1;
        assert!(params.validate().is_err());
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        let json = r#"{"n_agents":2,"dim":2,"alpha":1,"beta":1,"p_exp":2,"q_exp":3,"r_crit":0.5,"sigmaa":0.1}"#;
        let err = serde_json::from_str::<ModelParams>(json).unwrap_err();
        assert!(err.to_string().contains("sigmaa"));
    }

    #[test]
    fn external_force_json_shape() {
        let drag: ExternalForce = serde_json::from_str(r#"{"kind":"linear_drag","kappa":5}"#).unwrap();
        assert_eq!(drag, ExternalForce::LinearDrag { kappa: 5.0 });
        let obs: ExternalForce = serde_json::from_str(
            r#"{"kind":"obstacle_avoidance","obstacle":{"center":[0,0],"radius":1.2},"gamma":1,"p_obs":2,"q_obs":3,"r_obs":0.5}"#,
        )
        .unwrap();
        assert_eq!(obs.obstacle().unwrap().radius, 1.2);
    }

    #[test]
    fn state_rejects_mismatched_counts_and_nan() {
        assert!(SwarmState::new(0.0, 2, vec![Vector::ZERO; 2], vec![Vector::ZERO]).is_err());
        assert!(SwarmState::new(0.0, 2, vec![Vector::xy(f64::NAN, 0.0)], vec![Vector::ZERO]).is_err());
    }

    #[test]
    fn state_json_round_trip() {
        let state = SwarmState::new(
            1.5,
            2,
            vec![Vector::xy(0.0, 1.0), Vector::xy(2.0, 3.0)],
            vec![Vector::xy(0.5, 0.0), Vector::xy(-0.5, 0.25)],
        )
        .unwrap();
        let json = serde_json::to_string(&state).unwrap();
        assert!(json.contains("[[0.0,1.0],[2.0,3.0]]"));
        let back: SwarmState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, state);
    }
}
