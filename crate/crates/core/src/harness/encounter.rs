//! One obstacle encounter: relax a school, aim it at the obstacle, simulate,
//! classify.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{self, TrajectorySummary};
use crate::model::{
    ExternalForce, ModelParams, Obstacle, ObstacleAvoidance, SchoolingCriteria, SwarmState,
};
use crate::patterns::{self, EncounterFeatures, PatternLabel};
use crate::sde::{self, BrownianPaths, SolverSettings, Termination};
use crate::vector::Vector;

/// Minimum simulated time of an encounter.
pub const MIN_ENCOUNTER_TIME: f64 = 20.0;
/// Default horizon: time to cover this many initial gaps at the initial speed.
pub const ENCOUNTER_GAPS: f64 = 3.0;

fn default_drag() -> f64 {
    5.0
}

fn default_relax_t_max() -> f64 {
    2000.0
}

/// How the school is set up against the obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncounterSetup {
    pub gamma: f64,
    /// Initial distance from school centroid to obstacle center.
    pub gap: f64,
    /// Initial speed along the first axis.
    pub speed: f64,
    /// Obstacle exponents and distance; `None` ties them to `p`, `q`, `r`.
    #[serde(default)]
    pub p_obs: Option<f64>,
    #[serde(default)]
    pub q_obs: Option<f64>,
    #[serde(default)]
    pub r_obs: Option<f64>,
    /// When set, the obstacle radius is this fraction of the relaxed school's
    /// diameter instead of the configured radius.
    #[serde(default)]
    pub radius_fraction_of_diameter: Option<f64>,
    /// Linear drag used while relaxing the school.
    #[serde(default = "default_drag")]
    pub bootstrap_drag: f64,
    #[serde(default = "default_relax_t_max")]
    pub relax_t_max: f64,
}

impl EncounterSetup {
    /// `max(3 · gap / speed, 20)`.
    pub fn horizon(&self) -> f64 {
        if self.speed > 0.0 {
            (ENCOUNTER_GAPS * self.gap / self.speed).max(MIN_ENCOUNTER_TIME)
        } else {
            MIN_ENCOUNTER_TIME
        }
    }
}

/// Everything needed to run one encounter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncounterSpec {
    /// Interaction parameters (`external_force` is ignored).
    pub model: ModelParams,
    pub setup: EncounterSetup,
    /// Center, and radius unless the setup derives it from the school.
    pub obstacle: Obstacle,
    pub criteria: SchoolingCriteria,
    pub dt: f64,
    pub record_every: usize,
    /// Lower bound on the simulated time; the setup's horizon is used when it
    /// is longer.
    pub min_t_end: Option<f64>,
    /// Seed of the relaxation and of the noise, if any.
    pub seed: u64,
}

impl EncounterSpec {
    pub fn t_end(&self) -> f64 {
        self.setup.horizon().max(self.min_t_end.unwrap_or(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncounterOutcome {
    pub label: PatternLabel,
    pub obstacle: Obstacle,
    pub school_diameter: f64,
    pub features: Option<EncounterFeatures>,
    pub summary: TrajectorySummary,
}

/// Relaxed schools keyed by a hash of everything that determines them.
/// Optionally persisted as JSON files in a directory.
#[derive(Debug, Default)]
pub struct BootstrapCache {
    memory: Mutex<HashMap<String, SwarmState>>,
    dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct BootstrapKey<'a> {
    model: &'a ModelParams,
    criteria: &'a SchoolingCriteria,
    dt: f64,
    t_max: f64,
    seed: u64,
}

impl BootstrapCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Self {
        BootstrapCache {
            memory: Mutex::default(),
            dir: Some(dir.into()),
        }
    }

    fn key(
        model: &ModelParams,
        criteria: &SchoolingCriteria,
        dt: f64,
        t_max: f64,
        seed: u64,
    ) -> String {
        let key = BootstrapKey {
            model,
            criteria,
            dt,
            t_max,
            seed,
        };
        let json = serde_json::to_vec(&key).expect("key serializes");
        hex::encode(&Sha256::digest(&json)[..16])
    }

    /// Returns the cached relaxed school or relaxes and stores it. `model`
    /// must carry the drag used for relaxation.
    pub fn relaxed(
        &self,
        model: &ModelParams,
        criteria: &SchoolingCriteria,
        dt: f64,
        t_max: f64,
        seed: u64,
    ) -> Result<SwarmState> {
        let key = Self::key(model, criteria, dt, t_max, seed);
        if let Some(state) = self.memory.lock().unwrap().get(&key) {
            return Ok(state.clone());
        }
        let path = self.dir.as_ref().map(|d| d.join(format!("bootstrap-{key}.json")));
        if let Some(path) = &path {
            if let Ok(bytes) = std::fs::read(path) {
                if let Ok(state) = serde_json::from_slice::<SwarmState>(&bytes) {
                    self.memory.lock().unwrap().insert(key, state.clone());
                    return Ok(state);
                }
            }
        }
        let params = model.validate()?;
        let state = relax_with_retries(&params, criteria, seed, dt, t_max)?;
        if let Some(path) = &path {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            let json = serde_json::to_vec(&state).map_err(|e| Error::Io(e.to_string()))?;
            std::fs::write(path, json)?;
        }
        self.memory.lock().unwrap().insert(key, state.clone());
        Ok(state)
    }
}

/// Placements tried before a relaxation failure is reported.
pub const RELAX_ATTEMPTS: u64 = 3;

// Some placements settle into a slowly creeping configuration that never gets
// under θ. Another placement usually does not, so retry with seeds
// `seed`, `seed + 1`, ... before giving up.
fn relax_with_retries(
    params: &crate::model::ValidatedParams,
    criteria: &SchoolingCriteria,
    seed: u64,
    dt: f64,
    t_max: f64,
) -> Result<SwarmState> {
    let mut last = None;
    for attempt in 0..RELAX_ATTEMPTS {
        match sde::relax_to_schooling(params, criteria, seed.wrapping_add(attempt), dt, t_max) {
            Err(e @ Error::NoConvergence { .. }) => last = Some(e),
            other => return other,
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Relaxed school for `spec`, from the cache.
pub fn bootstrap_school(spec: &EncounterSpec, cache: &BootstrapCache) -> Result<SwarmState> {
    let relax_model = spec
        .model
        .with_sigma(0.0)
        .with_force(ExternalForce::LinearDrag {
            kappa: spec.setup.bootstrap_drag,
        });
    cache.relaxed(
        &relax_model,
        &spec.criteria,
        spec.dt,
        spec.setup.relax_t_max,
        spec.seed,
    )
}

/// The obstacle force and placed initial state of an encounter.
pub fn prepare_encounter(
    spec: &EncounterSpec,
    cache: &BootstrapCache,
) -> Result<(crate::model::ValidatedParams, SwarmState, Obstacle, f64)> {
    let school = bootstrap_school(spec, cache)?;
    let school_diameter = metrics::diameter(&school);
    let radius = spec
        .setup
        .radius_fraction_of_diameter
        .map_or(spec.obstacle.radius, |f| f * school_diameter);
    let obstacle = Obstacle::new(spec.obstacle.center, radius)?;
    let placed = sde::place_school(&school, &obstacle, spec.setup.gap, spec.setup.speed)?;
    let force = ExternalForce::ObstacleAvoidance(ObstacleAvoidance {
        obstacle,
        gamma: spec.setup.gamma,
        p_obs: spec.setup.p_obs.unwrap_or(spec.model.p_exp),
        q_obs: spec.setup.q_obs.unwrap_or(spec.model.q_exp),
        r_obs: spec.setup.r_obs.unwrap_or(spec.model.r_crit),
    });
    let params = spec.model.with_force(force).validate()?;
    Ok((params, placed, obstacle, school_diameter))
}

/// Runs one encounter. `observe` sees every recorded state.
pub fn run_encounter_with<F: FnMut(&SwarmState)>(
    spec: &EncounterSpec,
    cache: &BootstrapCache,
    mut observe: F,
) -> Result<EncounterOutcome> {
    let (params, placed, obstacle, school_diameter) = prepare_encounter(spec, cache)?;
    let t_end = spec.t_end();
    let settings = SolverSettings::new(spec.dt, t_end, spec.record_every)?;
    let mut summary = TrajectorySummary::new(spec.criteria.epsilon);
    let termination = if params.sigma > 0.0 {
        let paths = BrownianPaths::new(spec.seed, params.n_agents, params.dim, settings.n_steps());
        let mut stream = paths.stream();
        sde::simulate_with(&placed, &params, Some(&mut stream), &settings, |s| {
            summary.push(s);
            observe(s);
        })?
        .1
    } else {
        sde::simulate_with::<sde::BrownianStream, _>(&placed, &params, None, &settings, |s| {
            summary.push(s);
            observe(s);
        })?
        .1
    };
    summary.termination = termination;
    let axis = approach_axis();
    let label = patterns::classify(&summary, &obstacle, axis, &spec.criteria)?;
    let features = if termination == Termination::Completed {
        Some(patterns::encounter_features(
            &summary,
            &obstacle,
            axis,
            &spec.criteria,
        )?)
    } else {
        None
    };
    Ok(EncounterOutcome {
        label,
        obstacle,
        school_diameter,
        features,
        summary,
    })
}

pub fn run_encounter(spec: &EncounterSpec, cache: &BootstrapCache) -> Result<EncounterOutcome> {
    run_encounter_with(spec, cache, |_| {})
}

/// Schools are placed on the negative first axis and fly along `+e1`.
pub fn approach_axis() -> Vector {
    Vector::e1()
}
