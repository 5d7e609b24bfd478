//! Euler–Maruyama integration, reproducible Brownian paths, and the
//! relaxation that produces stationary schools.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics;
use crate::error::{Error, Result};
use crate::metrics::{self, epsilon_components, sigma_v};
use crate::model::{ExternalForce, Obstacle, SchoolingCriteria, SwarmState, ValidatedParams};
use crate::vector::{self, Vector};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_RECORD_EVERY: usize = 10;
/// Speed sentinel is this factor times `max(initial speed, 1)`.
pub const BLOW_UP_SPEED_FACTOR: f64 = 1e3;
/// Continuous time the schooling conditions must hold during relaxation.
pub const RELAX_DWELL: f64 = 1.0;
/// Minimum initial pair separation, as a fraction of `r`.
pub const MIN_INITIAL_SEPARATION: f64 = 0.5;

const NOISE_STREAM: u64 = 0;
const PLACEMENT_STREAM: u64 = 1;

/// Unit-variance Brownian increments for `n_agents` agents, generated on
/// demand from a seed. Increment `k` of agent `i` is a standard normal vector
/// in R^d; the integrator scales it by `σ √dt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrownianPaths {
    pub seed: u64,
    pub n_agents: usize,
    pub dim: usize,
    pub n_steps: usize,
}

impl BrownianPaths {
    pub fn new(seed: u64, n_agents: usize, dim: usize, n_steps: usize) -> Self {
        BrownianPaths {
            seed,
            n_agents,
            dim,
            n_steps,
        }
    }

    pub fn stream(&self) -> BrownianStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(NOISE_STREAM);
        BrownianStream {
            rng,
            dim: self.dim,
            remaining: self.n_steps,
        }
    }

    /// All increments, step-major.
    pub fn materialize(&self) -> Vec<Vec<Vector>> {
        let mut stream = self.stream();
        (0..self.n_steps)
            .map(|_| {
                let mut buf = vec![Vector::ZERO; self.n_agents];
                stream.next_into(&mut buf);
                buf
            })
            .collect()
    }
}

/// A source of per-step unit increments.
pub trait Increments {
    /// Fills `out` with the next step's increments. Panics when exhausted.
    fn next_into(&mut self, out: &mut [Vector]);
}

pub struct BrownianStream {
    rng: ChaCha8Rng,
    dim: usize,
    remaining: usize,
}

impl Increments for BrownianStream {
    fn next_into(&mut self, out: &mut [Vector]) {
        assert!(self.remaining > 0, "Brownian path exhausted");
        self.remaining -= 1;
        for z in out.iter_mut() {
            *z = Vector::ZERO;
            for c in 0..self.dim {
                z[c] = self.rng.sample(StandardNormal);
            }
        }
    }
}

/// Explicitly stored increments.
pub struct RecordedIncrements {
    steps: std::vec::IntoIter<Vec<Vector>>,
}

impl RecordedIncrements {
    pub fn new(steps: Vec<Vec<Vector>>) -> Self {
        RecordedIncrements {
            steps: steps.into_iter(),
        }
    }
}

impl Increments for RecordedIncrements {
    fn next_into(&mut self, out: &mut [Vector]) {
        let step = self.steps.next().expect("recorded increments exhausted");
        out.copy_from_slice(&step);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// Non-finite state, speed sentinel exceeded, or two agents collided
    /// while producing step `step`.
    BlowUp { step: usize },
    /// `agent` ended step `step` inside the obstacle.
    Penetration { step: usize, agent: usize },
}

impl Termination {
    pub fn is_completed(self) -> bool {
        self == Termination::Completed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub record_every: usize,
    pub states: Vec<SwarmState>,
    pub termination: Termination,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_record_every() -> usize {
    DEFAULT_RECORD_EVERY
}

impl SolverSettings {
    pub fn new(dt: f64, t_end: f64, record_every: usize) -> Result<Self> {
        let s = SolverSettings {
            dt,
            t_end,
            record_every,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt > 0 violated (dt = {})", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "t_end > 0 violated (t_end = {})",
                self.t_end
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParams("record_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Reusable Euler–Maruyama stepper holding scratch buffers.
pub struct Integrator<'a> {
    params: &'a ValidatedParams,
    dt: f64,
    sqrt_dt: f64,
    accelerations: Vec<Vector>,
}

impl<'a> Integrator<'a> {
    pub fn new(params: &'a ValidatedParams, n_agents: usize, dt: f64) -> Self {
        Integrator {
            params,
            dt,
            sqrt_dt: dt.sqrt(),
            accelerations: vec![Vector::ZERO; n_agents],
        }
    }

    /// Advances `state` by one step. Drift is evaluated at the pre-step state
    /// for both equations; the noise term is `√dt · (σ · z)`.
    pub fn advance(&mut self, state: &mut SwarmState, noise: Option<&[Vector]>) -> Result<()> {
        dynamics::accelerations_into(state, self.params, &mut self.accelerations)?;
        let dt = self.dt;
        let sigma = self.params.sigma;
        for ((x, v), a) in state
            .positions
            .iter_mut()
            .zip(state.velocities.iter_mut())
            .zip(&self.accelerations)
        {
            *x += *v * dt;
            *v += *a * dt;
        }
        if let Some(noise) = noise {
            for (x, z) in state.positions.iter_mut().zip(noise) {
                *x += (*z * sigma) * self.sqrt_dt;
            }
        }
        state.time += dt;
        Ok(())
    }
}

/// One Euler–Maruyama step.
pub fn step(
    state: &SwarmState,
    params: &ValidatedParams,
    noise: &[Vector],
    dt: f64,
) -> Result<SwarmState> {
    let mut next = state.clone();
    Integrator::new(params, state.n_agents(), dt).advance(&mut next, Some(noise))?;
    Ok(next)
}

/// Integrates from `initial`, calling `observe` on the initial state and on
/// every `record_every`-th state (and on the last state when the horizon is
/// not a multiple of `record_every`). Returns the final state reached and how
/// the run ended.
pub fn simulate_with<I, F>(
    initial: &SwarmState,
    params: &ValidatedParams,
    increments: Option<&mut I>,
    settings: &SolverSettings,
    mut observe: F,
) -> Result<(SwarmState, Termination)>
where
    I: Increments + ?Sized,
    F: FnMut(&SwarmState),
{
    settings.validate()?;
    let n_steps = settings.n_steps();
    let mut increments = increments;
    let use_noise = params.sigma != 0.0 && increments.is_some();
    let v_max = BLOW_UP_SPEED_FACTOR * initial.max_speed().max(1.0);
    let obstacle = params.external_force.obstacle().copied();
    let n = initial.n_agents();

    let mut state = initial.clone();
    let mut integrator = Integrator::new(params, n, settings.dt);
    let mut noise = vec![Vector::ZERO; n];
    observe(&state);

    for k in 1..=n_steps {
        let noise_ref = if use_noise {
            increments.as_mut().unwrap().next_into(&mut noise);
            Some(noise.as_slice())
        } else {
            None
        };
        if let Err(err) = integrator.advance(&mut state, noise_ref) {
            let termination = match err {
                Error::AgentInsideObstacle { agent } => Termination::Penetration { step: k, agent },
                Error::DegenerateDistance { .. } | Error::DegenerateObstacleDistance { .. } => {
                    Termination::BlowUp { step: k }
                }
                other => return Err(other),
            };
            return Ok((state, termination));
        }
        state.time = k as f64 * settings.dt;
        if !state.is_finite() || state.max_speed() > v_max {
            return Ok((state, Termination::BlowUp { step: k }));
        }
        if let Some(obstacle) = &obstacle {
            if let Some(agent) = state
                .positions
                .iter()
                .position(|x| x.distance(obstacle.center) <= obstacle.radius)
            {
                return Ok((state, Termination::Penetration { step: k, agent }));
            }
        }
        if k % settings.record_every == 0 || k == n_steps {
            observe(&state);
        }
    }
    Ok((state, Termination::Completed))
}

/// Integrates with the Brownian path `paths` and stores the recorded states.
pub fn simulate(
    initial: &SwarmState,
    params: &ValidatedParams,
    paths: &BrownianPaths,
    dt: f64,
    t_end: f64,
    record_every: usize,
) -> Result<Trajectory> {
    let settings = SolverSettings::new(dt, t_end, record_every)?;
    if paths.n_steps < settings.n_steps() {
        return Err(Error::InvalidParams(format!(
            "Brownian path has {} steps, run needs {}",
            paths.n_steps,
            settings.n_steps()
        )));
    }
    if paths.n_agents != initial.n_agents() || paths.dim != initial.dim() {
        return Err(Error::InvalidParams("Brownian path shape does not match state".into()));
    }
    let mut states = Vec::new();
    let mut stream = paths.stream();
    let (_, termination) =
        simulate_with(initial, params, Some(&mut stream), &settings, |s| states.push(s.clone()))?;
    Ok(Trajectory {
        dt,
        record_every,
        states,
        termination,
    })
}

/// Uniform random positions in an axis-aligned cube of side `side` centered at
/// the origin, rejecting candidates closer than `min_separation` to an
/// already placed agent.
pub fn random_positions(
    n_agents: usize,
    dim: usize,
    side: f64,
    min_separation: f64,
    seed: u64,
) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PLACEMENT_STREAM);
    let min2 = min_separation * min_separation;
    let mut placed: Vec<Vector> = Vec::with_capacity(n_agents);
    let mut attempts = 0usize;
    while placed.len() < n_agents {
        let mut x = Vector::ZERO;
        for c in 0..dim {
            x[c] = (rng.gen::<f64>() - 0.5) * side;
        }
        attempts += 1;
        // Give up on the separation constraint if the box is too crowded.
        let enforce = attempts < 1000 * n_agents;
        if !enforce || placed.iter().all(|y| (x - *y).norm_squared() >= min2) {
            placed.push(x);
        }
    }
    placed
}

/// Side of the box cohesion trials start from: `2 r N^(1/d)`.
pub fn default_box_side(n_agents: usize, dim: usize, r: f64) -> f64 {
    2.0 * r * (n_agents as f64).powf(1.0 / dim as f64)
}

/// Side of the box relaxation starts from: `r N^(1/d)`. Denser than
/// [`default_box_side`] so that clusters of steep short-range potentials are
/// within reach of each other.
pub fn relax_box_side(n_agents: usize, dim: usize, r: f64) -> f64 {
    r * (n_agents as f64).powf(1.0 / dim as f64)
}

/// Starting state for relaxation and cohesion trials: random positions,
/// zero velocities.
pub fn random_initial_state(params: &ValidatedParams, box_side: f64, seed: u64) -> SwarmState {
    let positions = random_positions(
        params.n_agents,
        params.dim,
        box_side,
        MIN_INITIAL_SEPARATION * params.r_crit,
        seed,
    );
    SwarmState::at_rest(0.0, params.dim, positions).expect("generated state is valid")
}

/// Integrates the noise-free damped system from random positions until the
/// school is connected at `criteria.epsilon`, with `σV ≤ θ` and every speed
/// `≤ θ`, continuously for [`RELAX_DWELL`] time units. Velocities of the
/// returned state are zeroed and its time reset to 0.
pub fn relax_to_schooling(
    params: &ValidatedParams,
    criteria: &SchoolingCriteria,
    seed: u64,
    dt: f64,
    t_max: f64,
) -> Result<SwarmState> {
    criteria.validate()?;
    if !matches!(params.external_force, ExternalForce::LinearDrag { .. }) {
        return Err(Error::InvalidParams(
            "relaxation requires a linear drag external force".into(),
        ));
    }
    let params = params.with_sigma(0.0)?;
    let initial = random_initial_state(
        &params,
        relax_box_side(params.n_agents, params.dim, params.r_crit),
        seed,
    );
    if params.n_agents == 1 {
        return Ok(initial);
    }
    let settings = SolverSettings::new(dt, t_max, DEFAULT_RECORD_EVERY)?;
    let n_steps = settings.n_steps();
    let check_every = DEFAULT_RECORD_EVERY;
    let mut state = initial;
    let mut integrator = Integrator::new(&params, params.n_agents, dt);
    let mut streak_start: Option<f64> = None;
    for k in 1..=n_steps {
        integrator
            .advance(&mut state, None)
            .map_err(|_| Error::NoConvergence { t_max })?;
        if k % check_every != 0 {
            continue;
        }
        state.time = k as f64 * dt;
        if !state.is_finite() {
            return Err(Error::NoConvergence { t_max });
        }
        let settled = state.max_speed() <= criteria.theta
            && sigma_v(&state) <= criteria.theta
            && epsilon_components(&state, criteria.epsilon) == 1
            && residual_acceleration(&state, &params)? <= 10.0 * criteria.theta;
        match (settled, streak_start) {
            (false, _) => streak_start = None,
            (true, None) => streak_start = Some(state.time),
            (true, Some(t0)) if state.time - t0 >= RELAX_DWELL - 0.5 * dt => {
                state.time = 0.0;
                state.velocities.fill(Vector::ZERO);
                return Ok(state);
            }
            (true, Some(_)) => {}
        }
    }
    Err(Error::NoConvergence { t_max })
}

// Largest acceleration left once the velocities are zeroed.
fn residual_acceleration(state: &SwarmState, params: &ValidatedParams) -> Result<f64> {
    let mut at_rest = state.clone();
    at_rest.velocities.fill(Vector::ZERO);
    let acc = dynamics::drift(&at_rest, params)?.accelerations;
    Ok(acc.iter().map(|a| a.norm()).fold(0.0, f64::max))
}

/// Moves a school so its centroid sits `gap` before the obstacle center along
/// the negative first axis, and sets every velocity to `(speed, 0, ...)`.
pub fn place_school(
    state: &SwarmState,
    obstacle: &Obstacle,
    gap: f64,
    speed: f64,
) -> Result<SwarmState> {
    let required = obstacle.radius + metrics::diameter(state);
    if !(gap > required) {
        return Err(Error::GapTooSmall { gap, required });
    }
    let target = obstacle.center - Vector::e1() * gap;
    let shift = target - vector::mean(&state.positions);
    let positions = state.positions.iter().map(|x| *x + shift).collect();
    let velocities = vec![Vector::e1() * speed; state.n_agents()];
    SwarmState::new(0.0, state.dim(), positions, velocities)
}
