//! Cohesiveness as a critical noise magnitude.
//!
//! A school's cohesiveness is the largest σ on the grid
//! `sigma_start + k · sigma_step` for which every trial of a fixed set of
//! Wiener paths is still in ε,θ-schooling, scanning upward and stopping at the
//! first σ where some trial fails. Each trial starts from random positions at
//! rest; the unit Brownian path of a trial depends only on its seed and is
//! reused at every σ, scaled by σ.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{schooling_verdict, SchoolingVerdict, TrajectorySummary};
use crate::model::{SchoolingCriteria, ValidatedParams};
use crate::sde::{self, BrownianPaths, SolverSettings, DEFAULT_RECORD_EVERY};

/// Extra simulated time after the schooling onset.
pub const POST_ONSET_WINDOW: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohesionProtocol {
    pub n_trials: usize,
    pub sigma_step: f64,
    pub sigma_start: f64,
    pub sigma_max: f64,
    pub trial_seeds: Vec<u64>,
    pub criteria: SchoolingCriteria,
    /// Simulated time per trial.
    pub horizon: f64,
    pub dt: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Side of the square/cube the initial positions are drawn from; defaults
    /// to `2 r N^(1/d)`.
    #[serde(default)]
    pub box_side: Option<f64>,
    /// When set, scan with this step first and refine the bracketing interval
    /// with `sigma_step`.
    #[serde(default)]
    pub coarse_step: Option<f64>,
}

fn default_record_every() -> usize {
    DEFAULT_RECORD_EVERY
}

impl CohesionProtocol {
    /// Full-resolution protocol: 20 trials, σ step 0.001, T = 30, θ = 0.05.
    pub fn reference(epsilon: f64, first_seed: u64) -> Self {
        Self::with_trials(20, 0.001, epsilon, first_seed)
    }

    /// Test-suite scale: 8 trials, σ step 0.002.
    pub fn ci(epsilon: f64, first_seed: u64) -> Self {
        Self::with_trials(8, 0.002, epsilon, first_seed)
    }

    fn with_trials(n_trials: usize, sigma_step: f64, epsilon: f64, first_seed: u64) -> Self {
        let t_onset = 30.0;
        CohesionProtocol {
            n_trials,
            sigma_step,
            sigma_start: sigma_step,
            sigma_max: 0.5,
            trial_seeds: (0..n_trials as u64).map(|k| first_seed + k).collect(),
            criteria: SchoolingCriteria {
                epsilon,
                theta: 0.05,
                t_onset,
            },
            horizon: t_onset + POST_ONSET_WINDOW,
            dt: sde::DEFAULT_DT,
            record_every: DEFAULT_RECORD_EVERY,
            box_side: None,
            coarse_step: Some(sigma_step * (0.005 / sigma_step).round().max(1.0)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.n_trials == 0 {
            return bad("n_trials must be >= 1".into());
        }
        if self.trial_seeds.len() != self.n_trials {
            return bad(format!(
                "{} trial seeds for {} trials",
                self.trial_seeds.len(),
                self.n_trials
            ));
        }
        let mut seeds = self.trial_seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.trial_seeds.len() {
            return bad("trial seeds must be distinct".into());
        }
        if !(self.sigma_step > 0.0 && self.sigma_step.is_finite()) {
            return bad(format!("sigma_step > 0 violated ({})", self.sigma_step));
        }
        if !(self.sigma_start >= 0.0 && self.sigma_max >= self.sigma_start) {
            return bad("need 0 <= sigma_start <= sigma_max".into());
        }
        if let Some(c) = self.coarse_step {
            let ratio = c / self.sigma_step;
            if !(c >= self.sigma_step) || (ratio - ratio.round()).abs() > 1e-9 {
                return bad("coarse_step must be a multiple of sigma_step".into());
            }
        }
        if let Some(side) = self.box_side {
            if !(side > 0.0 && side.is_finite()) {
                return bad("box_side must be > 0".into());
            }
        }
        self.criteria.validate()?;
        SolverSettings::new(self.dt, self.horizon, self.record_every)?;
        if self.horizon < self.criteria.t_onset {
            return bad("horizon must reach the schooling onset".into());
        }
        Ok(())
    }

    /// Grid value `k`.
    pub fn sigma_at(&self, k: usize) -> f64 {
        self.sigma_start + k as f64 * self.sigma_step
    }

    fn box_side_for(&self, params: &ValidatedParams) -> f64 {
        self.box_side
            .unwrap_or_else(|| sde::default_box_side(params.n_agents, params.dim, params.r_crit))
    }

    fn coarse_stride(&self) -> usize {
        self.coarse_step
            .map_or(1, |c| (c / self.sigma_step).round() as usize)
            .max(1)
    }
}

/// Runs one trial and reports whether (and how) schooling held.
pub fn trial_verdict(
    params: &ValidatedParams,
    sigma: f64,
    seed: u64,
    protocol: &CohesionProtocol,
) -> Result<SchoolingVerdict> {
    let params = params.with_sigma(sigma)?;
    let settings = SolverSettings::new(protocol.dt, protocol.horizon, protocol.record_every)?;
    let initial = sde::random_initial_state(&params, protocol.box_side_for(&params), seed);
    let paths = BrownianPaths::new(seed, params.n_agents, params.dim, settings.n_steps());
    let mut stream = paths.stream();
    let onset = protocol.criteria.t_onset;
    let mut summary = TrajectorySummary::new(protocol.criteria.epsilon);
    let (_, termination) =
        sde::simulate_with(&initial, &params, Some(&mut stream), &settings, |state| {
            // Earlier samples cannot affect the verdict.
            if state.time >= onset {
                summary.push(state);
            }
        })?;
    summary.termination = termination;
    schooling_verdict(&summary, &protocol.criteria)
}

/// Whether the trial with `seed` is in ε,θ-schooling at noise `sigma`.
/// Blow-ups count as failures.
pub fn trial_is_schooling(
    params: &ValidatedParams,
    sigma: f64,
    seed: u64,
    protocol: &CohesionProtocol,
) -> Result<bool> {
    Ok(trial_verdict(params, sigma, seed, protocol)?.is_schooling())
}

/// Verdicts of every trial at one noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaLevel {
    pub sigma: f64,
    pub verdicts: Vec<SchoolingVerdict>,
}

impl SigmaLevel {
    pub fn all_schooling(&self) -> bool {
        self.verdicts.iter().all(|v| v.is_schooling())
    }

    pub fn n_schooling(&self) -> usize {
        self.verdicts.iter().filter(|v| v.is_schooling()).count()
    }
}

/// Evaluates every trial at `sigma`. Trials run in parallel; verdicts are
/// returned in seed order.
pub fn evaluate_level(
    params: &ValidatedParams,
    sigma: f64,
    protocol: &CohesionProtocol,
) -> Result<SigmaLevel> {
    let verdicts = protocol
        .trial_seeds
        .par_iter()
        .map(|&seed| trial_verdict(params, sigma, seed, protocol))
        .collect::<Result<Vec<_>>>()?;
    Ok(SigmaLevel { sigma, verdicts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohesionReport {
    pub sigma_bar: f64,
    /// Every evaluated level, by increasing σ.
    pub levels: Vec<SigmaLevel>,
}

impl CohesionReport {
    /// The first failing level (the one just above `sigma_bar`).
    pub fn breaking_level(&self) -> Option<&SigmaLevel> {
        self.levels.iter().find(|l| !l.all_schooling())
    }
}

/// Scans σ upward and returns the largest grid value before the first level
/// at which some trial fails.
pub fn estimate_critical_sigma(
    params: &ValidatedParams,
    protocol: &CohesionProtocol,
) -> Result<CohesionReport> {
    protocol.validate()?;
    let mut levels: Vec<(usize, SigmaLevel)> = Vec::new();
    let eval = |k: usize, levels: &mut Vec<(usize, SigmaLevel)>| -> Result<bool> {
        if let Some((_, level)) = levels.iter().find(|(j, _)| *j == k) {
            return Ok(level.all_schooling());
        }
        let level = evaluate_level(params, protocol.sigma_at(k), protocol)?;
        let ok = level.all_schooling();
        levels.push((k, level));
        Ok(ok)
    };

    if !eval(0, &mut levels)? {
        return Err(Error::NotSchoolingAtStart {
            sigma: protocol.sigma_start,
        });
    }
    let past_max = |k: usize| protocol.sigma_at(k) > protocol.sigma_max + 1e-12;

    // Coarse bracket: last passing coarse index `lo`, first failing `hi`.
    let stride = protocol.coarse_stride();
    let mut lo = 0usize;
    loop {
        let k = lo + stride;
        if past_max(k) {
            break;
        }
        if eval(k, &mut levels)? {
            lo = k;
        } else {
            break;
        }
    }
    // Fine scan from just above the last passing coarse point.
    let mut k = lo + 1;
    let sigma_bar = loop {
        if past_max(k) {
            return Err(Error::NoBreakBelowMax {
                sigma_max: protocol.sigma_max,
            });
        }
        if !eval(k, &mut levels)? {
            break protocol.sigma_at(k - 1);
        }
        k += 1;
    };
    levels.sort_by_key(|(k, _)| *k);
    Ok(CohesionReport {
        sigma_bar,
        levels: levels.into_iter().map(|(_, l)| l).collect(),
    })
}
