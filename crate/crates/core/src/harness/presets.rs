//! Ready-made experiment configurations. Each one is also shipped as a JSON
//! file under `configs/`.

use crate::model::{ExternalForce, ModelParams, Obstacle, SchoolingCriteria};
use crate::sde::{SolverSettings, DEFAULT_DT, DEFAULT_RECORD_EVERY};
use crate::vector::Vector;

use super::encounter::EncounterSetup;
use super::sweep::{GridSpec, SweepParameter};
use super::{CohesionSettings, ExperimentConfig, ExperimentKind};

/// Encounter constants shared by the pattern experiments.
fn encounter_model(p: f64, r: f64) -> ModelParams {
    ModelParams {
        n_agents: 20,
        dim: 2,
        alpha: 1.0,
        beta: 1.0,
        p_exp: p,
        q_exp: p + 1.0,
        r_crit: r,
        sigma: 0.0,
        external_force: ExternalForce::Zero,
    }
}

fn encounter_setup(gap: f64, speed: f64) -> EncounterSetup {
    EncounterSetup {
        gamma: 1.0,
        gap,
        speed,
        p_obs: None,
        q_obs: None,
        r_obs: None,
        radius_fraction_of_diameter: None,
        bootstrap_drag: 5.0,
        relax_t_max: 2000.0,
    }
}

fn encounter_criteria(r: f64) -> SchoolingCriteria {
    SchoolingCriteria {
        epsilon: r,
        theta: 1e-6,
        t_onset: 0.0,
    }
}

fn encounter_config(
    kind: ExperimentKind,
    model: ModelParams,
    radius: f64,
    setup: EncounterSetup,
    grid: Option<GridSpec>,
    output_path: &str,
) -> ExperimentConfig {
    ExperimentConfig {
        kind,
        criteria: encounter_criteria(model.r_crit),
        obstacle: Some(Obstacle {
            center: Vector::ZERO,
            radius,
        }),
        grid,
        solver: SolverSettings {
            dt: DEFAULT_DT,
            t_end: super::encounter::MIN_ENCOUNTER_TIME,
            record_every: DEFAULT_RECORD_EVERY,
        },
        seeds: vec![1],
        output_path: output_path.into(),
        encounter: Some(setup),
        cohesion: None,
        model,
    }
}

/// Single encounter: `N = 20`, `r = 0.5`, `ρ = 1.2`, gap 3.5, speed 1.75,
/// `q = p + 1`.
pub fn pattern_run(p: f64) -> ExperimentConfig {
    encounter_config(
        ExperimentKind::PatternRun,
        encounter_model(p, 0.5),
        1.2,
        encounter_setup(3.5, 1.75),
        None,
        "out/pattern",
    )
}

/// Three-dimensional encounter. The sphere radius is `2δ/3` of the relaxed
/// school, as in the critical-distance sweep; this choice is an
/// extrapolation.
pub fn pattern_run_3d(p: f64) -> ExperimentConfig {
    let mut cfg = pattern_run(p);
    cfg.model.dim = 3;
    if let Some(setup) = &mut cfg.encounter {
        setup.radius_fraction_of_diameter = Some(2.0 / 3.0);
    }
    cfg.output_path = "out/pattern-3d".into();
    cfg
}

pub fn sweep_exponent() -> ExperimentConfig {
    encounter_config(
        ExperimentKind::SweepExponent,
        encounter_model(2.0, 0.5),
        1.2,
        encounter_setup(3.5, 1.75),
        Some(GridSpec::Range(SweepParameter::Exponent.default_grid())),
        "out/sweep-exponent",
    )
}

pub fn sweep_speed() -> ExperimentConfig {
    encounter_config(
        ExperimentKind::SweepSpeed,
        encounter_model(2.0, 0.5),
        1.2,
        encounter_setup(3.5, 1.75),
        Some(GridSpec::Range(SweepParameter::Speed.default_grid())),
        "out/sweep-speed",
    )
}

/// `p = 3`, `q = 4`, gap 8, speed 4, `ρ = 2δ(r)/3`.
pub fn sweep_critical_distance() -> ExperimentConfig {
    let mut setup = encounter_setup(8.0, 4.0);
    setup.radius_fraction_of_diameter = Some(2.0 / 3.0);
    encounter_config(
        ExperimentKind::SweepCriticalDistance,
        encounter_model(3.0, 0.5),
        1.0,
        setup,
        Some(GridSpec::Range(SweepParameter::CriticalDistance.default_grid())),
        "out/sweep-rcrit",
    )
}

/// `N = 50`, `α = 4`, `β = 1`, `F = −v`, `ε = r = 0.5`, `θ = 0.05`, `T = 30`.
fn cohesion_model(p: f64, r: f64) -> ModelParams {
    ModelParams {
        n_agents: 50,
        dim: 2,
        alpha: 4.0,
        beta: 1.0,
        p_exp: p,
        q_exp: p + 1.0,
        r_crit: r,
        sigma: 0.0,
        external_force: ExternalForce::LinearDrag { kappa: 1.0 },
    }
}

fn cohesion_base(kind: ExperimentKind, n_trials: u64, output_path: &str) -> ExperimentConfig {
    ExperimentConfig {
        kind,
        model: cohesion_model(4.0, 0.5),
        obstacle: None,
        criteria: SchoolingCriteria {
            epsilon: 0.5,
            theta: 0.05,
            t_onset: 30.0,
        },
        grid: None,
        solver: SolverSettings {
            dt: DEFAULT_DT,
            t_end: 30.0 + crate::cohesion::POST_ONSET_WINDOW,
            record_every: DEFAULT_RECORD_EVERY,
        },
        seeds: (1..=n_trials).collect(),
        output_path: output_path.into(),
        encounter: None,
        cohesion: None,
    }
}

/// Full cohesiveness protocol: 20 trials, σ step 0.001.
pub fn cohesion_reference() -> ExperimentConfig {
    let mut cfg = cohesion_base(ExperimentKind::Cohesion, 20, "out/cohesion");
    cfg.cohesion = Some(CohesionSettings {
        sigma_step: 0.001,
        sigma_start: None,
        sigma_max: 0.5,
        coarse_step: Some(0.005),
        box_side: None,
    });
    cfg
}

/// One noisy run of the cohesiveness model at `σ = 0.02`.
pub fn simulate_schooling() -> ExperimentConfig {
    let mut cfg = cohesion_base(ExperimentKind::Simulate, 1, "out/simulate");
    cfg.model.sigma = 0.02;
    cfg
}

/// Relaxation of the encounter school under `F = −5v`.
pub fn bootstrap() -> ExperimentConfig {
    let mut model = encounter_model(2.0, 0.5);
    model.external_force = ExternalForce::LinearDrag { kappa: 5.0 };
    ExperimentConfig {
        kind: ExperimentKind::Bootstrap,
        model,
        obstacle: None,
        criteria: encounter_criteria(0.5),
        grid: None,
        solver: SolverSettings {
            dt: DEFAULT_DT,
            t_end: 2000.0,
            record_every: DEFAULT_RECORD_EVERY,
        },
        seeds: vec![1],
        output_path: "out/bootstrap".into(),
        encounter: None,
        cohesion: None,
    }
}

/// Every preset with the file name it ships under.
pub fn all() -> Vec<(&'static str, ExperimentConfig)> {
    vec![
        ("pattern-p2.json", pattern_run(2.0)),
        ("pattern-p3.json", pattern_run(3.0)),
        ("pattern-p3.62.json", pattern_run(3.62)),
        ("pattern-p4.json", pattern_run(4.0)),
        ("pattern-3d-p2.json", pattern_run_3d(2.0)),
        ("sweep-exponent.json", sweep_exponent()),
        ("sweep-speed.json", sweep_speed()),
        ("sweep-rcrit.json", sweep_critical_distance()),
        ("cohesion.json", cohesion_reference()),
        ("simulate.json", simulate_schooling()),
        ("bootstrap.json", bootstrap()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for (name, cfg) in all() {
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}
