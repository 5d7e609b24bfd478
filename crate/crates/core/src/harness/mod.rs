//! Experiment configuration, orchestration and artifacts.

pub mod encounter;
pub mod output;
pub mod presets;
pub mod sweep;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cohesion::{self, CohesionProtocol, CohesionReport};
use crate::error::{Error, Result};
use crate::metrics::{self, Sample, SchoolingVerdict, TrajectorySummary};
use crate::model::{ExternalForce, ModelParams, Obstacle, SchoolingCriteria, SwarmState};
use crate::patterns::{self, PatternLabel};
use crate::sde::{self, BrownianPaths, SolverSettings, Termination};

use encounter::{BootstrapCache, EncounterOutcome, EncounterSetup, EncounterSpec};
use output::TrajectoryWriter;
use sweep::{GridSpec, SweepParameter, SweepReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    PatternRun,
    SweepExponent,
    SweepSpeed,
    SweepCriticalDistance,
    Cohesion,
    Bootstrap,
}

impl ExperimentKind {
    pub fn sweep_parameter(self) -> Option<SweepParameter> {
        match self {
            ExperimentKind::SweepExponent => Some(SweepParameter::Exponent),
            ExperimentKind::SweepSpeed => Some(SweepParameter::Speed),
            ExperimentKind::SweepCriticalDistance => Some(SweepParameter::CriticalDistance),
            _ => None,
        }
    }

    /// Whether the experiment flies a school at an obstacle.
    pub fn involves_obstacle(self) -> bool {
        self == ExperimentKind::PatternRun || self.sweep_parameter().is_some()
    }
}

/// The σ grid of a cohesiveness experiment. Trials are the config's seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohesionSettings {
    pub sigma_step: f64,
    /// Defaults to `sigma_step`.
    #[serde(default)]
    pub sigma_start: Option<f64>,
    pub sigma_max: f64,
    #[serde(default)]
    pub coarse_step: Option<f64>,
    #[serde(default)]
    pub box_side: Option<f64>,
}

/// One experiment, as read from a JSON document.
///
/// For encounter experiments `solver.t_end` is a lower bound on the simulated
/// time and the first seed drives the relaxation; for `bootstrap` it is the
/// relaxation time limit. Cohesion experiments run one trial per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: ModelParams,
    #[serde(default)]
    pub obstacle: Option<Obstacle>,
    pub criteria: SchoolingCriteria,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    pub solver: SolverSettings,
    pub seeds: Vec<u64>,
    pub output_path: String,
    #[serde(default)]
    pub encounter: Option<EncounterSetup>,
    #[serde(default)]
    pub cohesion: Option<CohesionSettings>,
}

/// Pulls the backquoted field name out of a serde error message.
fn field_of(message: &str) -> String {
    message
        .split('`')
        .nth(1)
        .map_or_else(|| "config".to_owned(), str::to_owned)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            Error::Config {
                field: field_of(&msg),
                message: msg,
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the compact JSON form, ignoring `output_path` so that
    /// the same experiment written elsewhere has the same hash.
    pub fn hash(&self) -> String {
        let mut content = self.clone();
        content.output_path.clear();
        let bytes = serde_json::to_vec(&content).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<()> {
        let tag = |field: &str| {
            let field = field.to_owned();
            move |e: Error| match e {
                Error::Config { .. } => e,
                other => Error::Config {
                    field: field.clone(),
                    message: other.to_string(),
                },
            }
        };
        self.model.validate().map_err(tag("model"))?;
        self.criteria.validate().map_err(tag("criteria"))?;
        self.solver.validate().map_err(tag("solver"))?;
        if let Some(grid) = &self.grid {
            grid.validate()?;
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        if self.output_path.is_empty() {
            return Err(Error::config("output_path", "must not be empty"));
        }
        if matches!(self.model.external_force, ExternalForce::ObstacleAvoidance(_)) {
            return Err(Error::config(
                "model.external_force",
                "obstacles are configured with the top-level `obstacle` field",
            ));
        }
        let avoid = self.kind.involves_obstacle();
        if avoid != self.obstacle.is_some() {
            return Err(Error::config(
                "obstacle",
                if avoid {
                    "required for this kind"
                } else {
                    "only allowed for encounter experiments"
                },
            ));
        }
        if let Some(o) = &self.obstacle {
            Obstacle::new(o.center, o.radius).map_err(tag("obstacle"))?;
            if self.model.dim == 2 && o.center[2] != 0.0 {
                return Err(Error::config("obstacle.center", "has a third component in 2D"));
            }
        }
        if avoid != self.encounter.is_some() {
            return Err(Error::config(
                "encounter",
                if avoid {
                    "required for this kind"
                } else {
                    "only allowed for encounter experiments"
                },
            ));
        }
        if avoid && self.model.external_force != ExternalForce::Zero {
            return Err(Error::config(
                "model.external_force",
                "must be zero for encounter experiments",
            ));
        }
        if let Some(setup) = &self.encounter {
            let ok = setup.gamma >= 0.0
                && setup.gap > 0.0
                && setup.speed >= 0.0
                && setup.bootstrap_drag > 0.0
                && setup.relax_t_max > 0.0
                && setup.radius_fraction_of_diameter.map_or(true, |f| f > 0.0);
            if !ok {
                return Err(Error::config("encounter", "values out of range"));
            }
        }
        if self.kind.sweep_parameter().is_none() && self.grid.is_some() {
            return Err(Error::config("grid", "only allowed for sweeps"));
        }
        let cohesive = self.kind == ExperimentKind::Cohesion;
        if cohesive != self.cohesion.is_some() {
            return Err(Error::config(
                "cohesion",
                if cohesive {
                    "required for this kind"
                } else {
                    "only allowed for cohesion experiments"
                },
            ));
        }
        if cohesive {
            self.cohesion_protocol()?
                .validate()
                .map_err(tag("cohesion"))?;
        }
        if self.kind == ExperimentKind::Bootstrap
            && !matches!(self.model.external_force, ExternalForce::LinearDrag { .. })
        {
            return Err(Error::config(
                "model.external_force",
                "bootstrap needs a linear drag",
            ));
        }
        Ok(())
    }

    /// Encounter spec built from the config, for encounter experiments.
    pub fn encounter_spec(&self) -> Result<EncounterSpec> {
        let (Some(obstacle), Some(setup)) = (self.obstacle, self.encounter) else {
            return Err(Error::config("encounter", "missing"));
        };
        Ok(EncounterSpec {
            model: self.model,
            setup,
            obstacle,
            criteria: self.criteria,
            dt: self.solver.dt,
            record_every: self.solver.record_every,
            min_t_end: Some(self.solver.t_end),
            seed: self.seeds[0],
        })
    }

    pub fn cohesion_protocol(&self) -> Result<CohesionProtocol> {
        let Some(c) = self.cohesion else {
            return Err(Error::config("cohesion", "missing"));
        };
        Ok(CohesionProtocol {
            n_trials: self.seeds.len(),
            sigma_step: c.sigma_step,
            sigma_start: c.sigma_start.unwrap_or(c.sigma_step),
            sigma_max: c.sigma_max,
            trial_seeds: self.seeds.clone(),
            criteria: self.criteria,
            horizon: self.solver.t_end,
            dt: self.solver.dt,
            record_every: self.solver.record_every,
            box_side: c.box_side,
            coarse_step: c.coarse_step,
        })
    }

    /// Applies command-line overrides. A seed override replaces the first
    /// seed, or renumbers all trial seeds from it for cohesion experiments.
    pub fn apply_overrides(&mut self, opts: &RunOptions) {
        if let Some(seed) = opts.seed {
            if self.kind == ExperimentKind::Cohesion {
                let n = self.seeds.len() as u64;
                self.seeds = (seed..seed + n).collect();
            } else {
                self.seeds[0] = seed;
            }
        }
        if let Some(dt) = opts.dt {
            self.solver.dt = dt;
        }
        if let Some(out) = &opts.out_dir {
            self.output_path = out.to_string_lossy().into_owned();
        }
        if opts.full {
            if let Some(param) = self.kind.sweep_parameter() {
                self.grid = Some(GridSpec::Range(param.full_grid()));
            }
        }
    }
}

/// Command-line options that are not part of the config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub full: bool,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub csv: bool,
    /// Where relaxed schools are cached; defaults to `<out>/bootstrap-cache`.
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config_hash: String,
    pub termination: Termination,
    pub verdict: SchoolingVerdict,
    pub schooling: bool,
    pub n_samples: usize,
    pub final_sample: Option<Sample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternReport {
    pub config_hash: String,
    pub label: PatternLabel,
    pub outcome: EncounterOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub config_hash: String,
    pub diameter: f64,
    pub state: SwarmState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepArtifact {
    pub config_hash: String,
    #[serde(flatten)]
    pub report: SweepReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohesionArtifact {
    pub config_hash: String,
    #[serde(flatten)]
    pub report: CohesionReport,
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutput {
    Simulation(SimulationReport),
    Pattern(PatternReport),
    Sweep(SweepArtifact),
    Cohesion(CohesionArtifact),
    Bootstrap(BootstrapReport),
}

/// Machine-readable error record written on failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub exit_code: i32,
    pub kind: String,
    pub field: Option<String>,
    pub message: String,
}

impl ErrorRecord {
    pub fn of(err: &Error) -> Self {
        let (kind, field) = match err {
            Error::Config { field, .. } => ("config", Some(field.clone())),
            Error::InvalidParams(_) => ("config", None),
            Error::Io(_) => ("io", None),
            _ => ("numerical", None),
        };
        ErrorRecord {
            exit_code: exit_code(err),
            kind: kind.to_owned(),
            field,
            message: err.to_string(),
        }
    }
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::InvalidParams(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_NUMERICAL,
    }
}

/// Runs `cfg` (after `opts` overrides) and writes its artifacts under
/// `output_path`: the config itself, a report, and for single runs a
/// JSON-Lines trajectory.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput> {
    let mut cfg = cfg.clone();
    cfg.apply_overrides(opts);
    cfg.validate()?;
    let hash = cfg.hash();
    let out = PathBuf::from(&cfg.output_path);
    std::fs::create_dir_all(&out)?;
    output::write_json(&out.join("config.json"), &cfg)?;
    let cache = BootstrapCache::on_disk(
        opts.cache_dir
            .clone()
            .unwrap_or_else(|| out.join("bootstrap-cache")),
    );
    let csv = opts.csv.then(|| out.join("trajectory.csv"));

    let result = match cfg.kind {
        ExperimentKind::Simulate => {
            let report = run_simulation(&cfg, &hash, &out, csv.as_deref())?;
            output::write_json(&out.join("summary.json"), &report)?;
            RunOutput::Simulation(report)
        }
        ExperimentKind::PatternRun => {
            let spec = cfg.encounter_spec()?;
            let mut writer = TrajectoryWriter::create(
                &out.join("trajectory.jsonl"),
                csv.as_deref(),
                cfg.model.dim,
                cfg.criteria.epsilon,
                &hash,
            )?;
            let outcome = encounter::run_encounter_with(&spec, &cache, |s| writer.record(s))?;
            writer.finish()?;
            let report = PatternReport {
                config_hash: hash,
                label: outcome.label,
                outcome,
            };
            output::write_json(&out.join("report.json"), &report)?;
            RunOutput::Pattern(report)
        }
        ExperimentKind::SweepExponent
        | ExperimentKind::SweepSpeed
        | ExperimentKind::SweepCriticalDistance => {
            let param = cfg.kind.sweep_parameter().expect("sweep kind");
            let grid = cfg
                .grid
                .clone()
                .unwrap_or(GridSpec::Range(param.default_grid()));
            let spec = cfg.encounter_spec()?;
            let report = sweep::sweep(param, &spec, &grid.values(), &cache);
            let artifact = SweepArtifact {
                config_hash: hash,
                report,
            };
            output::write_json(&out.join("report.json"), &artifact)?;
            if artifact.report.failed_points() == artifact.report.points.len() {
                let first = artifact.report.points[0].error.clone().unwrap_or_default();
                return Err(Error::AllPointsFailed(format!(
                    "{} points, first error: {first}",
                    artifact.report.points.len()
                )));
            }
            RunOutput::Sweep(artifact)
        }
        ExperimentKind::Cohesion => {
            let params = cfg.model.validate()?;
            let protocol = cfg.cohesion_protocol()?;
            let report = cohesion::estimate_critical_sigma(&params, &protocol)?;
            let artifact = CohesionArtifact {
                config_hash: hash,
                report,
            };
            output::write_json(&out.join("report.json"), &artifact)?;
            RunOutput::Cohesion(artifact)
        }
        ExperimentKind::Bootstrap => {
            let state = cache.relaxed(
                &cfg.model.with_sigma(0.0),
                &cfg.criteria,
                cfg.solver.dt,
                cfg.solver.t_end,
                cfg.seeds[0],
            )?;
            let report = BootstrapReport {
                config_hash: hash,
                diameter: metrics::diameter(&state),
                state,
            };
            output::write_json(&out.join("bootstrap.json"), &report)?;
            RunOutput::Bootstrap(report)
        }
    };
    Ok(result)
}

fn run_simulation(
    cfg: &ExperimentConfig,
    hash: &str,
    out: &Path,
    csv: Option<&Path>,
) -> Result<SimulationReport> {
    let params = cfg.model.validate()?;
    let seed = cfg.seeds[0];
    let box_side = sde::default_box_side(params.n_agents, params.dim, params.r_crit);
    let initial = sde::random_initial_state(&params, box_side, seed);
    let mut writer = TrajectoryWriter::create(
        &out.join("trajectory.jsonl"),
        csv,
        params.dim,
        cfg.criteria.epsilon,
        hash,
    )?;
    let mut summary = TrajectorySummary::new(cfg.criteria.epsilon);
    let observe = |s: &SwarmState| {
        summary.push(s);
        writer.record(s);
    };
    let (_, termination) = if params.sigma > 0.0 {
        let paths = BrownianPaths::new(seed, params.n_agents, params.dim, cfg.solver.n_steps());
        let mut stream = paths.stream();
        sde::simulate_with(&initial, &params, Some(&mut stream), &cfg.solver, observe)?
    } else {
        sde::simulate_with::<sde::BrownianStream, _>(&initial, &params, None, &cfg.solver, observe)?
    };
    writer.finish()?;
    summary.termination = termination;
    let verdict = metrics::schooling_verdict(&summary, &cfg.criteria)?;
    Ok(SimulationReport {
        config_hash: hash.to_owned(),
        termination,
        verdict,
        schooling: verdict.is_schooling(),
        n_samples: summary.samples.len(),
        final_sample: summary.last().copied(),
    })
}

/// Labels a recorded trajectory against the config's obstacle and criteria.
pub fn classify_trajectory(cfg: &ExperimentConfig, path: &Path) -> Result<PatternLabel> {
    let Some(obstacle) = cfg.obstacle else {
        return Err(Error::config("obstacle", "needed to classify"));
    };
    let records = output::read_trajectory(path)?;
    let states = records
        .iter()
        .map(|r| r.to_state())
        .collect::<Result<Vec<_>>>()?;
    let summary = TrajectorySummary::from_states(&states, cfg.criteria.epsilon, Termination::Completed);
    patterns::classify(&summary, &obstacle, encounter::approach_axis(), &cfg.criteria)
}
