//! Artifact writers: JSON-Lines trajectories, JSON reports, CSV export.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::model::SwarmState;
use crate::vector::Vector;

/// One line of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub n_eps: usize,
    pub sigma_v: f64,
    pub diameter: f64,
    pub config_hash: String,
}

impl TrajectoryRecord {
    pub fn of(state: &SwarmState, epsilon: f64, config_hash: &str) -> Self {
        let dim = state.dim();
        TrajectoryRecord {
            t: state.time,
            positions: state.positions.iter().map(|p| p.to_vec(dim)).collect(),
            velocities: state.velocities.iter().map(|v| v.to_vec(dim)).collect(),
            n_eps: metrics::epsilon_components(state, epsilon),
            sigma_v: metrics::sigma_v(state),
            diameter: metrics::diameter(state),
            config_hash: config_hash.to_owned(),
        }
    }

    pub fn to_state(&self) -> Result<SwarmState> {
        let dim = self.positions.first().map_or(2, Vec::len);
        let conv = |rows: &[Vec<f64>]| -> Result<Vec<Vector>> {
            rows.iter()
                .map(|r| {
                    if r.len() != dim {
                        return Err(Error::config("positions", "inconsistent dimension"));
                    }
                    Ok(Vector::from_slice(r))
                })
                .collect()
        };
        SwarmState::new(self.t, dim, conv(&self.positions)?, conv(&self.velocities)?)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Streams trajectory records, optionally mirroring them as CSV rows.
pub struct TrajectoryWriter {
    jsonl: BufWriter<File>,
    csv: Option<BufWriter<File>>,
    epsilon: f64,
    config_hash: String,
    error: Option<Error>,
}

impl TrajectoryWriter {
    pub fn create(
        jsonl_path: &Path,
        csv_path: Option<&Path>,
        dim: usize,
        epsilon: f64,
        config_hash: &str,
    ) -> Result<Self> {
        let jsonl = create(jsonl_path)?;
        let csv = match csv_path {
            Some(path) => {
                let mut w = create(path)?;
                writeln!(w, "# config_hash={config_hash}")?;
                write!(w, "t,agent")?;
                for c in 0..dim {
                    write!(w, ",x{c}")?;
                }
                for c in 0..dim {
                    write!(w, ",v{c}")?;
                }
                writeln!(w)?;
                Some(w)
            }
            None => None,
        };
        Ok(TrajectoryWriter {
            jsonl,
            csv,
            epsilon,
            config_hash: config_hash.to_owned(),
            error: None,
        })
    }

    /// Writes one state. I/O errors are kept and reported by `finish`, so this
    /// can be called from an infallible observer.
    pub fn record(&mut self, state: &SwarmState) {
        if self.error.is_some() {
            return;
        }
        if let Err(e) = self.try_record(state) {
            self.error = Some(e);
        }
    }

    fn try_record(&mut self, state: &SwarmState) -> Result<()> {
        let rec = TrajectoryRecord::of(state, self.epsilon, &self.config_hash);
        serde_json::to_writer(&mut self.jsonl, &rec).map_err(|e| Error::Io(e.to_string()))?;
        self.jsonl.write_all(b"\n")?;
        if let Some(csv) = &mut self.csv {
            let dim = state.dim();
            for (agent, (x, v)) in state.positions.iter().zip(&state.velocities).enumerate() {
                write!(csv, "{},{}", state.time, agent)?;
                for c in 0..dim {
                    write!(csv, ",{}", x[c])?;
                }
                for c in 0..dim {
                    write!(csv, ",{}", v[c])?;
                }
                writeln!(csv)?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.jsonl.flush()?;
        if let Some(csv) = &mut self.csv {
            csv.flush()?;
        }
        Ok(())
    }
}

/// Reads a JSON-Lines trajectory file.
pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| {
            Error::config("trajectory", format!("line {}: {e}", lineno + 1))
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.to_string()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
