//! Oracles and fixtures shared by the property and acceptance suites.
#![allow(dead_code)]

use std::collections::VecDeque;

use fishschool::metrics::{Sample, TrajectorySummary};
use fishschool::patterns::PatternLabel;
use fishschool::sde::Termination;
use fishschool::{Obstacle, Vector};

/// Rotation matrix from Euler angles; only the first angle is used in 2D.
#[derive(Debug, Clone, Copy)]
pub struct Rotation([[f64; 3]; 3]);

impl Rotation {
    pub fn new(dim: usize, a: f64, b: f64, c: f64) -> Self {
        let rz = |t: f64| [[t.cos(), -t.sin(), 0.0], [t.sin(), t.cos(), 0.0], [0.0, 0.0, 1.0]];
        let rx = |t: f64| [[1.0, 0.0, 0.0], [0.0, t.cos(), -t.sin()], [0.0, t.sin(), t.cos()]];
        let mul = |m: [[f64; 3]; 3], n: [[f64; 3]; 3]| {
            let mut out = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    out[i][j] = (0..3).map(|k| m[i][k] * n[k][j]).sum();
                }
            }
            out
        };
        if dim == 2 {
            Rotation(rz(a))
        } else {
            Rotation(mul(rz(a), mul(rx(b), rz(c))))
        }
    }

    pub fn apply(&self, v: Vector) -> Vector {
        let m = &self.0;
        Vector([
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ])
    }
}

/// Closest approach of the ray to the center, then bisection on the
/// monotone stretch before it.
pub fn bisection_hit(x: Vector, v: Vector, obs: &Obstacle) -> Option<f64> {
    let dir = v.normalized()?;
    let s_star = (obs.center - x).dot(dir);
    if s_star <= 0.0 {
        return None;
    }
    let gap = |s: f64| (x + dir * s).distance(obs.center) - obs.radius;
    if gap(s_star) > 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (0.0, s_star);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

pub fn bfs_components(pos: &[Vector], eps: f64) -> usize {
    let n = pos.len();
    let mut seen = vec![false; n];
    let mut count = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if !seen[j] && pos[i].distance(pos[j]) <= eps {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    count
}

// Synthetic encounter summaries. Obstacle of radius 1.2 at the origin, school
// approaching along +x from x = -3.5 with diameter 0.8.

pub struct Case {
    pub name: &'static str,
    pub summary: TrajectorySummary,
    pub expected: PatternLabel,
}

pub fn sample(time: f64, x: f64, y: f64, n: usize, sigma_v: f64, heading: f64) -> Sample {
    Sample {
        time,
        n_components: n,
        sigma_v,
        centroid: Vector::xy(x, y),
        diameter: 0.8,
        mean_velocity: Vector::xy(heading, 0.1),
    }
}

pub fn completed(samples: Vec<Sample>) -> TrajectorySummary {
    TrajectorySummary {
        epsilon: 0.5,
        samples,
        termination: Termination::Completed,
    }
}

pub fn library() -> Vec<Case> {
    use PatternLabel::*;
    let start = |y: f64| sample(0.0, -3.5, y, 1, 0.0, 1.75);
    let mut cases = Vec::new();
    let mut add = |name, expected, samples: Vec<Sample>| {
        cases.push(Case {
            name,
            summary: completed(samples),
            expected,
        })
    };
    // Never passes, never breaks.
    add("rebound slow", Rebound, vec![start(0.0), sample(5.0, -1.7, 0.0, 1, 1e-3, -0.1), sample(20.0, -3.0, 0.0, 1, 1e-7, -0.1)]);
    add("rebound stuck at surface", Rebound, vec![start(0.0), sample(20.0, -1.65, 0.0, 1, 0.5, 0.0)]);
    add("rebound offset", Rebound, vec![start(0.3), sample(20.0, -6.0, 0.4, 1, 0.0, -1.0)]);
    add("rebound just short of margin", Rebound, vec![start(0.0), sample(10.0, 1.59, 0.0, 1, 0.0, 0.2), sample(20.0, -2.0, 0.0, 1, 0.0, -0.2)]);
    // Breaks, stays in front, re-forms.
    add("pullback", Pullback, vec![start(0.0), sample(4.0, -1.8, 0.0, 3, 0.2, 0.0), sample(20.0, -5.0, 0.0, 1, 1e-4, -0.5)]);
    add("pullback at threshold", Pullback, vec![start(0.0), sample(4.0, -1.8, 0.0, 2, 0.2, 0.0), sample(20.0, -5.0, 0.0, 1, 1e-3, -0.5)]);
    add("pullback sideways", Pullback, vec![start(-0.2), sample(4.0, -1.5, 1.0, 4, 0.1, 0.0), sample(20.0, -3.0, 2.0, 1, 0.0, -0.1)]);
    // Breaks, stays in front, does not re-form.
    add("split in front", Unclassified, vec![start(0.0), sample(20.0, -1.8, 0.0, 2, 0.1, 0.0)]);
    add("connected but noisy in front", Unclassified, vec![start(0.0), sample(5.0, -1.8, 0.0, 2, 0.1, 0.0), sample(20.0, -4.0, 0.0, 1, 0.01, -0.3)]);
    add("split in front late", Unclassified, vec![start(0.0), sample(10.0, -2.0, 0.0, 1, 0.0, 0.0), sample(20.0, -2.5, 0.0, 5, 0.3, -0.1)]);
    // Passes and re-forms.
    add("pass clean", PassAndReunion, vec![start(0.0), sample(20.0, 8.0, 0.0, 1, 0.0, 1.7)]);
    add("pass after split", PassAndReunion, vec![start(0.0), sample(3.0, 0.0, 0.0, 2, 0.3, 1.0), sample(20.0, 9.0, 0.0, 1, 1e-4, 1.6)]);
    add("pass at margin", PassAndReunion, vec![start(0.0), sample(20.0, 1.61, 0.0, 1, 0.0, 0.1)]);
    add("pass then turn back", PassAndReunion, vec![start(0.0), sample(10.0, 4.0, 0.0, 1, 0.0, 0.5), sample(20.0, -1.0, 0.5, 1, 0.0, -0.5)]);
    // Passes and stays split.
    add("separation", Separation, vec![start(0.0), sample(20.0, 8.0, 0.0, 2, 0.3, 1.5)]);
    add("separation aligned but split", Separation, vec![start(0.0), sample(20.0, 8.0, 0.0, 3, 0.0, 1.5)]);
    add("separation connected but noisy", Separation, vec![start(0.0), sample(20.0, 8.0, 0.0, 1, 0.5, 1.5)]);
    // Single-sample and blown-up runs.
    add("motionless single sample", Rebound, vec![start(0.0)]);
    cases.push(Case {
        name: "blow-up",
        summary: TrajectorySummary {
            termination: Termination::BlowUp { step: 12 },
            ..completed(vec![start(0.0)])
        },
        expected: BlowUp,
    });
    cases.push(Case {
        name: "penetration",
        summary: TrajectorySummary {
            termination: Termination::Penetration { step: 40, agent: 3 },
            ..completed(vec![start(0.0), sample(1.0, -1.5, 0.0, 1, 0.0, 1.0)])
        },
        expected: BlowUp,
    });
    cases
}

pub fn moved_summary(summary: &TrajectorySummary, rot: &Rotation, shift: Vector) -> TrajectorySummary {
    TrajectorySummary {
        samples: summary
            .samples
            .iter()
            .map(|s| Sample {
                centroid: rot.apply(s.centroid) + shift,
                mean_velocity: rot.apply(s.mean_velocity),
                ..*s
            })
            .collect(),
        ..summary.clone()
    }
}

