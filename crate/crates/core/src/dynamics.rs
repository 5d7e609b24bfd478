//! Deterministic drift of the school model.
//!
//! For agent `i` the acceleration is
//!
//! ```text
//! dv_i/dt = -α Σ_{j≠i} (r^p/|x_ij|^p - r^q/|x_ij|^q) (x_i - x_j)
//!           -β Σ_{j≠i} (r^p/|x_ij|^p + r^q/|x_ij|^q) (v_i - v_j)
//!           + F_i(x_i, v_i)
//! ```
//!
//! The obstacle force matches `v_i` to its reflection across the tangent plane
//! at the first point where the ray `x_i + s v_i` meets the sphere, with the
//! same two-power weight evaluated at the distance to that point.
//!
//! Pair sums are accumulated per agent in ascending `j`, so results are
//! bitwise reproducible.

use crate::error::{Error, Result};
use crate::model::{ExternalForce, Obstacle, ObstacleAvoidance, SwarmState, ValidatedParams};
use crate::vector::Vector;

/// Relative guard below which a pair distance is treated as a collision.
pub const DEGENERATE_DISTANCE_FACTOR: f64 = 1e-8;

/// `base^exp` with an integer fast path.
#[derive(Debug, Clone, Copy)]
enum Power {
    Int(i32),
    Real(f64),
}

impl Power {
    fn new(exp: f64) -> Self {
        if exp.fract() == 0.0 && exp.abs() <= 64.0 {
            Power::Int(exp as i32)
        } else {
            Power::Real(exp)
        }
    }

    #[inline]
    fn apply(self, base: f64) -> f64 {
        match self {
            Power::Int(n) => base.powi(n),
            Power::Real(e) => base.powf(e),
        }
    }
}

/// The pair `(r/d)^p`, `(r/d)^q` shared by both interaction weights.
#[derive(Debug, Clone, Copy)]
struct TwoPower {
    scale: f64,
    p: Power,
    q: Power,
}

impl TwoPower {
    fn new(scale: f64, p: f64, q: f64) -> Self {
        TwoPower {
            scale,
            p: Power::new(p),
            q: Power::new(q),
        }
    }

    #[inline]
    fn terms(&self, dist: f64) -> (f64, f64) {
        let ratio = self.scale / dist;
        (self.p.apply(ratio), self.q.apply(ratio))
    }
}

fn check_distance(dist: f64, r: f64) -> Result<()> {
    if dist < DEGENERATE_DISTANCE_FACTOR * r || dist.is_nan() {
        Err(Error::DegenerateDistance { i: 0, j: 0, dist })
    } else {
        Ok(())
    }
}

/// `r^p/d^p − r^q/d^q`: positive (attractive) beyond `r`, negative inside.
pub fn attraction_weight(dist: f64, r: f64, p: f64, q: f64) -> Result<f64> {
    check_distance(dist, r)?;
    let (a, b) = TwoPower::new(r, p, q).terms(dist);
    Ok(a - b)
}

/// `r^p/d^p + r^q/d^q`: the velocity-matching weight.
pub fn matching_weight(dist: f64, r: f64, p: f64, q: f64) -> Result<f64> {
    check_distance(dist, r)?;
    let (a, b) = TwoPower::new(r, p, q).terms(dist);
    Ok(a + b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// First intersection point of the ray with the sphere.
    pub point: Vector,
    /// Euclidean distance from the ray origin to `point`.
    pub distance: f64,
}

/// First intersection of the ray `x + s v` (`s ≥ 0`) with the obstacle surface.
///
/// Returns `Ok(None)` when the ray misses or `v = 0`. A tangent ray counts as
/// a hit.
pub fn ray_sphere_first_hit(x: Vector, v: Vector, obstacle: &Obstacle) -> Result<Option<RayHit>> {
    let offset = x - obstacle.center;
    let c = offset.norm_squared() - obstacle.radius * obstacle.radius;
    if !(c > 0.0) {
        return Err(Error::AgentInsideObstacle { agent: 0 });
    }
    let a = v.norm_squared();
    if a == 0.0 {
        return Ok(None);
    }
    let half_b = v.dot(offset);
    if half_b >= 0.0 {
        // Moving away from (or parallel to) the center while outside.
        return Ok(None);
    }
    let disc = half_b * half_b - a * c;
    if disc < 0.0 {
        return Ok(None);
    }
    // Near root, written to avoid cancellation: s = c / (-b/2 + sqrt(disc)).
    let s = c / (-half_b + disc.sqrt());
    let point = x + v * s;
    Ok(Some(RayHit {
        point,
        distance: s * a.sqrt(),
    }))
}

/// Reflects `v` across the tangent plane of the sphere at `hit_point`.
pub fn reflect(v: Vector, hit_point: Vector, obstacle: &Obstacle) -> Vector {
    let normal = (hit_point - obstacle.center) * (1.0 / obstacle.radius);
    v - normal * (2.0 * v.dot(normal))
}

/// The reflection vector: `v` reflected at the first hit, or `v` itself when
/// the ray misses.
pub fn rf(x: Vector, v: Vector, obstacle: &Obstacle) -> Result<Vector> {
    Ok(match ray_sphere_first_hit(x, v, obstacle)? {
        Some(hit) => reflect(v, hit.point, obstacle),
        None => v,
    })
}

/// Avoidance force `−γ (R^P/|x−y|^P + R^Q/|x−y|^Q) (v − Rf(x, v))`.
pub fn obstacle_force(x: Vector, v: Vector, cfg: &ObstacleAvoidance) -> Result<Vector> {
    ObstacleKernel::new(cfg).force(x, v)
}

struct ObstacleKernel<'a> {
    cfg: &'a ObstacleAvoidance,
    weights: TwoPower,
}

impl<'a> ObstacleKernel<'a> {
    fn new(cfg: &'a ObstacleAvoidance) -> Self {
        ObstacleKernel {
            cfg,
            weights: TwoPower::new(cfg.r_obs, cfg.p_obs, cfg.q_obs),
        }
    }

    #[inline]
    fn force(&self, x: Vector, v: Vector) -> Result<Vector> {
        let obstacle = &self.cfg.obstacle;
        let Some(hit) = ray_sphere_first_hit(x, v, obstacle)? else {
            return Ok(Vector::ZERO);
        };
        if hit.distance < DEGENERATE_DISTANCE_FACTOR * self.cfg.r_obs {
            return Err(Error::DegenerateObstacleDistance {
                agent: 0,
                dist: hit.distance,
            });
        }
        let (a, b) = self.weights.terms(hit.distance);
        let diff = v - reflect(v, hit.point, obstacle);
        Ok(diff * (-self.cfg.gamma * (a + b)))
    }
}

/// Time derivatives of all agents.
#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    /// `dv_i/dt`.
    pub accelerations: Vec<Vector>,
    /// `dx_i/dt = v_i`.
    pub velocities: Vec<Vector>,
}

pub fn drift(state: &SwarmState, params: &ValidatedParams) -> Result<Drift> {
    let mut accelerations = vec![Vector::ZERO; state.n_agents()];
    accelerations_into(state, params, &mut accelerations)?;
    Ok(Drift {
        accelerations,
        velocities: state.velocities.clone(),
    })
}

/// Writes `dv_i/dt` for every agent into `out`.
///
/// Each unordered pair is evaluated once and applied to both agents with
/// opposite signs. With pairs visited as `(i, j)`, `i < j`, in lexicographic
/// order, agent `k` receives its terms in ascending order of the partner
/// index, and the two halves of a pair are exact negations of each other.
pub fn accelerations_into(
    state: &SwarmState,
    params: &ValidatedParams,
    out: &mut [Vector],
) -> Result<()> {
    let n = state.n_agents();
    assert_eq!(out.len(), n, "output buffer length must equal agent count");
    out.fill(Vector::ZERO);
    let xs = &state.positions;
    let vs = &state.velocities;
    let r = params.r_crit;
    let min_dist = DEGENERATE_DISTANCE_FACTOR * r;
    let weights = TwoPower::new(r, params.p_exp, params.q_exp);
    let (alpha, beta) = (params.alpha, params.beta);

    if alpha != 0.0 || beta != 0.0 {
        for i in 0..n {
            let (xi, vi) = (xs[i], vs[i]);
            let mut acc_i = out[i];
            for j in (i + 1)..n {
                let dx = xi - xs[j];
                let dist = dx.norm();
                if !(dist >= min_dist) {
                    return Err(Error::DegenerateDistance { i, j, dist });
                }
                let (a, b) = weights.terms(dist);
                let term = dx * (alpha * (a - b)) + (vi - vs[j]) * (beta * (a + b));
                acc_i -= term;
                out[j] += term;
            }
            out[i] = acc_i;
        }
    }

    match &params.external_force {
        ExternalForce::Zero => {}
        ExternalForce::LinearDrag { kappa } => {
            for (acc, v) in out.iter_mut().zip(vs) {
                *acc += *v * (-kappa);
            }
        }
        ExternalForce::ObstacleAvoidance(cfg) => {
            let kernel = ObstacleKernel::new(cfg);
            for (agent, (acc, (x, v))) in out.iter_mut().zip(xs.iter().zip(vs)).enumerate() {
                let force = kernel.force(*x, *v).map_err(|err| match err {
                    Error::AgentInsideObstacle { .. } => Error::AgentInsideObstacle { agent },
                    Error::DegenerateObstacleDistance { dist, .. } => {
                        Error::DegenerateObstacleDistance { agent, dist }
                    }
                    other => other,
                })?;
                *acc += force;
            }
        }
    }
    Ok(())
}
