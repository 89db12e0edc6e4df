//! Turning a trained field into swarm trajectories.
//!
//! Time runs from `T` down to 0 in `steps` equal steps of `Δt = T / steps`.
//! Every step applies `X ← X + Δt · V`, where `V` is the field's velocity,
//! optionally passed through reciprocal collision avoidance.

use glam::DVec3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flowmatch::FlowSchedule;
use crate::io::checkpoint::{Algorithm, Checkpoint};
use crate::io::{from_points, to_points};
use crate::models::{standard_normal, SwarmModel};
use crate::navigation::{orca_adjust, NavConfig};
use crate::autodiff::Tensor;

/// Provenance and units of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub algorithm: String,
    pub seed: u64,
    /// Minimum separation in the log's length units.
    pub kappa: f64,
    /// Meters per length unit of the log; 1 means training units.
    pub length_scale: f64,
}

/// Every frame of a sampling run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    /// `times[k]` is the time of `positions[k]`, strictly decreasing.
    pub times: Vec<f64>,
    pub dt: f64,
    pub positions: Vec<Vec<DVec3>>,
    /// Velocity applied over step `k`, one per step.
    pub applied_velocities: Vec<Vec<DVec3>>,
    /// Velocity requested before collision avoidance, one per step.
    pub preferred_velocities: Vec<Vec<DVec3>>,
    pub meta: TrajectoryMeta,
}

impl TrajectoryLog {
    /// Empty log at time `horizon` that will take `steps` steps.
    pub fn start(initial: Vec<DVec3>, horizon: f64, steps: usize, meta: TrajectoryMeta) -> Self {
        let times = (0..=steps).map(|k| horizon * (steps - k) as f64 / steps as f64).collect();
        Self {
            times,
            dt: horizon / steps as f64,
            positions: vec![initial],
            applied_velocities: Vec::with_capacity(steps),
            preferred_velocities: Vec::with_capacity(steps),
            meta,
        }
    }

    /// Advance by one Euler step with `applied`.
    pub fn push(&mut self, preferred: Vec<DVec3>, applied: Vec<DVec3>) {
        let last = self.positions.last().expect("log has an initial frame");
        let next = last.iter().zip(&applied).map(|(p, v)| *p + self.dt * *v).collect();
        self.positions.push(next);
        self.preferred_velocities.push(preferred);
        self.applied_velocities.push(applied);
    }

    pub fn steps(&self) -> usize {
        self.applied_velocities.len()
    }

    pub fn agents(&self) -> usize {
        self.positions[0].len()
    }

    pub fn current(&self) -> &[DVec3] {
        self.positions.last().expect("log has an initial frame")
    }

    /// Bit-exact check of `positions[k+1] = positions[k] + Δt · applied[k]`.
    pub fn is_euler_consistent(&self) -> bool {
        self.positions.len() == self.applied_velocities.len() + 1
            && self.positions.windows(2).zip(&self.applied_velocities).all(|(w, v)| {
                w[0].iter()
                    .zip(&w[1])
                    .zip(v)
                    .all(|((a, b), v)| *a + self.dt * *v == *b)
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleConfig {
    pub agents: usize,
    pub steps: usize,
    pub use_orca: bool,
    pub seed: u64,
    /// Collision avoidance settings; `dt` is overwritten with the step size.
    pub nav: NavConfig,
}

impl SampleConfig {
    /// Defaults for a unit horizon: `τ = 10 Δt`, neighbor radius `4κ`.
    pub fn new(agents: usize, steps: usize, kappa: f64, seed: u64) -> Self {
        Self {
            agents,
            steps,
            use_orca: true,
            seed,
            nav: NavConfig::new(kappa, 1.0 / steps.max(1) as f64),
        }
    }

    fn validate(&self, horizon: f64) -> Result<NavConfig> {
        if self.agents == 0 {
            return Err(Error::Config("agent count must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("step count must be at least 1".into()));
        }
        let nav = NavConfig {
            dt: horizon / self.steps as f64,
            ..self.nav
        };
        if self.use_orca {
            nav.validate()?;
        }
        Ok(nav)
    }
}

/// Latent `z = F(w)` with `w ~ N(0, I)` and a standard-normal start cloud,
/// drawn in that order.
pub fn initial_state(model: &SwarmModel, agents: usize, rng: &mut ChaCha8Rng) -> Result<(Tensor, Vec<DVec3>)> {
    let z = model.sample_latent(rng)?;
    let x = to_points(&standard_normal(rng, &[agents, 3]));
    Ok((z, x))
}

/// Integrate the learned field from `start` at `t = T` down to 0 under
/// latent `z`.
pub fn integrate_field(
    model: &SwarmModel,
    z: &Tensor,
    start: Vec<DVec3>,
    horizon: f64,
    cfg: &SampleConfig,
    algorithm: &str,
) -> Result<TrajectoryLog> {
    let nav = cfg.validate(horizon)?;
    let mut log = TrajectoryLog::start(
        start,
        horizon,
        cfg.steps,
        TrajectoryMeta {
            algorithm: algorithm.to_string(),
            seed: cfg.seed,
            kappa: cfg.nav.kappa,
            length_scale: 1.0,
        },
    );
    for k in 0..cfg.steps {
        let x = log.current();
        let t_unit = log.times[k] / horizon;
        let field = model.vector_field(&from_points(x), t_unit, z)?;
        // the field is a rate per unit of normalized time
        let preferred: Vec<DVec3> = to_points(&field).into_iter().map(|v| v / horizon).collect();
        let applied = if cfg.use_orca {
            orca_adjust(&preferred, x, &nav)
        } else {
            preferred.clone()
        };
        log.push(preferred, applied);
    }
    Ok(log)
}

/// Generate one swarm trajectory from a flow-matching checkpoint.
///
/// With `use_orca = false` this is plain Euler integration of the field.
pub fn sample(ckpt: &Checkpoint, cfg: &SampleConfig) -> Result<TrajectoryLog> {
    if ckpt.algorithm != Algorithm::Cfm {
        return Err(Error::Config(format!(
            "flow sampling needs a flow-matching checkpoint, got `{}`",
            ckpt.algorithm.name()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (z, x) = initial_state(&ckpt.model, cfg.agents, &mut rng)?;
    let name = if cfg.use_orca { "cfm+orca-in-loop" } else { "cfm" };
    integrate_field(&ckpt.model, &z, x, ckpt.config.horizon, cfg, name)
}

/// Navigate from `start` to fixed goals with collision avoidance only:
/// agent `i` heads for `goals[i]`, preferring the speed that would arrive
/// exactly at `t = 0`.
pub fn sample_cfm_plus_orca(goals: &[DVec3], start: &[DVec3], horizon: f64, cfg: &SampleConfig) -> Result<TrajectoryLog> {
    if goals.len() != start.len() {
        return Err(Error::Config(format!(
            "{} goals for {} agents",
            goals.len(),
            start.len()
        )));
    }
    let cfg = SampleConfig {
        agents: start.len(),
        ..cfg.clone()
    };
    let nav = cfg.validate(horizon)?;
    let mut log = TrajectoryLog::start(
        start.to_vec(),
        horizon,
        cfg.steps,
        TrajectoryMeta {
            algorithm: "cfm-then-orca".into(),
            seed: cfg.seed,
            kappa: cfg.nav.kappa,
            length_scale: 1.0,
        },
    );
    for k in 0..cfg.steps {
        let remaining = log.times[k];
        let x = log.current();
        let preferred: Vec<DVec3> = x.iter().zip(goals).map(|(p, g)| (*g - *p) / remaining).collect();
        let applied = if cfg.use_orca {
            orca_adjust(&preferred, x, &nav)
        } else {
            preferred.clone()
        };
        log.push(preferred, applied);
    }
    Ok(log)
}

/// The two-stage baseline: integrate the field without avoidance to obtain
/// a final shape, then fly from the same start cloud to that shape with
/// [`sample_cfm_plus_orca`].
pub fn sample_cfm_then_orca(ckpt: &Checkpoint, cfg: &SampleConfig) -> Result<TrajectoryLog> {
    let plain = SampleConfig {
        use_orca: false,
        ..cfg.clone()
    };
    let generated = sample(ckpt, &plain)?;
    let nav = SampleConfig {
        use_orca: true,
        ..cfg.clone()
    };
    sample_cfm_plus_orca(generated.current(), &generated.positions[0], ckpt.config.horizon, &nav)
}

/// Euler-integrate the exact conditional field toward a known `x0`.
pub fn integrate_exact_target(
    start: &[DVec3],
    x0: &[DVec3],
    schedule: &FlowSchedule,
    steps: usize,
) -> Result<TrajectoryLog> {
    if start.len() != x0.len() || start.is_empty() {
        return Err(Error::Config("start and target clouds must be non-empty and equally sized".into()));
    }
    if steps == 0 {
        return Err(Error::Config("step count must be at least 1".into()));
    }
    let target = from_points(x0);
    let mut log = TrajectoryLog::start(
        start.to_vec(),
        schedule.horizon,
        steps,
        TrajectoryMeta {
            algorithm: "exact-target".into(),
            seed: 0,
            kappa: 0.0,
            length_scale: 1.0,
        },
    );
    for k in 0..steps {
        let v = schedule.conditional_field(&from_points(log.current()), &target, log.times[k])?;
        let v: Vec<DVec3> = to_points(&v).into_iter().map(|v| v / schedule.horizon).collect();
        log.push(v.clone(), v);
    }
    Ok(log)
}
