//! One-step-theta time integration, monolithic residual/tangent aggregation,
//! Newton iteration with the active-set fixed point, and sparse direct
//! linear solves.

mod checkpoint;
pub(crate) mod geometry;
mod linear;
mod monolithic;
mod newton;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use geometry::{build_geometry, CutDomainData, GeometryCache};
pub use linear::linear_solve;
pub use monolithic::{assemble_monolithic, eval_loads};
pub use newton::{newton_solve, newton_solve_scaled, NewtonDiagnostics};

use crate::error::{Error, Result};
use crate::forms::{FluidDomain, PoroDomain, SolidDomain, ThetaCtx};
use crate::interface::{ContactNodeState, FieldIds, NitscheParams, OtherSide};
use crate::mesh::{DofMap, FieldId};
use crate::math::Vec2;

/// Time integration scheme with a piecewise-constant step-length schedule.
#[derive(Clone, Debug)]
pub struct TimeScheme {
    pub theta: f64,
    /// (start time, dt) entries sorted by start time; the active dt is the
    /// last entry whose start is <= t.
    pub dt_schedule: Vec<(f64, f64)>,
    pub t_end: f64,
}

impl TimeScheme {
    pub fn constant(theta: f64, dt: f64, t_end: f64) -> Self {
        Self {
            theta,
            dt_schedule: vec![(0.0, dt)],
            t_end,
        }
    }

    pub fn dt_at(&self, t: f64) -> f64 {
        let mut dt = self.dt_schedule.first().map(|e| e.1).unwrap_or(1.0);
        for &(start, d) in &self.dt_schedule {
            if t >= start - 1e-12 {
                dt = d;
            }
        }
        dt
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config(format!("theta = {} outside (0, 1]", self.theta)));
        }
        if self.dt_schedule.is_empty() || self.dt_schedule.iter().any(|e| e.1 <= 0.0) {
            return Err(Error::Config("empty or non-positive dt schedule".into()));
        }
        Ok(())
    }
}

/// Nonlinear solver settings.
#[derive(Clone, Debug)]
pub struct NonlinearSettings {
    /// Relative residual tolerance against the first-iteration per-field
    /// reference.
    pub eps: f64,
    pub max_newton: usize,
    pub max_active_set_cycles: usize,
    /// Geometry refresh threshold on the accumulated displacement increment
    /// (absolute, in mesh length units).
    pub geometry_tol: f64,
    /// Bisection retries on nonconvergence (0 disables).
    pub max_bisections: usize,
}

impl Default for NonlinearSettings {
    fn default() -> Self {
        Self {
            eps: 1e-8,
            max_newton: 25,
            max_active_set_cycles: 10,
            geometry_tol: 1e-6,
            max_bisections: 2,
        }
    }
}

/// Piecewise-linear scalar load schedule along a fixed direction.
#[derive(Clone, Debug)]
pub struct LoadSchedule {
    /// (time, magnitude) knots sorted by time; constant extrapolation.
    pub knots: Vec<(f64, f64)>,
    pub direction: Vec2<f64>,
}

impl LoadSchedule {
    pub fn constant(value: f64, direction: Vec2<f64>) -> Self {
        Self {
            knots: vec![(0.0, value)],
            direction,
        }
    }

    pub fn magnitude(&self, t: f64) -> f64 {
        let k = &self.knots;
        if k.is_empty() {
            return 0.0;
        }
        if t <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let (t0, v0) = w[0];
            let (t1, v1) = w[1];
            if t <= t1 {
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        k.last().unwrap().1
    }

    pub fn traction(&self, t: f64) -> Vec2<f64> {
        self.direction.scale(self.magnitude(t))
    }
}

/// Fitted interface coupling: integrate on the tagged fluid boundary edges,
/// pair traces onto the named body.
#[derive(Clone, Debug)]
pub struct FittedInterface {
    pub fluid_dom: usize,
    pub fluid_tag: String,
    pub other: OtherSide,
}

/// Mortar contact pair configuration.
#[derive(Clone, Debug)]
pub struct ContactConfig {
    /// Potential contact surface on the poro mesh (boundary tag).
    pub poro_tag: String,
    pub solid_body: usize,
    pub solid_tag: String,
    /// Algorithmic constant of the complementarity function.
    pub c_n: f64,
}

/// Full monolithic problem description.
pub struct System {
    pub solids: Vec<SolidDomain>,
    pub fluids: Vec<FluidDomain>,
    pub poro: Option<PoroDomain>,
    pub map: DofMap,
    pub ids: FieldIds,
    /// Homogeneous Dirichlet dofs (identity rows).
    pub dirichlet: Vec<usize>,
    pub loads: Vec<LoadSchedule>,
    pub nitsche: NitscheParams,
    /// Fluid domains integrated on cut background meshes: per fluid domain,
    /// the list of embedded bodies.
    pub cut_fluids: Vec<(usize, Vec<OtherSide>)>,
    pub fitted_fsi: Vec<FittedInterface>,
    pub fitted_fpi: Vec<FittedInterface>,
    /// Poro boundary tags under a permanent impermeability (contact fluid
    /// mass) treatment, e.g. matched solid interfaces.
    pub ps_impermeable: Vec<String>,
    pub contact: Option<ContactConfig>,
    /// Cut-cell void threshold (fraction of a cell area) and island
    /// threshold (fraction of one cell area).
    pub eps_area: f64,
    pub island_threshold: f64,
    /// Fields with displacement-velocity history (theta update).
    pub disp_fields: Vec<FieldId>,
}

impl System {
    pub fn n_dofs(&self) -> usize {
        self.map.n_dofs()
    }

    /// Evaluate all load schedules theta-weighted between t_new and t_old.
    pub fn loads_at(&self, th: &ThetaCtx, t_new: f64) -> Vec<Vec2<f64>> {
        let t_old = t_new - th.dt;
        self.loads
            .iter()
            .map(|s| {
                s.traction(t_new).scale(th.theta) + s.traction(t_old).scale(1.0 - th.theta)
            })
            .collect()
    }

    /// True if the global dof belongs to a displacement-history field.
    pub fn is_disp_dof(&self, g: usize) -> bool {
        let (f, _, _) = self.map.locate(g);
        self.disp_fields.contains(&f)
    }
}

/// Discrete state: unknown vector at time t plus the displacement-velocity
/// history used by the theta scheme.
#[derive(Clone, Debug)]
pub struct State {
    pub t: f64,
    pub step: usize,
    pub x: Vec<f64>,
    /// Velocity history w_n; meaningful for displacement dofs only.
    pub w: Vec<f64>,
}

impl State {
    pub fn zeros(n: usize) -> Self {
        Self {
            t: 0.0,
            step: 0,
            x: vec![0.0; n],
            w: vec![0.0; n],
        }
    }

    /// Advance the history after an accepted step.
    pub fn advance(&self, sys: &System, x_new: Vec<f64>, th: &ThetaCtx) -> State {
        let mut w_new = vec![0.0; x_new.len()];
        for g in 0..x_new.len() {
            if sys.is_disp_dof(g) {
                w_new[g] = (x_new[g] - self.x[g]) / (th.theta * th.dt)
                    - (1.0 - th.theta) / th.theta * self.w[g];
            }
        }
        State {
            t: self.t + th.dt,
            step: self.step + 1,
            x: x_new,
            w: w_new,
        }
    }
}

/// Scalar one-step-theta update, exposed for the time-integration tests:
/// given dx/dt = f(x) discretized as
/// (x_{n+1} - x_n)/dt = theta f(x_{n+1}) + (1-theta) f(x_n),
/// returns x_{n+1} for the linear test equation f(x) = a x.
pub fn theta_step_linear(a: f64, x_n: f64, theta: f64, dt: f64) -> f64 {
    (x_n + dt * (1.0 - theta) * a * x_n) / (1.0 - dt * theta * a)
}

/// Difference-quotient rates for all dofs (the theta scheme evaluates rates
/// once per step).
pub fn theta_update(x_new: &[f64], x_old: &[f64], dt: f64) -> Vec<f64> {
    x_new
        .iter()
        .zip(x_old)
        .map(|(a, b)| (a - b) / dt)
        .collect()
}

/// Transient driver: advances t0 -> t_end, calling `on_step` after each
/// accepted step. On nonconvergence the error carries the partial history
/// already handed to the callback.
pub fn run_transient(
    sys: &System,
    initial: State,
    scheme: &TimeScheme,
    settings: &NonlinearSettings,
    mut on_step: impl FnMut(&State, &[ContactNodeState], &GeometryCache) -> Result<()>,
) -> Result<State> {
    scheme.validate()?;
    let mut state = initial;
    let mut cache: Option<GeometryCache> = None;
    let mut active: Vec<ContactNodeState> = Vec::new();
    let mut scales: Vec<f64> = Vec::new();
    while state.t < scheme.t_end - 1e-12 {
        let mut dt = scheme.dt_at(state.t).min(scheme.t_end - state.t);
        let mut attempt = 0;
        loop {
            let th = ThetaCtx {
                theta: scheme.theta,
                dt,
            };
            match newton::newton_solve_scaled(
                sys,
                &state,
                &th,
                settings,
                cache.take(),
                std::mem::take(&mut active),
                &mut scales,
            ) {
                Ok((new_state, new_active, new_cache, _diag)) => {
                    state = new_state;
                    active = new_active;
                    let res = on_step(&state, &active, &new_cache);
                    cache = Some(new_cache);
                    res?;
                    break;
                }
                Err(e) => {
                    attempt += 1;
                    if attempt > settings.max_bisections {
                        return Err(e);
                    }
                    dt *= 0.5;
                }
            }
        }
    }
    Ok(state)
}

