//! Explicit forward-Euler integrators.
//!
//! * [`step_diffusion`]: `u⁺ = u + dt Δ_h ∇Φ(u)`.
//! * [`step_coupled`]: conservative face-flux update of
//!   `u^i_t = ∇·(a ∇u^i + c^i ∇H)`.
//! * [`step_scalar`]: `u⁺ = u + dt Δ_h g(u)` for a scalar field.
//!
//! Every stepper aborts on a range excursion `|u| > r_max` or a non-finite
//! value instead of clamping.

mod config;
mod initial;

pub use config::{content_hash, GridConfig, ModelKind, RunConfig, DEFAULT_CFL_SIGMA};
pub use initial::{random_orthogonal, InitialData};

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{FieldState, GridError, GridSpec, RunMeta, Trajectory, MAX_DIM};
use crate::potential::{
    certify_window, coupled_decomposition, CoupledCoefficients, EllipticityWindow, PotentialError,
    RadialPotential,
};

/// Grids with at least this many values are updated in parallel. The update
/// of each point is independent of the thread layout, so results are
/// bit-identical either way.
const PAR_THRESHOLD: usize = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("|u| = {norm} exceeds r_max = {r_max} at point {index} (coords {coords:?})")]
    RangeExcursion {
        index: usize,
        coords: Vec<usize>,
        norm: f64,
        r_max: f64,
    },
    #[error("non-finite value at component {component}, point {index} (coords {coords:?})")]
    NonFinite {
        component: usize,
        index: usize,
        coords: Vec<usize>,
    },
    #[error("component count {got} does not match the model ({expected})")]
    Components { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("step {step} (t = {t}): {source}")]
    Step {
        step: usize,
        t: f64,
        #[source]
        source: StepError,
    },
}

impl SolverError {
    /// True for failures of the dynamics (range excursion, blow-up) as
    /// opposed to configuration problems.
    pub fn is_domain_abort(&self) -> bool {
        matches!(
            self,
            SolverError::Step { .. } | SolverError::Potential(PotentialError::Range { .. })
        )
    }
}

/// `dt = σ h² / (2 n Λ)`.
pub fn cfl_dt(grid: &GridSpec, window: &EllipticityWindow, sigma: f64) -> f64 {
    cfl_dt_for(grid, window.big_lambda, sigma)
}

pub(crate) fn cfl_dt_for(grid: &GridSpec, big_lambda: f64, sigma: f64) -> f64 {
    sigma * grid.h() * grid.h() / (2.0 * grid.dim() as f64 * big_lambda)
}

/// Neighbour table of the updated points.
#[derive(Debug, Clone)]
struct Stencil {
    points: Vec<usize>,
    /// `[minus, plus]` neighbours per axis of each updated point.
    nbrs: Vec<[[usize; 2]; MAX_DIM]>,
    dim: usize,
}

impl Stencil {
    fn new(grid: &GridSpec) -> Self {
        let points = grid.interior_indices();
        let nbrs = points
            .iter()
            .map(|&i| {
                let mut row = [[i; 2]; MAX_DIM];
                for (axis, slot) in row.iter_mut().enumerate().take(grid.dim()) {
                    let (m, p) = grid.neighbors_unchecked(i, axis);
                    *slot = [m, p];
                }
                row
            })
            .collect();
        Self {
            points,
            nbrs,
            dim: grid.dim(),
        }
    }
}

fn coords_vec(grid: &GridSpec, index: usize) -> Vec<usize> {
    grid.coords(index)[..grid.dim()].to_vec()
}

fn check_state(s: &FieldState, r_max: f64) -> Result<(), StepError> {
    let grid = s.grid();
    let len = grid.len();
    if let Some(p) = s.values().iter().position(|v| !v.is_finite()) {
        return Err(StepError::NonFinite {
            component: p / len,
            index: p % len,
            coords: coords_vec(grid, p % len),
        });
    }
    let (norm, index) = s.sup_norm();
    if norm > r_max {
        return Err(StepError::RangeExcursion {
            index,
            coords: coords_vec(grid, index),
            norm,
            r_max,
        });
    }
    Ok(())
}

/// Applies `u^c_i += dt/h² · increment(c, k)` for every updated point `k`,
/// returning the new state after the post-step checks.
fn apply_update<F>(
    s: &FieldState,
    stencil: &Stencil,
    dt: f64,
    r_max: f64,
    increment: F,
) -> Result<FieldState, StepError>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let grid = s.grid();
    let len = grid.len();
    let scale = dt / (grid.h() * grid.h());
    let mut values = s.values().to_vec();
    for c in 0..s.components() {
        let dst = &mut values[c * len..(c + 1) * len];
        let old = s.component(c);
        let deltas: Vec<f64> = if stencil.points.len() * s.components() >= PAR_THRESHOLD {
            (0..stencil.points.len())
                .into_par_iter()
                .map(|k| increment(c, k))
                .collect()
        } else {
            (0..stencil.points.len()).map(|k| increment(c, k)).collect()
        };
        for (k, &i) in stencil.points.iter().enumerate() {
            dst[i] = old[i] + scale * deltas[k];
        }
    }
    let next = FieldState::from_parts_unchecked(
        grid.clone(),
        s.components(),
        values,
        s.t() + dt,
        s.boundary_values().to_vec(),
    );
    check_state(&next, r_max)?;
    Ok(next)
}

/// Evaluates `∇Φ(u)` at every point (component-major).
fn flux_potential(s: &FieldState, p: &RadialPotential) -> Result<Vec<f64>, StepError> {
    let grid = s.grid();
    let len = grid.len();
    let n = s.components();
    let mut v = vec![0.0; len * n];
    let mut z = vec![0.0; n];
    let mut g = vec![0.0; n];
    for i in 0..len {
        s.point(i, &mut z);
        if let Err(e) = p.grad_phi_into(&z, &mut g) {
            return Err(range_error(grid, i, e));
        }
        for c in 0..n {
            v[c * len + i] = g[c];
        }
    }
    Ok(v)
}

fn range_error(grid: &GridSpec, index: usize, e: PotentialError) -> StepError {
    match e {
        PotentialError::Range { norm, r_max } => StepError::RangeExcursion {
            index,
            coords: coords_vec(grid, index),
            norm,
            r_max,
        },
        _ => StepError::NonFinite {
            component: 0,
            index,
            coords: coords_vec(grid, index),
        },
    }
}

fn laplacian_increment(v: &[f64], len: usize, stencil: &Stencil, c: usize, k: usize) -> f64 {
    let vc = &v[c * len..(c + 1) * len];
    let i = stencil.points[k];
    let mut acc = 0.0;
    for [m, p] in &stencil.nbrs[k][..stencil.dim] {
        acc += (vc[*m] - vc[i]) + (vc[*p] - vc[i]);
    }
    acc
}

/// One explicit step of `u_t = Δ_h ∇Φ(u)`.
pub fn step_diffusion(
    s: &FieldState,
    p: &RadialPotential,
    dt: f64,
) -> Result<FieldState, StepError> {
    DiffusionStepper::new(s.grid(), p.clone()).step(s, dt)
}

/// One explicit step of the strongly coupled system in flux form.
pub fn step_coupled(
    s: &FieldState,
    cc: &CoupledCoefficients,
    dt: f64,
) -> Result<FieldState, StepError> {
    CoupledStepper::new(s.grid(), cc.clone()).step(s, dt)
}

/// One explicit step of `U_t = Δ_h g(U)` for a single-component field. The
/// caller bounds `|U|` by `r_max`.
pub fn step_scalar<G>(s: &FieldState, g: G, r_max: f64, dt: f64) -> Result<FieldState, StepError>
where
    G: Fn(f64) -> f64 + Sync,
{
    if s.components() != 1 {
        return Err(StepError::Components {
            expected: 1,
            got: s.components(),
        });
    }
    let stencil = Stencil::new(s.grid());
    let v: Vec<f64> = s.values().iter().map(|&u| g(u)).collect();
    let len = s.grid().len();
    apply_update(s, &stencil, dt, r_max, |c, k| {
        laplacian_increment(&v, len, &stencil, c, k)
    })
}

/// Reusable stepper for the generalized diffusion system.
#[derive(Debug, Clone)]
pub struct DiffusionStepper {
    potential: RadialPotential,
    stencil: Stencil,
}

impl DiffusionStepper {
    pub fn new(grid: &GridSpec, potential: RadialPotential) -> Self {
        Self {
            potential,
            stencil: Stencil::new(grid),
        }
    }

    pub fn step(&self, s: &FieldState, dt: f64) -> Result<FieldState, StepError> {
        let v = flux_potential(s, &self.potential)?;
        let len = s.grid().len();
        apply_update(s, &self.stencil, dt, self.potential.r_max(), |c, k| {
            laplacian_increment(&v, len, &self.stencil, c, k)
        })
    }
}

/// Reusable stepper for the strongly coupled system.
///
/// The flux through the face between `i` and its forward neighbour `p` is
/// `½(a_i + a_p)(u_p - u_i) + ½(c_i + c_p)(H_p - H_i)`; face values are
/// stored once per axis so the update telescopes exactly.
#[derive(Debug, Clone)]
pub struct CoupledStepper {
    cc: CoupledCoefficients,
    stencil: Stencil,
    /// Forward neighbour of every point per axis (`None` past a Dirichlet
    /// edge).
    forward: Vec<[Option<usize>; MAX_DIM]>,
}

impl CoupledStepper {
    pub fn new(grid: &GridSpec, cc: CoupledCoefficients) -> Self {
        let forward = (0..grid.len())
            .map(|i| {
                let mut row = [None; MAX_DIM];
                for (axis, slot) in row.iter_mut().enumerate().take(grid.dim()) {
                    *slot = grid.neighbor(i, axis, true);
                }
                row
            })
            .collect();
        Self {
            cc,
            stencil: Stencil::new(grid),
            forward,
        }
    }

    pub fn step(&self, s: &FieldState, dt: f64) -> Result<FieldState, StepError> {
        let grid = s.grid();
        let len = grid.len();
        let n = s.components();
        let r_max = self.cc.potential().r_max();
        check_state(s, r_max)?;

        let mut a = vec![0.0; len];
        let mut h = vec![0.0; len];
        let mut c = vec![0.0; len * n];
        let mut z = vec![0.0; n];
        let mut ci = vec![0.0; n];
        for i in 0..len {
            s.point(i, &mut z);
            a[i] = self.cc.a(&z);
            h[i] = self.cc.h(&z);
            self.cc.c_into(&z, &mut ci);
            for k in 0..n {
                c[k * len + i] = ci[k];
            }
        }

        // face fluxes: faces[(comp * dim + axis) * len + i] is the flux from
        // i to its forward neighbour along axis
        let dim = grid.dim();
        let mut faces = vec![0.0; n * dim * len];
        for comp in 0..n {
            let u = s.component(comp);
            let cc = &c[comp * len..(comp + 1) * len];
            for axis in 0..dim {
                let out = &mut faces[(comp * dim + axis) * len..(comp * dim + axis + 1) * len];
                for (i, f) in out.iter_mut().enumerate() {
                    if let Some(p) = self.forward[i][axis] {
                        *f = 0.5 * (a[i] + a[p]) * (u[p] - u[i])
                            + 0.5 * (cc[i] + cc[p]) * (h[p] - h[i]);
                    }
                }
            }
        }

        apply_update(s, &self.stencil, dt, r_max, |comp, k| {
            let i = self.stencil.points[k];
            let mut acc = 0.0;
            for axis in 0..dim {
                let base = (comp * dim + axis) * len;
                let m = self.stencil.nbrs[k][axis][0];
                acc += faces[base + i] - faces[base + m];
            }
            acc
        })
    }
}

/// The stepping model of a run.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Model {
    Diffusion(DiffusionStepper),
    Coupled(CoupledStepper),
}

impl Model {
    pub fn step(&self, s: &FieldState, dt: f64) -> Result<FieldState, StepError> {
        match self {
            Model::Diffusion(m) => m.step(s, dt),
            Model::Coupled(m) => m.step(s, dt),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Diffusion(_) => "diffusion",
            Model::Coupled(_) => "coupled",
        }
    }
}

/// Everything a run needs once the config has been resolved.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub potential: RadialPotential,
    pub window: EllipticityWindow,
    /// Diffusivity bound entering the CFL condition.
    pub big_lambda: f64,
    pub dt: f64,
    pub steps: usize,
    pub initial: FieldState,
    pub model: Model,
}

impl Prepared {
    pub fn meta(&self) -> RunMeta {
        RunMeta {
            potential_id: self.potential.id().to_string(),
            model: self.model.name().to_string(),
            seed: self.config.seed,
            lambda: self.window.lambda,
            big_lambda: self.big_lambda,
            dt: self.dt,
            steps: self.steps,
            config_hash: self.config.hash(),
        }
    }
}

/// Resolves a config: certifies the potential, builds the initial state and
/// fixes the step.
///
/// The step count is the smallest multiple of `snapshot_every` for which
/// `dt = t_end / steps` does not exceed the CFL step, so the last snapshot
/// lands exactly on `t_end`.
pub fn prepare(config: &RunConfig) -> Result<Prepared, SolverError> {
    config.validate()?;
    let grid = config.grid.build()?;
    let potential = config.potential.build()?;
    let window = certify_window(&potential)?;
    let (model, big_lambda) = match config.model {
        ModelKind::Diffusion => (
            Model::Diffusion(DiffusionStepper::new(&grid, potential.clone())),
            window.big_lambda,
        ),
        ModelKind::Coupled => {
            let cc = coupled_decomposition(&potential)?;
            let lam = cc.bounds.effective_lambda.max(window.big_lambda);
            (Model::Coupled(CoupledStepper::new(&grid, cc)), lam)
        }
    };
    let initial = config.initial.build(
        &grid,
        config.components,
        config.seed,
        config.boundary_values.clone(),
    )?;
    if let Err(source) = check_state(&initial, potential.r_max()) {
        return Err(SolverError::Step {
            step: 0,
            t: 0.0,
            source,
        });
    }
    let dt_max = cfl_dt_for(&grid, big_lambda, config.cfl_sigma);
    let every = config.snapshot_every;
    let (dt, steps) = if config.t_end == 0.0 {
        (dt_max, 0)
    } else {
        let blocks = (config.t_end / (dt_max * every as f64)).ceil().max(1.0) as usize;
        let steps = blocks * every;
        (config.t_end / steps as f64, steps)
    };
    Ok(Prepared {
        config: config.clone(),
        potential,
        window,
        big_lambda,
        dt,
        steps,
        initial,
        model,
    })
}

/// Integrates a config to `t_end`, keeping every `snapshot_every`-th state.
pub fn run(config: &RunConfig) -> Result<Trajectory, SolverError> {
    let prepared = prepare(config)?;
    run_prepared(&prepared, |_, _| {})
}

/// Runs a prepared config, calling `observe(step, state)` after every step
/// (including the initial state as step 0).
pub fn run_prepared<F>(prepared: &Prepared, mut observe: F) -> Result<Trajectory, SolverError>
where
    F: FnMut(usize, &FieldState),
{
    let every = prepared.config.snapshot_every;
    let mut state = prepared.initial.clone();
    observe(0, &state);
    let mut snapshots = vec![state.clone()];
    for step in 1..=prepared.steps {
        state = prepared
            .model
            .step(&state, prepared.dt)
            .map_err(|source| SolverError::Step {
                step,
                t: state.t(),
                source,
            })?;
        // avoid drift in t: pin it to step * dt
        state = retime(state, step as f64 * prepared.dt);
        observe(step, &state);
        if step % every == 0 {
            snapshots.push(state.clone());
        }
    }
    Ok(Trajectory::new(
        snapshots,
        prepared.dt,
        every,
        prepared.meta(),
    )?)
}

/// Integrates an arbitrary state with a model for `steps` steps, snapshotting
/// every step.
pub fn integrate(
    model: &Model,
    initial: &FieldState,
    dt: f64,
    steps: usize,
    meta: RunMeta,
) -> Result<Trajectory, SolverError> {
    let mut state = initial.clone();
    let t0 = initial.t();
    let mut snapshots = vec![state.clone()];
    for step in 1..=steps {
        state = model.step(&state, dt).map_err(|source| SolverError::Step {
            step,
            t: state.t(),
            source,
        })?;
        state = retime(state, t0 + step as f64 * dt);
        snapshots.push(state.clone());
    }
    Ok(Trajectory::new(snapshots, dt, 1, meta)?)
}

fn retime(s: FieldState, t: f64) -> FieldState {
    let (grid, n, values, _, bv) = s.into_parts();
    FieldState::from_parts_unchecked(grid, n, values, t, bv)
}

/// Periodic or Dirichlet heat step `u + dt Δ_h u`, used as an oracle.
pub fn heat_step(s: &FieldState, dt: f64) -> Result<FieldState, StepError> {
    let stencil = Stencil::new(s.grid());
    let len = s.grid().len();
    apply_update(s, &stencil, dt, f64::INFINITY, |c, k| {
        laplacian_increment(s.values(), len, &stencil, c, k)
    })
}
