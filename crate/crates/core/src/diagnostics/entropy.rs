//! Discrete residuals of the entropy subsolution inequalities.
//!
//! Diffusion (`e = φ(|u|)`):
//! `r = D_t⁺ φ(|u|) - Δ_h γ(φ(|u|)) + λ² |∇_h u|²`.
//!
//! Coupled (`v = e^{sH(u)}`):
//! `r = D_t⁺ v - ∇_h·(A ∇_h v) + c |∇_h u|²` with the scalar coefficient
//! `A = a + c·H_z` averaged onto faces.
//!
//! Residuals are evaluated between consecutive solver steps at the time
//! level of the explicit update. Each point also gets a rounding floor, a
//! bound on the floating-point error of the three terms; only the part of a
//! positive residual above its floor (the excess) counts as a violation.

use serde::{Deserialize, Serialize};

use super::{CheckReport, DiagnosticsError, Witness};
use crate::grid::{gradient_sq, FieldState, GridSpec, Trajectory, MAX_DIM};
use crate::potential::{
    build_entropy, certify_window, CoupledCoefficients, EllipticityWindow, EntropyData,
    RadialPotential,
};

/// Ulps allowed per term in the rounding floor.
const ROUND: f64 = 8.0;

/// Per-point residual and rounding floor for one step. Entries outside
/// `points` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualField {
    pub points: Vec<usize>,
    pub residual: Vec<f64>,
    pub floor: Vec<f64>,
}

impl ResidualField {
    fn new(grid: &GridSpec) -> Self {
        Self {
            points: grid.interior_indices(),
            residual: vec![0.0; grid.len()],
            floor: vec![0.0; grid.len()],
        }
    }
}

fn stencil(grid: &GridSpec, i: usize) -> [[usize; 2]; MAX_DIM] {
    let mut row = [[i; 2]; MAX_DIM];
    for (axis, slot) in row.iter_mut().enumerate().take(grid.dim()) {
        *slot = [
            grid.neighbor(i, axis, false).expect("interior"),
            grid.neighbor(i, axis, true).expect("interior"),
        ];
    }
    row
}

fn check_step(s0: &FieldState, s1: &FieldState) -> Result<f64, DiagnosticsError> {
    if s0.grid() != s1.grid() || s0.components() != s1.components() {
        return Err(DiagnosticsError::Mismatch(
            "snapshots differ in shape".into(),
        ));
    }
    let dt = s1.t() - s0.t();
    if !(dt > 0.0) {
        return Err(DiagnosticsError::Precondition(format!(
            "snapshots are not increasing in time ({} then {})",
            s0.t(),
            s1.t()
        )));
    }
    Ok(dt)
}

/// Diffusion residual between two consecutive states.
pub fn diffusion_residual(
    s0: &FieldState,
    s1: &FieldState,
    p: &RadialPotential,
    e: &EntropyData,
    lambda: f64,
) -> Result<ResidualField, DiagnosticsError> {
    let dt = check_step(s0, s1)?;
    let grid = s0.grid();
    let len = grid.len();
    let n = grid.dim() as f64;
    let h2 = grid.h() * grid.h();
    let eps = f64::EPSILON;
    let r0: Vec<f64> = (0..len).map(|i| s0.norm_at(i)).collect();
    let r1: Vec<f64> = (0..len).map(|i| s1.norm_at(i)).collect();
    let phi0: Vec<f64> = r0.iter().map(|&r| p.phi(r)).collect();
    let phi1: Vec<f64> = r1.iter().map(|&r| p.phi(r)).collect();
    let g = phi0
        .iter()
        .map(|&w| e.gamma(w))
        .collect::<Result<Vec<f64>, _>>()?;
    let grad = gradient_sq(s0.values(), s0.components(), grid)?.values;
    let lam2 = lambda * lambda;
    let table_floor = 4.0 * n * e.tol / h2;

    let mut out = ResidualField::new(grid);
    for &i in &out.points {
        let nb = stencil(grid, i);
        let mut lap = 0.0;
        let mut lap_mag = 0.0;
        for [m, q] in &nb[..grid.dim()] {
            lap += (g[*m] - g[i]) + (g[*q] - g[i]);
            lap_mag += g[*m].abs() + g[*q].abs() + 2.0 * g[i].abs();
        }
        let time = (phi1[i] - phi0[i]) / dt;
        out.residual[i] = time - lap / h2 + lam2 * grad[i];
        let time_mag = (phi1[i].abs()
            + phi0[i].abs()
            + r1[i] * p.phi1(r1[i]).abs()
            + r0[i] * p.phi1(r0[i]).abs())
            / dt;
        out.floor[i] = ROUND * eps * (time_mag + lap_mag / h2 + lam2 * grad[i]) + table_floor;
    }
    Ok(out)
}

/// Parameters `(s, c)` of the coupled entropy `e^{sH}` and the constants
/// they were derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyParams {
    pub s: f64,
    pub c: f64,
    pub lambda: f64,
    pub eps: f64,
    pub c_eps: f64,
    pub dimension_factor: f64,
    pub trivial: bool,
    pub r_min: f64,
    pub r_max: f64,
}

/// `ε = λ/2`, `C(ε) = (sup‖H_zz‖ sup|c|)²/(4ε) · nN`, `s = max(1, 2C(ε)/λ)`,
/// `c = (λ/2) s e^{s inf H}`.
///
/// `λ` is `min(λ_a, λ_A)` when `H ≡ 0`. Otherwise the convexity of `H` enters
/// through the term `H_zz a ∇u·∇u >= λ_a λ_H |∇u|²` and the flux coefficient
/// must be elliptic as well, so `λ = min(λ_a, λ_A, λ_flux, λ_a λ_H)`.
pub fn choose_entropy_params(
    cc: &CoupledCoefficients,
    n: usize,
    components: usize,
) -> Result<EntropyParams, DiagnosticsError> {
    let b = &cc.bounds;
    let dimension_factor = (n * components) as f64;
    let finite = [b.sup_a, b.sup_c, b.sup_h_hess, b.inf_h]
        .iter()
        .all(|v| v.is_finite());
    if !finite {
        return Err(DiagnosticsError::Precondition(
            "coupling bounds are not finite".into(),
        ));
    }
    let trivial = cc.is_trivial();
    let lambda = if trivial {
        b.lambda_a.min(b.lambda_big_a)
    } else {
        b.lambda_a
            .min(b.lambda_big_a)
            .min(b.lambda_flux)
            .min(b.lambda_a * b.lambda_h)
    };
    if !(lambda > 0.0) {
        return Err(DiagnosticsError::Precondition(format!(
            "ellipticity constant λ = {lambda} is not positive on [{}, {}]; H must be strictly convex there",
            b.r_min, b.r_max
        )));
    }
    let eps = 0.5 * lambda;
    let c_eps = if trivial {
        0.0
    } else {
        (b.sup_h_hess * b.sup_c).powi(2) / (4.0 * eps) * dimension_factor
    };
    let s = (2.0 * c_eps / lambda).max(1.0);
    let inf_h = if trivial { 0.0 } else { b.inf_h };
    let c = 0.5 * lambda * s * (s * inf_h).exp();
    Ok(EntropyParams {
        s,
        c,
        lambda,
        eps,
        c_eps,
        dimension_factor,
        trivial,
        r_min: b.r_min,
        r_max: b.r_max,
    })
}

/// Coupled residual between two consecutive states.
pub fn coupled_residual(
    s0: &FieldState,
    s1: &FieldState,
    cc: &CoupledCoefficients,
    params: &EntropyParams,
) -> Result<ResidualField, DiagnosticsError> {
    let dt = check_step(s0, s1)?;
    let grid = s0.grid();
    let len = grid.len();
    let h2 = grid.h() * grid.h();
    let eps = f64::EPSILON;
    let s = params.s;
    let nc = s0.components();
    let mut z = vec![0.0; nc];
    let mut h0 = vec![0.0; len];
    let mut v0 = vec![0.0; len];
    let mut v1 = vec![0.0; len];
    let mut h1 = vec![0.0; len];
    let mut coef = vec![0.0; len];
    for i in 0..len {
        s0.point(i, &mut z);
        h0[i] = cc.h(&z);
        v0[i] = (s * h0[i]).exp();
        coef[i] = cc.flux_coefficient(&z);
        s1.point(i, &mut z);
        h1[i] = cc.h(&z);
        v1[i] = (s * h1[i]).exp();
    }
    let grad = gradient_sq(s0.values(), nc, grid)?.values;

    let mut out = ResidualField::new(grid);
    for &i in &out.points {
        let nb = stencil(grid, i);
        let mut div = 0.0;
        let mut div_mag = 0.0;
        for [m, q] in &nb[..grid.dim()] {
            let am = 0.5 * (coef[i] + coef[*m]);
            let aq = 0.5 * (coef[i] + coef[*q]);
            div += aq * (v0[*q] - v0[i]) - am * (v0[i] - v0[*m]);
            div_mag +=
                aq.abs() * (v0[*q].abs() + v0[i].abs()) + am.abs() * (v0[i].abs() + v0[*m].abs());
        }
        let time = (v1[i] - v0[i]) / dt;
        out.residual[i] = time - div / h2 + params.c * grad[i];
        let time_mag = (v1[i] * (1.0 + s * h1[i].abs()) + v0[i] * (1.0 + s * h0[i].abs())) / dt;
        out.floor[i] = ROUND * eps * (time_mag + div_mag / h2 + params.c * grad[i]);
    }
    Ok(out)
}

/// Aggregate of residual fields over a trajectory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub max_positive: f64,
    pub p99_positive: f64,
    pub max_excess: f64,
    pub p99_excess: f64,
    pub max_abs: f64,
    pub samples: usize,
    /// `(interval, point)` of the largest excess.
    pub worst: Option<(usize, usize)>,
}

#[derive(Default)]
struct Accumulator {
    positives: Vec<f64>,
    excesses: Vec<f64>,
    summary: ResidualSummary,
}

impl Accumulator {
    fn add(&mut self, k: usize, field: &ResidualField) {
        for &i in &field.points {
            let r = field.residual[i];
            let s = &mut self.summary;
            s.samples += 1;
            s.max_abs = s.max_abs.max(r.abs());
            if r > 0.0 {
                self.positives.push(r);
                s.max_positive = s.max_positive.max(r);
                let excess = r - field.floor[i];
                if excess > 0.0 {
                    self.excesses.push(excess);
                    if excess > s.max_excess {
                        s.max_excess = excess;
                        s.worst = Some((k, i));
                    }
                }
            }
        }
    }

    fn finish(mut self) -> ResidualSummary {
        let total = self.summary.samples;
        self.summary.p99_positive = percentile99(&mut self.positives, total);
        self.summary.p99_excess = percentile99(&mut self.excesses, total);
        self.summary
    }
}

/// 99th percentile of `max(x, 0)` over `total` samples, given only the
/// strictly positive ones.
fn percentile99(positives: &mut [f64], total: usize) -> f64 {
    if total == 0 || positives.is_empty() {
        return 0.0;
    }
    let rank = ((total - 1) as f64 * 0.99).floor() as usize;
    let zeros = total - positives.len();
    if rank < zeros {
        return 0.0;
    }
    let k = rank - zeros;
    let (_, v, _) = positives.select_nth_unstable_by(k, f64::total_cmp);
    *v
}

fn require_single_steps(traj: &Trajectory) -> Result<(), DiagnosticsError> {
    if traj.snapshot_every != 1 {
        return Err(DiagnosticsError::Precondition(format!(
            "entropy residuals need a snapshot after every step (snapshot_every = {})",
            traj.snapshot_every
        )));
    }
    if traj.len() < 2 {
        return Err(DiagnosticsError::Precondition(
            "entropy residuals need at least two snapshots".into(),
        ));
    }
    Ok(())
}

fn summarize<F>(traj: &Trajectory, mut field: F) -> Result<ResidualSummary, DiagnosticsError>
where
    F: FnMut(&FieldState, &FieldState) -> Result<ResidualField, DiagnosticsError>,
{
    let mut acc = Accumulator::default();
    for (k, pair) in traj.snapshots.windows(2).enumerate() {
        acc.add(k, &field(&pair[0], &pair[1])?);
    }
    Ok(acc.finish())
}

/// `h² + dt` of a trajectory.
fn scale(traj: &Trajectory) -> f64 {
    traj.grid().h().powi(2) + traj.dt
}

/// Calibrates `K` in `τ(h) = K (h² + dt)` on a quadratic-potential run,
/// where the continuum residual vanishes identically: every nonzero discrete
/// residual there is scheme error, so `K = max |r| / (h² + dt)`.
pub fn calibrate_k(traj: &Trajectory, p: &RadialPotential) -> Result<f64, DiagnosticsError> {
    require_single_steps(traj)?;
    let e = build_entropy(p)?;
    let window = certify_window(p)?;
    let summary = summarize(traj, |a, b| diffusion_residual(a, b, p, &e, window.lambda))?;
    Ok(summary.max_abs / scale(traj))
}

fn residual_report(
    name: &str,
    traj: &Trajectory,
    summary: &ResidualSummary,
    k: f64,
) -> CheckReport {
    let tau = k * scale(traj);
    let mut report = CheckReport::new(name, tau, traj.meta.config_hash.clone());
    report
        .value("max_positive", summary.max_positive)
        .value("p99_positive", summary.p99_positive)
        .value("max_excess", summary.max_excess)
        .value("p99_excess", summary.p99_excess)
        .value("max_abs", summary.max_abs)
        .value("samples", summary.samples as f64)
        .value("k", k)
        .value("tau", tau)
        .value("h", traj.grid().h())
        .value("dt", traj.dt);
    if summary.max_excess > tau {
        let (interval, index) = summary.worst.unwrap_or((0, 0));
        let grid = traj.grid();
        report.fail(Witness {
            description: format!("positive residual above τ(h) in step {interval}"),
            snapshot: Some(interval),
            time: Some(traj.snapshots[interval].t()),
            index: Some(index),
            coords: Some(grid.coords(index)[..grid.dim()].to_vec()),
            value: summary.max_excess,
            bound: tau,
            ..Default::default()
        });
    }
    report
}

/// Residual check of `φ(|u|)`: passes iff the largest excess over the
/// rounding floor is at most `τ(h) = K (h² + dt)`.
pub fn entropy_residual_diffusion(
    traj: &Trajectory,
    p: &RadialPotential,
    e: &EntropyData,
    window: &EllipticityWindow,
    k: f64,
) -> Result<CheckReport, DiagnosticsError> {
    require_single_steps(traj)?;
    let summary = summarize(traj, |a, b| diffusion_residual(a, b, p, e, window.lambda))?;
    let mut report = residual_report("entropy_diffusion", traj, &summary, k);
    report.value("lambda", window.lambda);
    Ok(report)
}

/// Residual check of `e^{sH(u)}`. With `H ≡ 0` the inequality degenerates
/// to `c|∇u|² <= 0`, so the check is routed to the diffusion residual of the
/// underlying potential.
pub fn entropy_residual_coupled(
    traj: &Trajectory,
    cc: &CoupledCoefficients,
    params: &EntropyParams,
    k: f64,
) -> Result<CheckReport, DiagnosticsError> {
    require_single_steps(traj)?;
    if cc.is_trivial() {
        let p = cc.potential();
        let e = build_entropy(p)?;
        let window = certify_window(p)?;
        let mut report = entropy_residual_diffusion(traj, p, &e, &window, k)?;
        report.name = "entropy_coupled".into();
        report.note("H vanishes identically; routed to the diffusion residual");
        return Ok(report);
    }
    for (k_snap, s) in traj.snapshots.iter().enumerate() {
        for i in 0..s.grid().len() {
            let norm = s.norm_at(i);
            if norm < params.r_min || norm > params.r_max {
                return Err(DiagnosticsError::Range {
                    snapshot: k_snap,
                    index: i,
                    norm,
                    r_min: params.r_min,
                    r_max: params.r_max,
                });
            }
        }
    }
    let summary = summarize(traj, |a, b| coupled_residual(a, b, cc, params))?;
    let mut report = residual_report("entropy_coupled", traj, &summary, k);
    report
        .value("s", params.s)
        .value("c", params.c)
        .value("lambda", params.lambda)
        .value("c_eps", params.c_eps)
        .value("r_min", params.r_min);
    Ok(report)
}

/// Compares residual reports of the same experiment at `h` and `h/2`:
/// passes iff both pass their `τ` and the fine excess is at most half the
/// coarse one.
pub fn refinement_report(coarse: &CheckReport, fine: &CheckReport) -> CheckReport {
    let mut report = CheckReport::new(
        format!("{}_refinement", coarse.name),
        0.5,
        coarse.config_hash.clone(),
    );
    let ec = coarse.get("max_excess").unwrap_or(f64::NAN);
    let ef = fine.get("max_excess").unwrap_or(f64::NAN);
    report
        .value("coarse_max_excess", ec)
        .value("fine_max_excess", ef)
        .value(
            "coarse_max_positive",
            coarse.get("max_positive").unwrap_or(f64::NAN),
        )
        .value(
            "fine_max_positive",
            fine.get("max_positive").unwrap_or(f64::NAN),
        )
        .value("coarse_tau", coarse.tolerance)
        .value("fine_tau", fine.tolerance);
    if ef > 0.0 {
        report.value("shrink_factor", ec / ef);
    }
    if !coarse.passed || !fine.passed {
        report.fail(Witness {
            description: "a resolution exceeds τ(h)".into(),
            value: if fine.passed { ec } else { ef },
            bound: if fine.passed {
                coarse.tolerance
            } else {
                fine.tolerance
            },
            ..Default::default()
        });
    }
    if !(ef <= 0.5 * ec) {
        report.fail(Witness {
            description: "excess residual does not halve under refinement".into(),
            value: ef,
            bound: 0.5 * ec,
            ..Default::default()
        });
    }
    if ec == 0.0 && ef == 0.0 {
        report.note("no residual above the rounding floor at either resolution");
    }
    report
}
