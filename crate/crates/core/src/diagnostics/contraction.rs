use super::{h_minus_one_norm_vector, CheckReport, DiagnosticsError, Series, Witness};
use crate::grid::Trajectory;
use crate::potential::EllipticityWindow;

/// Allowed relative growth of `d(t)` per solver step.
pub const CONTRACTION_REL_TOL: f64 = 1e-10;

fn check_compatible(a: &Trajectory, b: &Trajectory) -> Result<(), DiagnosticsError> {
    let mismatch = |m: &str| Err(DiagnosticsError::Mismatch(m.to_string()));
    if a.grid() != b.grid() {
        return mismatch("grids differ");
    }
    if a.components() != b.components() {
        return mismatch("component counts differ");
    }
    if a.len() != b.len() || a.dt != b.dt || a.snapshot_every != b.snapshot_every {
        return mismatch("time stepping differs");
    }
    if a.times() != b.times() {
        return mismatch("snapshot times differ");
    }
    if a.snapshots[0].boundary_values() != b.snapshots[0].boundary_values() {
        return mismatch("boundary data differ");
    }
    Ok(())
}

/// Tracks `d(t) = ‖u₁(t) - u₀(t)‖_{H⁻¹}`.
///
/// Pass/fail: `d` is non-increasing within [`CONTRACTION_REL_TOL`] relative
/// per step. Informational: whether `e^{2λt} d(t)²` is non-increasing, and
/// the least-squares decay exponent of `log d`.
pub fn contraction_report(
    traj0: &Trajectory,
    traj1: &Trajectory,
    window: &EllipticityWindow,
) -> Result<CheckReport, DiagnosticsError> {
    check_compatible(traj0, traj1)?;
    let grid = traj0.grid();
    let n = traj0.components();
    let tol = CONTRACTION_REL_TOL * traj0.snapshot_every as f64;
    let mut report = CheckReport::new("contraction", tol, traj0.meta.config_hash.clone());
    let mut series = Series::new("h_minus_one_distance", &["t", "d", "weighted"]);
    let mut d = Vec::with_capacity(traj0.len());
    for (s0, s1) in traj0.snapshots.iter().zip(&traj1.snapshots) {
        let diff: Vec<f64> = s1
            .values()
            .iter()
            .zip(s0.values())
            .map(|(a, b)| a - b)
            .collect();
        let dk = h_minus_one_norm_vector(&diff, n, grid)?;
        let t = s0.t();
        series.push(vec![t, dk, (2.0 * window.lambda * t).exp() * dk * dk]);
        d.push((t, dk));
    }
    let mut weighted_violations = 0usize;
    for k in 1..d.len() {
        let (t, now) = d[k];
        let before = d[k - 1].1;
        let bound = before * (1.0 + tol);
        if now > bound {
            report.fail(Witness {
                description: format!("H⁻¹ distance grows between snapshots {} and {k}", k - 1),
                snapshot: Some(k),
                time: Some(t),
                value: now,
                bound,
                ..Default::default()
            });
        }
        let w_now = (2.0 * window.lambda * t).exp() * now * now;
        let w_before = (2.0 * window.lambda * d[k - 1].0).exp() * before * before;
        if w_now > w_before * (1.0 + tol) {
            weighted_violations += 1;
        }
    }
    report.value("d_initial", d[0].1);
    report.value("d_final", d.last().unwrap().1);
    report.value("lambda", window.lambda);
    report.value("weighted_violations", weighted_violations as f64);
    if let Some(rate) = decay_exponent(&d) {
        report.value("empirical_exponent", rate);
    }
    report.note(
        "pass/fail is plain monotone decay; the weighted series and the fitted exponent are informational",
    );
    report.series.push(series);
    Ok(report)
}

/// Least-squares slope `-d/dt log d(t)` over the strictly positive samples.
fn decay_exponent(d: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = d
        .iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|&(t, v)| (t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let num: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    (den > 0.0).then(|| -num / den)
}
