//! Cylinder-based monitors: Morrey quotients, reverse-Hölder ratios and the
//! local-estimate ratios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CheckReport, DiagnosticsError, Series, Witness};
use crate::grid::{cylinder_sum, gradient_sq, Cylinder, FieldState, GridSpec, Trajectory};
use crate::potential::RadialPotential;

/// Cylinder given in physical coordinates, so that the same cylinder can be
/// placed on grids of different resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalCylinder {
    pub center: Vec<f64>,
    pub t0: f64,
    pub radius: f64,
}

impl PhysicalCylinder {
    /// Snaps the centre to the nearest grid point.
    pub fn on(&self, grid: &GridSpec) -> Result<Cylinder, DiagnosticsError> {
        if self.center.len() != grid.dim() {
            return Err(DiagnosticsError::Precondition(format!(
                "cylinder centre has {} coordinates on a {}-dimensional grid",
                self.center.len(),
                grid.dim()
            )));
        }
        let coords: Vec<usize> = self
            .center
            .iter()
            .zip(grid.sizes())
            .map(|(&x, &size)| ((x / grid.h()).round().max(0.0) as usize).min(size - 1))
            .collect();
        Ok(Cylinder::new(grid.index(&coords), self.t0, self.radius))
    }
}

/// `count` seeded cylinders of radius `radius` whose `enlarge`-fold
/// enlargement fits in the space-time box `[0, extent]^n × [t_start, t_end]`.
pub fn random_cylinders(
    grid: &GridSpec,
    t_start: f64,
    t_end: f64,
    radius: f64,
    enlarge: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<PhysicalCylinder>, DiagnosticsError> {
    let reach = enlarge * radius;
    let earliest = t_start + reach * reach;
    if earliest > t_end {
        return Err(DiagnosticsError::Precondition(format!(
            "time range [{t_start}, {t_end}] is shorter than (enlarge·R)² = {}",
            reach * reach
        )));
    }
    let margin = reach + 2.0 * grid.h();
    for axis in 0..grid.dim() {
        if 2.0 * margin >= grid.extent(axis) {
            return Err(DiagnosticsError::Precondition(format!(
                "radius {radius} (enlarged {enlarge}×) does not fit along axis {axis}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| PhysicalCylinder {
            center: (0..grid.dim())
                .map(|a| rng.gen_range(margin..grid.extent(a) - margin))
                .collect(),
            t0: if earliest < t_end {
                rng.gen_range(earliest..=t_end)
            } else {
                t_end
            },
            radius,
        })
        .collect())
}

/// `|∇u|²` for every snapshot.
pub fn gradient_fields(traj: &Trajectory) -> Result<Vec<Vec<f64>>, DiagnosticsError> {
    traj.snapshots
        .iter()
        .map(|s| Ok(gradient_sq(s.values(), s.components(), s.grid())?.values))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorreyProfile {
    /// Radii in descending order.
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub exponent: f64,
}

/// `R^{-exponent} ∬_{Q(x₀,t₀,R)} g` for each radius, from per-snapshot
/// fields `g`. Radii below `4h` are rejected.
pub fn morrey_profile(
    traj: &Trajectory,
    center: usize,
    t0: f64,
    radii: &[f64],
    fields: &[Vec<f64>],
    exponent: f64,
) -> Result<MorreyProfile, DiagnosticsError> {
    let grid = traj.grid();
    let times = traj.times();
    let mut radii = radii.to_vec();
    radii.sort_by(|a, b| b.total_cmp(a));
    let mut values = Vec::with_capacity(radii.len());
    for &r in &radii {
        if r < 4.0 * grid.h() * (1.0 - 1e-12) {
            return Err(DiagnosticsError::Precondition(format!(
                "radius {r} is below 4h = {}",
                4.0 * grid.h()
            )));
        }
        let q = Cylinder::new(center, t0, r);
        let sum = cylinder_sum(grid, &times, traj.spacing(), fields, &q)?;
        values.push(sum.sum / r.powf(exponent));
    }
    Ok(MorreyProfile {
        radii,
        values,
        exponent,
    })
}

/// Morrey decay of `|∇u|²` (exponent `n`): at each point the quotient at
/// the smallest radius must be at most half the quotient at the largest.
pub fn morrey_decay_report(
    traj: &Trajectory,
    points: &[(usize, f64)],
    radii: &[f64],
) -> Result<CheckReport, DiagnosticsError> {
    let fields = gradient_fields(traj)?;
    let n = traj.grid().dim() as f64;
    let mut report = CheckReport::new("morrey_decay", 0.5, traj.meta.config_hash.clone());
    let mut series = Series::new(
        "morrey_profile",
        &["point", "center", "t0", "radius", "quotient"],
    );
    let mut worst_ratio: f64 = 0.0;
    for (k, &(center, t0)) in points.iter().enumerate() {
        let prof = morrey_profile(traj, center, t0, radii, &fields, n)?;
        for (r, v) in prof.radii.iter().zip(&prof.values) {
            series.push(vec![k as f64, center as f64, t0, *r, *v]);
        }
        let big = prof.values[0];
        let small = *prof.values.last().unwrap();
        let ratio = if big > 0.0 { small / big } else { 0.0 };
        worst_ratio = worst_ratio.max(ratio);
        if small > 0.5 * big {
            let grid = traj.grid();
            report.fail(Witness {
                description: format!("Morrey quotient does not halve at point {k}"),
                index: Some(center),
                coords: Some(grid.coords(center)[..grid.dim()].to_vec()),
                time: Some(t0),
                radius: Some(*prof.radii.last().unwrap()),
                value: small,
                bound: 0.5 * big,
                ..Default::default()
            });
        }
    }
    report.value("worst_ratio", worst_ratio);
    report.value("points", points.len() as f64);
    report.series.push(series);
    Ok(report)
}

fn cylinder_avg(
    traj: &Trajectory,
    fields: &[Vec<f64>],
    q: &Cylinder,
) -> Result<f64, DiagnosticsError> {
    Ok(cylinder_sum(traj.grid(), &traj.times(), traj.spacing(), fields, q)?.average())
}

/// `(⨍⨍_{Q_R} |∇u|^p)^{1/p} / (⨍⨍_{Q_{4R}} |∇u|²)^{1/2}` per cylinder.
/// Cylinders with a vanishing right-hand side are skipped and counted.
pub fn reverse_holder_report(
    traj: &Trajectory,
    cylinders: &[Cylinder],
    p: f64,
) -> Result<CheckReport, DiagnosticsError> {
    if !(p > 2.0) {
        return Err(DiagnosticsError::Precondition(format!(
            "exponent p = {p} must exceed 2"
        )));
    }
    let grad2 = gradient_fields(traj)?;
    let grad_p: Vec<Vec<f64>> = grad2
        .iter()
        .map(|f| f.iter().map(|g| g.powf(0.5 * p)).collect())
        .collect();
    let mut report = CheckReport::new("reverse_holder", 0.2, traj.meta.config_hash.clone());
    let mut series = Series::new(
        "reverse_holder",
        &["center", "t0", "radius", "lhs", "rhs", "ratio"],
    );
    let mut max_ratio: f64 = 0.0;
    let mut skipped = 0usize;
    for q in cylinders {
        let lhs = cylinder_avg(traj, &grad_p, q)?.powf(1.0 / p);
        let rhs = cylinder_avg(traj, &grad2, &q.scaled(4.0))?.sqrt();
        if !(rhs > 0.0) {
            skipped += 1;
            continue;
        }
        let ratio = lhs / rhs;
        max_ratio = max_ratio.max(ratio);
        series.push(vec![q.center as f64, q.t0, q.radius, lhs, rhs, ratio]);
    }
    if skipped > 0 {
        report.note(format!(
            "{skipped} cylinder(s) skipped: zero gradient on Q_4R"
        ));
    }
    if !max_ratio.is_finite() {
        report.fail(Witness {
            description: "reverse-Hölder ratio is not finite".into(),
            value: max_ratio,
            bound: f64::INFINITY,
            ..Default::default()
        });
    }
    report.value("p", p);
    report.value("max_ratio", max_ratio);
    report.value("skipped", skipped as f64);
    report.value("measured", series.rows.len() as f64);
    report.series.push(series);
    Ok(report)
}

/// The three normalized local-estimate ratios on one nested pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    /// `∬_{Q_r}|u_t|² (R-r)² / ∬_{Q_R}|∇u|²`.
    pub time_derivative: f64,
    /// `∬_{Q_r}|∇²∇Φ(u)|² (R-r)² / ∬_{Q_R}|∇u|²`.
    pub hessian: f64,
    /// `∬_{Q_r}|∇u|⁴ (R-r)² / (‖u‖²_∞ ∬_{Q_R}|∇u|²)`.
    pub l4: f64,
}

/// `|u_t|²` per snapshot: forward differences, backward at the last one.
fn time_derivative_fields(traj: &Trajectory) -> Vec<Vec<f64>> {
    let k_last = traj.len() - 1;
    let dt = traj.spacing();
    (0..traj.len())
        .map(|k| {
            let (a, b) = if k < k_last { (k, k + 1) } else { (k - 1, k) };
            let (sa, sb) = (&traj.snapshots[a], &traj.snapshots[b]);
            let len = sa.grid().len();
            let mut out = vec![0.0; len];
            for c in 0..sa.components() {
                for (i, o) in out.iter_mut().enumerate() {
                    let d = (sb.component(c)[i] - sa.component(c)[i]) / dt;
                    *o += d * d;
                }
            }
            out
        })
        .collect()
}

/// `|∇²v|² = Σ_c Σ_{α,β} (∂_α∂_β v^c)²` with `v = ∇Φ(u)`; zero where the
/// stencil would leave a Dirichlet grid.
fn hessian_fields(
    traj: &Trajectory,
    p: &RadialPotential,
) -> Result<Vec<Vec<f64>>, DiagnosticsError> {
    traj.snapshots.iter().map(|s| hessian_field(s, p)).collect()
}

fn hessian_field(s: &FieldState, p: &RadialPotential) -> Result<Vec<f64>, DiagnosticsError> {
    let grid = s.grid();
    let len = grid.len();
    let nc = s.components();
    let mut v = vec![0.0; len * nc];
    let mut z = vec![0.0; nc];
    let mut g = vec![0.0; nc];
    for i in 0..len {
        s.point(i, &mut z);
        p.grad_phi_into(&z, &mut g)?;
        for c in 0..nc {
            v[c * len + i] = g[c];
        }
    }
    let h2 = grid.h() * grid.h();
    let dim = grid.dim();
    let step =
        |i: Option<usize>, axis: usize, fwd: bool| i.and_then(|i| grid.neighbor(i, axis, fwd));
    let mut out = vec![0.0; len];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        let mut ok = true;
        'outer: for c in 0..nc {
            let f = &v[c * len..(c + 1) * len];
            for a in 0..dim {
                for b in 0..dim {
                    let d = if a == b {
                        match (step(Some(i), a, false), step(Some(i), a, true)) {
                            (Some(m), Some(q)) => (f[m] - 2.0 * f[i] + f[q]) / h2,
                            _ => {
                                ok = false;
                                break 'outer;
                            }
                        }
                    } else {
                        let pp = step(step(Some(i), a, true), b, true);
                        let pm = step(step(Some(i), a, true), b, false);
                        let mp = step(step(Some(i), a, false), b, true);
                        let mm = step(step(Some(i), a, false), b, false);
                        match (pp, pm, mp, mm) {
                            (Some(pp), Some(pm), Some(mp), Some(mm)) => {
                                (f[pp] - f[pm] - f[mp] + f[mm]) / (4.0 * h2)
                            }
                            _ => {
                                ok = false;
                                break 'outer;
                            }
                        }
                    };
                    acc += d * d;
                }
            }
        }
        *o = if ok { acc } else { 0.0 };
    }
    Ok(out)
}

/// Fields shared by all nested pairs of one trajectory.
struct EstimateFields {
    grad2: Vec<Vec<f64>>,
    grad4: Vec<Vec<f64>>,
    ut2: Vec<Vec<f64>>,
    hess2: Vec<Vec<f64>>,
    sup2: f64,
}

impl EstimateFields {
    fn new(traj: &Trajectory, p: &RadialPotential) -> Result<Self, DiagnosticsError> {
        let grad2 = gradient_fields(traj)?;
        let grad4 = grad2
            .iter()
            .map(|f| f.iter().map(|g| g * g).collect())
            .collect();
        let sup = traj
            .snapshots
            .iter()
            .map(|s| s.sup_norm().0)
            .fold(0.0, f64::max);
        Ok(Self {
            grad2,
            grad4,
            ut2: time_derivative_fields(traj),
            hess2: hessian_fields(traj, p)?,
            sup2: sup * sup,
        })
    }
}

fn integral(traj: &Trajectory, fields: &[Vec<f64>], q: &Cylinder) -> Result<f64, DiagnosticsError> {
    Ok(cylinder_sum(traj.grid(), &traj.times(), traj.spacing(), fields, q)?.sum)
}

fn nested_ratios(
    traj: &Trajectory,
    f: &EstimateFields,
    inner: &Cylinder,
    outer: &Cylinder,
) -> Result<Option<RatioSample>, DiagnosticsError> {
    if inner.center != outer.center || inner.t0 != outer.t0 || !(inner.radius < outer.radius) {
        return Err(DiagnosticsError::Precondition(
            "nested cylinders need a common centre and r < R".into(),
        ));
    }
    let gap2 = (outer.radius - inner.radius).powi(2);
    let rhs = integral(traj, &f.grad2, outer)?;
    let ut = integral(traj, &f.ut2, inner)?;
    let hess = integral(traj, &f.hess2, inner)?;
    let l4 = integral(traj, &f.grad4, inner)?;
    if !(rhs > 0.0) {
        // 0/0 on a locally constant solution counts as 0
        let zero = ut == 0.0 && hess == 0.0 && l4 == 0.0;
        return Ok(zero.then_some(RatioSample {
            time_derivative: 0.0,
            hessian: 0.0,
            l4: 0.0,
        }));
    }
    Ok(Some(RatioSample {
        time_derivative: ut * gap2 / rhs,
        hessian: hess * gap2 / rhs,
        l4: l4 * gap2 / (f.sup2 * rhs),
    }))
}

/// Ratios for each nested pair; `None` where `∬_{Q_R}|∇u|²` vanishes but
/// the inner integrals do not.
pub fn estimate_ratios(
    traj: &Trajectory,
    p: &RadialPotential,
    nested: &[(Cylinder, Cylinder)],
) -> Result<Vec<Option<RatioSample>>, DiagnosticsError> {
    let fields = EstimateFields::new(traj, p)?;
    nested
        .iter()
        .map(|(inner, outer)| nested_ratios(traj, &fields, inner, outer))
        .collect()
}

/// Maxima of the three ratios over the nested pairs; fails if any is not
/// finite.
pub fn estimate_ratio_report(
    traj: &Trajectory,
    p: &RadialPotential,
    nested: &[(Cylinder, Cylinder)],
) -> Result<CheckReport, DiagnosticsError> {
    let samples = estimate_ratios(traj, p, nested)?;
    let mut report = CheckReport::new("estimate_ratios", 0.3, traj.meta.config_hash.clone());
    let mut series = Series::new(
        "estimate_ratios",
        &["center", "t0", "r", "R", "time_derivative", "hessian", "l4"],
    );
    let (mut a, mut b, mut c) = (0.0f64, 0.0f64, 0.0f64);
    let mut skipped = 0;
    for ((inner, outer), s) in nested.iter().zip(&samples) {
        match s {
            Some(s) => {
                a = a.max(s.time_derivative);
                b = b.max(s.hessian);
                c = c.max(s.l4);
                series.push(vec![
                    inner.center as f64,
                    inner.t0,
                    inner.radius,
                    outer.radius,
                    s.time_derivative,
                    s.hessian,
                    s.l4,
                ]);
            }
            None => skipped += 1,
        }
    }
    for (name, v) in [("time_derivative", a), ("hessian", b), ("l4", c)] {
        report.value(name, v);
        if !v.is_finite() {
            report.fail(Witness {
                description: format!("{name} ratio is not finite"),
                value: v,
                bound: f64::INFINITY,
                ..Default::default()
            });
        }
    }
    report.value("skipped", skipped as f64);
    report.series.push(series);
    Ok(report)
}

/// Relative change of the named values between two resolutions; passes iff
/// every change is within `tolerance`.
pub fn stability_report(
    name: &str,
    coarse: &CheckReport,
    fine: &CheckReport,
    keys: &[&str],
    tolerance: f64,
) -> CheckReport {
    let mut report = CheckReport::new(name, tolerance, coarse.config_hash.clone());
    for key in keys {
        let a = coarse.get(key).unwrap_or(f64::NAN);
        let b = fine.get(key).unwrap_or(f64::NAN);
        let change = (b - a).abs() / a.abs();
        report.value(&format!("{key}_coarse"), a);
        report.value(&format!("{key}_fine"), b);
        report.value(&format!("{key}_change"), change);
        if !(change <= tolerance) {
            report.fail(Witness {
                description: format!("{key} changes by {:.1}% under refinement", 100.0 * change),
                value: change,
                bound: tolerance,
                ..Default::default()
            });
        }
    }
    report
}
