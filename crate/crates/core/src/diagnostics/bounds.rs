use super::{CheckReport, Series, Witness};
use crate::grid::{Boundary, Trajectory};

/// Absolute slack of the maximum-principle check.
pub const SUP_TOLERANCE: f64 = 1e-10;

/// Checks `sup_x |u(t)| <= max(sup |u(0)|, sup of the boundary data)` at every
/// snapshot.
pub fn sup_norm_report(traj: &Trajectory) -> CheckReport {
    let mut report = CheckReport::new("sup_norm", SUP_TOLERANCE, traj.meta.config_hash.clone());
    let first = &traj.snapshots[0];
    let initial = first.sup_norm().0;
    let boundary = if traj.grid().boundary() == Boundary::Dirichlet {
        first
            .boundary_values()
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    } else {
        0.0
    };
    let bound = initial.max(boundary);
    let mut series = Series::new("sup_norm", &["t", "sup"]);
    let mut worst: f64 = 0.0;
    for (k, s) in traj.snapshots.iter().enumerate() {
        let (sup, index) = s.sup_norm();
        worst = worst.max(sup);
        series.push(vec![s.t(), sup]);
        if sup > bound + SUP_TOLERANCE {
            let grid = s.grid();
            report.fail(Witness {
                description: format!("sup norm exceeds the initial/boundary bound at snapshot {k}"),
                snapshot: Some(k),
                time: Some(s.t()),
                index: Some(index),
                coords: Some(grid.coords(index)[..grid.dim()].to_vec()),
                value: sup,
                bound: bound + SUP_TOLERANCE,
                ..Default::default()
            });
        }
    }
    let monotone = series
        .rows
        .windows(2)
        .all(|w| w[1][1] <= w[0][1] + SUP_TOLERANCE);
    report.value("bound", bound);
    report.value("initial_sup", initial);
    report.value("boundary_sup", boundary);
    report.value("max_sup", worst);
    report.value("monotone", if monotone { 1.0 } else { 0.0 });
    report.series.push(series);
    report
}
