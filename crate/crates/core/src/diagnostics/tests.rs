use super::*;
use crate::grid::{Boundary, Cylinder, FieldState, GridSpec, RunMeta, Trajectory};
use crate::potential::{build_entropy, certify_window, coupled_decomposition, PotentialSpec};
use crate::solver::{run, RunConfig};
use approx::assert_relative_eq;

/// Stationary trajectory repeating `state` at `snapshots` times spaced `dt`.
fn stationary(state: &FieldState, snapshots: usize, dt: f64) -> Trajectory {
    let snaps = (0..snapshots)
        .map(|k| {
            FieldState::new(
                state.grid().clone(),
                state.components(),
                state.values().to_vec(),
                k as f64 * dt,
                Some(state.boundary_values().to_vec()),
            )
            .unwrap()
        })
        .collect();
    Trajectory::new(snaps, dt, 1, RunMeta::default()).unwrap()
}

fn linear_1d(size: usize, a: f64) -> FieldState {
    let g = GridSpec::unit(1, size, Boundary::Periodic).unwrap();
    FieldState::from_fn(g, 1, 0.0, None, |x, out| out[0] = a * x[0]).unwrap()
}

fn config(json: &str) -> RunConfig {
    RunConfig::from_json(json).unwrap()
}

fn cosh_run(size: usize, t_end: f64) -> Trajectory {
    run(&config(&format!(
        r#"{{"grid": {{"dim": 1, "size": {size}, "boundary": "periodic"}},
            "components": 2, "potential": {{"id": "cosh", "r_max": 1.0}},
            "t_end": {t_end}, "seed": 4,
            "initial": {{"kind": "band_limited", "amplitude": 0.6}}}}"#
    )))
    .unwrap()
}

#[test]
fn morrey_of_zero_field_vanishes() {
    let traj = stationary(&linear_1d(64, 0.0), 200, 1e-4);
    let fields = gradient_fields(&traj).unwrap();
    let prof = morrey_profile(&traj, 32, 199e-4, &[0.125, 0.0625], &fields, 1.0).unwrap();
    assert_eq!(prof.values, vec![0.0, 0.0]);
}

#[test]
fn morrey_of_linear_profile_matches_cylinder_counts() {
    let a = 0.7;
    let h = 1.0 / 128.0;
    let dt = 1e-4;
    let traj = stationary(&linear_1d(128, a), 300, dt);
    let fields = gradient_fields(&traj).unwrap();
    let t0 = 299.0 * dt;
    let radii = [16.0 * h, 8.0 * h, 4.0 * h];
    let prof = morrey_profile(&traj, 64, t0, &radii, &fields, 1.0).unwrap();
    for (r, v) in prof.radii.iter().zip(&prof.values) {
        let q = Cylinder::new(64, t0, *r);
        let points = q.ball(traj.grid()).unwrap().len() as f64;
        let snaps = q.window(&traj.times()).unwrap().len() as f64;
        assert_relative_eq!(
            *v,
            a * a * points * h * snaps * dt / r,
            max_relative = 1e-12
        );
    }
    // ∝ R²: roughly a quarter per halving
    for w in prof.values.windows(2) {
        let ratio = w[1] / w[0];
        assert!((0.2..0.32).contains(&ratio), "{ratio}");
    }
    assert!(morrey_profile(&traj, 64, t0, &[3.0 * h], &fields, 1.0).is_err());
}

#[test]
fn morrey_decay_on_smooth_run() {
    let traj = cosh_run(128, 0.02);
    let h = traj.grid().h();
    let points: Vec<(usize, f64)> = [30, 64, 90].iter().map(|&i| (i, 0.02)).collect();
    let report = morrey_decay_report(&traj, &points, &[16.0 * h, 8.0 * h, 4.0 * h]).unwrap();
    assert!(report.passed, "{}", report.summary());
    let rows = &report.series[0].rows;
    assert_eq!(rows.len(), 9);
    for k in 0..3 {
        let q: Vec<f64> = rows[3 * k..3 * k + 3].iter().map(|r| r[4]).collect();
        assert!(q[0] > q[1] && q[1] > q[2], "{q:?}");
    }
}

#[test]
fn reverse_holder_ratio_of_linear_profile_is_one() {
    let traj = stationary(&linear_1d(128, -1.3), 200, 1e-4);
    let q = Cylinder::new(64, 199e-4, 4.0 / 128.0);
    let report = reverse_holder_report(&traj, &[q], 2.5).unwrap();
    assert_relative_eq!(report.get("max_ratio").unwrap(), 1.0, max_relative = 1e-12);
}

#[test]
fn reverse_holder_skips_constant_cylinders() {
    let traj = stationary(&linear_1d(128, 0.0), 200, 1e-4);
    let q = Cylinder::new(64, 199e-4, 4.0 / 128.0);
    let report = reverse_holder_report(&traj, &[q, q], 2.5).unwrap();
    assert!(report.passed);
    assert_eq!(report.get("skipped"), Some(2.0));
    assert!(!report.notes.is_empty());
    assert!(reverse_holder_report(&traj, &[q], 2.0).is_err());
}

#[test]
fn estimate_ratios_of_constant_trajectory_are_zero() {
    let p = PotentialSpec::Cosh { r_max: 1.0 }.build().unwrap();
    let traj = stationary(&linear_1d(64, 0.0), 100, 1e-4);
    let outer = Cylinder::new(32, 99e-4, 0.09);
    let inner = Cylinder {
        radius: 0.05,
        ..outer
    };
    let s = estimate_ratios(&traj, &p, &[(inner, outer)]).unwrap();
    assert_eq!(
        s[0],
        Some(RatioSample {
            time_derivative: 0.0,
            hessian: 0.0,
            l4: 0.0
        })
    );
}

/// Direct summation over the cylinder, written independently of the
/// library's field helpers.
#[test]
fn estimate_ratios_match_direct_summation() {
    let traj = run(&config(
        r#"{"grid": {"dim": 1, "size": 64, "boundary": "periodic"},
            "components": 1, "potential": {"id": "quadratic", "r_max": 1.0},
            "t_end": 0.01,
            "initial": {"kind": "fourier_mode", "amplitude": 0.8, "wavenumber": [1]}}"#,
    ))
    .unwrap();
    let p = PotentialSpec::Quadratic { r_max: 1.0 }.build().unwrap();
    let h = traj.grid().h();
    let dt = traj.dt;
    let times = traj.times();
    let t0 = times[times.len() - 3];
    let (c, r, big_r) = (20usize, 0.045, 0.09);
    let inner = Cylinder::new(c, t0, r);
    let outer = Cylinder::new(c, t0, big_r);
    let got = estimate_ratios(&traj, &p, &[(inner, outer)]).unwrap()[0].unwrap();

    let u = |k: usize, j: i64| traj.snapshots[k].values()[j.rem_euclid(64) as usize];
    let last = traj.len() - 1;
    let sum = |radius: f64, f: &dyn Fn(usize, i64) -> f64| {
        let mut acc = 0.0;
        for (k, &t) in times.iter().enumerate() {
            if t > t0 - radius * radius + 1e-9 * dt && t <= t0 + 1e-9 * dt {
                for j in 0..64i64 {
                    if ((j - c as i64) as f64 * h).abs() <= radius * (1.0 + 1e-12) {
                        acc += f(k, j) * h * dt;
                    }
                }
            }
        }
        acc
    };
    let grad2 = |k: usize, j: i64| ((u(k, j + 1) - u(k, j - 1)) / (2.0 * h)).powi(2);
    let ut2 = |k: usize, j: i64| {
        let (a, b) = if k < last { (k, k + 1) } else { (k - 1, k) };
        ((u(b, j) - u(a, j)) / dt).powi(2)
    };
    let hess2 = |k: usize, j: i64| ((u(k, j + 1) - 2.0 * u(k, j) + u(k, j - 1)) / (h * h)).powi(2);
    let grad4 = |k: usize, j: i64| grad2(k, j).powi(2);
    let sup = traj
        .snapshots
        .iter()
        .map(|s| s.sup_norm().0)
        .fold(0.0, f64::max);
    let gap2 = (big_r - r) * (big_r - r);
    let rhs = sum(big_r, &grad2);
    assert_relative_eq!(
        got.time_derivative,
        sum(r, &ut2) * gap2 / rhs,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        got.hessian,
        sum(r, &hess2) * gap2 / rhs,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        got.l4,
        sum(r, &grad4) * gap2 / (sup * sup * rhs),
        max_relative = 1e-12
    );
    // u_t = Δu for the heat scheme, so the first two agree
    assert_relative_eq!(got.time_derivative, got.hessian, max_relative = 1e-6);
}

#[test]
fn hessian_includes_mixed_derivatives() {
    // v = u = xy/2 for the quadratic potential: ∂xx = ∂yy = 0, ∂xy = 1/2, so |∇²v|² = 1/2
    let g = GridSpec::unit(2, 32, Boundary::Dirichlet).unwrap();
    let s = FieldState::from_fn(g, 1, 0.0, None, |x, out| out[0] = 0.5 * x[0] * x[1]).unwrap();
    let traj = stationary(&s, 700, 1e-4);
    let p = PotentialSpec::Quadratic { r_max: 1.0 }.build().unwrap();
    let outer = Cylinder::new(traj.grid().index(&[16, 16]), 699e-4, 0.25);
    let inner = Cylinder {
        radius: 0.125,
        ..outer
    };
    let report = estimate_ratio_report(&traj, &p, &[(inner, outer)]).unwrap();
    let grad2_integral = |q: &Cylinder| {
        let f = gradient_fields(&traj).unwrap();
        crate::grid::cylinder_sum(traj.grid(), &traj.times(), traj.spacing(), &f, q).unwrap()
    };
    let inner_sum = grad2_integral(&inner);
    let rhs = grad2_integral(&outer).sum;
    let expected = 0.5 * inner_sum.volume * 0.125f64.powi(2) / rhs;
    assert_relative_eq!(
        report.get("hessian").unwrap(),
        expected,
        max_relative = 1e-9
    );
    assert_eq!(report.get("time_derivative"), Some(0.0));
}

#[test]
fn random_cylinders_are_seeded_and_fit() {
    let g = GridSpec::unit(2, 64, Boundary::Periodic).unwrap();
    let a = random_cylinders(&g, 0.0, 0.05, 1.0 / 32.0, 4.0, 20, 9).unwrap();
    let b = random_cylinders(&g, 0.0, 0.05, 1.0 / 32.0, 4.0, 20, 9).unwrap();
    assert_eq!(a, b);
    for c in &a {
        let q = c.on(&g).unwrap().scaled(4.0);
        q.ball(&g).unwrap();
        assert!(c.t0 - (4.0 * c.radius).powi(2) >= 0.0 && c.t0 <= 0.05);
    }
    assert!(random_cylinders(&g, 0.0, 0.01, 0.1, 4.0, 1, 0).is_err());
}

#[test]
fn stability_report_compares_named_values() {
    let mut a = CheckReport::new("x", 0.0, "");
    a.value("m", 1.0);
    let mut b = CheckReport::new("x", 0.0, "");
    b.value("m", 1.15);
    assert!(stability_report("s", &a, &b, &["m"], 0.2).passed);
    let r = stability_report("s", &a, &b, &["m"], 0.1);
    assert!(!r.passed);
    assert!(r.witness.is_some());
}

#[test]
fn contraction_of_identical_runs_is_zero() {
    let traj = cosh_run(32, 0.002);
    let w = certify_window(&PotentialSpec::Cosh { r_max: 1.0 }.build().unwrap()).unwrap();
    let r = contraction_report(&traj, &traj.clone(), &w).unwrap();
    assert!(r.passed);
    assert_eq!(r.get("d_final"), Some(0.0));
}

#[test]
fn contraction_detects_growth() {
    let a = stationary(&linear_1d(32, 0.0), 5, 1e-3);
    let mut b = a.clone();
    for (k, s) in b.snapshots.iter_mut().enumerate() {
        let g = s.grid().clone();
        *s = FieldState::from_fn(g, 1, k as f64 * 1e-3, None, |x, out| {
            out[0] = 0.01 * k as f64 * (2.0 * std::f64::consts::PI * x[0]).sin()
        })
        .unwrap();
    }
    let w = certify_window(&PotentialSpec::Quadratic { r_max: 1.0 }.build().unwrap()).unwrap();
    let r = contraction_report(&a, &b, &w).unwrap();
    assert!(!r.passed);
    assert!(r.witness.as_ref().unwrap().snapshot.is_some());
}

#[test]
fn sup_norm_report_flags_growth() {
    let traj = cosh_run(64, 0.005);
    assert!(sup_norm_report(&traj).passed);
    let mut bad = traj.clone();
    let last = bad.snapshots.len() - 1;
    let s = &bad.snapshots[last];
    let mut v = s.values().to_vec();
    v[7] = 0.99;
    bad.snapshots[last] = FieldState::new(
        s.grid().clone(),
        2,
        v,
        s.t(),
        Some(s.boundary_values().to_vec()),
    )
    .unwrap();
    let r = sup_norm_report(&bad);
    assert!(!r.passed);
    assert_eq!(r.witness.unwrap().index, Some(7));
}

#[test]
fn entropy_residual_of_constant_state_is_zero() {
    let g = GridSpec::unit(1, 32, Boundary::Periodic).unwrap();
    let s = FieldState::from_fn(g, 2, 0.0, None, |_, out| {
        out[0] = 0.4;
        out[1] = 0.3;
    })
    .unwrap();
    let traj = stationary(&s, 3, 1e-4);
    let p = PotentialSpec::Cosh { r_max: 1.0 }.build().unwrap();
    let e = build_entropy(&p).unwrap();
    let w = certify_window(&p).unwrap();
    let r = entropy_residual_diffusion(&traj, &p, &e, &w, 1.0).unwrap();
    assert!(r.passed);
    assert_eq!(r.get("max_positive"), Some(0.0));
    let cc = coupled_decomposition(&p).unwrap();
    let field = coupled_residual(
        &traj.snapshots[0],
        &traj.snapshots[1],
        &cc,
        &choose_entropy_params(
            &crate::potential::coupled_decomposition_on(&p, 0.4).unwrap(),
            1,
            2,
        )
        .unwrap(),
    )
    .unwrap();
    assert!(field.residual.iter().all(|&r| r == 0.0));
}

#[test]
fn quadratic_decomposition_routes_to_diffusion() {
    let p = PotentialSpec::Quadratic { r_max: 1.0 }.build().unwrap();
    let cc = coupled_decomposition(&p).unwrap();
    let params = choose_entropy_params(&cc, 1, 2).unwrap();
    assert!(params.trivial);
    assert_eq!(params.s, 1.0);
    let traj = run(&config(
        r#"{"grid": {"dim": 1, "size": 32, "boundary": "periodic"},
            "components": 2, "potential": {"id": "quadratic", "r_max": 1.0},
            "t_end": 0.001, "initial": {"kind": "band_limited", "amplitude": 0.5}}"#,
    ))
    .unwrap();
    let r = entropy_residual_coupled(&traj, &cc, &params, 1.0).unwrap();
    assert_eq!(r.name, "entropy_coupled");
    assert!(r.notes.iter().any(|n| n.contains("routed")));
}

#[test]
fn quadratic_residual_is_scheme_error_only() {
    let traj = run(&config(
        r#"{"grid": {"dim": 1, "size": 64, "boundary": "periodic"},
            "components": 1, "potential": {"id": "quadratic", "r_max": 1.0},
            "t_end": 0.002, "initial": {"kind": "fourier_mode", "amplitude": 0.5, "wavenumber": [2]}}"#,
    ))
    .unwrap();
    let p = PotentialSpec::Quadratic { r_max: 1.0 }.build().unwrap();
    let k = calibrate_k(&traj, &p).unwrap();
    assert!(k > 0.0 && k.is_finite());
    let r = entropy_residual_diffusion(
        &traj,
        &p,
        &build_entropy(&p).unwrap(),
        &certify_window(&p).unwrap(),
        k,
    )
    .unwrap();
    assert!(r.passed, "{}", r.summary());
    assert_eq!(r.get("max_excess"), Some(0.0));
}

#[test]
fn inflated_dissipation_constant_is_caught() {
    let traj = cosh_run(64, 0.002);
    let p = PotentialSpec::Cosh { r_max: 1.0 }.build().unwrap();
    let e = build_entropy(&p).unwrap();
    let mut w = certify_window(&p).unwrap();
    w.lambda = 10.0;
    let r = entropy_residual_diffusion(&traj, &p, &e, &w, 1e-3).unwrap();
    assert!(!r.passed);
    let wit = r.witness.unwrap();
    assert!(wit.value > wit.bound && wit.coords.is_some());
}

#[test]
fn refinement_report_requires_halving() {
    let mk = |excess: f64| {
        let mut r = CheckReport::new("entropy_diffusion", 1.0, "");
        r.value("max_excess", excess).value("max_positive", excess);
        r
    };
    assert!(refinement_report(&mk(0.4), &mk(0.1)).passed);
    assert!(!refinement_report(&mk(0.4), &mk(0.3)).passed);
    let zero = refinement_report(&mk(0.0), &mk(0.0));
    assert!(zero.passed);
    assert!(!zero.notes.is_empty());
}

#[test]
fn entropy_residual_needs_every_step() {
    let mut traj = cosh_run(32, 0.001);
    traj.snapshot_every = 2;
    let p = PotentialSpec::Cosh { r_max: 1.0 }.build().unwrap();
    assert!(calibrate_k(&traj, &p).is_err());
}
