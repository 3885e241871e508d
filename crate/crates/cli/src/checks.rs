//! Check kinds available to verification suites.

use anyhow::{anyhow, bail, Result};
use pelab::diagnostics::{
    calibrate_k, choose_entropy_params, contraction_report, entropy_residual_coupled,
    entropy_residual_diffusion, estimate_ratio_report, morrey_decay_report, random_cylinders,
    refinement_report, reverse_holder_report, stability_report, sup_norm_report, CheckReport,
    PhysicalCylinder,
};
use pelab::grid::{Cylinder, FieldState, Trajectory};
use pelab::potential::{build_entropy, certify_window, coupled_decomposition_on, PotentialSpec};
use pelab::solver::{run, InitialData, ModelKind, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A deliberate corruption used by negative-control suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Injection {
    /// Adds `value` to the first component at the evaluation points.
    Spike { value: f64 },
    /// Scales the difference of the second run by `1 + rate·k` at snapshot `k`.
    Amplify { rate: f64 },
    /// Multiplies the dissipation constant of an entropy check.
    InflateLambda { factor: f64 },
    /// Adds seeded uniform noise to the interior of the refined run.
    Noise { amplitude: f64 },
}

fn default_points() -> usize {
    10
}
fn default_radii() -> Vec<f64> {
    vec![16.0, 8.0, 4.0]
}
fn default_cylinders() -> usize {
    20
}
fn default_p() -> f64 {
    2.5
}
fn default_rh_tol() -> f64 {
    0.2
}
fn default_er_tol() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckKind {
    /// Two runs differing only in their initial data.
    Contraction {
        config: RunConfig,
        other: InitialData,
    },
    SupNorm {
        config: RunConfig,
    },
    /// Residual of `φ(|u|)` at the config's size and twice it; `K` comes from
    /// `calibration` (default: the same config with the quadratic potential).
    EntropyDiffusion {
        config: RunConfig,
        #[serde(default)]
        calibration: Option<RunConfig>,
    },
    /// Residual of `e^{sH(u)}` with bounds certified on `|u| >= r_min`.
    EntropyCoupled {
        config: RunConfig,
        r_min: f64,
        #[serde(default)]
        calibration: Option<RunConfig>,
    },
    /// Morrey decay at seeded points; radii in units of `h`.
    Morrey {
        config: RunConfig,
        #[serde(default = "default_points")]
        points: usize,
        #[serde(default = "default_radii")]
        radii_h: Vec<f64>,
    },
    ReverseHolder {
        config: RunConfig,
        radius: f64,
        #[serde(default = "default_cylinders")]
        cylinders: usize,
        #[serde(default = "default_p")]
        p: f64,
        #[serde(default = "default_rh_tol")]
        tolerance: f64,
    },
    EstimateRatios {
        config: RunConfig,
        r: f64,
        #[serde(rename = "R")]
        big_r: f64,
        #[serde(default = "default_points")]
        pairs: usize,
        #[serde(default = "default_er_tol")]
        tolerance: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: CheckKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject: Option<Injection>,
}

/// Reports of one check; the first one decides pass/fail.
pub struct CheckOutcome {
    pub primary: CheckReport,
    pub parts: Vec<(String, CheckReport)>,
}

impl CheckOutcome {
    fn single(r: CheckReport) -> Self {
        Self {
            primary: r,
            parts: Vec::new(),
        }
    }
}

fn with_seed(cfg: &RunConfig, seed: Option<u64>) -> RunConfig {
    let mut c = cfg.clone();
    if let Some(s) = seed {
        c.seed = s;
    }
    c
}

fn refined(cfg: &RunConfig) -> RunConfig {
    let mut c = cfg.clone();
    c.grid.size *= 2;
    c
}

fn every_step(cfg: &RunConfig) -> RunConfig {
    let mut c = cfg.clone();
    c.snapshot_every = 1;
    c
}

fn run_cfg(cfg: &RunConfig) -> Result<Trajectory> {
    run(cfg).map_err(|e| anyhow!("run failed: {e}"))
}

fn replace_values(s: &FieldState, values: Vec<f64>) -> Result<FieldState> {
    Ok(FieldState::new(
        s.grid().clone(),
        s.components(),
        values,
        s.t(),
        Some(s.boundary_values().to_vec()),
    )?)
}

fn spike(traj: &mut Trajectory, points: &[usize], value: f64, from: usize) -> Result<()> {
    for s in traj.snapshots.iter_mut().skip(from) {
        let mut v = s.values().to_vec();
        for &i in points {
            v[i] += value;
        }
        *s = replace_values(s, v)?;
    }
    Ok(())
}

fn add_noise(traj: &mut Trajectory, amplitude: f64, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in traj.snapshots.iter_mut() {
        let grid = s.grid().clone();
        let len = grid.len();
        let mut v = s.values().to_vec();
        for (k, x) in v.iter_mut().enumerate() {
            let noise = rng.gen_range(-amplitude..=amplitude);
            if !grid.is_boundary(k % len) {
                *x += noise;
            }
        }
        *s = replace_values(s, v)?;
    }
    Ok(())
}

fn amplify(a: &Trajectory, b: &mut Trajectory, rate: f64) -> Result<()> {
    for (k, (sa, sb)) in a.snapshots.iter().zip(b.snapshots.iter_mut()).enumerate() {
        let f = 1.0 + rate * k as f64;
        let v = sa
            .values()
            .iter()
            .zip(sb.values())
            .map(|(x, y)| x + f * (y - x))
            .collect();
        *sb = replace_values(sb, v)?;
    }
    Ok(())
}

fn quadratic_calibration(cfg: &RunConfig) -> RunConfig {
    let mut c = every_step(cfg);
    c.potential = PotentialSpec::Quadratic {
        r_max: cfg.potential.r_max(),
    };
    c.model = ModelKind::Diffusion;
    c
}

fn calibrated_k(cfg: &RunConfig, calibration: &Option<RunConfig>) -> Result<f64> {
    let cal = calibration
        .as_ref()
        .map(every_step)
        .unwrap_or_else(|| quadratic_calibration(cfg));
    let traj = run_cfg(&cal)?;
    Ok(calibrate_k(&traj, &cal.potential.build()?)?)
}

fn inflation(inject: &Option<Injection>) -> f64 {
    match inject {
        Some(Injection::InflateLambda { factor }) => *factor,
        _ => 1.0,
    }
}

fn noise_amplitude(inject: &Option<Injection>) -> Option<f64> {
    match inject {
        Some(Injection::Noise { amplitude }) => Some(*amplitude),
        _ => None,
    }
}

fn refinement_outcome(
    name: &str,
    coarse: CheckReport,
    fine: CheckReport,
    combined: CheckReport,
) -> CheckOutcome {
    let mut primary = combined;
    primary.name = name.to_string();
    CheckOutcome {
        primary,
        parts: vec![("coarse".into(), coarse), ("fine".into(), fine)],
    }
}

/// Runs one check. `seed` overrides the run seeds; `sample_seed` drives
/// cylinder sampling and noise.
pub fn execute(spec: &CheckSpec, seed: Option<u64>, sample_seed: u64) -> Result<CheckOutcome> {
    let inject = &spec.inject;
    match &spec.kind {
        CheckKind::Contraction { config, other } => {
            let cfg = with_seed(config, seed);
            let mut cfg1 = cfg.clone();
            cfg1.initial = other.clone();
            let a = run_cfg(&cfg)?;
            let mut b = run_cfg(&cfg1)?;
            if let Some(Injection::Amplify { rate }) = inject {
                amplify(&a, &mut b, *rate)?;
            }
            let w = certify_window(&cfg.potential.build()?)?;
            Ok(CheckOutcome::single(contraction_report(&a, &b, &w)?))
        }
        CheckKind::SupNorm { config } => {
            let mut traj = run_cfg(&with_seed(config, seed))?;
            if let Some(Injection::Spike { value }) = inject {
                let grid = traj.grid();
                let mid: Vec<usize> = grid.sizes().iter().map(|n| n / 2).collect();
                let center = grid.index(&mid);
                let last = traj.len() - 1;
                spike(&mut traj, &[center], *value, last)?;
            }
            Ok(CheckOutcome::single(sup_norm_report(&traj)))
        }
        CheckKind::EntropyDiffusion {
            config,
            calibration,
        } => {
            let cfg = every_step(&with_seed(config, seed));
            if cfg.model != ModelKind::Diffusion {
                bail!("entropy_diffusion needs a diffusion-model config");
            }
            let k = calibrated_k(&cfg, calibration)?;
            let p = cfg.potential.build()?;
            let e = build_entropy(&p)?;
            let mut w = certify_window(&p)?;
            w.lambda *= inflation(inject);
            let coarse = entropy_residual_diffusion(&run_cfg(&cfg)?, &p, &e, &w, k)?;
            let fine = entropy_residual_diffusion(&run_cfg(&refined(&cfg))?, &p, &e, &w, k)?;
            let combined = refinement_report(&coarse, &fine);
            Ok(refinement_outcome(&spec.name, coarse, fine, combined))
        }
        CheckKind::EntropyCoupled {
            config,
            r_min,
            calibration,
        } => {
            let cfg = every_step(&with_seed(config, seed));
            if cfg.model != ModelKind::Coupled {
                bail!("entropy_coupled needs a coupled-model config");
            }
            let k = calibrated_k(&cfg, calibration)?;
            let p = cfg.potential.build()?;
            let cc = coupled_decomposition_on(&p, *r_min)?;
            let mut params = choose_entropy_params(&cc, cfg.grid.dim, cfg.components)?;
            params.c *= inflation(inject);
            let coarse = entropy_residual_coupled(&run_cfg(&cfg)?, &cc, &params, k)?;
            let fine = entropy_residual_coupled(&run_cfg(&refined(&cfg))?, &cc, &params, k)?;
            let combined = refinement_report(&coarse, &fine);
            Ok(refinement_outcome(&spec.name, coarse, fine, combined))
        }
        CheckKind::Morrey {
            config,
            points,
            radii_h,
        } => {
            let cfg = with_seed(config, seed);
            let mut traj = run_cfg(&cfg)?;
            let grid = traj.grid().clone();
            let h = grid.h();
            let largest = radii_h.iter().cloned().fold(0.0, f64::max) * h;
            let t_end = traj.snapshots.last().unwrap().t();
            let sites = random_cylinders(&grid, 0.0, t_end, largest, 1.0, *points, sample_seed)?;
            let pts = sites
                .iter()
                .map(|c| Ok((c.on(&grid)?.center, c.t0)))
                .collect::<Result<Vec<(usize, f64)>>>()?;
            if let Some(Injection::Spike { value }) = inject {
                let centers: Vec<usize> = pts.iter().map(|p| p.0).collect();
                spike(&mut traj, &centers, *value, 0)?;
            }
            let radii: Vec<f64> = radii_h.iter().map(|r| r * h).collect();
            Ok(CheckOutcome::single(morrey_decay_report(
                &traj, &pts, &radii,
            )?))
        }
        CheckKind::ReverseHolder {
            config,
            radius,
            cylinders,
            p,
            tolerance,
        } => {
            let cfg = with_seed(config, seed);
            let coarse_traj = run_cfg(&cfg)?;
            let mut fine_traj = run_cfg(&refined(&cfg))?;
            if let Some(a) = noise_amplitude(inject) {
                add_noise(&mut fine_traj, a, sample_seed)?;
            }
            let t_end = coarse_traj.snapshots.last().unwrap().t();
            let sites = random_cylinders(
                coarse_traj.grid(),
                0.0,
                t_end,
                *radius,
                4.0,
                *cylinders,
                sample_seed,
            )?;
            let on = |traj: &Trajectory| -> Result<Vec<Cylinder>> {
                sites.iter().map(|c| Ok(c.on(traj.grid())?)).collect()
            };
            let coarse = reverse_holder_report(&coarse_traj, &on(&coarse_traj)?, *p)?;
            let fine = reverse_holder_report(&fine_traj, &on(&fine_traj)?, *p)?;
            let combined = stability_report(&spec.name, &coarse, &fine, &["max_ratio"], *tolerance);
            Ok(refinement_outcome(&spec.name, coarse, fine, combined))
        }
        CheckKind::EstimateRatios {
            config,
            r,
            big_r,
            pairs,
            tolerance,
        } => {
            if r.partial_cmp(big_r) != Some(std::cmp::Ordering::Less) {
                bail!("estimate_ratios needs r < R");
            }
            let cfg = with_seed(config, seed);
            let pot = cfg.potential.build()?;
            let coarse_traj = run_cfg(&cfg)?;
            let mut fine_traj = run_cfg(&refined(&cfg))?;
            if let Some(a) = noise_amplitude(inject) {
                add_noise(&mut fine_traj, a, sample_seed)?;
            }
            let t_end = coarse_traj.snapshots.last().unwrap().t();
            let sites = random_cylinders(
                coarse_traj.grid(),
                0.0,
                t_end,
                *big_r,
                1.0,
                *pairs,
                sample_seed,
            )?;
            let nested = |traj: &Trajectory| -> Result<Vec<(Cylinder, Cylinder)>> {
                sites
                    .iter()
                    .map(|c: &PhysicalCylinder| {
                        let outer = c.on(traj.grid())?;
                        Ok((
                            Cylinder {
                                radius: *r,
                                ..outer
                            },
                            outer,
                        ))
                    })
                    .collect()
            };
            let coarse = estimate_ratio_report(&coarse_traj, &pot, &nested(&coarse_traj)?)?;
            let fine = estimate_ratio_report(&fine_traj, &pot, &nested(&fine_traj)?)?;
            let combined = stability_report(
                &spec.name,
                &coarse,
                &fine,
                &["time_derivative", "hessian", "l4"],
                *tolerance,
            );
            Ok(refinement_outcome(&spec.name, coarse, fine, combined))
        }
    }
}
