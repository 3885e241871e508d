//! Named initial-data families, reproducible from name and seed.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::grid::{Boundary, FieldState, GridSpec};

fn default_max_mode() -> usize {
    3
}

fn default_width() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `offset + A·mode(x)·direction`, where the mode is `sin(2π k·x)` on
    /// periodic grids and `∏ sin(π k_a x_a)` on Dirichlet grids.
    FourierMode {
        amplitude: f64,
        wavenumber: Vec<i64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        direction: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<Vec<f64>>,
    },
    /// Random trigonometric polynomial with modes up to `max_mode` per axis
    /// and coefficients damped by `1/(1 + |k|²)`, scaled so that
    /// `|u - offset| <= amplitude` pointwise.
    BandLimited {
        amplitude: f64,
        #[serde(default = "default_max_mode")]
        max_mode: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        direction: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<Vec<f64>>,
    },
    /// Smooth compactly supported bump `A exp(1 - 1/(1 - ρ²))`, `ρ = |x - x₀|/width`.
    RadialBump {
        amplitude: f64,
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        direction: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<Vec<f64>>,
    },
    /// Two bumps on axis 0 pointing in different directions (`e₁` and `e₂`,
    /// or `±e₁` when `N = 1`).
    TwoBump {
        amplitude: f64,
        #[serde(default = "default_width")]
        width: f64,
        separation: f64,
    },
    Constant {
        value: Vec<f64>,
    },
}

impl InitialData {
    pub fn validate(&self, components: usize) -> Result<(), SolverError> {
        let check_vec = |name: &str, v: &Option<Vec<f64>>| match v {
            Some(v) if v.len() != components => Err(SolverError::Config(format!(
                "initial.{name} has {} entries for {components} components",
                v.len()
            ))),
            Some(v) if v.iter().any(|x| !x.is_finite()) => Err(SolverError::Config(format!(
                "initial.{name} must be finite"
            ))),
            _ => Ok(()),
        };
        let check_amp = |a: f64| {
            if a.is_finite() && a >= 0.0 {
                Ok(())
            } else {
                Err(SolverError::Config(format!(
                    "initial.amplitude must be finite and >= 0, got {a}"
                )))
            }
        };
        match self {
            InitialData::FourierMode {
                amplitude,
                direction,
                offset,
                ..
            } => {
                check_amp(*amplitude)?;
                check_vec("direction", direction)?;
                check_vec("offset", offset)
            }
            InitialData::BandLimited {
                amplitude,
                max_mode,
                direction,
                offset,
            } => {
                check_amp(*amplitude)?;
                if *max_mode == 0 {
                    return Err(SolverError::Config("initial.max_mode must be >= 1".into()));
                }
                check_vec("direction", direction)?;
                check_vec("offset", offset)
            }
            InitialData::RadialBump {
                amplitude,
                width,
                direction,
                offset,
                ..
            } => {
                check_amp(*amplitude)?;
                if !(*width > 0.0) {
                    return Err(SolverError::Config("initial.width must be positive".into()));
                }
                check_vec("direction", direction)?;
                check_vec("offset", offset)
            }
            InitialData::TwoBump {
                amplitude, width, ..
            } => {
                check_amp(*amplitude)?;
                if !(*width > 0.0) {
                    return Err(SolverError::Config("initial.width must be positive".into()));
                }
                Ok(())
            }
            InitialData::Constant { value } => check_vec("value", &Some(value.clone())),
        }
    }

    fn offset(&self, components: usize) -> Vec<f64> {
        match self {
            InitialData::FourierMode { offset, .. }
            | InitialData::BandLimited { offset, .. }
            | InitialData::RadialBump { offset, .. } => {
                offset.clone().unwrap_or_else(|| vec![0.0; components])
            }
            InitialData::Constant { value } => value.clone(),
            InitialData::TwoBump { .. } => vec![0.0; components],
        }
    }

    /// Samples the family on a grid. On Dirichlet grids the boundary layer
    /// takes `boundary_values`, defaulting to the offset of the family.
    pub fn build(
        &self,
        grid: &GridSpec,
        components: usize,
        seed: u64,
        boundary_values: Option<Vec<f64>>,
    ) -> Result<FieldState, SolverError> {
        self.validate(components)?;
        let offset = self.offset(components);
        let bv = boundary_values.unwrap_or_else(|| offset.clone());
        let dim = grid.dim();
        let periodic = grid.boundary() == Boundary::Periodic;
        let unit = e1(components);
        let state = match self {
            InitialData::FourierMode {
                amplitude,
                wavenumber,
                direction,
                ..
            } => {
                if wavenumber.len() != dim {
                    return Err(SolverError::Config(format!(
                        "initial.wavenumber has {} entries for a {dim}-dimensional grid",
                        wavenumber.len()
                    )));
                }
                let dir = direction.clone().unwrap_or(unit);
                let k: Vec<f64> = wavenumber.iter().map(|&k| k as f64).collect();
                FieldState::from_fn(grid.clone(), components, 0.0, Some(bv), |x, out| {
                    let m = mode(x, &k, periodic);
                    for c in 0..components {
                        out[c] = offset[c] + amplitude * m * dir[c];
                    }
                })?
            }
            InitialData::BandLimited {
                amplitude,
                max_mode,
                direction,
                ..
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let series: Vec<Series> = match direction {
                    Some(_) => vec![Series::random(&mut rng, dim, *max_mode, periodic)],
                    None => (0..components)
                        .map(|_| Series::random(&mut rng, dim, *max_mode, periodic))
                        .collect(),
                };
                // per-component bound keeps |u - offset| <= amplitude
                let scale = match direction {
                    Some(d) => amplitude / d.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300),
                    None => amplitude / (components as f64).sqrt(),
                };
                FieldState::from_fn(grid.clone(), components, 0.0, Some(bv), |x, out| {
                    match direction {
                        Some(d) => {
                            let s = series[0].eval(x);
                            for c in 0..components {
                                out[c] = offset[c] + scale * s * d[c];
                            }
                        }
                        None => {
                            for c in 0..components {
                                out[c] = offset[c] + scale * series[c].eval(x);
                            }
                        }
                    }
                })?
            }
            InitialData::RadialBump {
                amplitude,
                width,
                center,
                direction,
                ..
            } => {
                let center = center
                    .clone()
                    .unwrap_or_else(|| (0..dim).map(|a| 0.5 * grid.extent(a)).collect());
                if center.len() != dim {
                    return Err(SolverError::Config(format!(
                        "initial.center has {} entries for a {dim}-dimensional grid",
                        center.len()
                    )));
                }
                let dir = direction.clone().unwrap_or(unit);
                FieldState::from_fn(grid.clone(), components, 0.0, Some(bv), |x, out| {
                    let b = amplitude * bump(grid, x, &center, *width);
                    for c in 0..components {
                        out[c] = offset[c] + b * dir[c];
                    }
                })?
            }
            InitialData::TwoBump {
                amplitude,
                width,
                separation,
            } => {
                let mid: Vec<f64> = (0..dim).map(|a| 0.5 * grid.extent(a)).collect();
                let mut left = mid.clone();
                let mut right = mid;
                left[0] -= 0.5 * separation;
                right[0] += 0.5 * separation;
                let d1 = e1(components);
                let d2 = if components >= 2 {
                    let mut d = vec![0.0; components];
                    d[1] = 1.0;
                    d
                } else {
                    vec![-1.0]
                };
                FieldState::from_fn(grid.clone(), components, 0.0, Some(bv), |x, out| {
                    let bl = amplitude * bump(grid, x, &left, *width);
                    let br = amplitude * bump(grid, x, &right, *width);
                    for c in 0..components {
                        out[c] = bl * d1[c] + br * d2[c];
                    }
                })?
            }
            InitialData::Constant { value } => {
                FieldState::from_fn(grid.clone(), components, 0.0, Some(bv), |_, out| {
                    out.copy_from_slice(value)
                })?
            }
        };
        Ok(state)
    }
}

fn e1(components: usize) -> Vec<f64> {
    let mut d = vec![0.0; components];
    d[0] = 1.0;
    d
}

fn mode(x: &[f64], k: &[f64], periodic: bool) -> f64 {
    use std::f64::consts::PI;
    if periodic {
        let phase: f64 = x.iter().zip(k).map(|(x, k)| k * x).sum();
        (2.0 * PI * phase).sin()
    } else {
        x.iter().zip(k).map(|(x, k)| (PI * k * x).sin()).product()
    }
}

/// `exp(1 - 1/(1 - ρ²))` for `ρ < 1`, else 0; distances wrap on periodic grids.
fn bump(grid: &GridSpec, x: &[f64], center: &[f64], width: f64) -> f64 {
    let mut r2 = 0.0;
    for (a, (&xa, &ca)) in x.iter().zip(center).enumerate() {
        let mut d = (xa - ca).abs();
        if grid.boundary() == Boundary::Periodic {
            let period = grid.extent(a);
            d = d.rem_euclid(period);
            d = d.min(period - d);
        }
        r2 += d * d;
    }
    let rho2 = r2 / (width * width);
    if rho2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - rho2)).exp()
    }
}

/// Random trigonometric series normalized by the sum of absolute
/// coefficients, so `|eval| <= 1`.
#[derive(Debug, Clone)]
struct Series {
    terms: Vec<(Vec<f64>, f64, f64)>,
    periodic: bool,
}

impl Series {
    fn random(rng: &mut ChaCha8Rng, dim: usize, max_mode: usize, periodic: bool) -> Self {
        let k_max = max_mode as i64;
        let mut terms = Vec::new();
        let mut total = 0.0;
        let lo = if periodic { -k_max } else { 1 };
        let count = (k_max - lo + 1) as usize;
        for flat in 0..count.pow(dim as u32) {
            let mut k = vec![0i64; dim];
            let mut rem = flat;
            for slot in k.iter_mut() {
                *slot = lo + (rem % count) as i64;
                rem /= count;
            }
            if periodic && !canonical(&k) {
                continue;
            }
            let k2: f64 = k.iter().map(|&x| (x * x) as f64).sum();
            let damp = 1.0 / (1.0 + k2);
            let alpha = damp * rng.gen_range(-1.0..1.0);
            let beta = if periodic {
                damp * rng.gen_range(-1.0..1.0)
            } else {
                0.0
            };
            total += alpha.abs() + beta.abs();
            terms.push((k.iter().map(|&x| x as f64).collect(), alpha, beta));
        }
        for t in &mut terms {
            t.1 /= total;
            t.2 /= total;
        }
        Self { terms, periodic }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        use std::f64::consts::PI;
        if self.periodic {
            self.terms
                .iter()
                .map(|(k, a, b)| {
                    let phase: f64 = 2.0 * PI * x.iter().zip(k).map(|(x, k)| x * k).sum::<f64>();
                    a * phase.cos() + b * phase.sin()
                })
                .sum()
        } else {
            self.terms
                .iter()
                .map(|(k, a, _)| a * mode(x, k, false))
                .sum()
        }
    }
}

/// One representative of each `±k` pair, excluding `k = 0`.
fn canonical(k: &[i64]) -> bool {
    match k.iter().find(|&&x| x != 0) {
        Some(&first) => first > 0,
        None => false,
    }
}

/// Random orthogonal `N×N` matrix: the `Q` factor of a seeded matrix with
/// uniform entries.
pub fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    m.qr().q()
}
