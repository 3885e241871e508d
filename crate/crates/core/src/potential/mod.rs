//! Radial convex potentials `Φ(z) = φ(|z|)` and the structures built from
//! them: ellipticity windows, the scalar entropy `γ` with
//! `γ(φ(z)) = φ'(z)²/2`, and the rewriting of `Δ∇Φ(u)` as a strongly coupled
//! system.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::QuadratureError;

mod coupled;
mod entropy;
mod library;

pub use coupled::{
    coupled_decomposition, coupled_decomposition_on, CoupledCoefficients, CouplingBounds,
};
pub use entropy::{build_entropy, EntropyData};
pub use library::{
    CoshMinusOne, PiecewisePolynomial, PolyPiece, PotentialSpec, PureQuartic, Quadratic,
    QuadraticQuartic, SmoothedPorous,
};

/// `|z|` below this is treated as the origin in radial formulas.
pub const RADIAL_EPS: f64 = 1e-12;

/// Below this radius `φ'(r)/r` is replaced by its Taylor extension.
pub const TAYLOR_RADIUS: f64 = 1e-6;

/// Uniform radius samples used by [`certify_window`] (endpoints included).
pub const CERTIFY_SAMPLES: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("|z| = {norm} exceeds the certified range r_max = {r_max}")]
    Range { norm: f64, r_max: f64 },
    #[error("convexity violated at r = {r}: {detail}")]
    Convexity { r: f64, detail: String },
    #[error("normalisation violated: {0}")]
    Normalization(String),
    #[error("entropy identity residual {residual:e} at z = {z} exceeds {limit:e}")]
    EntropyIdentity { residual: f64, z: f64, limit: f64 },
    #[error("value {value} outside the entropy table range [0, {w_max}]")]
    EntropyRange { value: f64, w_max: f64 },
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadratureError),
    #[error("unknown potential id '{0}'")]
    UnknownId(String),
    #[error("invalid potential table: {0}")]
    Table(String),
    #[error("invalid radius range: {0}")]
    RangeSpec(String),
}

/// A radial profile `φ` with hand-coded derivatives.
pub trait RadialProfile: Send + Sync + fmt::Debug {
    fn phi(&self, r: f64) -> f64;
    fn phi1(&self, r: f64) -> f64;
    fn phi2(&self, r: f64) -> f64;
    /// Third derivative; only used for bounds on the coupling function.
    fn phi3(&self, r: f64) -> f64 {
        let d = 1e-5 * r.max(1e-3);
        (self.phi2(r + d) - self.phi2((r - d).max(0.0))) / (r + d - (r - d).max(0.0))
    }
}

/// `Φ(z) = φ(|z|)` restricted to `|z| <= r_max`.
#[derive(Clone)]
pub struct RadialPotential {
    id: String,
    r_max: f64,
    profile: Arc<dyn RadialProfile>,
}

impl fmt::Debug for RadialPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialPotential")
            .field("id", &self.id)
            .field("r_max", &self.r_max)
            .finish()
    }
}

impl RadialPotential {
    /// Wraps a profile. Only cheap checks happen here; convexity is
    /// established by [`certify_window`].
    pub fn new(
        id: impl Into<String>,
        r_max: f64,
        profile: Arc<dyn RadialProfile>,
    ) -> Result<Self, PotentialError> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(PotentialError::RangeSpec(format!(
                "r_max must be positive, got {r_max}"
            )));
        }
        Ok(Self {
            id: id.into(),
            r_max,
            profile,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn profile(&self) -> &Arc<dyn RadialProfile> {
        &self.profile
    }

    #[inline]
    pub fn phi(&self, r: f64) -> f64 {
        self.profile.phi(r)
    }

    #[inline]
    pub fn phi1(&self, r: f64) -> f64 {
        self.profile.phi1(r)
    }

    #[inline]
    pub fn phi2(&self, r: f64) -> f64 {
        self.profile.phi2(r)
    }

    #[inline]
    pub fn phi3(&self, r: f64) -> f64 {
        self.profile.phi3(r)
    }

    /// Tangential Hessian eigenvalue `φ'(r)/r`, extended continuously to
    /// `φ''(0)` at the origin.
    #[inline]
    pub fn radial_ratio(&self, r: f64) -> f64 {
        if r < TAYLOR_RADIUS {
            // φ'(r)/r is the mean of φ'' on [0, r]
            0.5 * (self.phi2(0.0) + self.phi2(r))
        } else {
            self.phi1(r) / r
        }
    }

    #[inline]
    pub(crate) fn check_range(&self, norm: f64) -> Result<(), PotentialError> {
        if norm > self.r_max {
            Err(PotentialError::Range {
                norm,
                r_max: self.r_max,
            })
        } else {
            Ok(())
        }
    }

    /// Writes `∇Φ(z) = φ'(|z|) z/|z|` into `out`.
    #[inline]
    pub fn grad_phi_into(&self, z: &[f64], out: &mut [f64]) -> Result<(), PotentialError> {
        let r = norm(z);
        self.check_range(r)?;
        if r < RADIAL_EPS {
            out.iter_mut().for_each(|o| *o = 0.0);
            return Ok(());
        }
        let scale = self.phi1(r) / r;
        for (o, &zi) in out.iter_mut().zip(z) {
            *o = scale * zi;
        }
        Ok(())
    }

    pub fn grad_phi(&self, z: &[f64]) -> Result<Vec<f64>, PotentialError> {
        let mut out = vec![0.0; z.len()];
        self.grad_phi_into(z, &mut out)?;
        Ok(out)
    }

    /// `Φ_zz(z) = φ'/r I + (φ'' - φ'/r) ẑẑᵀ`; `φ''(0) I` at the origin.
    pub fn hessian_phi(&self, z: &[f64]) -> Result<DMatrix<f64>, PotentialError> {
        let n = z.len();
        let r = norm(z);
        self.check_range(r)?;
        if r < RADIAL_EPS {
            return Ok(DMatrix::identity(n, n) * self.phi2(0.0));
        }
        let tangential = self.radial_ratio(r);
        let radial = self.phi2(r);
        Ok(DMatrix::from_fn(n, n, |i, j| {
            let delta = if i == j { tangential } else { 0.0 };
            delta + (radial - tangential) * z[i] * z[j] / (r * r)
        }))
    }

    /// Checks `φ(0) = 0`, `φ'(0) = 0`.
    pub fn check_normalization(&self) -> Result<(), PotentialError> {
        let p0 = self.phi(0.0);
        let d0 = self.phi1(0.0);
        if p0.abs() > 1e-14 {
            return Err(PotentialError::Normalization(format!("φ(0) = {p0}")));
        }
        if d0.abs() > 1e-14 {
            return Err(PotentialError::Normalization(format!("φ'(0) = {d0}")));
        }
        Ok(())
    }
}

pub(crate) fn norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Certified bounds `λ |ξ|² <= Φ_zz ξ·ξ <= Λ |ξ|²` on `|z| <= r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticityWindow {
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub r_max: f64,
    pub samples: usize,
    pub spacing: f64,
    /// Largest jump of either eigenvalue branch between adjacent samples;
    /// bounds how far the unsampled extremes can sit outside `[λ, Λ]` for
    /// monotone-between-samples branches.
    pub margin: f64,
}

/// Samples both Hessian eigenvalue branches, `φ''(r)` and `φ'(r)/r`, on a
/// uniform grid of `[0, r_max]` and records their extremes.
pub fn certify_window(p: &RadialPotential) -> Result<EllipticityWindow, PotentialError> {
    certify_window_with(p, CERTIFY_SAMPLES)
}

pub fn certify_window_with(
    p: &RadialPotential,
    samples: usize,
) -> Result<EllipticityWindow, PotentialError> {
    p.check_normalization()?;
    let samples = samples.max(2);
    let spacing = p.r_max / samples as f64;
    let mut lambda = f64::INFINITY;
    let mut big_lambda: f64 = 0.0;
    let mut margin: f64 = 0.0;
    let mut prev: Option<(f64, f64, f64)> = None;
    for k in 0..=samples {
        let r = if k == samples {
            p.r_max
        } else {
            k as f64 * spacing
        };
        let radial = p.phi2(r);
        let tangential = p.radial_ratio(r);
        let slope = p.phi1(r);
        if !(radial > 0.0) || !radial.is_finite() {
            return Err(PotentialError::Convexity {
                r,
                detail: format!("φ''(r) = {radial}"),
            });
        }
        if !(tangential > 0.0) || !tangential.is_finite() {
            return Err(PotentialError::Convexity {
                r,
                detail: format!("φ'(r)/r = {tangential}"),
            });
        }
        if let Some((pr, pt, ps)) = prev {
            if !(slope > ps) {
                return Err(PotentialError::Convexity {
                    r,
                    detail: format!("φ' not strictly increasing ({ps} then {slope})"),
                });
            }
            margin = margin.max((radial - pr).abs()).max((tangential - pt).abs());
        }
        prev = Some((radial, tangential, slope));
        lambda = lambda.min(radial.min(tangential));
        big_lambda = big_lambda.max(radial.max(tangential));
    }
    Ok(EllipticityWindow {
        lambda,
        big_lambda,
        r_max: p.r_max,
        samples: samples + 1,
        spacing,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cosh(r_max: f64) -> RadialPotential {
        PotentialSpec::Cosh { r_max }.build().unwrap()
    }

    #[test]
    fn quadratic_gradient_is_identity() {
        let p = PotentialSpec::Quadratic { r_max: 2.0 }.build().unwrap();
        let z = [0.3, -0.4, 1.2];
        assert_eq!(p.grad_phi(&z).unwrap(), z.to_vec());
        assert_eq!(p.grad_phi(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let hess = p.hessian_phi(&z).unwrap();
        assert!((hess - DMatrix::identity(3, 3)).abs().max() < 1e-15);
    }

    #[test]
    fn cosh_gradient_and_hessian() {
        let p = cosh(2.0);
        let g = p.grad_phi(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(g[0], 1.0f64.sinh(), max_relative = 1e-15);
        assert_relative_eq!(g[0], 1.17520, max_relative = 1e-5);
        // central difference of Φ
        let d = 1e-6;
        let fd = (p.phi(1.0 + d) - p.phi(1.0 - d)) / (2.0 * d);
        assert_relative_eq!(fd, g[0], max_relative = 1e-9);

        let h = p.hessian_phi(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(h[(0, 0)], 1.0f64.cosh(), max_relative = 1e-15);
        assert_relative_eq!(h[(1, 1)], 1.0f64.sinh(), max_relative = 1e-15);
        assert_eq!(h[(0, 1)], 0.0);
        let h0 = p.hessian_phi(&[0.0, 0.0]).unwrap();
        assert_eq!(h0, DMatrix::identity(2, 2));
    }

    #[test]
    fn range_is_enforced() {
        let p = cosh(1.0);
        assert_eq!(
            p.grad_phi(&[1.0, 1.0]),
            Err(PotentialError::Range {
                norm: 2f64.sqrt(),
                r_max: 1.0
            })
        );
        assert!(p.hessian_phi(&[2.0]).is_err());
    }

    #[test]
    fn windows_of_builtins() {
        let q = certify_window(&PotentialSpec::Quadratic { r_max: 3.0 }.build().unwrap()).unwrap();
        assert_eq!((q.lambda, q.big_lambda), (1.0, 1.0));
        let c = certify_window(&cosh(1.0)).unwrap();
        assert_eq!(c.lambda, 1.0);
        assert_relative_eq!(c.big_lambda, 1.0f64.cosh(), max_relative = 1e-15);
        assert_relative_eq!(c.big_lambda, 1.54308, max_relative = 1e-5);
        assert_eq!(c.samples, CERTIFY_SAMPLES + 1);
    }

    #[test]
    fn quartic_window_matches_dense_sampling() {
        let p = PotentialSpec::Quartic { r_max: 1.0 }.build().unwrap();
        let w = certify_window(&p).unwrap();
        // independent oracle: both branches 1 + 3r², 1 + r² on 10⁴ points
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for k in 0..=10_000 {
            let r = k as f64 / 10_000.0;
            for v in [1.0 + 3.0 * r * r, 1.0 + r * r] {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        assert_eq!(w.lambda, lo);
        assert_relative_eq!(w.big_lambda, hi, max_relative = 1e-15);
        assert_relative_eq!(w.big_lambda, 4.0, max_relative = 1e-15);
    }

    #[test]
    fn degenerate_quartic_is_rejected_at_origin() {
        let p = PotentialSpec::PureQuartic { r_max: 1.0 }.build().unwrap();
        match certify_window(&p) {
            Err(PotentialError::Convexity { r, .. }) => assert_eq!(r, 0.0),
            other => panic!("expected convexity error, got {other:?}"),
        }
    }

    #[test]
    fn non_monotone_table_names_the_radius() {
        // φ = r²/2 - r³/3 on [0, 2]: φ' = r - r² turns over at r = 1/2
        let p = PotentialSpec::Custom {
            r_max: 2.0,
            pieces: vec![PolyPiece {
                start: 0.0,
                coeffs: vec![0.0, 0.0, 0.5, -1.0 / 3.0],
            }],
        }
        .build()
        .unwrap();
        match certify_window(&p) {
            Err(PotentialError::Convexity { r, .. }) => {
                assert!((r - 0.5).abs() < 1e-3, "r = {r}")
            }
            other => panic!("expected convexity error, got {other:?}"),
        }
    }
}
