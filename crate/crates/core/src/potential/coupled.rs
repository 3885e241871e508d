//! Rewriting `u_t = Δ∇Φ(u)` for radial `Φ` as a strongly coupled system
//! `u^i_t = (a u^i_x + c^i H_x)_x` with
//!
//! * `a = φ'(|u|)/|u|`,
//! * `c^i = u^i/|u|`,
//! * `H(z) = φ'(|z|) - ∫_0^{|z|} φ'(s)/s ds`.
//!
//! `H` is radial, `H = h(|z|)` with `h'(r) = φ''(r) - φ'(r)/r`, and in general
//! it is not convex.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{certify_window, norm, PotentialError, RadialPotential, CERTIFY_SAMPLES, RADIAL_EPS};
use crate::quadrature::{adaptive_simpson, CumulativeTable};

const TABLE_PANELS: usize = 4096;
const SIMPSON_CHECKS: usize = 64;
const SIMPSON_TOL: f64 = 1e-10;
/// Below this radius the `1/r` forms of `h''` and `h'/r` use their limits.
const SMALL_R: f64 = 1e-4;

/// Sup/inf bounds of the coupling coefficients over `r_min <= |z| <= r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingBounds {
    pub r_min: f64,
    pub r_max: f64,
    pub sup_a: f64,
    pub sup_c: f64,
    /// Largest spectral norm of `H_zz`.
    pub sup_h_hess: f64,
    pub sup_h_grad: f64,
    pub inf_h: f64,
    pub sup_h: f64,
    /// Ellipticity of `a_{αβ}`.
    pub lambda_a: f64,
    /// Ellipticity of the full `A^{ij}_{αβ} = a δ_{ij} δ_{αβ} + c^i H_{z_j} δ_{αβ}`.
    #[serde(rename = "lambda_A")]
    pub lambda_big_a: f64,
    /// Lower bound of the scalar entropy flux coefficient `a + c·H_z`.
    pub lambda_flux: f64,
    /// Convexity of `H` (smallest eigenvalue of `H_zz`, may be `<= 0`).
    pub lambda_h: f64,
    /// `sup (a + |c| |H_z|)`: the diffusivity entering the CFL bound.
    pub effective_lambda: f64,
    /// Largest disagreement of the tabulated integral with adaptive Simpson.
    pub simpson_agreement: f64,
}

#[derive(Debug, Clone)]
pub struct CoupledCoefficients {
    potential: RadialPotential,
    integral: CumulativeTable,
    trivial: bool,
    pub bounds: CouplingBounds,
}

/// Decomposition certified on the whole ball `|z| <= r_max`.
pub fn coupled_decomposition(p: &RadialPotential) -> Result<CoupledCoefficients, PotentialError> {
    coupled_decomposition_on(p, 0.0)
}

/// Decomposition with bounds certified on the annulus
/// `r_min <= |z| <= r_max`. The coefficients themselves are defined on the
/// whole ball; only the bounds are restricted.
pub fn coupled_decomposition_on(
    p: &RadialPotential,
    r_min: f64,
) -> Result<CoupledCoefficients, PotentialError> {
    if !(r_min >= 0.0 && r_min < p.r_max()) {
        return Err(PotentialError::RangeSpec(format!(
            "need 0 <= r_min < r_max, got r_min = {r_min}, r_max = {}",
            p.r_max()
        )));
    }
    certify_window(p)?;
    let integrand = |s: f64| p.radial_ratio(s);
    let integral = CumulativeTable::build(integrand, p.r_max(), TABLE_PANELS);
    let mut simpson_agreement: f64 = 0.0;
    for k in 1..=SIMPSON_CHECKS {
        let r = p.r_max() * k as f64 / SIMPSON_CHECKS as f64;
        let direct = adaptive_simpson(integrand, 0.0, r, SIMPSON_TOL)?;
        simpson_agreement = simpson_agreement.max((direct - integral.eval(r)).abs());
    }
    let mut cc = CoupledCoefficients {
        potential: p.clone(),
        integral,
        trivial: false,
        bounds: CouplingBounds {
            r_min,
            r_max: p.r_max(),
            sup_a: 0.0,
            sup_c: 0.0,
            sup_h_hess: 0.0,
            sup_h_grad: 0.0,
            inf_h: f64::INFINITY,
            sup_h: f64::NEG_INFINITY,
            lambda_a: f64::INFINITY,
            lambda_big_a: f64::INFINITY,
            lambda_flux: f64::INFINITY,
            lambda_h: f64::INFINITY,
            effective_lambda: 0.0,
            simpson_agreement,
        },
    };
    let mut b = cc.bounds;
    let span = p.r_max() - r_min;
    for k in 0..=CERTIFY_SAMPLES {
        let r = if k == CERTIFY_SAMPLES {
            p.r_max()
        } else {
            r_min + span * k as f64 / CERTIFY_SAMPLES as f64
        };
        let a = cc.a_of_r(r);
        let dh = cc.dh(r);
        let (radial_hh, tangential_hh) = cc.h_hess_eigen(r);
        let h = cc.h_of_r(r);
        let c = if r < RADIAL_EPS { 0.0 } else { 1.0 };
        b.sup_a = b.sup_a.max(a);
        b.sup_c = b.sup_c.max(c);
        b.sup_h_grad = b.sup_h_grad.max(dh.abs());
        b.sup_h_hess = b.sup_h_hess.max(radial_hh.abs()).max(tangential_hh.abs());
        b.inf_h = b.inf_h.min(h);
        b.sup_h = b.sup_h.max(h);
        b.lambda_a = b.lambda_a.min(a);
        // eigenvalues of a I + c H_zᵀ: a (tangential) and a + c·H_z (radial)
        b.lambda_big_a = b.lambda_big_a.min(a).min(a + c * dh);
        b.lambda_flux = b.lambda_flux.min(a + c * dh);
        b.lambda_h = b.lambda_h.min(radial_hh).min(tangential_hh);
        b.effective_lambda = b.effective_lambda.max(a + c * dh.abs());
    }
    cc.trivial = b.sup_h_grad <= 1e-13 && b.sup_h_hess <= 1e-13;
    cc.bounds = b;
    Ok(cc)
}

impl CoupledCoefficients {
    pub fn potential(&self) -> &RadialPotential {
        &self.potential
    }

    /// True when `H` vanishes identically (quadratic `φ`); the system is
    /// then componentwise heat flow.
    pub fn is_trivial(&self) -> bool {
        self.trivial
    }

    #[inline]
    pub fn a_of_r(&self, r: f64) -> f64 {
        self.potential.radial_ratio(r)
    }

    /// `h(r) = φ'(r) - ∫_0^r φ'(s)/s ds`.
    #[inline]
    pub fn h_of_r(&self, r: f64) -> f64 {
        if self.trivial {
            return 0.0;
        }
        self.potential.phi1(r) - self.integral.eval(r)
    }

    /// `h'(r) = φ''(r) - φ'(r)/r`.
    #[inline]
    pub fn dh(&self, r: f64) -> f64 {
        if self.trivial {
            return 0.0;
        }
        self.potential.phi2(r) - self.potential.radial_ratio(r)
    }

    /// Eigenvalues of `H_zz` at radius `r`: `(h''(r), h'(r)/r)`.
    pub fn h_hess_eigen(&self, r: f64) -> (f64, f64) {
        if r < SMALL_R {
            // both branches tend to φ'''(0)/2
            let lim = 0.5 * self.potential.phi3(r);
            return (lim, lim);
        }
        let tangential = self.dh(r) / r;
        (self.potential.phi3(r) - tangential, tangential)
    }

    pub fn a(&self, z: &[f64]) -> f64 {
        self.a_of_r(norm(z))
    }

    pub fn h(&self, z: &[f64]) -> f64 {
        self.h_of_r(norm(z))
    }

    /// `c^i = z^i/|z|`, zero at the origin.
    pub fn c_into(&self, z: &[f64], out: &mut [f64]) {
        let r = norm(z);
        if r < RADIAL_EPS {
            out.iter_mut().for_each(|o| *o = 0.0);
        } else {
            for (o, &zi) in out.iter_mut().zip(z) {
                *o = zi / r;
            }
        }
    }

    /// `H_z = h'(r) z/r`.
    pub fn h_grad_into(&self, z: &[f64], out: &mut [f64]) {
        let r = norm(z);
        if r < RADIAL_EPS {
            out.iter_mut().for_each(|o| *o = 0.0);
        } else {
            let s = self.dh(r) / r;
            for (o, &zi) in out.iter_mut().zip(z) {
                *o = s * zi;
            }
        }
    }

    pub fn h_hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let n = z.len();
        let r = norm(z);
        let (radial, tangential) = self.h_hess_eigen(r);
        if r < RADIAL_EPS {
            return DMatrix::identity(n, n) * radial;
        }
        DMatrix::from_fn(n, n, |i, j| {
            let delta = if i == j { tangential } else { 0.0 };
            delta + (radial - tangential) * z[i] * z[j] / (r * r)
        })
    }

    /// Scalar coefficient `a + c·H_z` of the entropy flux `(A v_x)_x`.
    pub fn flux_coefficient(&self, z: &[f64]) -> f64 {
        let r = norm(z);
        if r < RADIAL_EPS {
            self.a_of_r(r)
        } else {
            self.a_of_r(r) + self.dh(r)
        }
    }

    /// `A^{ij} = a δ_{ij} + c^i H_{z_j}`, which for the decomposition equals
    /// `Φ_zz`.
    pub fn reconstruct(&self, z: &[f64]) -> DMatrix<f64> {
        let n = z.len();
        let mut c = vec![0.0; n];
        let mut hz = vec![0.0; n];
        self.c_into(z, &mut c);
        self.h_grad_into(z, &mut hz);
        let a = self.a(z);
        DMatrix::from_fn(n, n, |i, j| if i == j { a } else { 0.0 } + c[i] * hz[j])
    }
}
