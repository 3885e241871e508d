//! Scalar entropy for radial potentials.
//!
//! With `ψ = φ⁻¹`, the function `γ(w) = ∫_0^w φ''(ψ(t)) dt` satisfies
//! `γ(φ(z)) = φ'(z)²/2`, so `φ(|u|)` obeys a scalar diffusion inequality
//! driven by `γ`.

use super::{certify_window, PotentialError, RadialPotential};
use crate::quadrature::{adaptive_simpson, CumulativeTable};

/// Identity residual above which the construction is rejected.
pub const IDENTITY_LIMIT: f64 = 1e-6;
/// Number of `z` samples for the identity residual.
pub const IDENTITY_SAMPLES: usize = 2000;
/// Tolerance of the adaptive Simpson cross-check.
pub const SIMPSON_TOL: f64 = 1e-10;

const TABLE_PANELS: usize = 4096;
const SIMPSON_CHECKS: usize = 64;

#[derive(Debug, Clone)]
pub struct EntropyData {
    potential: RadialPotential,
    table: CumulativeTable,
    w_max: f64,
    /// Largest `|γ(φ(z)) - φ'(z)²/2|` over the identity samples.
    pub tol: f64,
    /// Largest disagreement between the table and adaptive Simpson.
    pub simpson_agreement: f64,
    pub samples: usize,
}

impl EntropyData {
    pub fn potential(&self) -> &RadialPotential {
        &self.potential
    }

    /// Upper end `φ(r_max)` of the domain of `γ`.
    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    pub fn gamma(&self, w: f64) -> Result<f64, PotentialError> {
        self.check(w)?;
        Ok(self.table.eval(w))
    }

    /// `γ'(w) = φ''(ψ(w))`.
    pub fn gamma1(&self, w: f64) -> Result<f64, PotentialError> {
        self.check(w)?;
        Ok(self.potential.phi2(psi(&self.potential, w)))
    }

    /// Inverse of `φ` on `[0, r_max]`.
    pub fn psi(&self, w: f64) -> Result<f64, PotentialError> {
        self.check(w)?;
        Ok(psi(&self.potential, w))
    }

    fn check(&self, w: f64) -> Result<(), PotentialError> {
        let slack = 1e-12 * self.w_max.max(1.0);
        if !(w >= -slack && w <= self.w_max + slack) {
            return Err(PotentialError::EntropyRange {
                value: w,
                w_max: self.w_max,
            });
        }
        Ok(())
    }
}

/// Inverts the strictly increasing `φ` on `[0, r_max]` by bisection, run until
/// the bracket can no longer shrink in floating point.
pub(crate) fn psi(p: &RadialPotential, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, p.r_max());
    if w >= p.phi(hi) {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if p.phi(mid) < w {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Constructs `γ` for a certified potential and measures the identity
/// residual on [`IDENTITY_SAMPLES`] points of `[0, r_max]`.
pub fn build_entropy(p: &RadialPotential) -> Result<EntropyData, PotentialError> {
    certify_window(p)?;
    let w_max = p.phi(p.r_max());
    let integrand = |t: f64| p.phi2(psi(p, t));
    let table = CumulativeTable::build(integrand, w_max, TABLE_PANELS);

    // independent route: adaptive Simpson straight from the definition
    let mut simpson_agreement: f64 = 0.0;
    for k in 1..=SIMPSON_CHECKS {
        let w = w_max * k as f64 / SIMPSON_CHECKS as f64;
        let direct = adaptive_simpson(integrand, 0.0, w, SIMPSON_TOL)?;
        simpson_agreement = simpson_agreement.max((direct - table.eval(w)).abs());
    }

    let mut tol: f64 = 0.0;
    let mut worst_z = 0.0;
    for k in 0..IDENTITY_SAMPLES {
        let z = p.r_max() * k as f64 / (IDENTITY_SAMPLES - 1) as f64;
        let residual = (table.eval(p.phi(z)) - 0.5 * p.phi1(z).powi(2)).abs();
        if residual > tol {
            tol = residual;
            worst_z = z;
        }
    }
    if tol > IDENTITY_LIMIT {
        return Err(PotentialError::EntropyIdentity {
            residual: tol,
            z: worst_z,
            limit: IDENTITY_LIMIT,
        });
    }
    Ok(EntropyData {
        potential: p.clone(),
        table,
        w_max,
        tol,
        simpson_agreement,
        samples: IDENTITY_SAMPLES,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{PotentialSpec, RadialProfile};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    #[test]
    fn quadratic_entropy_is_identity() {
        let p = PotentialSpec::Quadratic { r_max: 2.0 }.build().unwrap();
        let e = build_entropy(&p).unwrap();
        for k in 0..=20 {
            let w = e.w_max() * k as f64 / 20.0;
            assert!((e.gamma(w).unwrap() - w).abs() < 1e-14);
            assert_relative_eq!(e.psi(w).unwrap(), (2.0 * w).sqrt(), max_relative = 1e-14);
        }
        assert!(e.tol < 1e-14);
    }

    #[test]
    fn cosh_entropy_matches_closed_form() {
        let p = PotentialSpec::Cosh { r_max: 1.0 }.build().unwrap();
        let e = build_entropy(&p).unwrap();
        // φ''(ψ(t)) = cosh(ψ(t)) = 1 + t, so γ(z) = z + z²/2
        for k in 0..=50 {
            let w = e.w_max() * k as f64 / 50.0;
            assert!((e.gamma(w).unwrap() - (w + 0.5 * w * w)).abs() < 1e-14);
            assert_relative_eq!(e.gamma1(w).unwrap(), 1.0 + w, max_relative = 1e-13);
        }
        let w1 = 1.0f64.cosh() - 1.0;
        assert_relative_eq!(w1, 0.54308, max_relative = 1e-5);
        let g = e.gamma(w1).unwrap();
        assert_relative_eq!(g, 0.5 * 1.0f64.sinh().powi(2), max_relative = 1e-14);
        assert_relative_eq!(g, 0.69055, max_relative = 1e-5);
        assert!(e.simpson_agreement < 1e-9);
    }

    #[test]
    fn every_builtin_passes_the_identity() {
        for spec in PotentialSpec::builtins(1.0) {
            let e = build_entropy(&spec.build().unwrap()).unwrap();
            assert!(e.tol <= 1e-8, "{spec:?}: {}", e.tol);
            assert!(
                e.simpson_agreement < 1e-9,
                "{spec:?}: {}",
                e.simpson_agreement
            );
        }
    }

    #[test]
    fn out_of_range_argument_is_an_error() {
        let p = PotentialSpec::Cosh { r_max: 1.0 }.build().unwrap();
        let e = build_entropy(&p).unwrap();
        assert!(matches!(
            e.gamma(1.0),
            Err(PotentialError::EntropyRange { .. })
        ));
    }

    #[test]
    fn degenerate_quartic_is_rejected() {
        let p = PotentialSpec::PureQuartic { r_max: 1.0 }.build().unwrap();
        assert!(matches!(
            build_entropy(&p),
            Err(PotentialError::Convexity { .. })
        ));
    }

    /// `φ'` deliberately inconsistent with `φ`.
    #[derive(Debug)]
    struct Mismatched;
    impl RadialProfile for Mismatched {
        fn phi(&self, r: f64) -> f64 {
            0.5 * r * r
        }
        fn phi1(&self, r: f64) -> f64 {
            1.1 * r
        }
        fn phi2(&self, _r: f64) -> f64 {
            1.1
        }
    }

    #[test]
    fn inconsistent_evaluators_fail_construction() {
        let p = RadialPotential::new("mismatched", 1.0, Arc::new(Mismatched)).unwrap();
        assert!(matches!(
            build_entropy(&p),
            Err(PotentialError::EntropyIdentity { .. })
        ));
    }
}
