//! Built-in radial profiles and the config-file description of potentials.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{PotentialError, RadialPotential, RadialProfile};

/// `φ(r) = r²/2`.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic;

impl RadialProfile for Quadratic {
    fn phi(&self, r: f64) -> f64 {
        0.5 * r * r
    }
    fn phi1(&self, r: f64) -> f64 {
        r
    }
    fn phi2(&self, _r: f64) -> f64 {
        1.0
    }
    fn phi3(&self, _r: f64) -> f64 {
        0.0
    }
}

/// `φ(r) = cosh r - 1`.
#[derive(Debug, Clone, Copy)]
pub struct CoshMinusOne;

impl RadialProfile for CoshMinusOne {
    fn phi(&self, r: f64) -> f64 {
        // 2 sinh²(r/2) avoids cancellation near zero
        2.0 * (0.5 * r).sinh().powi(2)
    }
    fn phi1(&self, r: f64) -> f64 {
        r.sinh()
    }
    fn phi2(&self, r: f64) -> f64 {
        r.cosh()
    }
    fn phi3(&self, r: f64) -> f64 {
        r.sinh()
    }
}

/// `φ(r) = r²/2 + r⁴/4`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticQuartic;

impl RadialProfile for QuadraticQuartic {
    fn phi(&self, r: f64) -> f64 {
        let r2 = r * r;
        0.5 * r2 + 0.25 * r2 * r2
    }
    fn phi1(&self, r: f64) -> f64 {
        r + r * r * r
    }
    fn phi2(&self, r: f64) -> f64 {
        1.0 + 3.0 * r * r
    }
    fn phi3(&self, r: f64) -> f64 {
        6.0 * r
    }
}

/// `φ(r) = r²/2 + ε r^m` with `m > 2`: porous-medium growth regularised by a
/// quadratic so that `φ''(0) = 1`.
#[derive(Debug, Clone, Copy)]
pub struct SmoothedPorous {
    pub eps: f64,
    pub m: f64,
}

impl RadialProfile for SmoothedPorous {
    fn phi(&self, r: f64) -> f64 {
        0.5 * r * r + self.eps * r.powf(self.m)
    }
    fn phi1(&self, r: f64) -> f64 {
        r + self.eps * self.m * r.powf(self.m - 1.0)
    }
    fn phi2(&self, r: f64) -> f64 {
        1.0 + self.eps * self.m * (self.m - 1.0) * r.powf(self.m - 2.0)
    }
    fn phi3(&self, r: f64) -> f64 {
        let m = self.m;
        if m == 3.0 {
            return 6.0 * self.eps;
        }
        self.eps * m * (m - 1.0) * (m - 2.0) * r.powf(m - 3.0)
    }
}

/// `φ(r) = r⁴/4`: degenerate at the origin, kept to exercise rejection.
#[derive(Debug, Clone, Copy)]
pub struct PureQuartic;

impl RadialProfile for PureQuartic {
    fn phi(&self, r: f64) -> f64 {
        0.25 * r.powi(4)
    }
    fn phi1(&self, r: f64) -> f64 {
        r.powi(3)
    }
    fn phi2(&self, r: f64) -> f64 {
        3.0 * r * r
    }
    fn phi3(&self, r: f64) -> f64 {
        6.0 * r
    }
}

/// One polynomial piece `φ(r) = Σ_k coeffs[k] (r - start)^k` on
/// `[start, next start)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyPiece {
    pub start: f64,
    pub coeffs: Vec<f64>,
}

/// Piecewise polynomial profile read from a config table.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolynomial {
    pieces: Vec<PolyPiece>,
}

impl PiecewisePolynomial {
    pub fn new(mut pieces: Vec<PolyPiece>) -> Result<Self, PotentialError> {
        if pieces.is_empty() {
            return Err(PotentialError::Table("no pieces".into()));
        }
        pieces.sort_by(|a, b| a.start.total_cmp(&b.start));
        if pieces[0].start != 0.0 {
            return Err(PotentialError::Table(format!(
                "first piece starts at {}, expected 0",
                pieces[0].start
            )));
        }
        if pieces.windows(2).any(|w| w[0].start == w[1].start) {
            return Err(PotentialError::Table("duplicate piece start".into()));
        }
        if pieces
            .iter()
            .any(|p| p.coeffs.is_empty() || p.coeffs.iter().any(|c| !c.is_finite()))
        {
            return Err(PotentialError::Table(
                "every piece needs finite coefficients".into(),
            ));
        }
        Ok(Self { pieces })
    }

    fn piece(&self, r: f64) -> &PolyPiece {
        let k = self.pieces.partition_point(|p| p.start <= r);
        &self.pieces[k.saturating_sub(1)]
    }

    fn derivative(&self, r: f64, order: usize) -> f64 {
        let p = self.piece(r);
        let s = r - p.start;
        // Horner on the differentiated coefficients
        let mut acc = 0.0;
        for (k, &c) in p.coeffs.iter().enumerate().skip(order).rev() {
            let falling: f64 = (0..order).map(|j| (k - j) as f64).product();
            acc = acc * s + c * falling;
        }
        acc
    }
}

impl RadialProfile for PiecewisePolynomial {
    fn phi(&self, r: f64) -> f64 {
        self.derivative(r, 0)
    }
    fn phi1(&self, r: f64) -> f64 {
        self.derivative(r, 1)
    }
    fn phi2(&self, r: f64) -> f64 {
        self.derivative(r, 2)
    }
    fn phi3(&self, r: f64) -> f64 {
        self.derivative(r, 3)
    }
}

fn default_eps() -> f64 {
    0.25
}

fn default_m() -> f64 {
    3.0
}

/// Potential selection as it appears in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Quadratic {
        r_max: f64,
    },
    Cosh {
        r_max: f64,
    },
    Quartic {
        r_max: f64,
    },
    Porous {
        r_max: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default = "default_m")]
        m: f64,
    },
    PureQuartic {
        r_max: f64,
    },
    Custom {
        r_max: f64,
        pieces: Vec<PolyPiece>,
    },
}

impl PotentialSpec {
    pub fn r_max(&self) -> f64 {
        match self {
            PotentialSpec::Quadratic { r_max }
            | PotentialSpec::Cosh { r_max }
            | PotentialSpec::Quartic { r_max }
            | PotentialSpec::Porous { r_max, .. }
            | PotentialSpec::PureQuartic { r_max }
            | PotentialSpec::Custom { r_max, .. } => *r_max,
        }
    }

    /// Parses a bare built-in id (`quadratic`, `cosh`, `quartic`, `porous`,
    /// `pure_quartic`).
    pub fn from_id(id: &str, r_max: f64) -> Result<Self, PotentialError> {
        Ok(match id {
            "quadratic" => PotentialSpec::Quadratic { r_max },
            "cosh" => PotentialSpec::Cosh { r_max },
            "quartic" => PotentialSpec::Quartic { r_max },
            "porous" => PotentialSpec::Porous {
                r_max,
                eps: default_eps(),
                m: default_m(),
            },
            "pure_quartic" => PotentialSpec::PureQuartic { r_max },
            other => return Err(PotentialError::UnknownId(other.to_string())),
        })
    }

    pub fn build(&self) -> Result<RadialPotential, PotentialError> {
        let r_max = self.r_max();
        let (id, profile): (String, Arc<dyn RadialProfile>) = match self {
            PotentialSpec::Quadratic { .. } => ("quadratic".into(), Arc::new(Quadratic)),
            PotentialSpec::Cosh { .. } => ("cosh".into(), Arc::new(CoshMinusOne)),
            PotentialSpec::Quartic { .. } => ("quartic".into(), Arc::new(QuadraticQuartic)),
            PotentialSpec::Porous { eps, m, .. } => {
                if !(*m > 2.0 && *eps > 0.0) {
                    return Err(PotentialError::Table(format!(
                        "porous potential needs m > 2 and eps > 0 (got m = {m}, eps = {eps})"
                    )));
                }
                (
                    format!("porous(eps={eps},m={m})"),
                    Arc::new(SmoothedPorous { eps: *eps, m: *m }),
                )
            }
            PotentialSpec::PureQuartic { .. } => ("pure_quartic".into(), Arc::new(PureQuartic)),
            PotentialSpec::Custom { pieces, .. } => (
                "custom".into(),
                Arc::new(PiecewisePolynomial::new(pieces.clone())?),
            ),
        };
        RadialPotential::new(id, r_max, profile)
    }

    /// The built-in library used by sweeps and certification tests.
    pub fn builtins(r_max: f64) -> Vec<PotentialSpec> {
        ["quadratic", "cosh", "quartic", "porous"]
            .iter()
            .map(|id| Self::from_id(id, r_max).expect("built-in id"))
            .collect()
    }
}
