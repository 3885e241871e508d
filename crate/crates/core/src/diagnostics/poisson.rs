//! Discrete `H⁻¹` norms through the Poisson problem `Δ_h w = f`.
//!
//! * Dirichlet grids: `w = 0` on the boundary layer, `f` read on the interior.
//! * Periodic grids: `f` is projected onto mean-zero fields and `w` is the
//!   mean-zero solution.
//!
//! Either way `‖f‖²_{H⁻¹} = Σ_edges |w_p - w_i|²/h² · hⁿ` over forward
//! edges, which by summation by parts equals `-hⁿ ⟨w, f⟩`.

use super::DiagnosticsError;
use crate::grid::{pairwise_sum, Boundary, GridSpec, MAX_DIM};

/// Relative residual at which conjugate gradients stop.
pub const CG_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution {
    /// Solution on the full grid (zero on a Dirichlet boundary layer).
    pub w: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Mean removed from `f` on periodic grids (zero otherwise).
    pub removed_mean: f64,
}

struct Operator<'a> {
    grid: &'a GridSpec,
    points: Vec<usize>,
    nbrs: Vec<[[usize; 2]; MAX_DIM]>,
}

impl<'a> Operator<'a> {
    fn new(grid: &'a GridSpec) -> Self {
        let points = grid.interior_indices();
        let nbrs = points
            .iter()
            .map(|&i| {
                let mut row = [[i; 2]; MAX_DIM];
                for (axis, slot) in row.iter_mut().enumerate().take(grid.dim()) {
                    *slot = [
                        grid.neighbor(i, axis, false).expect("interior"),
                        grid.neighbor(i, axis, true).expect("interior"),
                    ];
                }
                row
            })
            .collect();
        Self { grid, points, nbrs }
    }

    /// `-h² Δ_h` restricted to the updated points, acting on vectors over
    /// those points (compact indexing).
    fn apply(&self, x: &[f64], full: &mut [f64], out: &mut [f64]) {
        for (k, &i) in self.points.iter().enumerate() {
            full[i] = x[k];
        }
        let dim = self.grid.dim();
        for (k, &i) in self.points.iter().enumerate() {
            let mut acc = 0.0;
            for [m, p] in &self.nbrs[k][..dim] {
                acc += 2.0 * full[i] - full[*m] - full[*p];
            }
            out[k] = acc;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    pairwise_sum(&prods)
}

fn remove_mean(x: &mut [f64]) -> f64 {
    let mean = pairwise_sum(x) / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
    mean
}

/// Solves `Δ_h w = f` by conjugate gradients to relative residual
/// [`CG_TOLERANCE`].
pub fn solve_dirichlet_poisson(
    f: &[f64],
    grid: &GridSpec,
) -> Result<PoissonSolution, DiagnosticsError> {
    grid.check_len(f.len(), 1)?;
    if f.iter().any(|v| !v.is_finite()) {
        return Err(DiagnosticsError::Precondition(
            "Poisson right-hand side is not finite".into(),
        ));
    }
    let op = Operator::new(grid);
    let periodic = grid.boundary() == Boundary::Periodic;
    let h2 = grid.h() * grid.h();
    let m = op.points.len();
    // -h² Δ w = -h² f
    let mut b: Vec<f64> = op.points.iter().map(|&i| -h2 * f[i]).collect();
    let removed_mean = if periodic {
        -remove_mean(&mut b) / h2
    } else {
        0.0
    };
    let b_norm = dot(&b, &b).sqrt();
    let mut x = vec![0.0; m];
    let mut full = vec![0.0; grid.len()];
    if b_norm == 0.0 {
        return Ok(PoissonSolution {
            w: full,
            iterations: 0,
            residual: 0.0,
            removed_mean,
        });
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; m];
    let mut rr = dot(&r, &r);
    let max_iter = 20 * m + 100;
    let mut iterations = 0;
    while rr.sqrt() > CG_TOLERANCE * b_norm {
        if iterations >= max_iter {
            return Err(DiagnosticsError::NoConvergence {
                residual: rr.sqrt() / b_norm,
                iterations,
            });
        }
        op.apply(&p, &mut full, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for k in 0..m {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        if periodic {
            remove_mean(&mut r);
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for k in 0..m {
            p[k] = r[k] + beta * p[k];
        }
        rr = rr_new;
        iterations += 1;
    }
    if periodic {
        remove_mean(&mut x);
    }
    // true residual, not the recursively updated one
    op.apply(&x, &mut full, &mut ap);
    let true_res: Vec<f64> = ap.iter().zip(&b).map(|(a, b)| a - b).collect();
    let residual = dot(&true_res, &true_res).sqrt() / b_norm;
    let mut w = vec![0.0; grid.len()];
    for (k, &i) in op.points.iter().enumerate() {
        w[i] = x[k];
    }
    Ok(PoissonSolution {
        w,
        iterations,
        residual,
        removed_mean,
    })
}

/// `sqrt(Σ_forward edges |w_p - w_i|²/h² · hⁿ)`.
fn energy(w: &[f64], grid: &GridSpec) -> f64 {
    let mut terms = Vec::with_capacity(grid.len() * grid.dim());
    for i in 0..grid.len() {
        for axis in 0..grid.dim() {
            if let Some(p) = grid.neighbor(i, axis, true) {
                let d = w[p] - w[i];
                terms.push(d * d);
            }
        }
    }
    (pairwise_sum(&terms) * grid.cell_volume() / (grid.h() * grid.h())).sqrt()
}

/// Discrete `H⁻¹` norm of a scalar field.
pub fn h_minus_one_norm(f: &[f64], grid: &GridSpec) -> Result<f64, DiagnosticsError> {
    let sol = solve_dirichlet_poisson(f, grid)?;
    Ok(energy(&sol.w, grid))
}

/// Root of the summed squared component norms of a component-major field.
pub fn h_minus_one_norm_vector(
    values: &[f64],
    components: usize,
    grid: &GridSpec,
) -> Result<f64, DiagnosticsError> {
    grid.check_len(values.len(), components)?;
    let len = grid.len();
    let mut total = 0.0;
    for c in 0..components {
        total += h_minus_one_norm(&values[c * len..(c + 1) * len], grid)?.powi(2);
    }
    Ok(total.sqrt())
}

/// `sqrt(Σ f² hⁿ)` over the points the Poisson problem sees (the interior
/// on Dirichlet grids; the mean-free part on periodic grids).
pub fn discrete_l2_norm(f: &[f64], grid: &GridSpec) -> f64 {
    let mut vals: Vec<f64> = grid.interior_indices().iter().map(|&i| f[i]).collect();
    if grid.boundary() == Boundary::Periodic {
        remove_mean(&mut vals);
    }
    let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
    (pairwise_sum(&sq) * grid.cell_volume()).sqrt()
}

/// `C_P = μ₁^{-1/2}`, with `μ₁` the smallest eigenvalue of `-Δ_h` on the
/// Poisson problem's space: `Σ_a (4/h²) sin²(π/(2(size_a - 1)))` for
/// Dirichlet, `min_a (4/h²) sin²(π/size_a)` for periodic. Then
/// `‖f‖_{H⁻¹} <= C_P ‖f‖_{L²}`.
pub fn poincare_constant(grid: &GridSpec) -> f64 {
    use std::f64::consts::PI;
    let scale = 4.0 / (grid.h() * grid.h());
    let mu = match grid.boundary() {
        Boundary::Dirichlet => grid
            .sizes()
            .iter()
            .map(|&s| scale * (PI / (2.0 * (s - 1) as f64)).sin().powi(2))
            .sum::<f64>(),
        Boundary::Periodic => grid
            .sizes()
            .iter()
            .map(|&s| scale * (PI / s as f64).sin().powi(2))
            .fold(f64::INFINITY, f64::min),
    };
    1.0 / mu.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::laplacian;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn dirichlet(n: usize, size: usize) -> GridSpec {
        GridSpec::unit(n, size, Boundary::Dirichlet).unwrap()
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let g = dirichlet(2, 16);
        assert_eq!(h_minus_one_norm(&vec![0.0; g.len()], &g).unwrap(), 0.0);
    }

    #[test]
    fn sine_matches_the_continuum_value() {
        let g = dirichlet(1, 129);
        let f: Vec<f64> = (0..g.len())
            .map(|i| (PI * g.position(i)[0]).sin())
            .collect();
        let norm = h_minus_one_norm(&f, &g).unwrap();
        let exact = (1.0 / (2.0 * PI * PI)).sqrt();
        assert_relative_eq!(exact, 0.22508, max_relative = 1e-4);
        assert!((norm - exact).abs() < 2.0 * g.h() * g.h());
    }

    #[test]
    fn inverting_a_laplacian_recovers_the_energy() {
        for n in 1..=2 {
            let g = dirichlet(n, 20);
            let w: Vec<f64> = (0..g.len())
                .map(|i| {
                    if g.is_boundary(i) {
                        0.0
                    } else {
                        let x = g.position(i);
                        (3.0 * x[0]).sin() + x[1] * x[1] + 0.1 * i as f64 % 0.7
                    }
                })
                .collect();
            let f = laplacian(&w, &g).unwrap();
            let norm = h_minus_one_norm(&f, &g).unwrap();
            // oracle: forward-difference energy of w itself
            let mut acc = 0.0;
            for i in 0..g.len() {
                for axis in 0..n {
                    if let Some(p) = g.neighbor(i, axis, true) {
                        acc += (w[p] - w[i]).powi(2);
                    }
                }
            }
            let oracle = (acc * g.cell_volume() / (g.h() * g.h())).sqrt();
            assert_relative_eq!(norm, oracle, max_relative = 1e-10);
        }
    }

    #[test]
    fn periodic_path_uses_the_mean_free_part() {
        let g = GridSpec::unit(1, 64, Boundary::Periodic).unwrap();
        let f: Vec<f64> = (0..64)
            .map(|i| 3.0 + (2.0 * PI * g.position(i)[0]).cos())
            .collect();
        let sol = solve_dirichlet_poisson(&f, &g).unwrap();
        assert_relative_eq!(sol.removed_mean, 3.0, max_relative = 1e-12);
        // cos(2πx) is an eigenfunction: norm = ‖f‖ / sqrt(μ)
        let mu = 4.0 / (g.h() * g.h()) * (PI * g.h()).sin().powi(2);
        let expected = (0.5f64).sqrt() / mu.sqrt();
        assert_relative_eq!(
            h_minus_one_norm(&f, &g).unwrap(),
            expected,
            max_relative = 1e-10
        );
    }

    #[test]
    fn poincare_constant_matches_inverse_iteration() {
        let g = dirichlet(2, 12);
        // inverse iteration with the Poisson solver
        let mut x: Vec<f64> = (0..g.len())
            .map(|i| if g.is_boundary(i) { 0.0 } else { 1.0 })
            .collect();
        let mut mu = 0.0;
        for _ in 0..60 {
            let sol = solve_dirichlet_poisson(&x, &g).unwrap();
            let y: Vec<f64> = sol.w.iter().map(|v| -v).collect();
            let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            mu = nx / ny;
            x = y.iter().map(|v| v / ny).collect();
        }
        assert_relative_eq!(poincare_constant(&g), 1.0 / mu.sqrt(), max_relative = 1e-9);
    }
}
