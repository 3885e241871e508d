//! Empirical Hölder seminorm of a snapshot.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DiagnosticsError;
use crate::grid::{FieldState, MAX_DIM};

/// Grids with at most this many points per axis (and at most two axes) are
/// searched exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 64;
/// Minimum number of sampled pairs.
pub const MIN_SAMPLES: usize = 10_000;

/// Admissible pair distances `lo ≤ |x - y| ≤ hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderBand {
    pub lo: f64,
    pub hi: f64,
}

/// `max |u(x) - u(y)| / |x - y|^α` over pairs whose distance lies in the
/// band. Pairs never wrap around a periodic axis. The band must lie in
/// `[2h, L/4]`.
pub fn holder_seminorm(
    state: &FieldState,
    alpha: f64,
    band: HolderBand,
    samples: usize,
    seed: u64,
) -> Result<f64, DiagnosticsError> {
    let grid = state.grid();
    let h = grid.h();
    let shortest = (0..grid.dim())
        .map(|a| grid.extent(a))
        .fold(f64::INFINITY, f64::min);
    let slack = 1e-9 * h;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(DiagnosticsError::Precondition(format!(
            "α = {alpha} outside (0, 1]"
        )));
    }
    if !(band.lo >= 2.0 * h - slack && band.hi <= 0.25 * shortest + slack && band.lo <= band.hi) {
        return Err(DiagnosticsError::Precondition(format!(
            "band [{}, {}] not inside [2h, L/4] = [{}, {}]",
            band.lo,
            band.hi,
            2.0 * h,
            0.25 * shortest
        )));
    }
    let dim = grid.dim();
    let reach = (band.hi / h + 1e-9).floor() as i64;
    let in_band = |off: &[i64]| {
        let d = h * (off.iter().map(|&o| (o * o) as f64).sum::<f64>()).sqrt();
        d >= band.lo - slack && d <= band.hi + slack
    };
    let nc = state.components();
    let len = grid.len();
    let quotient = |i: usize, j: usize, dist: f64| {
        let mut d2 = 0.0;
        for c in 0..nc {
            let f = state.component(c);
            d2 += (f[i] - f[j]).powi(2);
        }
        d2.sqrt() / dist.powf(alpha)
    };
    let shift = |i: usize, off: &[i64]| -> Option<usize> {
        let c = grid.coords(i);
        let mut target = [0usize; MAX_DIM];
        for a in 0..dim {
            let x = c[a] as i64 + off[a];
            if x < 0 || x >= grid.sizes()[a] as i64 {
                return None;
            }
            target[a] = x as usize;
        }
        Some(grid.index(&target[..dim]))
    };
    let distance = |off: &[i64]| h * (off.iter().map(|&o| (o * o) as f64).sum::<f64>()).sqrt();

    let exhaustive = dim <= 2 && grid.sizes().iter().all(|&s| s <= EXHAUSTIVE_LIMIT);
    let mut best: f64 = 0.0;
    if exhaustive {
        let offsets: Vec<Vec<i64>> = cube(dim, reach)
            .into_iter()
            .filter(|o| in_band(o))
            .collect();
        for i in 0..len {
            for off in &offsets {
                if let Some(j) = shift(i, off) {
                    best = best.max(quotient(i, j, distance(off)));
                }
            }
        }
        return Ok(best);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = samples.max(MIN_SAMPLES);
    let mut taken = 0;
    let mut off = vec![0i64; dim];
    let mut attempts = 0usize;
    while taken < target {
        attempts += 1;
        if attempts > 1000 * target {
            return Err(DiagnosticsError::Precondition(
                "no admissible pairs found for the band".into(),
            ));
        }
        let i = rng.gen_range(0..len);
        for o in off.iter_mut() {
            *o = rng.gen_range(-reach..=reach);
        }
        if !in_band(&off) {
            continue;
        }
        if let Some(j) = shift(i, &off) {
            best = best.max(quotient(i, j, distance(&off)));
            taken += 1;
        }
    }
    Ok(best)
}

fn cube(dim: usize, reach: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                (-reach..=reach).map(move |k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect();
    }
    out
}
