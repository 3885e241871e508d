//! Uniform rectangular grids, discrete fields and the stencil calculus shared
//! by the solver and the diagnostics.
//!
//! Points are stored row-major with the last axis fastest. Vector fields are
//! stored component-major: component `c` of point `i` lives at
//! `values[c * grid.len() + i]`.
//!
//! Dirichlet grids carry a one-cell boundary layer: every point with a
//! coordinate equal to `0` or `size - 1` on some axis is a boundary point and
//! holds a fixed value per component.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest spatial dimension supported by the grid.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("unsupported dimension {0} (expected 1, 2 or 3)")]
    Dimension(usize),
    #[error("axis {axis} has {size} points; at least 4 are required")]
    TooSmall { axis: usize, size: usize },
    #[error("grid spacing must be positive and finite, got {0}")]
    Spacing(f64),
    #[error("field has {got} values, expected {expected}")]
    Shape { expected: usize, got: usize },
    #[error("non-finite value {value} at component {component}, point {index}")]
    NonFinite {
        component: usize,
        index: usize,
        value: f64,
    },
    #[error("boundary point {index} of component {component} holds {value}, expected {expected}")]
    BoundaryMismatch {
        component: usize,
        index: usize,
        value: f64,
        expected: f64,
    },
    #[error("cylinder does not fit: {0}")]
    Cylinder(String),
    #[error("trajectory is inconsistent: {0}")]
    Trajectory(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

impl Boundary {
    pub fn code(self) -> u8 {
        match self {
            Boundary::Periodic => 0,
            Boundary::Dirichlet => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Boundary::Periodic),
            1 => Some(Boundary::Dirichlet),
            _ => None,
        }
    }
}

/// Uniform grid with the same spacing on every axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    h: f64,
    boundary: Boundary,
    len: usize,
}

impl GridSpec {
    pub fn new(sizes: &[usize], h: f64, boundary: Boundary) -> Result<Self, GridError> {
        let n = sizes.len();
        if n == 0 || n > MAX_DIM {
            return Err(GridError::Dimension(n));
        }
        if let Some((axis, &size)) = sizes.iter().enumerate().find(|(_, &s)| s < 4) {
            return Err(GridError::TooSmall { axis, size });
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(GridError::Spacing(h));
        }
        let mut strides = vec![1; n];
        for axis in (0..n.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * sizes[axis + 1];
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            strides,
            h,
            boundary,
            len: sizes.iter().product(),
        })
    }

    /// Grid covering the unit cube: `h = 1/size` when periodic,
    /// `h = 1/(size - 1)` when Dirichlet (boundary points at 0 and 1).
    pub fn unit(n: usize, size: usize, boundary: Boundary) -> Result<Self, GridError> {
        let cells = match boundary {
            Boundary::Periodic => size,
            Boundary::Dirichlet => size.saturating_sub(1).max(1),
        };
        Self::new(&vec![size; n], 1.0 / cells as f64, boundary)
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Volume element `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    /// Physical length of an axis: the period for periodic grids, the
    /// distance between the two boundary layers for Dirichlet grids.
    pub fn extent(&self, axis: usize) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.sizes[axis] as f64 * self.h,
            Boundary::Dirichlet => (self.sizes[axis] - 1) as f64 * self.h,
        }
    }

    pub fn coords(&self, index: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        let mut rem = index;
        for (o, &stride) in out.iter_mut().zip(&self.strides) {
            *o = rem / stride;
            rem %= stride;
        }
        out
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    /// Physical position `x = i * h` per axis (unused axes are zero).
    pub fn position(&self, index: usize) -> [f64; MAX_DIM] {
        let c = self.coords(index);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim() {
            x[axis] = c[axis] as f64 * self.h;
        }
        x
    }

    pub fn is_boundary(&self, index: usize) -> bool {
        if self.boundary == Boundary::Periodic {
            return false;
        }
        let c = self.coords(index);
        (0..self.dim()).any(|a| c[a] == 0 || c[a] + 1 == self.sizes[a])
    }

    /// Points updated by the solver: all points when periodic, the points off
    /// the boundary layer when Dirichlet.
    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| !self.is_boundary(i)).collect()
    }

    pub fn boundary_indices(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.is_boundary(i)).collect()
    }

    /// Neighbour one step along `axis` in direction `forward`; periodic grids
    /// wrap, Dirichlet grids return `None` past the edge.
    #[inline]
    pub fn neighbor(&self, index: usize, axis: usize, forward: bool) -> Option<usize> {
        let stride = self.strides[axis];
        let size = self.sizes[axis];
        let c = (index / stride) % size;
        match (forward, self.boundary) {
            (true, _) if c + 1 < size => Some(index + stride),
            (false, _) if c > 0 => Some(index - stride),
            (_, Boundary::Dirichlet) => None,
            (true, Boundary::Periodic) => Some(index + stride - size * stride),
            (false, Boundary::Periodic) => Some(index + (size - 1) * stride),
        }
    }

    #[inline]
    pub(crate) fn neighbors_unchecked(&self, index: usize, axis: usize) -> (usize, usize) {
        (
            self.neighbor(index, axis, false).expect("interior point"),
            self.neighbor(index, axis, true).expect("interior point"),
        )
    }

    /// Euclidean distance between grid points. Periodic grids use the
    /// minimum-image convention.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let ca = self.coords(a);
        let cb = self.coords(b);
        let mut d2 = 0.0;
        for axis in 0..self.dim() {
            let mut d = ca[axis].abs_diff(cb[axis]);
            if self.boundary == Boundary::Periodic {
                d = d.min(self.sizes[axis] - d);
            }
            d2 += (d as f64 * self.h).powi(2);
        }
        d2.sqrt()
    }

    pub(crate) fn check_len(&self, got: usize, components: usize) -> Result<(), GridError> {
        let expected = self.len * components;
        if got != expected {
            return Err(GridError::Shape { expected, got });
        }
        Ok(())
    }
}

/// N-component discrete field on a grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    grid: GridSpec,
    components: usize,
    values: Vec<f64>,
    t: f64,
    boundary_values: Vec<f64>,
}

impl FieldState {
    /// Builds a state and checks its invariants. For Dirichlet grids
    /// `boundary_values` (one per component, default zero) must match the
    /// boundary layer exactly.
    pub fn new(
        grid: GridSpec,
        components: usize,
        values: Vec<f64>,
        t: f64,
        boundary_values: Option<Vec<f64>>,
    ) -> Result<Self, GridError> {
        grid.check_len(values.len(), components)?;
        let boundary_values = boundary_values.unwrap_or_else(|| vec![0.0; components]);
        if boundary_values.len() != components {
            return Err(GridError::Shape {
                expected: components,
                got: boundary_values.len(),
            });
        }
        let state = Self {
            grid,
            components,
            values,
            t,
            boundary_values,
        };
        state.check_finite()?;
        if state.grid.boundary == Boundary::Dirichlet {
            for c in 0..components {
                let expected = state.boundary_values[c];
                for i in state.grid.boundary_indices() {
                    let value = state.values[c * state.grid.len + i];
                    if value != expected {
                        return Err(GridError::BoundaryMismatch {
                            component: c,
                            index: i,
                            value,
                            expected,
                        });
                    }
                }
            }
        }
        Ok(state)
    }

    /// Samples `f(x, out)` at every point; Dirichlet boundary points receive
    /// `boundary_values` instead.
    pub fn from_fn<F>(
        grid: GridSpec,
        components: usize,
        t: f64,
        boundary_values: Option<Vec<f64>>,
        mut f: F,
    ) -> Result<Self, GridError>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let len = grid.len();
        let bv = boundary_values.unwrap_or_else(|| vec![0.0; components]);
        let mut values = vec![0.0; len * components];
        let mut point = vec![0.0; components];
        for i in 0..len {
            if grid.is_boundary(i) {
                point.copy_from_slice(&bv);
            } else {
                let x = grid.position(i);
                f(&x[..grid.dim()], &mut point);
            }
            for c in 0..components {
                values[c * len + i] = point[c];
            }
        }
        Self::new(grid, components, values, t, Some(bv))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn boundary_values(&self) -> &[f64] {
        &self.boundary_values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let len = self.grid.len;
        &self.values[c * len..(c + 1) * len]
    }

    pub fn point(&self, index: usize, out: &mut [f64]) {
        let len = self.grid.len;
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.values[c * len + index];
        }
    }

    /// Euclidean norm `|u(x)|` at a point.
    pub fn norm_at(&self, index: usize) -> f64 {
        let len = self.grid.len;
        (0..self.components)
            .map(|c| self.values[c * len + index].powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `sup_x |u(x)|` with the index where it is attained.
    pub fn sup_norm(&self) -> (f64, usize) {
        (0..self.grid.len)
            .map(|i| (self.norm_at(i), i))
            .fold((0.0, 0), |acc, x| if x.0 > acc.0 { x } else { acc })
    }

    pub(crate) fn into_parts(self) -> (GridSpec, usize, Vec<f64>, f64, Vec<f64>) {
        (
            self.grid,
            self.components,
            self.values,
            self.t,
            self.boundary_values,
        )
    }

    /// Replaces the values without re-validating the boundary layer; used by
    /// steppers which re-impose it themselves.
    pub(crate) fn from_parts_unchecked(
        grid: GridSpec,
        components: usize,
        values: Vec<f64>,
        t: f64,
        boundary_values: Vec<f64>,
    ) -> Self {
        Self {
            grid,
            components,
            values,
            t,
            boundary_values,
        }
    }

    fn check_finite(&self) -> Result<(), GridError> {
        check_finite(&self.values, self.grid.len)
    }
}

pub(crate) fn check_finite(values: &[f64], len: usize) -> Result<(), GridError> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(p) => Err(GridError::NonFinite {
            component: p / len.max(1),
            index: p % len.max(1),
            value: values[p],
        }),
    }
}

/// Pairwise (tree) summation; rounding error grows like `log n` instead of `n`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Discrete Laplacian with the `2n + 1`-point stencil.
///
/// Periodic grids produce output everywhere; on Dirichlet grids boundary
/// entries of the output are zero and only the interior is meaningful.
pub fn laplacian(f: &[f64], grid: &GridSpec) -> Result<Vec<f64>, GridError> {
    grid.check_len(f.len(), 1)?;
    check_finite(f, grid.len())?;
    let mut out = vec![0.0; grid.len()];
    laplacian_into(f, grid, &mut out);
    Ok(out)
}

pub(crate) fn laplacian_into(f: &[f64], grid: &GridSpec, out: &mut [f64]) {
    let inv_h2 = 1.0 / (grid.h * grid.h);
    for (i, o) in out.iter_mut().enumerate() {
        if grid.is_boundary(i) {
            *o = 0.0;
            continue;
        }
        *o = laplacian_at(f, grid, i) * inv_h2;
    }
}

/// Sum over axes of `f[i-1] - 2 f[i] + f[i+1]` (not yet divided by `h^2`).
#[inline]
pub(crate) fn laplacian_at(f: &[f64], grid: &GridSpec, i: usize) -> f64 {
    let mut acc = 0.0;
    for axis in 0..grid.dim() {
        let (m, p) = grid.neighbors_unchecked(i, axis);
        acc += (f[m] - f[i]) + (f[p] - f[i]);
    }
    acc
}

/// `|∇u|^2` summed over components and axes.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSquared {
    pub values: Vec<f64>,
    /// Points where first-order one-sided differences were used (the
    /// Dirichlet boundary layer). Empty on periodic grids.
    pub lower_order: Vec<usize>,
}

/// Squared gradient of a (vector) field: central differences in the interior,
/// first-order one-sided differences on the Dirichlet boundary layer.
pub fn gradient_sq(
    values: &[f64],
    components: usize,
    grid: &GridSpec,
) -> Result<GradientSquared, GridError> {
    grid.check_len(values.len(), components)?;
    check_finite(values, grid.len())?;
    let len = grid.len();
    let mut out = vec![0.0; len];
    let mut lower_order = Vec::new();
    for (i, o) in out.iter_mut().enumerate() {
        let boundary = grid.is_boundary(i);
        if boundary {
            lower_order.push(i);
        }
        for c in 0..components {
            let f = &values[c * len..(c + 1) * len];
            for axis in 0..grid.dim() {
                let d = if boundary {
                    one_sided_derivative(f, grid, i, axis)
                } else {
                    central_derivative(f, grid, i, axis)
                };
                *o += d * d;
            }
        }
    }
    Ok(GradientSquared {
        values: out,
        lower_order,
    })
}

#[inline]
pub(crate) fn central_derivative(f: &[f64], grid: &GridSpec, i: usize, axis: usize) -> f64 {
    let (m, p) = grid.neighbors_unchecked(i, axis);
    (f[p] - f[m]) / (2.0 * grid.h)
}

fn one_sided_derivative(f: &[f64], grid: &GridSpec, i: usize, axis: usize) -> f64 {
    match (grid.neighbor(i, axis, false), grid.neighbor(i, axis, true)) {
        (Some(m), Some(p)) => (f[p] - f[m]) / (2.0 * grid.h),
        (None, Some(p)) => (f[p] - f[i]) / grid.h,
        (Some(m), None) => (f[i] - f[m]) / grid.h,
        (None, None) => 0.0,
    }
}

/// Discrete parabolic cylinder `Q(x0, t0, R) = B(x0, R) x (t0 - R^2, t0]`.
///
/// A grid point belongs to the ball iff its Euclidean distance to the centre
/// is at most `R`; a snapshot belongs to the window iff
/// `t0 - R^2 < t <= t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub center: usize,
    pub t0: f64,
    pub radius: f64,
}

impl Cylinder {
    pub fn new(center: usize, t0: f64, radius: f64) -> Self {
        Self { center, t0, radius }
    }

    /// Cylinder of the same centre with radius scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            radius: self.radius * factor,
            ..*self
        }
    }

    /// Grid points of the ball. The ball must fit inside the domain without
    /// wrapping.
    pub fn ball(&self, grid: &GridSpec) -> Result<Vec<usize>, GridError> {
        if self.center >= grid.len() {
            return Err(GridError::Cylinder(format!(
                "centre index {} outside grid of {} points",
                self.center,
                grid.len()
            )));
        }
        let c = grid.coords(self.center);
        let reach = (self.radius / grid.h + 1e-9).floor() as usize;
        let mut lo = [0usize; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        for axis in 0..grid.dim() {
            let last = grid.sizes()[axis] - 1;
            if c[axis] < reach || c[axis] + reach > last {
                return Err(GridError::Cylinder(format!(
                    "ball of radius {} around coordinate {} leaves axis {} (0..={})",
                    self.radius, c[axis], axis, last
                )));
            }
            lo[axis] = c[axis] - reach;
            hi[axis] = c[axis] + reach;
        }
        let r2 = self.radius * self.radius * (1.0 + 1e-12);
        let mut points = Vec::new();
        let mut cur = lo;
        loop {
            let mut d2 = 0.0;
            for axis in 0..grid.dim() {
                d2 += ((cur[axis] as f64 - c[axis] as f64) * grid.h).powi(2);
            }
            if d2 <= r2 {
                points.push(grid.index(&cur[..grid.dim()]));
            }
            // odometer increment, last axis fastest
            let mut axis = grid.dim();
            loop {
                if axis == 0 {
                    return Ok(points);
                }
                axis -= 1;
                if cur[axis] < hi[axis] {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = lo[axis];
            }
        }
    }

    /// Indices of the snapshots inside the time window. The whole window
    /// must lie inside `[times[0], times[last]]` and hold at least two
    /// snapshots.
    pub fn window(&self, times: &[f64]) -> Result<std::ops::Range<usize>, GridError> {
        if times.is_empty() {
            return Err(GridError::Cylinder("trajectory has no snapshots".into()));
        }
        let spacing = if times.len() > 1 {
            times[1] - times[0]
        } else {
            1.0
        };
        let slack = 1e-9 * spacing;
        let start = self.t0 - self.radius * self.radius;
        let first = times[0];
        let last = *times.last().unwrap();
        if start < first - slack {
            return Err(GridError::Cylinder(format!(
                "time window starts at {start} before the first snapshot at {first}"
            )));
        }
        if self.t0 > last + slack {
            return Err(GridError::Cylinder(format!(
                "time window ends at {} after the last snapshot at {last}",
                self.t0
            )));
        }
        let lo = times.partition_point(|&t| t <= start + slack);
        let hi = times.partition_point(|&t| t <= self.t0 + slack);
        if hi < lo + 2 {
            return Err(GridError::Cylinder(format!(
                "time window ({start}, {}] holds {} snapshot(s); at least 2 are required",
                self.t0,
                hi.saturating_sub(lo)
            )));
        }
        Ok(lo..hi)
    }
}

/// Run metadata carried alongside the snapshots.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMeta {
    pub potential_id: String,
    pub model: String,
    pub seed: u64,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub dt: f64,
    pub steps: usize,
    pub config_hash: String,
}

/// Time-ordered snapshots taken every `snapshot_every` steps of size `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<FieldState>,
    pub dt: f64,
    pub snapshot_every: usize,
    pub meta: RunMeta,
}

impl Trajectory {
    pub fn new(
        snapshots: Vec<FieldState>,
        dt: f64,
        snapshot_every: usize,
        meta: RunMeta,
    ) -> Result<Self, GridError> {
        let traj = Self {
            snapshots,
            dt,
            snapshot_every,
            meta,
        };
        traj.validate()?;
        Ok(traj)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let first = self
            .snapshots
            .first()
            .ok_or_else(|| GridError::Trajectory("no snapshots".into()))?;
        if self.snapshot_every == 0 || !(self.dt > 0.0) {
            return Err(GridError::Trajectory(
                "dt must be positive and snapshot_every at least 1".into(),
            ));
        }
        let spacing = self.spacing();
        for (k, pair) in self.snapshots.windows(2).enumerate() {
            if pair[1].grid() != first.grid() || pair[1].components() != first.components() {
                return Err(GridError::Trajectory(format!(
                    "snapshot {} has a different grid or component count",
                    k + 1
                )));
            }
            let gap = pair[1].t() - pair[0].t();
            if !(gap > 0.0)
                || (gap - spacing).abs() > 1e-9 * spacing.max(1e-300) + 1e-12 * pair[1].t().abs()
            {
                return Err(GridError::Trajectory(format!(
                    "snapshot spacing {gap} at {} differs from {spacing}",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &GridSpec {
        self.snapshots[0].grid()
    }

    pub fn components(&self) -> usize {
        self.snapshots[0].components()
    }

    /// Time between consecutive snapshots.
    pub fn spacing(&self) -> f64 {
        self.dt * self.snapshot_every as f64
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(FieldState::t).collect()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

/// Sum of `g * h^n * Δt` over a discrete cylinder, with the point and
/// snapshot counts used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderSum {
    pub sum: f64,
    pub points: usize,
    pub snapshots: usize,
    pub volume: f64,
}

impl CylinderSum {
    pub fn average(&self) -> f64 {
        self.sum / self.volume
    }
}

/// Integrates precomputed per-snapshot scalar fields over a cylinder.
/// `fields[k]` must hold one value per grid point for snapshot `k`.
pub fn cylinder_sum(
    grid: &GridSpec,
    times: &[f64],
    spacing: f64,
    fields: &[Vec<f64>],
    q: &Cylinder,
) -> Result<CylinderSum, GridError> {
    let ball = q.ball(grid)?;
    let window = q.window(times)?;
    if fields.len() != times.len() {
        return Err(GridError::Trajectory(format!(
            "{} fields for {} snapshots",
            fields.len(),
            times.len()
        )));
    }
    let mut terms = Vec::with_capacity(ball.len() * window.len());
    for field in &fields[window.clone()] {
        grid.check_len(field.len(), 1)?;
        terms.extend(ball.iter().map(|&i| field[i]));
    }
    let measure = grid.cell_volume() * spacing;
    Ok(CylinderSum {
        sum: pairwise_sum(&terms) * measure,
        points: ball.len(),
        snapshots: window.len(),
        volume: (ball.len() * window.len()) as f64 * measure,
    })
}

/// Space-time average of `g(u)` over a cylinder of a trajectory.
pub fn cylinder_average<G>(traj: &Trajectory, q: &Cylinder, g: G) -> Result<f64, GridError>
where
    G: Fn(&FieldState) -> Vec<f64>,
{
    let times = traj.times();
    let window = q.window(&times)?;
    // only the snapshots inside the window need g evaluated
    let fields: Vec<Vec<f64>> = traj
        .snapshots
        .iter()
        .enumerate()
        .map(|(k, s)| {
            if window.contains(&k) {
                g(s)
            } else {
                vec![0.0; s.grid().len()]
            }
        })
        .collect();
    Ok(cylinder_sum(traj.grid(), &times, traj.spacing(), &fields, q)?.average())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line(size: usize, boundary: Boundary) -> GridSpec {
        GridSpec::unit(1, size, boundary).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert_eq!(
            GridSpec::new(&[3], 0.1, Boundary::Periodic),
            Err(GridError::TooSmall { axis: 0, size: 3 })
        );
        assert!(GridSpec::new(&[8, 8, 8, 8], 0.1, Boundary::Periodic).is_err());
        assert!(GridSpec::new(&[8], 0.0, Boundary::Periodic).is_err());
    }

    #[test]
    fn dirichlet_layers_partition_the_grid() {
        let g = GridSpec::new(&[6, 5], 0.2, Boundary::Dirichlet).unwrap();
        let interior = g.interior_indices();
        let boundary = g.boundary_indices();
        assert_eq!(interior.len(), 4 * 3);
        assert_eq!(interior.len() + boundary.len(), g.len());
        assert!(interior.iter().all(|i| !boundary.contains(i)));
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = GridSpec::new(&[8, 8], 0.1, Boundary::Periodic).unwrap();
        let f = vec![3.5; g.len()];
        assert!(laplacian(&f, &g).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_is_exact_on_quadratics() {
        let g = GridSpec::new(&[17], 0.37, Boundary::Dirichlet).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|i| g.position(i)[0].powi(2)).collect();
        let lap = laplacian(&f, &g).unwrap();
        for i in g.interior_indices() {
            assert_relative_eq!(lap[i], 2.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn sine_is_a_discrete_eigenfield() {
        let g = line(128, Boundary::Periodic);
        let h = g.h();
        let f: Vec<f64> = (0..g.len())
            .map(|i| (2.0 * std::f64::consts::PI * g.position(i)[0]).sin())
            .collect();
        let eig = -(4.0 / (h * h)) * (std::f64::consts::PI * h).sin().powi(2);
        assert_relative_eq!(eig, -39.468, max_relative = 1e-4);
        let lap = laplacian(&f, &g).unwrap();
        for i in 0..g.len() {
            assert!((lap[i] - eig * f[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn laplacian_rejects_bad_input() {
        let g = line(8, Boundary::Periodic);
        assert!(matches!(
            laplacian(&[0.0; 7], &g),
            Err(GridError::Shape { .. })
        ));
        let mut f = vec![0.0; 8];
        f[3] = f64::NAN;
        assert!(matches!(
            laplacian(&f, &g),
            Err(GridError::NonFinite { index: 3, .. })
        ));
    }

    #[test]
    fn gradient_of_linear_profile() {
        let g = line(16, Boundary::Dirichlet);
        let f: Vec<f64> = (0..g.len()).map(|i| 3.0 * g.position(i)[0]).collect();
        let gs = gradient_sq(&f, 1, &g).unwrap();
        for i in g.interior_indices() {
            assert_relative_eq!(gs.values[i], 9.0, max_relative = 1e-12);
        }
        assert_eq!(gs.lower_order, vec![0, 15]);
        let c = gradient_sq(&[2.0; 16], 1, &g).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn periodic_neighbors_wrap() {
        let g = GridSpec::new(&[4, 5], 1.0, Boundary::Periodic).unwrap();
        let i = g.index(&[0, 4]);
        assert_eq!(g.neighbor(i, 1, true), Some(g.index(&[0, 0])));
        assert_eq!(g.neighbor(i, 0, false), Some(g.index(&[3, 4])));
        let d = GridSpec::new(&[4, 5], 1.0, Boundary::Dirichlet).unwrap();
        assert_eq!(d.neighbor(i, 1, true), None);
    }

    #[test]
    fn boundary_values_are_enforced() {
        let g = line(6, Boundary::Dirichlet);
        let mut v = vec![1.0; 6];
        v[0] = 0.5;
        let err = FieldState::new(g, 1, v, 0.0, Some(vec![1.0])).unwrap_err();
        assert!(matches!(err, GridError::BoundaryMismatch { index: 0, .. }));
    }

    #[test]
    fn cylinder_membership() {
        let g = line(64, Boundary::Periodic);
        let h = g.h();
        let q = Cylinder::new(32, 0.5, 4.0 * h);
        assert_eq!(q.ball(&g).unwrap().len(), 9);
        let times: Vec<f64> = (0..10).map(|k| k as f64 * 4.0 * h * h).collect();
        let q = Cylinder::new(32, times[9], 4.0 * h);
        // window (t0 - 16h^2, t0] holds the last four snapshots
        assert_eq!(q.window(&times).unwrap(), 6..10);
        let too_early = Cylinder::new(32, times[2], 4.0 * h);
        assert!(too_early.window(&times).is_err());
        assert!(Cylinder::new(2, 0.0, 4.0 * h).ball(&g).is_err());
    }

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
    }
}
