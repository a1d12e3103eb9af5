//! Discrete measures on uniform 1D and 2D grids.
//!
//! Densities are stored as cell averages (mass per unit length), so the mass of
//! cell `c` is `h * values[c]`. The cumulative distribution function of such a
//! density is piecewise linear, which makes quantile inversion exact on this
//! representation.
//!
//! A [`QuantileMap`] is the Lagrangian view of one species: positions `X_l` at
//! the uniform mass levels `(l + 1/2) / L`. Going back to a grid density spreads
//! mass `1/L` uniformly over each gap between consecutive positions (half a gap
//! of mass `1/(2L)` is added at either end) and assigns it to cells with the
//! piecewise-linear hat functions of the cell centres. Plain box assignment
//! would make the cell masses locally constant in the positions, which stalls
//! any gradient-based solver working in Lagrangian coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of `[x_min, x_max]` into `n_cells` cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n_cells: usize,
    x_min: f64,
    x_max: f64,
}

impl Grid1D {
    pub fn new(n_cells: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 cells, got {n_cells}"
            )));
        }
        if !x_min.is_finite() || !x_max.is_finite() || x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "bad interval [{x_min}, {x_max}]"
            )));
        }
        Ok(Self {
            n_cells,
            x_min,
            x_max,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Cell width.
    pub fn h(&self) -> f64 {
        self.length() / self.n_cells as f64
    }

    pub fn center(&self, c: usize) -> f64 {
        self.x_min + (c as f64 + 0.5) * self.h()
    }

    /// Left edge of cell `c`; `edge(n_cells)` is `x_max`.
    pub fn edge(&self, c: usize) -> f64 {
        if c == self.n_cells {
            self.x_max
        } else {
            self.x_min + c as f64 * self.h()
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|c| self.center(c)).collect()
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.n_cells).map(|c| self.edge(c)).collect()
    }

    /// Index of the cell containing `x`, clamped to the grid. Points on an
    /// interior edge belong to the cell on their right.
    pub fn locate(&self, x: f64) -> usize {
        let s = ((x - self.x_min) / self.h()).floor();
        if s <= 0.0 {
            0
        } else {
            (s as usize).min(self.n_cells - 1)
        }
    }

    /// Like [`locate`](Self::locate) but points on an interior edge belong to
    /// the cell on their left.
    pub fn locate_left(&self, x: f64) -> usize {
        let s = ((x - self.x_min) / self.h()).ceil() - 1.0;
        if s <= 0.0 {
            0
        } else {
            (s as usize).min(self.n_cells - 1)
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let slack = 1e-12 * self.length();
        x >= self.x_min - slack && x <= self.x_max + slack
    }

    /// Cell averages of `f` by four-point Gauss-Legendre quadrature per cell.
    pub fn cell_averages(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        const NODES: [f64; 4] = [
            -0.861_136_311_594_052_6,
            -0.339_981_043_584_856_3,
            0.339_981_043_584_856_3,
            0.861_136_311_594_052_6,
        ];
        const WEIGHTS: [f64; 4] = [
            0.347_854_845_137_453_9,
            0.652_145_154_862_546_1,
            0.652_145_154_862_546_1,
            0.347_854_845_137_453_9,
        ];
        let half = 0.5 * self.h();
        (0..self.n_cells)
            .map(|c| {
                let xc = self.center(c);
                NODES
                    .iter()
                    .zip(WEIGHTS.iter())
                    .map(|(t, w)| w * f(xc + half * t))
                    .sum::<f64>()
                    * 0.5
            })
            .collect()
    }

    /// Calls `visit(cell, overlap_length)` for every cell meeting `[a, b]`.
    pub(crate) fn for_each_overlap(&self, a: f64, b: f64, mut visit: impl FnMut(usize, f64)) {
        let first = self.locate(a);
        let last = self.locate_left(b).max(first);
        for c in first..=last {
            let lo = a.max(self.edge(c));
            let hi = b.min(self.edge(c + 1));
            if hi > lo {
                visit(c, hi - lo);
            }
        }
    }
}

/// Tensor-product grid on a rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    axis1: Grid1D,
    axis2: Grid1D,
}

impl Grid2D {
    pub fn new(axis1: Grid1D, axis2: Grid1D) -> Self {
        Self { axis1, axis2 }
    }

    pub fn square(n: usize, lo: f64, hi: f64) -> Result<Self> {
        let g = Grid1D::new(n, lo, hi)?;
        Ok(Self::new(g, g))
    }

    pub fn axis1(&self) -> &Grid1D {
        &self.axis1
    }

    pub fn axis2(&self) -> &Grid1D {
        &self.axis2
    }

    pub fn n1(&self) -> usize {
        self.axis1.n_cells()
    }

    pub fn n2(&self) -> usize {
        self.axis2.n_cells()
    }

    pub fn h1(&self) -> f64 {
        self.axis1.h()
    }

    pub fn h2(&self) -> f64 {
        self.axis2.h()
    }

    pub fn cell_area(&self) -> f64 {
        self.h1() * self.h2()
    }

    /// Row-major index: `x1` varies slowest.
    pub fn index(&self, c1: usize, c2: usize) -> usize {
        c1 * self.n2() + c2
    }

    pub fn len(&self) -> usize {
        self.n1() * self.n2()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Single-species cell-averaged density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Density {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Density {
    /// Wraps cell averages; rejects negative or non-finite entries. Mass is
    /// not checked here, see [`normalize`] and [`Density::ensure_unit_mass`].
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_cells(),
                got: values.len(),
            });
        }
        if let Some((c, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "density value {v} at cell {c}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_cells());
        Self { grid, values }
    }

    /// Normalized cell averages of a nonnegative profile.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Ok(normalize(&grid.cell_averages(f), grid)?.density)
    }

    pub fn uniform(grid: Grid1D) -> Self {
        let v = 1.0 / grid.length();
        Self {
            grid,
            values: vec![v; grid.n_cells()],
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mass(&self) -> f64 {
        mass(self)
    }

    pub fn second_moment(&self) -> f64 {
        second_moment(self)
    }

    pub fn cell_masses(&self) -> Vec<f64> {
        let h = self.grid.h();
        self.values.iter().map(|v| v * h).collect()
    }

    /// Cumulative mass at the `n_cells + 1` cell edges.
    pub fn cdf_edges(&self) -> Vec<f64> {
        let h = self.grid.h();
        let mut out = Vec::with_capacity(self.values.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for v in &self.values {
            acc += h * v;
            out.push(acc);
        }
        out
    }

    pub fn ensure_unit_mass(&self, tol: f64) -> Result<()> {
        let m = self.mass();
        if (m - 1.0).abs() > tol {
            return Err(Error::InvalidInput(format!(
                "mass {m} differs from 1 by more than {tol:e}"
            )));
        }
        Ok(())
    }

    /// Rescales to unit mass.
    pub fn renormalized(mut self) -> Result<Self> {
        let m = self.mass();
        if !(m > 0.0) {
            return Err(Error::AllZero);
        }
        self.values.iter_mut().for_each(|v| *v /= m);
        Ok(self)
    }

    /// Cells with value above `threshold`.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&c| self.values[c] > threshold)
            .collect()
    }
}

/// Result of [`normalize`]: the density and the number of negative entries
/// that were clamped to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub density: Density,
    pub clamped_cells: usize,
}

impl Normalized {
    pub fn was_clamped(&self) -> bool {
        self.clamped_cells > 0
    }
}

/// Clamps negatives to zero and rescales to unit mass.
pub fn normalize(raw: &[f64], grid: Grid1D) -> Result<Normalized> {
    if raw.len() != grid.n_cells() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_cells(),
            got: raw.len(),
        });
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite entry".into()));
    }
    let clamped_cells = raw.iter().filter(|v| **v < 0.0).count();
    let values: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = grid.h() * values.iter().sum::<f64>();
    if !(total > 0.0) {
        return Err(Error::AllZero);
    }
    let values = values.into_iter().map(|v| v / total).collect();
    Ok(Normalized {
        density: Density::from_raw(grid, values),
        clamped_cells,
    })
}

pub fn mass(density: &Density) -> f64 {
    density.grid.h() * density.values.iter().sum::<f64>()
}

/// Midpoint quadrature of `∫ x² u dx`.
pub fn second_moment(density: &Density) -> f64 {
    let g = &density.grid;
    g.h()
        * density
            .values
            .iter()
            .enumerate()
            .map(|(c, v)| g.center(c).powi(2) * v)
            .sum::<f64>()
}

/// Several species on one grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityVector {
    grid: Grid1D,
    species: Vec<Density>,
}

impl DensityVector {
    pub fn new(species: Vec<Density>) -> Result<Self> {
        let first = species
            .first()
            .ok_or_else(|| Error::InvalidInput("no species".into()))?;
        let grid = *first.grid();
        if species.iter().any(|s| *s.grid() != grid) {
            return Err(Error::InvalidInput(
                "species live on different grids".into(),
            ));
        }
        Ok(Self { grid, species })
    }

    pub fn from_values(grid: Grid1D, values: Vec<Vec<f64>>) -> Result<Self> {
        let species = values
            .into_iter()
            .map(|v| Density::new(grid, v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(species)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self, i: usize) -> &Density {
        &self.species[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Density> {
        self.species.iter()
    }

    pub fn values(&self, i: usize) -> &[f64] {
        self.species[i].values()
    }

    pub fn into_species(self) -> Vec<Density> {
        self.species
    }

    /// Fails unless every species has unit mass within `tol`.
    pub fn ensure_unit_mass(&self, tol: f64) -> Result<()> {
        self.species
            .iter()
            .try_for_each(|s| s.ensure_unit_mass(tol))
    }

    /// Reorders species: species `i` of the result is species `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            grid: self.grid,
            species: perm.iter().map(|&p| self.species[p].clone()).collect(),
        }
    }
}

/// Positions at the uniform mass levels `(l + 1/2) / L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileMap {
    grid: Grid1D,
    positions: Vec<f64>,
}

impl QuantileMap {
    /// Checks monotonicity and that every position lies in the grid interval.
    pub fn new(grid: Grid1D, positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidInput(
                "quantile map needs at least one level".into(),
            ));
        }
        if let Some(&x) = positions.iter().find(|x| !grid.contains(**x)) {
            return Err(Error::OutOfDomain {
                position: x,
                x_min: grid.x_min(),
                x_max: grid.x_max(),
            });
        }
        if let Some(l) = positions.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::NonMonotoneMap { cell: l });
        }
        Ok(Self { grid, positions })
    }

    pub(crate) fn from_raw(grid: Grid1D, positions: Vec<f64>) -> Self {
        Self { grid, positions }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn n_levels(&self) -> usize {
        self.positions.len()
    }

    pub fn level(&self, l: usize) -> f64 {
        (l as f64 + 0.5) / self.positions.len() as f64
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn is_monotone(&self) -> bool {
        self.positions.windows(2).all(|w| w[0] <= w[1])
    }

    /// Level-sampled quadratic distance `sqrt(mean (X_l - Y_l)^2)`.
    pub fn distance(&self, other: &QuantileMap) -> Result<f64> {
        if self.n_levels() != other.n_levels() {
            return Err(Error::DimensionMismatch {
                expected: self.n_levels(),
                got: other.n_levels(),
            });
        }
        let s: f64 = self
            .positions
            .iter()
            .zip(&other.positions)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        Ok((s / self.n_levels() as f64).sqrt())
    }
}

/// Inverts the piecewise-linear CDF of `density` at the uniform mass levels.
///
/// Flat stretches of the CDF are skipped: a level that falls on the boundary
/// between two support components is placed at the end of the left one.
pub fn to_quantiles(density: &Density, levels: usize) -> QuantileMap {
    assert!(levels > 0, "need at least one level");
    let grid = *density.grid();
    let cdf = density.cdf_edges();
    let n = grid.n_cells();
    let total = cdf[n];
    assert!(total > 0.0, "cannot take quantiles of a zero density");
    let vals = density.values();
    let mut c = 0usize;
    let positions = (0..levels)
        .map(|l| {
            let m = (l as f64 + 0.5) / levels as f64 * total;
            while c + 1 < n && !(cdf[c + 1] >= m && vals[c] > 0.0) {
                c += 1;
            }
            let (lo, hi) = (grid.edge(c), grid.edge(c + 1));
            if vals[c] > 0.0 {
                (lo + (m - cdf[c]) / vals[c]).clamp(lo, hi)
            } else {
                lo
            }
        })
        .collect();
    QuantileMap::from_raw(grid, positions)
}

/// One piece of the interpolated quantile function: mass `weight` spread
/// uniformly over `[a, b]`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Segment {
    pub a: f64,
    pub b: f64,
    pub weight: f64,
    /// Index of the level that `a` is attached to, with `da/dX` for it and its
    /// neighbour when `a` is an extrapolated end point.
    pub a_deps: [(usize, f64); 2],
    pub b_deps: [(usize, f64); 2],
}

const DEGENERATE: f64 = 1e-14;

pub(crate) fn quantile_segments(positions: &[f64], x_min: f64, x_max: f64) -> Vec<Segment> {
    let len = positions.len();
    let w = 1.0 / len as f64;
    let mut segs = Vec::with_capacity(len + 1);
    if len == 1 {
        let x = positions[0];
        segs.push(Segment {
            a: x,
            b: x,
            weight: 1.0,
            a_deps: [(0, 1.0), (0, 0.0)],
            b_deps: [(0, 1.0), (0, 0.0)],
        });
        return segs;
    }
    let left = 1.5 * positions[0] - 0.5 * positions[1];
    let (a0, a0_deps) = if left < x_min {
        (x_min, [(0, 0.0), (1, 0.0)])
    } else {
        (left, [(0, 1.5), (1, -0.5)])
    };
    segs.push(Segment {
        a: a0,
        b: positions[0],
        weight: 0.5 * w,
        a_deps: a0_deps,
        b_deps: [(0, 1.0), (0, 0.0)],
    });
    for l in 0..len - 1 {
        segs.push(Segment {
            a: positions[l],
            b: positions[l + 1],
            weight: w,
            a_deps: [(l, 1.0), (l, 0.0)],
            b_deps: [(l + 1, 1.0), (l + 1, 0.0)],
        });
    }
    let last = len - 1;
    let right = 1.5 * positions[last] - 0.5 * positions[last - 1];
    let (b1, b1_deps) = if right > x_max {
        (x_max, [(last, 0.0), (last - 1, 0.0)])
    } else {
        (right, [(last, 1.5), (last - 1, -0.5)])
    };
    segs.push(Segment {
        a: positions[last],
        b: b1,
        weight: 0.5 * w,
        a_deps: [(last, 1.0), (last, 0.0)],
        b_deps: b1_deps,
    });
    segs
}

/// Integral from `x_min` to `x` of the hat function of cell `c`.
///
/// Hats are the piecewise-linear interpolation basis on the cell centres,
/// flat beyond the outermost centres, so they sum to one on the domain and
/// each integrates to `h`.
fn hat_primitive(grid: &Grid1D, c: usize, x: f64) -> f64 {
    let h = grid.h();
    let xc = grid.center(c);
    let left = if c == 0 {
        x.clamp(grid.x_min(), xc) - grid.x_min()
    } else {
        let t = ((x - xc) / h).clamp(-1.0, 0.0);
        0.5 * h * (t + 1.0).powi(2)
    };
    let right = if c + 1 == grid.n_cells() {
        x.clamp(xc, grid.x_max()) - xc
    } else {
        let t = ((x - xc) / h).clamp(0.0, 1.0);
        h * (t - 0.5 * t * t)
    };
    left + right
}

/// Cells whose hat meets `[a, b]`.
fn hat_range(grid: &Grid1D, a: f64, b: f64) -> std::ops::RangeInclusive<usize> {
    grid.locate(a).saturating_sub(1)..=(grid.locate(b) + 1).min(grid.n_cells() - 1)
}

/// `(c, t)` with `x = (1 − t) x_c + t x_{c+1}`; outside the centre range the
/// whole weight sits on the outermost cell.
fn hat_bracket(grid: &Grid1D, x: f64) -> (usize, f64) {
    let n = grid.n_cells();
    let s = (x - grid.center(0)) / grid.h();
    if s <= 0.0 {
        (0, 0.0)
    } else if s >= (n - 1) as f64 {
        (n - 1, 0.0)
    } else {
        let c = (s.floor() as usize).min(n - 2);
        (c, s - c as f64)
    }
}

/// Adds the cell masses of the interpolated quantile function to `masses`.
pub(crate) fn deposit_masses(grid: &Grid1D, positions: &[f64], masses: &mut [f64]) {
    for s in quantile_segments(positions, grid.x_min(), grid.x_max()) {
        deposit_segment_hat(grid, s.a, s.b, s.weight, masses);
    }
}

/// Mass `weight` spread uniformly on `[a, b]`, assigned to cells through the
/// hat functions. The assignment is continuously differentiable in `a` and
/// `b`, so moving a position inside a cell still changes the cell masses.
pub(crate) fn deposit_segment_hat(grid: &Grid1D, a: f64, b: f64, weight: f64, masses: &mut [f64]) {
    let width = b - a;
    if width <= DEGENERATE * grid.length() {
        let (c, t) = hat_bracket(grid, 0.5 * (a + b));
        masses[c] += weight * (1.0 - t);
        if t > 0.0 {
            masses[c + 1] += weight * t;
        }
    } else {
        let k = weight / width;
        for c in hat_range(grid, a, b) {
            masses[c] += k * (hat_primitive(grid, c, b) - hat_primitive(grid, c, a));
        }
    }
}

/// Mass `weight` spread uniformly on `[a, b]`, assigned to cells by overlap
/// length.
pub(crate) fn deposit_segment(grid: &Grid1D, a: f64, b: f64, weight: f64, masses: &mut [f64]) {
    let width = b - a;
    if width <= DEGENERATE * grid.length() {
        masses[grid.locate(0.5 * (a + b))] += weight;
    } else {
        grid.for_each_overlap(a, b, |c, len| masses[c] += weight * len / width);
    }
}

/// Piecewise-linear interpolant `Σ_c g_c hat_c(x)`.
fn interpolate(grid: &Grid1D, g: &[f64], x: f64) -> f64 {
    let (c, t) = hat_bracket(grid, x);
    if t > 0.0 {
        (1.0 - t) * g[c] + t * g[c + 1]
    } else {
        g[c]
    }
}

/// Gradient of `Σ_c g[c] · M_c(X)` with respect to the positions, where
/// `M_c(X)` are the masses produced by [`deposit_masses`]. Added to `grad`.
///
/// With `Ĝ` the interpolant of `g`, a segment contributes
/// `w/(b−a) ∫_a^b Ĝ`, whose derivatives are `w/(b−a) (Ĝ(b) − avg)` and
/// `w/(b−a) (avg − Ĝ(a))`.
pub(crate) fn deposit_adjoint(grid: &Grid1D, positions: &[f64], g: &[f64], grad: &mut [f64]) {
    for s in quantile_segments(positions, grid.x_min(), grid.x_max()) {
        let width = s.b - s.a;
        let (d_a, d_b) = if width <= DEGENERATE * grid.length() {
            // Limit of a vanishing segment: each end takes half the slope.
            let (c, t) = hat_bracket(grid, 0.5 * (s.a + s.b));
            let slope = if t > 0.0 {
                (g[c + 1] - g[c]) / grid.h()
            } else {
                0.0
            };
            (0.5 * s.weight * slope, 0.5 * s.weight * slope)
        } else {
            let integral: f64 = hat_range(grid, s.a, s.b)
                .map(|c| g[c] * (hat_primitive(grid, c, s.b) - hat_primitive(grid, c, s.a)))
                .sum();
            let avg = integral / width;
            let scale = s.weight / width;
            (
                scale * (avg - interpolate(grid, g, s.a)),
                scale * (interpolate(grid, g, s.b) - avg),
            )
        };
        for (l, f) in s.a_deps {
            grad[l] += f * d_a;
        }
        for (l, f) in s.b_deps {
            grad[l] += f * d_b;
        }
    }
}

/// Spreads mass `1/L` over each gap between consecutive positions and returns
/// the resulting cell averages on `grid`.
pub fn to_density(q: &QuantileMap, grid: Grid1D) -> Result<Density> {
    if let Some(&x) = q.positions().iter().find(|x| !grid.contains(**x)) {
        return Err(Error::OutOfDomain {
            position: x,
            x_min: grid.x_min(),
            x_max: grid.x_max(),
        });
    }
    if !q.is_monotone() {
        return Err(Error::NonMonotoneMap {
            cell: q
                .positions()
                .windows(2)
                .position(|w| w[1] < w[0])
                .unwrap_or(0),
        });
    }
    let mut masses = vec![0.0; grid.n_cells()];
    deposit_masses(&grid, q.positions(), &mut masses);
    let h = grid.h();
    Ok(Density::from_raw(
        grid,
        masses.into_iter().map(|m| m / h).collect(),
    ))
}

/// A monotone map of the line sampled at the cell edges and centres of a grid.
/// Between edges it is treated as affine when pushing cell masses forward.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportMap {
    grid: Grid1D,
    edges: Vec<f64>,
    centers: Vec<f64>,
}

impl TransportMap {
    pub fn new(grid: Grid1D, edges: Vec<f64>, centers: Vec<f64>) -> Result<Self> {
        if edges.len() != grid.n_cells() + 1 {
            return Err(Error::DimensionMismatch {
                expected: grid.n_cells() + 1,
                got: edges.len(),
            });
        }
        if centers.len() != grid.n_cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_cells(),
                got: centers.len(),
            });
        }
        Ok(Self {
            grid,
            edges,
            centers,
        })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            edges: grid.edges().into_iter().map(&f).collect(),
            centers: grid.centers().into_iter().map(&f).collect(),
        }
    }

    pub fn identity(grid: Grid1D) -> Self {
        Self::from_fn(grid, |x| x)
    }

    pub fn translation(grid: Grid1D, shift: f64) -> Self {
        Self::from_fn(grid, |x| x + shift)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// Images of the `n_cells + 1` cell edges.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Images of the cell centres.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// `T(x_c) - x_c`.
    pub fn displacement(&self, c: usize) -> f64 {
        self.centers[c] - self.grid.center(c)
    }

    pub fn is_monotone(&self) -> bool {
        self.edges.windows(2).all(|w| w[0] <= w[1]) && self.centers.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Pushes `density` forward by `map`, moving each cell's mass uniformly onto
/// the image of the cell. Mass is conserved exactly.
pub fn pushforward_1d(density: &Density, map: &TransportMap) -> Result<Density> {
    let grid = *density.grid();
    if *map.grid() != grid {
        return Err(Error::InvalidInput(
            "map and density live on different grids".into(),
        ));
    }
    let e = map.edges();
    let h = grid.h();
    let mut masses = vec![0.0; grid.n_cells()];
    for (c, v) in density.values().iter().enumerate() {
        if e[c + 1] < e[c] {
            return Err(Error::NonMonotoneMap { cell: c });
        }
        if *v <= 0.0 {
            continue;
        }
        for x in [e[c], e[c + 1]] {
            if !grid.contains(x) {
                return Err(Error::OutOfDomain {
                    position: x,
                    x_min: grid.x_min(),
                    x_max: grid.x_max(),
                });
            }
        }
        let a = e[c].clamp(grid.x_min(), grid.x_max());
        let b = e[c + 1].clamp(grid.x_min(), grid.x_max());
        deposit_segment(&grid, a, b, v * h, &mut masses);
    }
    Ok(Density::from_raw(
        grid,
        masses.into_iter().map(|m| m / h).collect(),
    ))
}

/// Cell-averaged density on a 2D grid, row-major with `x1` slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDensity {
    grid: Grid2D,
    values: Vec<f64>,
}

impl JointDensity {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some((c, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "joint density value {v} at index {c}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid2D, values: Vec<f64>) -> Self {
        Self { grid, values }
    }

    /// Normalized cell-centre samples of `f(x1, x2)`.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for c1 in 0..grid.n1() {
            let x1 = grid.axis1().center(c1);
            for c2 in 0..grid.n2() {
                values.push(f(x1, grid.axis2().center(c2)).max(0.0));
            }
        }
        let total: f64 = grid.cell_area() * values.iter().sum::<f64>();
        if !(total > 0.0) {
            return Err(Error::AllZero);
        }
        values.iter_mut().for_each(|v| *v /= total);
        Self::new(grid, values)
    }

    /// `u1 ⊗ u2`.
    pub fn product(u1: &Density, u2: &Density) -> Self {
        let grid = Grid2D::new(*u1.grid(), *u2.grid());
        let mut values = Vec::with_capacity(grid.len());
        for a in u1.values() {
            for b in u2.values() {
                values.push(a * b);
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, c1: usize, c2: usize) -> f64 {
        self.values[self.grid.index(c1, c2)]
    }

    pub fn mass(&self) -> f64 {
        self.grid.cell_area() * self.values.iter().sum::<f64>()
    }
}
