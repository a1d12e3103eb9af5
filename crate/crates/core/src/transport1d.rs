//! Exact one-dimensional optimal transport.
//!
//! In 1D the optimal coupling for the quadratic cost is the monotone one, so
//! `W2²(μ, ν) = ∫_0^1 |F_μ⁻¹(m) − F_ν⁻¹(m)|² dm`. Quantile functions of the
//! measures used here are piecewise linear in the mass variable, which lets
//! the integral be evaluated in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Density, DensityVector, Grid1D, QuantileMap, TransportMap};

/// One piece of a quantile function: on masses `[m0, m1]` the position moves
/// linearly from `x0` to `x1` (`x0 == x1` for an atom).
#[derive(Clone, Copy, Debug, PartialEq)]
struct Piece {
    m0: f64,
    m1: f64,
    x0: f64,
    x1: f64,
}

impl Piece {
    fn at(&self, m: f64) -> f64 {
        if self.m1 <= self.m0 {
            return self.x0;
        }
        let s = ((m - self.m0) / (self.m1 - self.m0)).clamp(0.0, 1.0);
        self.x0 + s * (self.x1 - self.x0)
    }
}

/// Quantile function that is piecewise linear in mass.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileFunction {
    pieces: Vec<Piece>,
}

impl QuantileFunction {
    /// Cell masses concentrated at the cell centres.
    pub fn atomic(density: &Density) -> Self {
        let g = density.grid();
        let mut m = 0.0;
        let pieces = density
            .cell_masses()
            .into_iter()
            .enumerate()
            .filter(|(_, w)| *w > 0.0)
            .map(|(c, w)| {
                let p = Piece {
                    m0: m,
                    m1: m + w,
                    x0: g.center(c),
                    x1: g.center(c),
                };
                m += w;
                p
            })
            .collect();
        Self { pieces }
    }

    /// Cell masses spread uniformly over their cells.
    pub fn piecewise_constant(density: &Density) -> Self {
        Self::from_intervals(&density.grid().edges(), &density.cell_masses())
    }

    /// Mass `masses[k]` spread uniformly over `[breaks[k], breaks[k + 1]]`.
    /// `breaks` must be nondecreasing.
    pub fn from_intervals(breaks: &[f64], masses: &[f64]) -> Self {
        assert_eq!(
            breaks.len(),
            masses.len() + 1,
            "need one more break than masses"
        );
        let mut m = 0.0;
        let mut pieces = Vec::with_capacity(masses.len());
        for (k, &w) in masses.iter().enumerate() {
            if w > 0.0 {
                pieces.push(Piece {
                    m0: m,
                    m1: m + w,
                    x0: breaks[k],
                    x1: breaks[k + 1],
                });
                m += w;
            }
        }
        Self { pieces }
    }

    pub fn total_mass(&self) -> f64 {
        self.pieces.last().map_or(0.0, |p| p.m1)
    }

    /// Position at mass level `m` (clamped to the covered range).
    pub fn eval(&self, m: f64) -> f64 {
        let k = self
            .pieces
            .partition_point(|p| p.m1 < m)
            .min(self.pieces.len() - 1);
        self.pieces[k].at(m)
    }

    /// Exact `∫ |Q_a(m) − Q_b(m)|² dm` over the common mass range.
    pub fn distance_sq(&self, other: &QuantileFunction) -> f64 {
        if self.pieces.is_empty() || other.pieces.is_empty() {
            return 0.0;
        }
        let end = self.total_mass().min(other.total_mass());
        let (mut i, mut j) = (0usize, 0usize);
        let mut m = 0.0;
        let mut acc = 0.0;
        while m < end {
            while i + 1 < self.pieces.len() && self.pieces[i].m1 <= m {
                i += 1;
            }
            while j + 1 < other.pieces.len() && other.pieces[j].m1 <= m {
                j += 1;
            }
            let next = self.pieces[i].m1.min(other.pieces[j].m1).min(end);
            if next <= m {
                // Only reachable through round-off at the very end.
                break;
            }
            let d0 = self.pieces[i].at(m) - other.pieces[j].at(m);
            let d1 = self.pieces[i].at(next) - other.pieces[j].at(next);
            acc += (next - m) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
            m = next;
        }
        acc
    }

    pub fn distance(&self, other: &QuantileFunction) -> f64 {
        self.distance_sq(other).max(0.0).sqrt()
    }

    pub fn n_pieces(&self) -> usize {
        self.pieces.len()
    }

    /// Mass levels where pieces start, plus the total mass.
    pub(crate) fn mass_breaks(&self) -> Vec<f64> {
        self.pieces
            .iter()
            .map(|p| p.m0)
            .chain(self.pieces.last().map(|p| p.m1))
            .collect()
    }

    /// Positions at `m0` and `m1` on the piece containing `(m0 + m1) / 2`;
    /// `[m0, m1]` must not straddle a piece boundary.
    pub(crate) fn span(&self, m0: f64, m1: f64) -> (f64, f64) {
        let mid = 0.5 * (m0 + m1);
        let k = self
            .pieces
            .partition_point(|p| p.m1 < mid)
            .min(self.pieces.len() - 1);
        (self.pieces[k].at(m0), self.pieces[k].at(m1))
    }
}

fn same_grid(u: &Density, v: &Density) -> Result<()> {
    if u.grid() != v.grid() {
        return Err(Error::InvalidInput(
            "densities live on different grids".into(),
        ));
    }
    Ok(())
}

/// `W2(u, v)` with each cell's mass placed at its centre.
///
/// This is the discrete optimal-transport value on the cell-centre cost
/// `|x_c − y_d|²`, computed exactly by the monotone coupling.
pub fn w2_exact(u: &Density, v: &Density) -> Result<f64> {
    same_grid(u, v)?;
    Ok(QuantileFunction::atomic(u).distance(&QuantileFunction::atomic(v)))
}

/// `W2(u, v)` for the piecewise-constant densities themselves.
pub fn w2_piecewise(u: &Density, v: &Density) -> Result<f64> {
    Ok(QuantileFunction::piecewise_constant(u).distance(&QuantileFunction::piecewise_constant(v)))
}

/// Level-sampled distance `sqrt(mean (X_l − Y_l)²)` between quantile maps.
pub fn w2_levels(a: &QuantileMap, b: &QuantileMap) -> Result<f64> {
    a.distance(b)
}

/// Product metric `sqrt(Σ_i W2²(u_i, v_i))`.
pub fn w2_product(u: &DensityVector, v: &DensityVector) -> Result<f64> {
    if u.n_species() != v.n_species() {
        return Err(Error::DimensionMismatch {
            expected: u.n_species(),
            got: v.n_species(),
        });
    }
    let mut s = 0.0;
    for (a, b) in u.iter().zip(v.iter()) {
        s += w2_exact(a, b)?.powi(2);
    }
    Ok(s.sqrt())
}

/// Right-continuous generalized inverse `inf { x : F(x) > m }` of the
/// piecewise-linear CDF of `v`, clamped to the support for `m <= 0`, `m >= 1`.
struct InverseCdf<'a> {
    grid: &'a Grid1D,
    values: &'a [f64],
    cdf: Vec<f64>,
    first: usize,
    last: usize,
}

impl<'a> InverseCdf<'a> {
    fn new(v: &'a Density) -> Result<Self> {
        let values = v.values();
        let first = values
            .iter()
            .position(|x| *x > 0.0)
            .ok_or(Error::DegenerateSupport)?;
        let last = values
            .iter()
            .rposition(|x| *x > 0.0)
            .ok_or(Error::DegenerateSupport)?;
        Ok(Self {
            grid: v.grid(),
            values,
            cdf: v.cdf_edges(),
            first,
            last,
        })
    }

    fn eval(&self, m: f64) -> f64 {
        let total = self.cdf[self.cdf.len() - 1];
        if m <= 0.0 {
            return self.grid.edge(self.first);
        }
        if m >= total {
            return self.grid.edge(self.last + 1);
        }
        // First cell whose right-edge CDF exceeds m; it has positive mass.
        let c = self.cdf[1..].partition_point(|f| *f <= m);
        let c = c.min(self.last);
        let lo = self.grid.edge(c);
        if self.values[c] > 0.0 {
            (lo + (m - self.cdf[c]) / self.values[c]).clamp(lo, self.grid.edge(c + 1))
        } else {
            lo
        }
    }
}

/// Monotone map `T = V⁻¹ ∘ U` pushing `u` to `v`, sampled at edges and centres.
pub fn optimal_map_1d(u: &Density, v: &Density) -> Result<TransportMap> {
    same_grid(u, v)?;
    if !(u.mass() > 0.0) {
        return Err(Error::DegenerateSupport);
    }
    let inv = InverseCdf::new(v)?;
    let g = *u.grid();
    let cdf_u = u.cdf_edges();
    let scale = v.mass() / u.mass();
    let edges: Vec<f64> = cdf_u.iter().map(|m| inv.eval(m * scale)).collect();
    let centers: Vec<f64> = (0..g.n_cells())
        .map(|c| inv.eval(0.5 * (cdf_u[c] + cdf_u[c + 1]) * scale))
        .collect();
    TransportMap::new(g, edges, centers)
}

/// Kantorovich potential `φ` with `T = I − ∇φ`, sampled per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialField {
    pub grid: Grid1D,
    /// `φ` at cell centres, zero at the leftmost support cell.
    pub values: Vec<f64>,
    /// `∇φ(x_c) = x_c − T(x_c)`.
    pub gradient: Vec<f64>,
}

impl PotentialField {
    /// Differences of `φ` across interior interfaces.
    pub fn interface_gradient(&self) -> Vec<f64> {
        let h = self.grid.h();
        self.values.windows(2).map(|w| (w[1] - w[0]) / h).collect()
    }

    /// Discrete check that `½x² − φ` is convex, i.e. `φ` is 1-convex in the
    /// optimal-transport sense.
    pub fn is_one_convex(&self, tol: f64) -> bool {
        let h = self.grid.h();
        let psi: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(c, p)| 0.5 * self.grid.center(c).powi(2) - p)
            .collect();
        psi.windows(3)
            .all(|w| (w[0] - 2.0 * w[1] + w[2]) / (h * h) >= -tol)
    }
}

/// Potential of the optimal map from `u` to `v`.
pub fn kantorovich_potential_1d(u: &Density, v: &Density) -> Result<PotentialField> {
    let map = optimal_map_1d(u, v)?;
    let g = *u.grid();
    let gradient: Vec<f64> = (0..g.n_cells()).map(|c| -map.displacement(c)).collect();
    let anchor = u
        .values()
        .iter()
        .position(|x| *x > 0.0)
        .ok_or(Error::DegenerateSupport)?;
    let h = g.h();
    let mut values = vec![0.0; g.n_cells()];
    for c in anchor + 1..g.n_cells() {
        values[c] = values[c - 1] + 0.5 * h * (gradient[c - 1] + gradient[c]);
    }
    for c in (0..anchor).rev() {
        values[c] = values[c + 1] - 0.5 * h * (gradient[c] + gradient[c + 1]);
    }
    Ok(PotentialField {
        grid: g,
        values,
        gradient,
    })
}

/// `∫ |∇φ|² u dx` by midpoint quadrature.
pub fn kantorovich_integral(u: &Density, phi: &PotentialField) -> f64 {
    u.grid().h()
        * u.values()
            .iter()
            .zip(&phi.gradient)
            .map(|(w, g)| w * g * g)
            .sum::<f64>()
}
