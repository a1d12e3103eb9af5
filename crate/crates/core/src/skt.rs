//! Correlated two-particle model on a 2D grid.
//!
//! The joint density `p(x1, x2)` of two particles follows
//!
//! `∂t p = div(M(|x1 − x2|) p ∇p)`
//!
//! where the mobility `M(s) = c_M + Z exp(−s²/2σ²)` is a floored Gaussian
//! approximation of a delta concentrated on the diagonal. The marginals
//! `u1`, `u2` stay uncorrelated only while `p` avoids the diagonal band; the
//! relative entropy `H(p ‖ u1 ⊗ u2)` measures the correlation built up there.
//!
//! For comparison, the decoupled system evolves the two marginals alone,
//! with the nonlocal coefficient `a1(x) = ∫ M(|x − y|) u2(y)^q dy`:
//! `q = 2` for the quadratic closure, `q = 1` for the entropy variant, where
//! the flux is `a1 ∂x u1` instead of `u1 a1 ∂x u1`.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{CheckResult, RunRecord};
use crate::error::{Error, Result};
use crate::measures::{Density, Grid2D, JointDensity};

/// Below this the product `u1 u2` is floored inside the logarithm.
pub const PRODUCT_FLOOR: f64 = 1e-300;
/// Mass in the diagonal band that counts as contact.
pub const CONTACT_MASS: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobilityField {
    grid: Grid2D,
    values: Vec<f64>,
    sigma: f64,
    c_m: f64,
    amplitude: f64,
    min: f64,
    max: f64,
}

impl MobilityField {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, c1: usize, c2: usize) -> f64 {
        self.values[self.grid.index(c1, c2)]
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn floor(&self) -> f64 {
        self.c_m
    }

    /// Peak height above the floor, `Z`.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Smallest and largest value on the grid.
    pub fn bounds(&self) -> (f64, f64) {
        (self.min, self.max)
    }
}

/// `c_M + Z exp(−s²/2σ²)`.
pub fn mobility(s: f64, sigma: f64, c_m: f64, amplitude: f64) -> f64 {
    c_m + amplitude * (-(s * s) / (2.0 * sigma * sigma)).exp()
}

/// Mobility with `Z = 1/(σ√(2π))`, so that `M − c_M` integrates to one
/// across the diagonal.
pub fn build_mobility(grid: Grid2D, sigma: f64, c_m: f64) -> Result<MobilityField> {
    let z = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    build_mobility_with_amplitude(grid, sigma, c_m, z)
}

pub fn build_mobility_with_amplitude(
    grid: Grid2D,
    sigma: f64,
    c_m: f64,
    amplitude: f64,
) -> Result<MobilityField> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "mobility width must be positive, got {sigma}"
        )));
    }
    if !(c_m > 0.0 && c_m.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "mobility floor must be positive, got {c_m}"
        )));
    }
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "mobility amplitude must be nonnegative, got {amplitude}"
        )));
    }
    let mut values = Vec::with_capacity(grid.len());
    for c1 in 0..grid.n1() {
        for c2 in 0..grid.n2() {
            values.push(mobility(separation(&grid, c1, c2), sigma, c_m, amplitude));
        }
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(0.0, f64::max);
    Ok(MobilityField {
        grid,
        values,
        sigma,
        c_m,
        amplitude,
        min,
        max,
    })
}

/// `|x1 − x2|` between cell centres. On a grid with identical axes it is
/// computed from the index difference so that it is exactly symmetric.
fn separation(grid: &Grid2D, c1: usize, c2: usize) -> f64 {
    if grid.axis1() == grid.axis2() {
        c1.abs_diff(c2) as f64 * grid.h1()
    } else {
        (grid.axis1().center(c1) - grid.axis2().center(c2)).abs()
    }
}

fn check_grid(p: &Grid2D, m: &MobilityField) -> Result<()> {
    if p != m.grid() {
        return Err(Error::InvalidInput(
            "density and mobility live on different grids".into(),
        ));
    }
    Ok(())
}

/// Largest `dt` with `dt ≤ ¼ min(h1,h2)² / max(M p)`, where `M` at each cell
/// is the largest value over the cell and its four neighbours, since those
/// enter the interface averages.
pub fn joint_admissible_dt(p: &JointDensity, m: &MobilityField) -> Result<f64> {
    let g = *p.grid();
    check_grid(&g, m)?;
    let (n1, n2) = (g.n1(), g.n2());
    let mut worst = 0.0f64;
    for c1 in 0..n1 {
        for c2 in 0..n2 {
            let v = p.at(c1, c2);
            if v == 0.0 {
                continue;
            }
            let mut mm = m.at(c1, c2);
            if c1 > 0 {
                mm = mm.max(m.at(c1 - 1, c2));
            }
            if c1 + 1 < n1 {
                mm = mm.max(m.at(c1 + 1, c2));
            }
            if c2 > 0 {
                mm = mm.max(m.at(c1, c2 - 1));
            }
            if c2 + 1 < n2 {
                mm = mm.max(m.at(c1, c2 + 1));
            }
            worst = worst.max(mm * v);
        }
    }
    let h = g.h1().min(g.h2());
    Ok(if worst > 0.0 {
        0.25 * h * h / worst
    } else {
        f64::INFINITY
    })
}

/// One explicit finite-volume step with interface flux `M̄ p̄ ∂p`
/// (arithmetic averages, two-point gradient) and no-flux boundaries.
pub fn step_joint_fd(p: &JointDensity, m: &MobilityField, dt: f64) -> Result<JointDensity> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let admissible = joint_admissible_dt(p, m)?;
    if dt > admissible * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, admissible });
    }
    let g = *p.grid();
    let (n1, n2) = (g.n1(), g.n2());
    let v = p.values();
    let mv = m.values();
    let idx = |c1: usize, c2: usize| c1 * n2 + c2;
    let flux = |a: usize, b: usize| 0.5 * (mv[a] + mv[b]) * 0.5 * (v[a] + v[b]) * (v[b] - v[a]);
    // Interface fluxes without the 1/h factor; f1[c1][c2] sits between
    // (c1, c2) and (c1 + 1, c2).
    let mut f1 = vec![0.0; (n1 - 1) * n2];
    for c1 in 0..n1 - 1 {
        for c2 in 0..n2 {
            f1[c1 * n2 + c2] = flux(idx(c1, c2), idx(c1 + 1, c2));
        }
    }
    let mut f2 = vec![0.0; n1 * (n2 - 1)];
    for c1 in 0..n1 {
        for c2 in 0..n2 - 1 {
            f2[c1 * (n2 - 1) + c2] = flux(idx(c1, c2), idx(c1, c2 + 1));
        }
    }
    let k1 = 1.0 / (g.h1() * g.h1());
    let k2 = 1.0 / (g.h2() * g.h2());
    let mut out = vec![0.0; v.len()];
    for c1 in 0..n1 {
        for c2 in 0..n2 {
            let right = if c1 + 1 < n1 { f1[c1 * n2 + c2] } else { 0.0 };
            let left = if c1 > 0 { f1[(c1 - 1) * n2 + c2] } else { 0.0 };
            let up = if c2 + 1 < n2 {
                f2[c1 * (n2 - 1) + c2]
            } else {
                0.0
            };
            let down = if c2 > 0 {
                f2[c1 * (n2 - 1) + c2 - 1]
            } else {
                0.0
            };
            // Both directions are summed before the increment so that the
            // update is exactly equivariant under swapping the axes.
            let div = (right - left) * k1 + (up - down) * k2;
            let c = idx(c1, c2);
            let next = v[c] + dt * div;
            if next < 0.0 || !next.is_finite() {
                return Err(Error::NegativityDetected {
                    cell: c,
                    value: next,
                });
            }
            out[c] = next;
        }
    }
    Ok(JointDensity::from_raw(g, out))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalPair {
    pub u1: Density,
    pub u2: Density,
}

impl MarginalPair {
    pub fn swapped(&self) -> Self {
        Self {
            u1: self.u2.clone(),
            u2: self.u1.clone(),
        }
    }

    /// `‖u1 − v1‖₁ + ‖u2 − v2‖₁`.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        let d = |a: &Density, b: &Density| {
            a.grid().h()
                * a.values()
                    .iter()
                    .zip(b.values())
                    .map(|(x, y)| (x - y).abs())
                    .sum::<f64>()
        };
        d(&self.u1, &other.u1) + d(&self.u2, &other.u2)
    }
}

pub fn marginals(p: &JointDensity) -> MarginalPair {
    let g = *p.grid();
    let mut u1 = vec![0.0; g.n1()];
    let mut u2 = vec![0.0; g.n2()];
    for c1 in 0..g.n1() {
        for c2 in 0..g.n2() {
            let v = p.at(c1, c2);
            u1[c1] += v;
            u2[c2] += v;
        }
    }
    u1.iter_mut().for_each(|v| *v *= g.h2());
    u2.iter_mut().for_each(|v| *v *= g.h1());
    MarginalPair {
        u1: Density::from_raw(*g.axis1(), u1),
        u2: Density::from_raw(*g.axis2(), u2),
    }
}

/// `H(p ‖ u1 ⊗ u2) = h1 h2 Σ p log(p / (u1 u2))` over cells with `p > 0`.
pub fn relative_entropy(p: &JointDensity) -> f64 {
    let g = *p.grid();
    let m = marginals(p);
    let (a, b) = (m.u1.values(), m.u2.values());
    let mut s = 0.0;
    for c1 in 0..g.n1() {
        for c2 in 0..g.n2() {
            let v = p.at(c1, c2);
            if v > 0.0 {
                s += v * (v / (a[c1] * b[c2]).max(PRODUCT_FLOOR)).ln();
            }
        }
    }
    let h = g.cell_area() * s;
    debug_assert!(h >= -1e-12, "relative entropy {h} is negative");
    h
}

/// Mass of `p` in the band `|x1 − x2| < width`.
pub fn band_mass(p: &JointDensity, width: f64) -> f64 {
    let g = *p.grid();
    let mut s = 0.0;
    for c1 in 0..g.n1() {
        for c2 in 0..g.n2() {
            if separation(&g, c1, c2) < width {
                s += p.at(c1, c2);
            }
        }
    }
    g.cell_area() * s
}

/// The map `(x1, x2) ↦ (−x2, −x1)` on a square grid symmetric about the
/// origin, i.e. the axis swap composed with the reflection through the
/// centre.
pub fn swap_reflect(p: &JointDensity) -> Result<JointDensity> {
    let g = *p.grid();
    if g.axis1() != g.axis2() {
        return Err(Error::InvalidInput(
            "swap-reflection needs identical axes".into(),
        ));
    }
    let n = g.n1();
    let mut out = vec![0.0; g.len()];
    for c1 in 0..n {
        for c2 in 0..n {
            out[g.index(n - 1 - c2, n - 1 - c1)] = p.at(c1, c2);
        }
    }
    Ok(JointDensity::from_raw(g, out))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoupledVariant {
    /// `∂t u1 = ∂x(u1 a1 ∂x u1)` with `a1 = ∫ M u2² dy`.
    Quadratic,
    /// `∂t u1 = ∂x(a1 ∂x u1)` with `a1 = ∫ M u2 dy`.
    Entropy,
}

/// Nonlocal coefficients `(a1 on axis 1, a2 on axis 2)`.
pub fn nonlocal_coefficients(
    u: &MarginalPair,
    m: &MobilityField,
    variant: DecoupledVariant,
) -> (Vec<f64>, Vec<f64>) {
    let g = m.grid();
    let pow = |v: f64| match variant {
        DecoupledVariant::Quadratic => v * v,
        DecoupledVariant::Entropy => v,
    };
    let w1: Vec<f64> = u.u1.values().iter().map(|&v| pow(v)).collect();
    let w2: Vec<f64> = u.u2.values().iter().map(|&v| pow(v)).collect();
    let a1 = (0..g.n1())
        .map(|c1| g.h2() * (0..g.n2()).map(|c2| m.at(c1, c2) * w2[c2]).sum::<f64>())
        .collect();
    let a2 = (0..g.n2())
        .map(|c2| g.h1() * (0..g.n1()).map(|c1| m.at(c1, c2) * w1[c1]).sum::<f64>())
        .collect();
    (a1, a2)
}

fn check_marginal_grid(u: &MarginalPair, m: &MobilityField) -> Result<()> {
    if u.u1.grid() != m.grid().axis1() || u.u2.grid() != m.grid().axis2() {
        return Err(Error::InvalidInput(
            "marginals and mobility live on different grids".into(),
        ));
    }
    Ok(())
}

/// Largest diffusivity next to each cell, as seen by the interface averages.
fn local_diffusivity(a: &[f64], u: &[f64], variant: DecoupledVariant) -> f64 {
    let n = a.len();
    (0..n)
        .map(|c| {
            let am = a[c.saturating_sub(1)].max(a[c]).max(a[(c + 1).min(n - 1)]);
            match variant {
                DecoupledVariant::Quadratic => am * u[c],
                DecoupledVariant::Entropy => am,
            }
        })
        .fold(0.0, f64::max)
}

pub fn decoupled_admissible_dt(
    u: &MarginalPair,
    m: &MobilityField,
    variant: DecoupledVariant,
) -> Result<f64> {
    check_marginal_grid(u, m)?;
    let (a1, a2) = nonlocal_coefficients(u, m, variant);
    Ok(admissible_from(u, &a1, &a2, variant))
}

fn admissible_from(u: &MarginalPair, a1: &[f64], a2: &[f64], variant: DecoupledVariant) -> f64 {
    let d1 = local_diffusivity(a1, u.u1.values(), variant);
    let d2 = local_diffusivity(a2, u.u2.values(), variant);
    let h1 = u.u1.grid().h();
    let h2 = u.u2.grid().h();
    let bound = |h: f64, d: f64| {
        if d > 0.0 {
            0.25 * h * h / d
        } else {
            f64::INFINITY
        }
    };
    bound(h1, d1).min(bound(h2, d2))
}

fn step_1d(u: &Density, a: &[f64], dt: f64, variant: DecoupledVariant) -> Result<Density> {
    let v = u.values();
    let h = u.grid().h();
    let n = v.len();
    let flux: Vec<f64> = (0..n - 1)
        .map(|c| {
            let am = 0.5 * (a[c] + a[c + 1]);
            let d = v[c + 1] - v[c];
            match variant {
                DecoupledVariant::Quadratic => am * 0.5 * (v[c] + v[c + 1]) * d,
                DecoupledVariant::Entropy => am * d,
            }
        })
        .collect();
    let k = dt / (h * h);
    let mut out = Vec::with_capacity(n);
    for c in 0..n {
        let right = if c + 1 < n { flux[c] } else { 0.0 };
        let left = if c > 0 { flux[c - 1] } else { 0.0 };
        let next = v[c] + k * (right - left);
        if next < 0.0 || !next.is_finite() {
            return Err(Error::NegativityDetected {
                cell: c,
                value: next,
            });
        }
        out.push(next);
    }
    Ok(Density::from_raw(*u.grid(), out))
}

/// Explicit step of both marginals with the nonlocal coefficients frozen at
/// the current state.
pub fn step_decoupled_fd(
    u: &MarginalPair,
    m: &MobilityField,
    dt: f64,
    variant: DecoupledVariant,
) -> Result<MarginalPair> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "time step must be positive, got {dt}"
        )));
    }
    check_marginal_grid(u, m)?;
    let (a1, a2) = nonlocal_coefficients(u, m, variant);
    let admissible = admissible_from(u, &a1, &a2, variant);
    if dt > admissible * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, admissible });
    }
    Ok(MarginalPair {
        u1: step_1d(&u.u1, &a1, dt, variant)?,
        u2: step_1d(&u.u2, &a2, dt, variant)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SktConfig {
    /// Cells per axis.
    pub n: usize,
    /// The square `[lo, hi]²`.
    pub lo: f64,
    pub hi: f64,
    /// Centre of the initial product Gaussian.
    pub center: [f64; 2],
    /// Variances along the two axes.
    pub variance: [f64; 2],
    pub sigma: f64,
    pub c_m: f64,
    /// `Z`; the delta normalization `1/(σ√(2π))` when absent.
    pub amplitude: Option<f64>,
    pub t_final: f64,
    /// Fixed step; otherwise `safety` times the admissible step, capped at
    /// `max_dt` so the entropy series stays resolved in time.
    pub dt: Option<f64>,
    pub safety: f64,
    pub max_dt: f64,
    /// Times at which the joint density is kept; `t_final` is always kept.
    pub snapshot_times: Vec<f64>,
}

impl Default for SktConfig {
    fn default() -> Self {
        Self {
            n: 128,
            lo: -5.0,
            hi: 5.0,
            center: [-2.0, 2.0],
            variance: [0.5, 0.5],
            sigma: 0.3,
            c_m: 1e-3,
            amplitude: None,
            t_final: 1.0,
            dt: None,
            safety: 0.9,
            max_dt: 1e-3,
            snapshot_times: Vec::new(),
        }
    }
}

impl SktConfig {
    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::square(self.n, self.lo, self.hi)
    }

    pub fn mobility(&self) -> Result<MobilityField> {
        let grid = self.grid()?;
        match self.amplitude {
            Some(z) => build_mobility_with_amplitude(grid, self.sigma, self.c_m, z),
            None => build_mobility(grid, self.sigma, self.c_m),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "t_final must be nonnegative, got {}",
                self.t_final
            )));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "safety must lie in (0, 1], got {}",
                self.safety
            )));
        }
        if !(self.max_dt > 0.0) {
            return Err(Error::InvalidInput(format!(
                "max_dt must be positive, got {}",
                self.max_dt
            )));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "dt must be positive, got {dt}"
                )));
            }
        }
        if self.variance.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "variances must be positive, got {:?}",
                self.variance
            )));
        }
        Ok(())
    }

    /// Normalized Gaussian marginals. When the data are invariant under
    /// `(x1, x2) ↦ (−x2, −x1)` the second is built as the mirror image of the
    /// first, so that the symmetry holds exactly.
    pub fn initial_marginals(&self) -> Result<MarginalPair> {
        let grid = self.grid()?;
        let gauss = |c: f64, v: f64| move |x: f64| (-(x - c).powi(2) / (2.0 * v)).exp();
        let u1 = Density::from_fn(*grid.axis1(), gauss(self.center[0], self.variance[0]))?;
        let symmetric = self.lo == -self.hi
            && self.center[1] == -self.center[0]
            && self.variance[0] == self.variance[1];
        let u2 = if symmetric {
            let mut v = u1.values().to_vec();
            v.reverse();
            Density::new(*grid.axis2(), v)?
        } else {
            Density::from_fn(*grid.axis2(), gauss(self.center[1], self.variance[1]))?
        };
        Ok(MarginalPair { u1, u2 })
    }

    pub fn initial_joint(&self) -> Result<JointDensity> {
        let m = self.initial_marginals()?;
        Ok(JointDensity::product(&m.u1, &m.u2))
    }

    fn next_dt(&self, t: f64, admissible: f64) -> f64 {
        let dt = self
            .dt
            .unwrap_or((self.safety * admissible).min(self.max_dt));
        let mut dt = dt.min(self.t_final - t);
        // Land exactly on pending snapshot times.
        if let Some(s) = self
            .snapshot_times
            .iter()
            .copied()
            .filter(|s| *s > t * (1.0 + 1e-12) + 1e-15)
            .reduce(f64::min)
        {
            dt = dt.min(s - t);
        }
        dt
    }

    fn is_snapshot(&self, t: f64) -> bool {
        self.snapshot_times
            .iter()
            .any(|s| (s - t).abs() <= 1e-12 * s.abs().max(1.0))
    }
}

#[derive(Clone, Debug)]
pub struct SktRun {
    /// `(t, p)` at t = 0, every snapshot time and `t_final`.
    pub snapshots: Vec<(f64, JointDensity)>,
    pub marginals: Vec<(f64, MarginalPair)>,
    /// Per state: `times`, `entropy` (the relative entropy),
    /// `series["band_mass"]` and `series["mass"]`; per step: `taus`.
    pub record: RunRecord,
    /// Time of first diagonal contact, if any.
    pub contact_time: Option<f64>,
}

/// Simulates the joint density from a product Gaussian and checks the
/// qualitative behaviour of the relative entropy.
pub fn run_skt_scenario(config: &SktConfig) -> Result<SktRun> {
    config.validate()?;
    let mob = config.mobility()?;
    let mut p = config.initial_joint()?;
    let band = 2.0 * config.sigma;
    let mut record = RunRecord {
        times: vec![0.0],
        ..Default::default()
    };
    let mut band_series = vec![band_mass(&p, band)];
    let mut mass_series = vec![p.mass()];
    record.entropy.push(relative_entropy(&p));
    record.notes.push(format!(
        "mobility c_M + Z exp(-s^2/2σ^2) with σ = {}, c_M = {}, Z = {}; contact when the band |x1 - x2| < {band} holds mass > {CONTACT_MASS}",
        config.sigma,
        config.c_m,
        mob.amplitude()
    ));
    let mut snapshots = vec![(0.0, p.clone())];
    let mut marg = vec![(0.0, marginals(&p))];
    let mut contact = if band_series[0] > CONTACT_MASS {
        Some(0usize)
    } else {
        None
    };
    let mut t = 0.0;
    while t < config.t_final * (1.0 - 1e-12) {
        let dt = config.next_dt(t, joint_admissible_dt(&p, &mob)?);
        p = step_joint_fd(&p, &mob, dt)?;
        t += dt;
        let k = record.times.len();
        record.times.push(t);
        record.taus.push(dt);
        record.entropy.push(relative_entropy(&p));
        band_series.push(band_mass(&p, band));
        mass_series.push(p.mass());
        if contact.is_none() && band_series[k] > CONTACT_MASS {
            contact = Some(k);
        }
        if config.is_snapshot(t) {
            snapshots.push((t, p.clone()));
            marg.push((t, marginals(&p)));
        }
    }
    if snapshots.last().map(|s| s.0) != Some(t) {
        snapshots.push((t, p.clone()));
        marg.push((t, marginals(&p)));
    }

    let h = record.entropy.clone();
    let h0 = h[0];
    let h_end = *h.last().expect("nonempty");
    record.push_check(CheckResult::info(
        "entropy_initial",
        h0 <= 1e-6,
        1e-6 - h0,
        0.0,
        format!("H(0) = {h0:.3e}"),
    ));
    record.push_check(CheckResult::info(
        "entropy_growth",
        h_end > 10.0 * h0,
        h_end - 10.0 * h0,
        0.0,
        format!("H(0) = {h0:.3e}, H(t_final) = {h_end:.3e}"),
    ));
    let contact_time = contact.map(|k| record.times[k]);
    record.push_check(CheckResult::info(
        "diagonal_contact",
        contact.is_some(),
        band_series.iter().copied().fold(0.0, f64::max) - CONTACT_MASS,
        0.0,
        match contact_time {
            Some(tc) => format!("first contact at t = {tc:.4}"),
            None => "p never reaches the diagonal band".into(),
        },
    ));
    let tol = 1e-9;
    let mut margin = f64::INFINITY;
    let mut worst = None;
    if let Some(k0) = contact {
        for k in k0..h.len() - 1 {
            let d = h[k + 1] - h[k];
            if d < margin {
                margin = d;
                worst = Some(k);
            }
        }
    }
    if worst.is_none() {
        margin = 0.0;
    }
    record.push_check(CheckResult::info(
        "entropy_nondecreasing_after_contact",
        contact.is_some() && margin >= -tol,
        margin,
        tol,
        match worst {
            Some(k) => format!("smallest increment at step {k}"),
            None => "no steps after contact".into(),
        },
    ));
    let drift = mass_series
        .iter()
        .map(|m| (m - mass_series[0]).abs())
        .fold(0.0, f64::max);
    let unit = (mass_series[0] - 1.0).abs();
    record.push_check(CheckResult::info(
        "mass_conserved",
        drift.max(unit) <= 1e-10,
        1e-10 - drift.max(unit),
        0.0,
        format!("max drift {drift:.3e}"),
    ));
    record.series.insert("band_mass".into(), band_series);
    record.series.insert("mass".into(), mass_series);
    Ok(SktRun {
        snapshots,
        marginals: marg,
        record,
        contact_time,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub variant: DecoupledVariant,
    pub times: Vec<f64>,
    /// `‖u1^joint − u1^dec‖₁ + ‖u2^joint − u2^dec‖₁` per state.
    pub gap: Vec<f64>,
    /// Final states of both runs.
    pub joint_final: MarginalPair,
    pub decoupled_final: MarginalPair,
}

/// Runs the joint and decoupled models from the same initial marginals with
/// a common step, the smaller of the two admissible steps.
pub fn compare_correlated_vs_decoupled(
    config: &SktConfig,
    variant: DecoupledVariant,
) -> Result<CompareReport> {
    config.validate()?;
    let mob = config.mobility()?;
    let mut p = config.initial_joint()?;
    let mut u = config.initial_marginals()?;
    let gap0 = marginals(&p).l1_distance(&u);
    if gap0 > 1e-6 {
        return Err(Error::InvariantViolated(format!(
            "initial marginal gap {gap0:.3e}"
        )));
    }
    let mut times = vec![0.0];
    let mut gap = vec![gap0];
    let mut t = 0.0;
    while t < config.t_final * (1.0 - 1e-12) {
        let admissible =
            joint_admissible_dt(&p, &mob)?.min(decoupled_admissible_dt(&u, &mob, variant)?);
        let dt = config.next_dt(t, admissible);
        p = step_joint_fd(&p, &mob, dt)?;
        u = step_decoupled_fd(&u, &mob, dt, variant)?;
        t += dt;
        times.push(t);
        gap.push(marginals(&p).l1_distance(&u));
    }
    Ok(CompareReport {
        variant,
        times,
        gap,
        joint_final: marginals(&p),
        decoupled_final: u,
    })
}
