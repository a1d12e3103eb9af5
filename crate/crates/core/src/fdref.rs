//! Explicit finite-volume references and closed-form oracles.
//!
//! These solvers share no code with the minimizing-movement path apart from
//! the grid types, so agreement between the two is a meaningful check.

use serde::{Deserialize, Serialize};

use crate::energies::{laplacian_neumann, pressure_from_slices, CouplingMatrix};
use crate::error::{Error, Result};
use crate::measures::{Density, DensityVector, Grid1D};

/// Largest `dt` accepted by [`step_bt_fd`].
pub fn bt_admissible_dt(u: &DensityVector, a: &CouplingMatrix) -> Result<f64> {
    let p = crate::energies::pressure(u, a)?;
    let pmax = p.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
    let h = u.grid().h();
    Ok(if pmax > 0.0 {
        0.5 * h * h / pmax
    } else {
        f64::INFINITY
    })
}

fn check_negativity(values: &[Vec<f64>], n_cells: usize) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if let Some((c, x)) = v
            .iter()
            .enumerate()
            .find(|(_, x)| **x < 0.0 || !x.is_finite())
        {
            return Err(Error::NegativityDetected {
                cell: i * n_cells + c,
                value: *x,
            });
        }
    }
    Ok(())
}

/// One explicit step of `∂t u_i = ∂x(u_i ∂x p_i)` with no-flux boundaries.
///
/// Interface flux `ū_i (p_i(c+1) − p_i(c)) / h`, `ū` the arithmetic mean.
pub fn step_bt_fd(u: &DensityVector, a: &CouplingMatrix, dt: f64) -> Result<DensityVector> {
    let admissible = bt_admissible_dt(u, a)?;
    if !(dt > 0.0) || dt > admissible {
        return Err(Error::CflViolation { dt, admissible });
    }
    let h = u.grid().h();
    let slices: Vec<&[f64]> = u.iter().map(|d| d.values()).collect();
    let p = pressure_from_slices(&slices, a);
    let next: Vec<Vec<f64>> = slices
        .iter()
        .zip(&p)
        .map(|(ui, pi)| flux_update(ui, pi, dt, h))
        .collect();
    check_negativity(&next, u.grid().n_cells())?;
    DensityVector::from_values(*u.grid(), next)
}

/// `u + dt ∂x(ū ∂x q)` in flux form; the mass change telescopes to zero.
pub(crate) fn flux_update(u: &[f64], q: &[f64], dt: f64, h: f64) -> Vec<f64> {
    let n = u.len();
    let mut out = u.to_vec();
    let k = dt / (h * h);
    for c in 0..n - 1 {
        let f = 0.5 * (u[c] + u[c + 1]) * (q[c + 1] - q[c]) * k;
        out[c] += f;
        out[c + 1] -= f;
    }
    out
}

/// Largest `dt` accepted by [`step_bt4_fd`]: `h⁴ / (8 max u)`, further
/// limited by the second-order bound of [`bt_admissible_dt`].
pub fn bt4_admissible_dt(u: &DensityVector, a: &CouplingMatrix) -> Result<f64> {
    let umax = u
        .iter()
        .flat_map(|d| d.values().iter())
        .fold(0.0f64, |m, v| m.max(*v));
    let h = u.grid().h();
    let fourth = if umax > 0.0 {
        h.powi(4) / (8.0 * umax)
    } else {
        f64::INFINITY
    };
    Ok(fourth.min(bt_admissible_dt(u, a)?))
}

/// One explicit step of the fourth-order system
/// `∂t u_i = ∂x(u_i ∂x(p_i − ∂xx u_i))`, the gradient flow of
/// `½ Σ a_ij ∫ u_i u_j + ½ Σ ∫ |∂x u_i|²`.
pub fn step_bt4_fd(u: &DensityVector, a: &CouplingMatrix, dt: f64) -> Result<DensityVector> {
    let admissible = bt4_admissible_dt(u, a)?;
    if !(dt > 0.0) || dt > admissible {
        return Err(Error::CflViolation { dt, admissible });
    }
    let h = u.grid().h();
    let slices: Vec<&[f64]> = u.iter().map(|d| d.values()).collect();
    let p = pressure_from_slices(&slices, a);
    let next: Vec<Vec<f64>> = slices
        .iter()
        .zip(&p)
        .map(|(ui, pi)| {
            let lap = laplacian_neumann(ui, h);
            let q: Vec<f64> = pi.iter().zip(&lap).map(|(p, l)| p - l).collect();
            flux_update(ui, &q, dt, h)
        })
        .collect();
    check_negativity(&next, u.grid().n_cells())?;
    DensityVector::from_values(*u.grid(), next)
}

/// Advances with automatic steps `safety · admissible` until `t_final`,
/// landing exactly on it. Returns the final state and the number of steps.
pub fn run_bt_fd(
    u0: &DensityVector,
    a: &CouplingMatrix,
    t_final: f64,
    safety: f64,
) -> Result<(DensityVector, usize)> {
    let mut u = u0.clone();
    let mut t = 0.0;
    let mut steps = 0;
    while t < t_final * (1.0 - 1e-14) {
        let dt = (safety * bt_admissible_dt(&u, a)?).min(t_final - t);
        u = step_bt_fd(&u, a, dt)?;
        t += dt;
        steps += 1;
    }
    Ok((u, steps))
}

/// Source-type solution of `∂t u = ½ ∂xx u²` (equivalently `∂t u = ∂x(u ∂x u)`):
///
/// `u(t, x) = s^{-1/3} (C − (x − x0)² s^{-2/3} / 12)_+`, `s = t/2`,
///
/// with `C = (3M / (4√12))^{2/3}` fixing the mass `M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Barenblatt {
    pub mass: f64,
    pub center: f64,
}

impl Barenblatt {
    pub fn new(mass: f64) -> Self {
        Self { mass, center: 0.0 }
    }

    pub fn centered_at(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn constant(&self) -> f64 {
        (3.0 * self.mass / (4.0 * 12f64.sqrt())).powf(2.0 / 3.0)
    }

    /// Peak value `u(t, x0)`.
    pub fn peak(&self, t: f64) -> f64 {
        (0.5 * t).powf(-1.0 / 3.0) * self.constant()
    }

    /// Time at which the peak equals `height`.
    pub fn time_for_peak(&self, height: f64) -> f64 {
        2.0 * (self.constant() / height).powi(3)
    }

    /// Half-width of the support at time `t`.
    pub fn front(&self, t: f64) -> f64 {
        (12.0 * self.constant()).sqrt() * (0.5 * t).powf(1.0 / 3.0)
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        let s = 0.5 * t;
        let y = (x - self.center) * s.powf(-1.0 / 3.0);
        s.powf(-1.0 / 3.0) * (self.constant() - y * y / 12.0).max(0.0)
    }

    /// Exact integral of the profile over `[a, b]`.
    pub fn integral(&self, t: f64, a: f64, b: f64) -> f64 {
        let r = self.front(t);
        let lo = (a - self.center).max(-r);
        let hi = (b - self.center).min(r);
        if hi <= lo {
            return 0.0;
        }
        let s = 0.5 * t;
        let k = s.powf(-1.0 / 3.0);
        let prim = |x: f64| k * (self.constant() * x - x.powi(3) * k * k / 36.0);
        prim(hi) - prim(lo)
    }

    /// Cell averages on `grid` (not renormalized).
    pub fn cell_averages(&self, t: f64, grid: &Grid1D) -> Result<Vec<f64>> {
        if !(t > 0.0) {
            return Err(Error::NonpositiveTime(t));
        }
        let h = grid.h();
        Ok((0..grid.n_cells())
            .map(|c| self.integral(t, grid.edge(c), grid.edge(c + 1)) / h)
            .collect())
    }
}

/// Cell-averaged Barenblatt profile of the given mass at time `t`.
pub fn barenblatt(t: f64, grid: Grid1D, mass: f64) -> Result<Density> {
    Density::new(grid, Barenblatt::new(mass).cell_averages(t, &grid)?)
}

/// Heat kernel `exp(−(x−x0)²/(4κt)) / sqrt(4πκt)` for `∂t u = κ ∂xx u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatKernel {
    pub diffusivity: f64,
    pub center: f64,
}

impl HeatKernel {
    pub fn value(&self, t: f64, x: f64) -> f64 {
        let s = 4.0 * self.diffusivity * t;
        (-(x - self.center).powi(2) / s).exp() / (std::f64::consts::PI * s).sqrt()
    }

    /// Cell averages via the error function.
    pub fn cell_averages(&self, t: f64, grid: &Grid1D) -> Result<Vec<f64>> {
        if !(t > 0.0) {
            return Err(Error::NonpositiveTime(t));
        }
        let s = (4.0 * self.diffusivity * t).sqrt();
        let cdf = |x: f64| 0.5 * (1.0 + erf((x - self.center) / s));
        let h = grid.h();
        Ok((0..grid.n_cells())
            .map(|c| (cdf(grid.edge(c + 1)) - cdf(grid.edge(c))) / h)
            .collect())
    }
}

/// Error function: Maclaurin series for small arguments, continued fraction
/// of the complement otherwise. Absolute error below 1e-13.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x < 2.5 {
        // Maclaurin series: erf x = 2/√π Σ (−1)^n x^{2n+1} / (n! (2n+1)).
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x2 / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        // Continued fraction for erfc, evaluated backwards.
        let mut f = 0.0;
        for k in (1..60).rev() {
            f = (k as f64 / 2.0) / (x + f);
        }
        1.0 - (-x * x).exp() / std::f64::consts::PI.sqrt() / (x + f)
    }
}

/// `h Σ |a − b|`.
pub fn l1_error(a: &Density, b: &Density) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.grid().h()
        * a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>())
}

/// `max |a − b|`.
pub fn linf_error(a: &Density, b: &Density) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energies::{energy_dirichlet, energy_quadratic};

    #[test]
    fn barenblatt_constants() {
        let b = Barenblatt::new(1.0);
        assert!((b.constant() - 0.360_562_392_576_852).abs() < 1e-12);
        let t0 = b.time_for_peak(1.0);
        assert!((b.peak(t0) - 1.0).abs() < 1e-12);
        assert!((t0 - 3.0 / 32.0).abs() < 1e-14);
        assert!((b.front(t0) - 0.75).abs() < 1e-12);
        assert!((b.integral(t0, -5.0, 5.0) - 1.0).abs() < 1e-13);
        assert!((b.centered_at(0.3).integral(2.0, -9.0, 9.0) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn barenblatt_mass_on_grid() {
        let g = Grid1D::new(200, -4.0, 4.0).unwrap();
        let d = barenblatt(1.0, g, 1.0).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-8);
        assert!(barenblatt(0.0, g, 1.0).is_err());
    }

    #[test]
    fn barenblatt_self_similarity() {
        let b = Barenblatt::new(1.0);
        for &t in &[0.05, 0.3, 1.7] {
            for k in 0..50 {
                let x = -1.0 + 0.04 * k as f64;
                assert!((b.value(8.0 * t, x) - 0.5 * b.value(t, 0.5 * x)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn barenblatt_solves_the_pde() {
        // Pointwise residual of ∂t u − ½ ∂xx u² inside the support, central
        // differences in space and time with δt ∝ h.
        let b = Barenblatt::new(1.0);
        let t = 0.5;
        let residual = |h: f64| {
            let dt = h;
            let mut worst = 0.0f64;
            let r = 0.6 * b.front(t);
            let mut x = -r;
            while x <= r {
                let ut = (b.value(t + dt, x) - b.value(t - dt, x)) / (2.0 * dt);
                let sq = |y: f64| b.value(t, y).powi(2);
                let uxx = (sq(x + h) - 2.0 * sq(x) + sq(x - h)) / (h * h);
                worst = worst.max((ut - 0.5 * uxx).abs());
                x += h;
            }
            worst
        };
        let (r1, r2) = (residual(0.02), residual(0.01));
        assert!(r2 < 1e-3, "residual {r2}");
        assert!(r1 / r2 > 3.5, "ratio {}", r1 / r2);
    }

    #[test]
    fn erf_values() {
        assert!((erf(0.5) - 0.520_499_877_813_046_5).abs() < 1e-14);
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-14);
        assert!((erf(3.0) - 0.999_977_909_503_001_4).abs() < 1e-13);
        assert!((erf(-2.0) + 0.995_322_265_018_952_7).abs() < 1e-13);
    }

    #[test]
    fn constant_state_is_steady() {
        let g = Grid1D::new(16, 0.0, 1.0).unwrap();
        let u = DensityVector::new(vec![Density::uniform(g), Density::uniform(g)]).unwrap();
        let a = CouplingMatrix::new(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let next = step_bt_fd(&u, &a, 1e-4).unwrap();
        assert_eq!(next, u);
        let next = step_bt4_fd(&u, &a, 1e-7).unwrap();
        assert_eq!(next, u);
    }

    #[test]
    fn cfl_is_enforced() {
        let g = Grid1D::new(16, 0.0, 1.0).unwrap();
        let u = DensityVector::new(vec![Density::uniform(g)]).unwrap();
        let a = CouplingMatrix::identity(1);
        match step_bt_fd(&u, &a, 1.0) {
            Err(Error::CflViolation { admissible, .. }) => {
                assert!((admissible - 0.5 / 256.0).abs() < 1e-15)
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            step_bt4_fd(&u, &a, 1e-3),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn identity_coupling_decouples() {
        let g = Grid1D::new(64, -2.0, 2.0).unwrap();
        let u1 = barenblatt(0.1, g, 1.0).unwrap();
        let u2 = Density::from_fn(g, |x| (-(x - 0.3).powi(2) * 4.0).exp()).unwrap();
        let pair = DensityVector::new(vec![u1.clone(), u2.clone()]).unwrap();
        let dt = 0.5 * bt_admissible_dt(&pair, &CouplingMatrix::identity(2)).unwrap();
        let both = step_bt_fd(&pair, &CouplingMatrix::identity(2), dt).unwrap();
        let one = step_bt_fd(
            &DensityVector::new(vec![u1]).unwrap(),
            &CouplingMatrix::identity(1),
            dt,
        )
        .unwrap();
        let two = step_bt_fd(
            &DensityVector::new(vec![u2]).unwrap(),
            &CouplingMatrix::identity(1),
            dt,
        )
        .unwrap();
        assert_eq!(both.values(0), one.values(0));
        assert_eq!(both.values(1), two.values(0));
    }

    #[test]
    fn fourth_order_linear_decay_rate() {
        // Small Neumann cosine mode on a constant background ū decays at the
        // rate of the semi-discrete linearization, ū μ (a + μ).
        let n = 32;
        let g = Grid1D::new(n, 0.0, 1.0).unwrap();
        let a = 1.0;
        let k = 2.0;
        let eps = 1e-6;
        let h = g.h();
        let mode: Vec<f64> = (0..n)
            .map(|c| (k * std::f64::consts::PI * (c as f64 + 0.5) / n as f64).cos())
            .collect();
        let vals: Vec<f64> = mode.iter().map(|m| 1.0 + eps * m).collect();
        let mut u = DensityVector::from_values(g, vec![vals]).unwrap();
        let coupling = CouplingMatrix::new(vec![vec![a]]).unwrap();
        let mu = 4.0 / (h * h) * (k * std::f64::consts::PI / (2.0 * n as f64)).sin().powi(2);
        let rate = mu * (a + mu);
        let dt = 0.5 * bt4_admissible_dt(&u, &coupling).unwrap();
        let steps = 400;
        for _ in 0..steps {
            u = step_bt4_fd(&u, &coupling, dt).unwrap();
        }
        let amp: f64 = u
            .values(0)
            .iter()
            .zip(&mode)
            .map(|(v, m)| (v - 1.0) * m)
            .sum::<f64>()
            / mode.iter().map(|m| m * m).sum::<f64>();
        let measured = -(amp / eps).ln() / (steps as f64 * dt);
        assert!(
            (measured - rate).abs() < 0.1 * rate,
            "measured {measured}, predicted {rate}"
        );
    }

    #[test]
    fn fourth_order_energy_decays() {
        let g = Grid1D::new(48, 0.0, 1.0).unwrap();
        let u =
            Density::from_fn(g, |x| 1.0 + 0.3 * (6.0 * x).sin() + 0.2 * (17.0 * x).cos()).unwrap();
        let mut v = DensityVector::new(vec![u]).unwrap();
        let a = CouplingMatrix::identity(1);
        let energy = |v: &DensityVector| energy_quadratic(v, &a).unwrap() + energy_dirichlet(v);
        let mut e = energy(&v);
        for _ in 0..100 {
            let dt = 0.5 * bt4_admissible_dt(&v, &a).unwrap();
            v = step_bt4_fd(&v, &a, dt).unwrap();
            let e_next = energy(&v);
            assert!(e_next <= e + 1e-12 * e);
            assert!((v.species(0).mass() - 1.0).abs() < 1e-12);
            e = e_next;
        }
    }

    #[test]
    fn errors() {
        let g = Grid1D::new(10, 0.0, 1.0).unwrap();
        let a = Density::uniform(g);
        assert_eq!(l1_error(&a, &a).unwrap(), 0.0);
        let mut v = a.values().to_vec();
        v[3] += 1.0 / g.h();
        let b = Density::new(g, v).unwrap();
        assert!((l1_error(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert!((linf_error(&a, &b).unwrap() - 10.0).abs() < 1e-12);
    }
}
