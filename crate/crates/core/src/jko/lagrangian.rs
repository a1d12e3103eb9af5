//! Minimizing movement in Lagrangian (quantile) coordinates.
//!
//! Unknowns are the positions `X_{i,l}` of every species at the uniform mass
//! levels. The objective
//!
//! `Φ(X) = Σ_i 1/(2τL) Σ_l (X_{i,l} − X^k_{i,l})² + E(to_density(X))`
//!
//! is minimized by projected gradient descent. The transport term is exact
//! in these coordinates; the energy gradient is the adjoint of the mass
//! deposition applied to the pressures.

use crate::energies::CouplingMatrix;
use crate::error::{Error, Result};
use crate::measures::{deposit_adjoint, deposit_masses, Grid1D};
use crate::monotone::project_monotone_box;

use super::JkoOptions;

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACK: usize = 60;
const MAX_INCREASES: usize = 10;

pub(crate) struct Problem<'a> {
    pub grid: Grid1D,
    pub a: &'a CouplingMatrix,
    pub tau: f64,
    pub prev: &'a [Vec<f64>],
    pub dirichlet: bool,
}

pub(crate) struct Outcome {
    pub positions: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

impl Problem<'_> {
    fn levels(&self) -> usize {
        self.prev[0].len()
    }

    pub fn masses(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|xi| {
                let mut m = vec![0.0; self.grid.n_cells()];
                deposit_masses(&self.grid, xi, &mut m);
                m
            })
            .collect()
    }

    /// Energy in terms of cell masses: `(1/2h) Σ_c Mᵀ A M` plus, optionally,
    /// `(1/2h³) Σ (M_{c+1} − M_c)²`.
    pub fn energy(&self, m: &[Vec<f64>]) -> f64 {
        let h = self.grid.h();
        let n = m.len();
        let mut terms = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let aij = self.a.get(i, j);
                if aij != 0.0 {
                    terms.push(aij * m[i].iter().zip(&m[j]).map(|(x, y)| x * y).sum::<f64>());
                }
            }
        }
        let mut e = order_free_sum(&mut terms) * (0.5 / h);
        if self.dirichlet {
            let d = order_free_sum(
                &mut m
                    .iter()
                    .map(|mi| mi.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>())
                    .collect::<Vec<_>>(),
            );
            e += 0.5 * d / (h * h * h);
        }
        e
    }

    fn transport(&self, x: &[Vec<f64>]) -> f64 {
        let l = self.levels() as f64;
        let s = order_free_sum(
            &mut x
                .iter()
                .zip(self.prev)
                .map(|(xi, pi)| xi.iter().zip(pi).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .collect::<Vec<_>>(),
        );
        s / (2.0 * self.tau * l)
    }

    fn objective(&self, x: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
        let m = self.masses(x);
        (self.transport(x) + self.energy(&m), m)
    }

    /// `∂E/∂M_{i,c}`: the pressure `p_i(c)`, minus the discrete Laplacian of
    /// `u_i` when the gradient energy is included.
    fn energy_gradient(&self, m: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let h = self.grid.h();
        let n = m.len();
        let mut terms = vec![0.0; n];
        (0..n)
            .map(|i| {
                let mut g = vec![0.0; self.grid.n_cells()];
                for (c, gc) in g.iter_mut().enumerate() {
                    for (j, t) in terms.iter_mut().enumerate() {
                        *t = self.a.get(i, j) / h * m[j][c];
                    }
                    *gc = order_free_sum(&mut terms);
                }
                if self.dirichlet {
                    let u: Vec<f64> = m[i].iter().map(|v| v / h).collect();
                    let lap = crate::energies::laplacian_neumann(&u, h);
                    g.iter_mut().zip(lap).for_each(|(gc, l)| *gc -= l);
                }
                g
            })
            .collect()
    }

    fn gradient(&self, x: &[Vec<f64>], m: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = 1.0 / (self.tau * self.levels() as f64);
        let ge = self.energy_gradient(m);
        x.iter()
            .zip(self.prev)
            .zip(&ge)
            .map(|((xi, pi), gi)| {
                let mut g: Vec<f64> = xi.iter().zip(pi).map(|(a, b)| k * (a - b)).collect();
                deposit_adjoint(&self.grid, xi, gi, &mut g);
                g
            })
            .collect()
    }

    fn project(&self, x: &mut [Vec<f64>]) {
        for xi in x.iter_mut() {
            project_monotone_box(xi, self.grid.x_min(), self.grid.x_max());
        }
    }

    /// Projected gradient descent from the previous state, Armijo
    /// backtracking with Barzilai–Borwein trial steps.
    pub fn solve(&self, opts: &JkoOptions) -> Result<Outcome> {
        let base_step = self.tau * self.levels() as f64;
        let mut x: Vec<Vec<f64>> = self.prev.to_vec();
        let (mut phi, m) = self.objective(&x);
        let mut g = self.gradient(&x, &m);
        let mut step = base_step;
        let mut increases = 0usize;
        let mut iterations = 0usize;
        let mut converged = false;

        while iterations < opts.max_iter {
            iterations += 1;
            let mut trial = step;
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACK {
                let mut y: Vec<Vec<f64>> = x
                    .iter()
                    .zip(&g)
                    .map(|(xi, gi)| xi.iter().zip(gi).map(|(a, b)| a - trial * b).collect())
                    .collect();
                self.project(&mut y);
                let gd: f64 = dot(&g, &y, &x);
                if gd == 0.0 {
                    break;
                }
                let (phi_y, m_y) = self.objective(&y);
                if phi_y <= phi + ARMIJO_C * gd {
                    accepted = Some((y, phi_y, m_y));
                    break;
                }
                trial *= 0.5;
            }
            let Some((y, phi_y, m_y)) = accepted else {
                // No descent direction left at working precision.
                converged = true;
                break;
            };
            if phi_y > phi {
                increases += 1;
                if increases >= MAX_INCREASES {
                    return Err(Error::InnerDiverged(format!(
                        "objective increased on {MAX_INCREASES} consecutive steps"
                    )));
                }
            } else {
                increases = 0;
            }
            let g_y = self.gradient(&y, &m_y);
            // Barzilai–Borwein step for the next trial.
            let (mut ss, mut sr) = (Vec::with_capacity(x.len()), Vec::with_capacity(x.len()));
            for i in 0..x.len() {
                let (mut a, mut b) = (0.0, 0.0);
                for l in 0..x[i].len() {
                    let s = y[i][l] - x[i][l];
                    a += s * s;
                    b += s * (g_y[i][l] - g[i][l]);
                }
                ss.push(a);
                sr.push(b);
            }
            let (ss, sr) = (order_free_sum(&mut ss), order_free_sum(&mut sr));
            step = if sr > 0.0 {
                (ss / sr).clamp(1e-6 * base_step, 1e6 * base_step)
            } else {
                2.0 * trial
            };
            let decrease = phi - phi_y;
            x = y;
            g = g_y;
            phi = phi_y;
            if decrease < opts.tol_obj * phi.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        Ok(Outcome {
            positions: x,
            iterations,
            converged,
        })
    }
}

/// `⟨g, y − x⟩` over all species.
fn dot(g: &[Vec<f64>], y: &[Vec<f64>], x: &[Vec<f64>]) -> f64 {
    order_free_sum(
        &mut g
            .iter()
            .zip(y.iter().zip(x))
            .map(|(gi, (yi, xi))| {
                gi.iter()
                    .zip(yi.iter().zip(xi))
                    .map(|(a, (b, c))| a * (b - c))
                    .sum::<f64>()
            })
            .collect::<Vec<_>>(),
    )
}

/// Sum of per-species terms in sorted order, so relabelling the species
/// cannot change a single bit of the result.
fn order_free_sum(terms: &mut [f64]) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}
