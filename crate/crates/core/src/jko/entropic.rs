//! Entropic proximal step on the Eulerian grid.
//!
//! Solves `min_π ⟨C, π⟩ + ε Σ π (log π − 1) + 2τ E(π₂)` subject to the first
//! marginal of each species' plan being the previous state, with
//! `C_xy = |x − y|²`. Scaling iterations in the log domain alternate between
//! the fixed first marginal and a per-cell proximal update of the second.
//! Species are swept in order with the others frozen.

use crate::energies::CouplingMatrix;
use crate::error::{Error, Result};
use crate::measures::Grid1D;

/// `log Σ exp(v)`, ignoring `-inf` entries.
fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Solves `y + α e^y = β` (`α >= 0`) by Newton from `β`, safeguarded by the
/// bracket `[β − α e^β, β]` with bisection fallback.
pub(crate) fn solve_prox(alpha: f64, beta: f64) -> f64 {
    if alpha == 0.0 {
        return beta;
    }
    let mut lo = beta - alpha * beta.exp();
    let mut hi = beta;
    let mut y = beta;
    for _ in 0..200 {
        let f = y + alpha * y.exp() - beta;
        if f.abs() <= 1e-12 * (1.0 + beta.abs()) {
            return y;
        }
        if f > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let next = y - f / (1.0 + alpha * y.exp());
        y = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            return y;
        }
    }
    y
}

pub(crate) struct Settings {
    pub epsilon: f64,
    pub tol_fix: f64,
    pub max_outer: usize,
}

pub(crate) struct Outcome {
    /// Cell masses of each species.
    pub masses: Vec<Vec<f64>>,
    pub sweeps: usize,
}

/// `prev` are the previous cell masses of each species.
pub(crate) fn solve(
    grid: &Grid1D,
    a: &CouplingMatrix,
    tau: f64,
    prev: &[Vec<f64>],
    s: &Settings,
) -> Result<Outcome> {
    let h = grid.h();
    if !(s.epsilon > 0.0) {
        return Err(Error::InvalidInput(format!(
            "entropic regularization must be positive, got {}",
            s.epsilon
        )));
    }
    if h * h / s.epsilon > 708.0 {
        return Err(Error::KernelUnderflow {
            epsilon: s.epsilon,
            h,
        });
    }
    let n = grid.n_cells();
    let ns = prev.len();
    let x = grid.centers();
    let cost: Vec<f64> = (0..n * n)
        .map(|k| (x[k / n] - x[k % n]).powi(2) / s.epsilon)
        .collect();
    let log_mu: Vec<Vec<f64>> = prev
        .iter()
        .map(|m| {
            m.iter()
                .map(|v| if *v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
                .collect()
        })
        .collect();
    let sigma = 2.0 * tau / s.epsilon;

    // Potentials divided by ε.
    let mut f = vec![vec![0.0; n]; ns];
    let mut g = vec![vec![0.0; n]; ns];
    let mut nu: Vec<Vec<f64>> = prev.to_vec();
    let mut ell = vec![0.0; n];

    let update_f = |fi: &mut Vec<f64>, gi: &[f64], lmu: &[f64]| {
        for xi in 0..n {
            if lmu[xi] == f64::NEG_INFINITY {
                fi[xi] = f64::NEG_INFINITY;
                continue;
            }
            let row = &cost[xi * n..(xi + 1) * n];
            fi[xi] = lmu[xi] - log_sum_exp(gi.iter().zip(row).map(|(g, c)| g - c));
        }
    };
    let second_marginal_log = |fi: &[f64], out: &mut Vec<f64>| {
        for y in 0..n {
            // The cost is symmetric, so row y doubles as column y.
            let col = &cost[y * n..(y + 1) * n];
            out[y] = log_sum_exp(fi.iter().zip(col).map(|(f, c)| f - c));
        }
    };

    let mut sweeps = 0;
    loop {
        sweeps += 1;
        if sweeps > s.max_outer {
            return Err(Error::InnerDiverged(format!(
                "entropic solver did not converge in {} sweeps",
                s.max_outer
            )));
        }
        let mut change = 0.0;
        for i in 0..ns {
            update_f(&mut f[i], &g[i], &log_mu[i]);
            second_marginal_log(&f[i], &mut ell);
            let alpha = sigma * a.get(i, i) / h;
            for y in 0..n {
                let others: f64 = (0..ns)
                    .filter(|&j| j != i)
                    .map(|j| a.get(i, j) * nu[j][y])
                    .sum();
                let beta = ell[y] - sigma * others / h;
                let ly = solve_prox(alpha, beta);
                g[i][y] = ly - ell[y];
                let v = ly.exp();
                change += (v - nu[i][y]).abs();
                nu[i][y] = v;
            }
        }
        if change < s.tol_fix {
            break;
        }
    }
    // Close with an exact first-marginal projection so each plan carries the
    // previous mass exactly; its second marginal is the new state.
    for i in 0..ns {
        update_f(&mut f[i], &g[i], &log_mu[i]);
        second_marginal_log(&f[i], &mut ell);
        for y in 0..n {
            nu[i][y] = (ell[y] + g[i][y]).exp();
        }
    }
    Ok(Outcome { masses: nu, sweeps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prox_solves_the_scalar_equation() {
        for &(alpha, beta) in &[
            (0.0, 1.0),
            (1.0, 0.0),
            (50.0, 3.0),
            (1e-3, -20.0),
            (1e4, 12.0),
        ] {
            let y = solve_prox(alpha, beta);
            assert!(
                (y + alpha * f64::exp(y) - beta).abs() < 1e-10 * (1.0 + beta.abs()),
                "{alpha} {beta}"
            );
        }
    }

    #[test]
    fn lse_handles_neg_infinity() {
        let v = [f64::NEG_INFINITY, 0.0, 0.0];
        assert!((log_sum_exp(v.iter().copied()) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(
            log_sum_exp([f64::NEG_INFINITY].iter().copied()),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn underflow_is_reported() {
        let g = Grid1D::new(4, 0.0, 1.0).unwrap();
        let a = CouplingMatrix::identity(1);
        let s = Settings {
            epsilon: 1e-6,
            tol_fix: 1e-9,
            max_outer: 10,
        };
        assert!(matches!(
            solve(&g, &a, 1e-3, &[vec![0.25; 4]], &s),
            Err(Error::KernelUnderflow { .. })
        ));
    }
}
