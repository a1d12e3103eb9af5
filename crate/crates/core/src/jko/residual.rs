//! First-order optimality of a minimizing-movement step.
//!
//! If `u^{k+1}` minimizes `W2²(u^k, ·)/(2τ) + E`, the Kantorovich potential
//! `φ_i` of the map from `u^{k+1}_i` back to `u^k_i` satisfies
//! `φ_i/τ + p_i = C_i` on the support of `u^{k+1}_i` and `>= C_i` elsewhere.

use serde::{Deserialize, Serialize};

use crate::energies::{pressure, CouplingMatrix};
use crate::error::Result;
use crate::measures::DensityVector;
use crate::transport1d::kantorovich_potential_1d;

/// Cells with `u > SUPPORT_MASS / h` count as support.
pub const SUPPORT_MASS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Standard deviation of `φ_i/τ + p_i` over the support, divided by the
    /// mean of `|p_i|` there.
    pub residual: Vec<f64>,
    /// The sample mean `C_i` on the support.
    pub constants: Vec<f64>,
    /// Off-support cells where `φ_i/τ + p_i` falls below `C_i` by more than
    /// three standard deviations.
    pub off_support_violations: Vec<usize>,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }
}

pub fn optimality_residual(
    u_prev: &DensityVector,
    u_next: &DensityVector,
    a: &CouplingMatrix,
    tau: f64,
) -> Result<ResidualReport> {
    let p = pressure(u_next, a)?;
    let h = u_next.grid().h();
    let threshold = SUPPORT_MASS / h;
    let mut report = ResidualReport {
        residual: Vec::new(),
        constants: Vec::new(),
        off_support_violations: Vec::new(),
    };
    for i in 0..u_next.n_species() {
        let next = u_next.species(i);
        let phi = kantorovich_potential_1d(next, u_prev.species(i))?;
        let q: Vec<f64> = phi
            .values
            .iter()
            .zip(&p[i])
            .map(|(f, p)| f / tau + p)
            .collect();
        let support = next.support(threshold);
        let k = support.len().max(1) as f64;
        let mean = support.iter().map(|&c| q[c]).sum::<f64>() / k;
        let std = (support.iter().map(|&c| (q[c] - mean).powi(2)).sum::<f64>() / k).sqrt();
        let scale = support.iter().map(|&c| p[i][c].abs()).sum::<f64>() / k;
        let tol = 3.0 * std + 1e-12 * mean.abs();
        let violations = (0..q.len())
            .filter(|&c| next.values()[c] <= threshold && q[c] < mean - tol)
            .count();
        report
            .residual
            .push(if scale > 0.0 { std / scale } else { std });
        report.constants.push(mean);
        report.off_support_violations.push(violations);
    }
    Ok(report)
}
