//! Lyapunov functionals of the Busenberg–Travis system and the pressures
//! `p_i = Σ_j a_ij u_j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::DensityVector;

/// Symmetric interaction matrix with its smallest eigenvalue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    n: usize,
    entries: Vec<f64>,
    symmetric: bool,
    lambda_min: f64,
}

impl CouplingMatrix {
    /// Builds from rows. `lambda_min` is computed from the symmetric part.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty coupling matrix".into()));
        }
        let mut entries = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite coupling entry".into()));
            }
            entries.extend_from_slice(row);
        }
        let symmetric = (0..n).all(|i| (0..n).all(|j| entries[i * n + j] == entries[j * n + i]));
        let sym: Vec<f64> = (0..n * n)
            .map(|k| 0.5 * (entries[k] + entries[(k % n) * n + k / n]))
            .collect();
        let lambda_min = jacobi_eigenvalues(n, sym)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            n,
            entries,
            symmetric,
            lambda_min,
        })
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(rows).expect("identity is valid")
    }

    /// `a_ij = 1/N`: every species feels the mean pressure. Rank one.
    pub fn mean_field(n: usize) -> Self {
        Self::new(vec![vec![1.0 / n as f64; n]; n]).expect("mean-field matrix is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// Required by the parabolic solvers.
    pub fn require_positive_definite(&self) -> Result<()> {
        if !self.symmetric || self.lambda_min <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                lambda_min: self.lambda_min,
            });
        }
        Ok(())
    }

    /// `P A Pᵀ`: species `i` of the result is species `perm[i]` of the original.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let rows = perm
            .iter()
            .map(|&p| perm.iter().map(|&q| self.get(p, q)).collect())
            .collect();
        Self::new(rows).expect("permutation keeps validity")
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(n: usize, mut a: Vec<f64>) -> Vec<f64> {
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        let scale: f64 = a.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub e_quadratic: f64,
    pub h_boltzmann: f64,
    pub e_dirichlet: f64,
}

pub fn energy_report(u: &DensityVector, a: &CouplingMatrix) -> Result<EnergyReport> {
    Ok(EnergyReport {
        e_quadratic: energy_quadratic(u, a)?,
        h_boltzmann: entropy_boltzmann(u),
        e_dirichlet: energy_dirichlet(u),
    })
}

fn check_dims(u: &DensityVector, a: &CouplingMatrix) -> Result<()> {
    if u.n_species() != a.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            got: u.n_species(),
        });
    }
    Ok(())
}

/// `½ Σ_ij a_ij ∫ u_i u_j`.
pub fn energy_quadratic(u: &DensityVector, a: &CouplingMatrix) -> Result<f64> {
    check_dims(u, a)?;
    let h = u.grid().h();
    let n = a.n();
    let mut e = 0.0;
    for i in 0..n {
        for j in 0..n {
            let aij = a.get(i, j);
            if aij != 0.0 {
                e += aij
                    * u.values(i)
                        .iter()
                        .zip(u.values(j))
                        .map(|(x, y)| x * y)
                        .sum::<f64>();
            }
        }
    }
    Ok(0.5 * h * e)
}

/// Values below this are treated as zero in `u log u`.
pub const ENTROPY_CUTOFF: f64 = 1e-300;

/// `Σ_i ∫ u_i (log u_i − 1)` with `0 log 0 = 0`.
pub fn entropy_boltzmann(u: &DensityVector) -> f64 {
    let h = u.grid().h();
    u.iter()
        .map(|d| {
            d.values()
                .iter()
                .filter(|v| **v > ENTROPY_CUTOFF)
                .map(|v| v * (v.ln() - 1.0))
                .sum::<f64>()
        })
        .sum::<f64>()
        * h
}

/// `½ Σ_i ∫ |∂x u_i|²` with mirror ghosts, so only interior interfaces count.
pub fn energy_dirichlet(u: &DensityVector) -> f64 {
    let h = u.grid().h();
    0.5 * u
        .iter()
        .map(|d| {
            d.values()
                .windows(2)
                .map(|w| (w[1] - w[0]).powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        / h
}

/// `Σ_i ‖∂x u_i‖²` with centred differences and mirror ghosts.
///
/// Centred differences ignore the odd–even component of `u`, which carries
/// no dissipation of its own and otherwise inflates the norm on rough
/// Lagrangian reconstructions.
pub fn gradient_norm_sq(u: &DensityVector) -> f64 {
    let h = u.grid().h();
    u.iter()
        .map(|d| {
            let v = d.values();
            let n = v.len();
            (0..n)
                .map(|c| {
                    let l = v[c.saturating_sub(1)];
                    let r = v[(c + 1).min(n - 1)];
                    (r - l).powi(2)
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        / (4.0 * h)
}

/// `p_i(c) = Σ_j a_ij u_j(c)`.
pub fn pressure(u: &DensityVector, a: &CouplingMatrix) -> Result<Vec<Vec<f64>>> {
    check_dims(u, a)?;
    Ok(pressure_from_slices(
        &u.iter().map(|d| d.values()).collect::<Vec<_>>(),
        a,
    ))
}

pub(crate) fn pressure_from_slices(u: &[&[f64]], a: &CouplingMatrix) -> Vec<Vec<f64>> {
    let n = a.n();
    let cells = u[0].len();
    (0..n)
        .map(|i| {
            let mut p = vec![0.0; cells];
            for (j, uj) in u.iter().enumerate() {
                let aij = a.get(i, j);
                if aij != 0.0 {
                    p.iter_mut()
                        .zip(uj.iter())
                        .for_each(|(pc, v)| *pc += aij * v);
                }
            }
            p
        })
        .collect()
}

/// Discrete Laplacian with mirror ghosts (`∂x u = 0` on the boundary).
pub fn laplacian_neumann(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|c| {
            let left = if c == 0 { u[0] } else { u[c - 1] };
            let right = if c + 1 == n { u[n - 1] } else { u[c + 1] };
            (left - 2.0 * u[c] + right) / (h * h)
        })
        .collect()
}
