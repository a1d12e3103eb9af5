//! Reference problems shared by the test suites and the command-line runner.

use crate::diagnostics::CheckResult;
use crate::energies::CouplingMatrix;
use crate::error::Result;
use crate::fdref::Barenblatt;
use crate::jko::{jko_step_lagrangian, optimality_residual, JkoOptions};
use crate::measures::{Density, DensityVector, Grid1D};

/// Two species on `[0, 1]` with `A = [[2, 1], [1, 2]]` and smooth, strictly
/// positive bumps at 0.3 and 0.65.
pub fn pd_benchmark(n: usize) -> Result<(DensityVector, CouplingMatrix)> {
    let g = Grid1D::new(n, 0.0, 1.0)?;
    let u1 = Density::from_fn(g, |x| 0.2 + (-(x - 0.3f64).powi(2) / 0.02).exp())?;
    let u2 = Density::from_fn(g, |x| 0.2 + (-(x - 0.65f64).powi(2) / 0.03).exp())?;
    let a = CouplingMatrix::new(vec![vec![2.0, 1.0], vec![1.0, 2.0]])?;
    Ok((DensityVector::new(vec![u1, u2])?, a))
}

/// Unit-mass Barenblatt profile on `[-2, 2]` at the time its peak is 1.
/// Returns the initial state, the oracle and that onset time.
pub fn barenblatt_benchmark(n: usize) -> Result<(DensityVector, Barenblatt, f64)> {
    let g = Grid1D::new(n, -2.0, 2.0)?;
    let b = Barenblatt::new(1.0);
    let t0 = b.time_for_peak(1.0);
    let u0 = Density::new(g, b.cell_averages(t0, &g)?)?.renormalized()?;
    Ok((DensityVector::new(vec![u0])?, b, t0))
}

/// Two compactly supported Barenblatt profiles on `[-2, 2]`, centred at
/// ∓0.55 with different widths; their supports are disjoint and meet at
/// about `t = 0.1` under the mean-field coupling.
pub fn segregated_benchmark(n: usize) -> Result<DensityVector> {
    let g = Grid1D::new(n, -2.0, 2.0)?;
    let b1 = Barenblatt::new(1.0).centered_at(-0.55);
    let b2 = Barenblatt::new(1.0).centered_at(0.55);
    let u1 = Density::new(g, b1.cell_averages(0.01, &g)?)?.renormalized()?;
    let u2 = Density::new(g, b2.cell_averages(0.04, &g)?)?.renormalized()?;
    DensityVector::new(vec![u1, u2])
}

/// Largest single-step optimality residual of the PD benchmark at each
/// resolution; the levels equal the cell count.
pub fn residual_refinement(resolutions: &[usize], tau: f64) -> Result<Vec<f64>> {
    let opts = JkoOptions {
        tol_obj: 1e-13,
        residuals: false,
        ..Default::default()
    };
    resolutions
        .iter()
        .map(|&n| {
            let (u0, a) = pd_benchmark(n)?;
            let (next, _) = jko_step_lagrangian(&u0, &a, tau, &opts)?;
            Ok(optimality_residual(&u0, &next, &a, tau)?.max())
        })
        .collect()
}

/// Passes when each halving of `h` shrinks the residual by at least
/// `factor`; the margin is the smallest observed ratio minus `factor`.
pub fn check_residual_refinement(residuals: &[f64], factor: f64) -> CheckResult {
    let worst = residuals
        .windows(2)
        .map(|w| w[0] / w[1])
        .fold(f64::INFINITY, f64::min);
    let margin = if residuals.len() < 2 {
        0.0
    } else {
        worst - factor
    };
    CheckResult::info(
        "residual_refinement",
        margin.is_finite() && margin >= 0.0,
        margin,
        0.0,
        format!(
            "residuals {}",
            residuals
                .iter()
                .map(|r| format!("{r:.3e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmarks_have_unit_mass() {
        let (u, a) = pd_benchmark(32).unwrap();
        u.ensure_unit_mass(1e-12).unwrap();
        assert!(a.lambda_min() > 0.9);
        barenblatt_benchmark(64)
            .unwrap()
            .0
            .ensure_unit_mass(1e-12)
            .unwrap();
        let s = segregated_benchmark(64).unwrap();
        s.ensure_unit_mass(1e-12).unwrap();
        assert_eq!(crate::hyperbolic::overlap_cells(&s, 0.0), 0);
    }

    #[test]
    fn refinement_check() {
        assert!(check_residual_refinement(&[0.4, 0.1, 0.025], 1.5).pass);
        assert!(!check_residual_refinement(&[0.4, 0.3], 1.5).pass);
    }
}
