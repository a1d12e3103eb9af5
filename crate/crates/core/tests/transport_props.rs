mod common;

use common::{density, grid, positive_density};
use crossdiff::measures::Grid1D;
use crossdiff::transport1d::{
    kantorovich_integral, kantorovich_potential_1d, optimal_map_1d, w2_exact, w2_piecewise,
};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use proptest::prelude::*;

/// Discrete transport between cell-centre atoms.
fn lp_w2_sq(grid: &Grid1D, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut pb = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<_>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    pb.add_var(
                        (grid.center(i) - grid.center(j)).powi(2),
                        (0.0, f64::INFINITY),
                    )
                })
                .collect()
        })
        .collect();
    for i in 0..n {
        pb.add_constraint(
            vars[i].iter().map(|v| (*v, 1.0)).collect::<Vec<_>>(),
            ComparisonOp::Eq,
            a[i],
        );
    }
    for j in 0..n {
        pb.add_constraint(
            vars.iter().map(|r| (r[j], 1.0)).collect::<Vec<_>>(),
            ComparisonOp::Eq,
            b[j],
        );
    }
    pb.solve().unwrap().objective()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn agrees_with_linear_program(u in density(6), v in density(6)) {
        let w = w2_exact(&u, &v).unwrap();
        let lp = lp_w2_sq(u.grid(), &u.cell_masses(), &v.cell_masses());
        prop_assert!((w * w - lp).abs() < 1e-9, "{} vs {}", w * w, lp);
    }

    #[test]
    fn is_a_metric(u in density(12), v in density(12), w in density(12)) {
        for f in [w2_exact, w2_piecewise] {
            let uv = f(&u, &v).unwrap();
            prop_assert!((uv - f(&v, &u).unwrap()).abs() < 1e-12);
            prop_assert!(uv <= f(&u, &w).unwrap() + f(&w, &v).unwrap() + 1e-12);
            prop_assert!(f(&u, &u).unwrap() < 1e-7);
        }
    }

    #[test]
    fn optimal_map_is_monotone(u in positive_density(20), v in density(20)) {
        prop_assert!(optimal_map_1d(&u, &v).unwrap().is_monotone());
    }

    #[test]
    fn potential_is_one_convex(u in positive_density(20), v in density(20)) {
        let phi = kantorovich_potential_1d(&u, &v).unwrap();
        prop_assert!(phi.is_one_convex(1e-9));
    }
}

#[test]
fn kantorovich_integral_converges_at_first_order() {
    let profiles: [(f64, f64); 4] = [(0.2, -0.1), (-0.25, 0.15), (0.1, 0.3), (-0.3, -0.2)];
    for w in profiles.windows(2) {
        let (a, b) = (w[0], w[1]);
        let at = |n: usize| {
            let f = |p: (f64, f64)| {
                crossdiff::measures::Density::from_fn(grid(n), move |x| {
                    1.0 + p.0 * (std::f64::consts::PI * x).cos()
                        + p.1 * (2.0 * std::f64::consts::PI * x).cos()
                })
                .unwrap()
                .renormalized()
                .unwrap()
            };
            let (u, v) = (f(a), f(b));
            let phi = kantorovich_potential_1d(&u, &v).unwrap();
            (kantorovich_integral(&u, &phi) - w2_piecewise(&u, &v).unwrap().powi(2)).abs()
        };
        let (e1, e2) = (at(64), at(128));
        assert!(e2 <= e1 / 1.8, "defect {e1:e} -> {e2:e}");
    }
}
