mod common;

use common::{grid, positive_vector};
use crossdiff::energies::{energy_quadratic, entropy_boltzmann, pressure, CouplingMatrix};
use crossdiff::measures::{normalize, DensityVector, Grid1D};
use proptest::prelude::*;

fn spd_2x2() -> impl Strategy<Value = CouplingMatrix> {
    (0.5..2.0f64, 0.5..2.0f64, -0.9..0.9f64).prop_map(|(a, c, s)| {
        CouplingMatrix::new(vec![
            vec![a, s * (a * c).sqrt()],
            vec![s * (a * c).sqrt(), c],
        ])
        .unwrap()
    })
}

proptest! {
    #[test]
    fn quadratic_energy_is_coercive(u in positive_vector(24, 2), a in spd_2x2()) {
        let e = energy_quadratic(&u, &a).unwrap();
        let h = u.grid().h();
        let l2: f64 = u.iter().map(|d| d.values().iter().map(|v| v * v).sum::<f64>() * h).sum();
        prop_assert!(e >= 0.5 * a.lambda_min() * l2 - 1e-12);
    }

    #[test]
    fn pressure_is_linear(
        u in positive_vector(16, 2),
        v in positive_vector(16, 2),
        a in spd_2x2(),
        s in 0.0..2.0f64,
        t in 0.0..2.0f64,
    ) {
        let g = *u.grid();
        let mix = DensityVector::from_values(
            g,
            (0..2).map(|i| u.values(i).iter().zip(v.values(i)).map(|(x, y)| s * x + t * y).collect()).collect(),
        )
        .unwrap();
        let (pu, pv, pm) = (pressure(&u, &a).unwrap(), pressure(&v, &a).unwrap(), pressure(&mix, &a).unwrap());
        for i in 0..2 {
            for c in 0..g.n_cells() {
                prop_assert!((pm[i][c] - (s * pu[i][c] + t * pv[i][c])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn entropy_obeys_jensen(raw in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 20), 1..4), width in 0.5..4.0f64) {
        let g = Grid1D::new(20, 0.0, width).unwrap();
        prop_assume!(raw.iter().all(|r| r.iter().sum::<f64>() > 1e-3));
        let species = raw.iter().map(|r| normalize(r, g).unwrap().density).collect();
        let u = DensityVector::new(species).unwrap();
        // ∫ u (log u − 1) >= −log|Ω| − 1 for unit mass, equality for the uniform density.
        let bound = -(width.ln() + 1.0) * raw.len() as f64;
        prop_assert!(entropy_boltzmann(&u) >= bound - 1e-12);
    }

    #[test]
    fn quadratic_energy_is_permutation_invariant(u in positive_vector(16, 2), a in spd_2x2()) {
        let perm = [1, 0];
        let e = energy_quadratic(&u, &a).unwrap();
        let ep = energy_quadratic(&u.permuted(&perm), &a.permuted(&perm)).unwrap();
        prop_assert!((e - ep).abs() <= 1e-14 * e.abs().max(1.0));
    }
}

#[test]
fn uniform_density_attains_the_entropy_bound() {
    let g = grid(32);
    let u = DensityVector::new(vec![crossdiff::measures::Density::uniform(g)]).unwrap();
    assert!((entropy_boltzmann(&u) + 1.0).abs() < 1e-14);
}
