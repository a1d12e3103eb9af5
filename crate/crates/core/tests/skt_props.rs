mod common;

use common::positive_density;
use crossdiff::energies::CouplingMatrix;
use crossdiff::fdref::{l1_error, step_bt_fd, HeatKernel};
use crossdiff::measures::{Density, DensityVector, Grid2D, JointDensity};
use crossdiff::skt::{
    build_mobility, build_mobility_with_amplitude, compare_correlated_vs_decoupled,
    decoupled_admissible_dt, joint_admissible_dt, marginals, relative_entropy, run_skt_scenario,
    step_decoupled_fd, step_joint_fd, swap_reflect, DecoupledVariant, MarginalPair, SktConfig,
};
use proptest::prelude::*;

fn joint(n: usize) -> impl Strategy<Value = JointDensity> {
    prop::collection::vec(0.0..1.0f64, n * n).prop_filter_map("nonzero", move |v| {
        let g = Grid2D::square(n, -1.0, 1.0).unwrap();
        let total: f64 = g.cell_area() * v.iter().sum::<f64>();
        (total > 1e-3).then(|| JointDensity::new(g, v.iter().map(|x| x / total).collect()).unwrap())
    })
}

fn on_axis(d: &Density, lo: f64, hi: f64) -> Density {
    let g = crossdiff::measures::Grid1D::new(d.len(), lo, hi).unwrap();
    Density::new(g, d.values().to_vec())
        .unwrap()
        .renormalized()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relative_entropy_is_nonnegative(p in joint(8)) {
        prop_assert!(relative_entropy(&p) >= -1e-12);
    }

    #[test]
    fn products_carry_no_relative_entropy(a in positive_density(10), b in positive_density(10)) {
        let p = JointDensity::product(&on_axis(&a, -1.0, 1.0), &on_axis(&b, -1.0, 1.0));
        prop_assert!(relative_entropy(&p).abs() < 1e-12);
    }

    #[test]
    fn mixing_in_the_diagonal_raises_relative_entropy(n in 3usize..16) {
        // Both terms have uniform marginals, so only the correlation changes.
        let g = Grid2D::square(n, 0.0, 1.0).unwrap();
        let diag = n as f64;
        let h: Vec<f64> = [0.0, 0.25, 0.5]
            .iter()
            .map(|eps| {
                let v = (0..n * n).map(|k| (1.0 - eps) + if k / n == k % n { eps * diag } else { 0.0 }).collect();
                relative_entropy(&JointDensity::new(g, v).unwrap())
            })
            .collect();
        prop_assert!(h[0].abs() < 1e-12);
        prop_assert!(h[0] < h[1] && h[1] < h[2], "{:?}", h);
    }

    #[test]
    fn joint_step_conserves_mass(p in joint(12), c_m in 1e-3..1.0f64, frac in 0.1..1.0f64) {
        let m = build_mobility(*p.grid(), 0.3, c_m).unwrap();
        let dt = frac * joint_admissible_dt(&p, &m).unwrap();
        let next = step_joint_fd(&p, &m, dt).unwrap();
        prop_assert!((next.mass() - p.mass()).abs() < 1e-12);
        prop_assert!(next.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn swap_reflection_is_preserved(q in joint(10), steps in 1usize..20) {
        let r = swap_reflect(&q).unwrap();
        let v = q.values().iter().zip(r.values()).map(|(a, b)| 0.5 * (a + b)).collect();
        let mut p = JointDensity::new(*q.grid(), v).unwrap();
        let m = build_mobility(*p.grid(), 0.3, 0.1).unwrap();
        for _ in 0..steps {
            let dt = 0.9 * joint_admissible_dt(&p, &m).unwrap();
            p = step_joint_fd(&p, &m, dt).unwrap();
        }
        let r = swap_reflect(&p).unwrap();
        for (a, b) in p.values().iter().zip(r.values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn entropy_variant_with_unit_mobility_is_the_heat_equation() {
    let g = Grid2D::square(128, -5.0, 5.0).unwrap();
    let m = build_mobility_with_amplitude(g, 0.3, 1.0, 0.0).unwrap();
    let axis = *g.axis1();
    let (k1, k2) = (
        HeatKernel {
            diffusivity: 1.0,
            center: -1.0,
        },
        HeatKernel {
            diffusivity: 1.0,
            center: 1.5,
        },
    );
    let t0 = 0.05;
    let mk =
        |k: HeatKernel, t: f64| Density::new(axis, k.cell_averages(t, &axis).unwrap()).unwrap();
    let mut u = MarginalPair {
        u1: mk(k1, t0),
        u2: mk(k2, t0),
    };
    let (mut t, t_end) = (t0, t0 + 0.2);
    while t < t_end - 1e-14 {
        let dt = (0.9 * decoupled_admissible_dt(&u, &m, DecoupledVariant::Entropy).unwrap())
            .min(t_end - t);
        u = step_decoupled_fd(&u, &m, dt, DecoupledVariant::Entropy).unwrap();
        t += dt;
    }
    let e1 = l1_error(&u.u1, &mk(k1, t_end)).unwrap();
    let e2 = l1_error(&u.u2, &mk(k2, t_end)).unwrap();
    assert!(e1 <= 5e-2 && e2 <= 5e-2, "heat-kernel errors {e1:e} {e2:e}");
}

#[test]
fn quadratic_variant_with_constant_mobility_matches_the_porous_medium_reference() {
    // With M ≡ 1 the coefficient a1 = ∫ u2² is uniform in space, so each
    // marginal follows the one-species reference scheme with that coupling.
    let config = SktConfig {
        n: 96,
        ..SktConfig::default()
    };
    let g = config.grid().unwrap();
    let m = build_mobility_with_amplitude(g, 0.3, 1.0, 0.0).unwrap();
    let mut u = config.initial_marginals().unwrap();
    let mut r1 = DensityVector::new(vec![u.u1.clone()]).unwrap();
    let h = g.h1();
    for _ in 0..200 {
        let dt = 0.5 * decoupled_admissible_dt(&u, &m, DecoupledVariant::Quadratic).unwrap();
        let a = h * u.u2.values().iter().map(|v| v * v).sum::<f64>();
        r1 = step_bt_fd(&r1, &CouplingMatrix::new(vec![vec![a]]).unwrap(), dt).unwrap();
        u = step_decoupled_fd(&u, &m, dt, DecoupledVariant::Quadratic).unwrap();
    }
    let gap = l1_error(&u.u1, r1.species(0)).unwrap();
    assert!(gap < 1e-10, "gap {gap:e}");
    assert!(l1_error(&u.u1, &config.initial_marginals().unwrap().u1).unwrap() > 1e-4);
}

#[test]
fn decoupled_and_joint_models_start_together() {
    let config = SktConfig {
        n: 48,
        t_final: 0.05,
        ..SktConfig::default()
    };
    for variant in [DecoupledVariant::Quadratic, DecoupledVariant::Entropy] {
        let rep = compare_correlated_vs_decoupled(&config, variant).unwrap();
        assert!(rep.gap[0] < 1e-12, "{variant:?}: {}", rep.gap[0]);
        assert!(rep.gap.iter().all(|g| g.is_finite()));
    }
}

#[test]
fn correlations_appear_only_after_contact() {
    for n in [64, 128] {
        // Narrow bumps stay away from the diagonal over a short horizon.
        let apart = SktConfig {
            n,
            variance: [0.15, 0.15],
            t_final: 0.2,
            ..SktConfig::default()
        };
        let run = run_skt_scenario(&apart).unwrap();
        assert!(run.contact_time.is_none(), "n = {n}");
        assert!(run.record.entropy.iter().all(|h| *h <= 1e-6), "n = {n}");

        let touching = SktConfig {
            n,
            t_final: 0.2,
            ..SktConfig::default()
        };
        let run = run_skt_scenario(&touching).unwrap();
        assert_eq!(run.contact_time, Some(0.0), "n = {n}");
        let h = &run.record.entropy;
        assert!(
            h.last().unwrap() > &(10.0 * h[0].abs().max(1e-14)),
            "n = {n}: {h:?}"
        );
        assert!(h.windows(2).all(|w| w[1] >= w[0] - 1e-12), "n = {n}");
    }
}

#[test]
fn marginals_of_a_product_are_its_factors() {
    let config = SktConfig {
        n: 32,
        ..SktConfig::default()
    };
    let m0 = config.initial_marginals().unwrap();
    let m = marginals(&config.initial_joint().unwrap());
    assert!(m.l1_distance(&m0) < 1e-12);
}
