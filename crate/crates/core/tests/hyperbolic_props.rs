mod common;

use common::positive_vector;
use crossdiff::hyperbolic::{
    recover_species, run_hyperbolic, split_state, splitting_admissible_dt, step_splitting, tv,
    HyperbolicOptions, Scheme,
};
use crossdiff::measures::DensityVector;
use proptest::prelude::*;

fn masses(u: &DensityVector) -> Vec<f64> {
    u.iter().map(|d| d.mass()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn splitting_keeps_fractions_in_range(u in positive_vector(32, 3), steps in 1usize..30) {
        let mut pf = split_state(&u);
        let mut tv_p = tv(pf.p().values());
        let mut tv_r: Vec<f64> = (0..3).map(|i| tv(&pf.r(i))).collect();
        for _ in 0..steps {
            let dt = 0.9 * splitting_admissible_dt(pf.p());
            pf = step_splitting(&pf, dt).unwrap();
            for (i, prev) in tv_r.iter_mut().enumerate() {
                let r = pf.r(i);
                prop_assert!(r.iter().all(|v| (0.0..=1.0).contains(v)));
                let t = tv(&r);
                prop_assert!(t <= *prev * (1.0 + 1e-8) + 1e-12, "TV(r{}) rose {} -> {}", i, prev, t);
                *prev = t;
            }
            let t = tv(pf.p().values());
            prop_assert!(t <= tv_p * (1.0 + 1e-8) + 1e-12);
            tv_p = t;
        }
        let back = recover_species(&pf);
        for (m0, m1) in masses(&u).iter().zip(masses(&back)) {
            prop_assert!((m0 - m1).abs() < 1e-12);
        }
    }

    #[test]
    fn split_and_recover_round_trip(u in positive_vector(24, 2)) {
        let back = recover_species(&split_state(&u));
        for i in 0..2 {
            for (a, b) in u.values(i).iter().zip(back.values(i)) {
                prop_assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn pressure_transport_respects_the_speed_bound(u in positive_vector(32, 2)) {
        let opts = HyperbolicOptions { t_final: 0.02, ..HyperbolicOptions::default() };
        // The step itself refuses to return when the bound fails.
        let (states, rec) = run_hyperbolic(&u, Scheme::PressureTransport, &opts).unwrap();
        let last = states.last().unwrap();
        for (m0, m1) in masses(&u).iter().zip(masses(last)) {
            prop_assert!((m0 - m1).abs() < 1e-10);
        }
        let wp = &rec.series["w2_pressure"];
        for (ws, wp) in rec.w2_increments.iter().zip(wp) {
            prop_assert!(*ws <= 2f64.sqrt() * wp + 1e-8);
        }
    }
}
