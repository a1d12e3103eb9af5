#![allow(dead_code)]

use crossdiff::measures::{normalize, Density, DensityVector, Grid1D};
use proptest::prelude::*;

pub fn grid(n: usize) -> Grid1D {
    Grid1D::new(n, 0.0, 1.0).unwrap()
}

/// Unit-mass densities with some empty cells.
pub fn density(n: usize) -> impl Strategy<Value = Density> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.0..1.0f64], n)
        .prop_filter("nonzero", |v| v.iter().sum::<f64>() > 1e-3)
        .prop_map(move |v| normalize(&v, grid(n)).unwrap().density)
}

/// Unit-mass densities bounded away from zero.
pub fn positive_density(n: usize) -> impl Strategy<Value = Density> {
    prop::collection::vec(0.2..1.0f64, n).prop_map(move |v| normalize(&v, grid(n)).unwrap().density)
}

/// Smooth positive profiles: a few random cosine modes on top of a constant.
pub fn smooth_density(n: usize) -> impl Strategy<Value = Density> {
    prop::collection::vec(-0.3..0.3f64, 3).prop_map(move |amp| {
        let d = Density::from_fn(grid(n), |x| {
            1.0 + amp
                .iter()
                .enumerate()
                .map(|(k, a)| a * (std::f64::consts::PI * (k + 1) as f64 * x).cos())
                .sum::<f64>()
        })
        .unwrap();
        d.renormalized().unwrap()
    })
}

pub fn positive_vector(n: usize, species: usize) -> impl Strategy<Value = DensityVector> {
    prop::collection::vec(positive_density(n), species).prop_map(|s| DensityVector::new(s).unwrap())
}
