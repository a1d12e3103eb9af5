//! Wasserstein gradient-flow solvers for cross-diffusion systems.
//!
//! * [`jko`]: minimizing-movement stepping for `∂t u_i = ∂x(u_i ∂x p_i)` with
//!   linear pressures `p_i = Σ_j a_ij u_j`.
//! * [`hyperbolic`]: the rank-one case `a_ij = 1/N`, solved by a
//!   pressure/fraction splitting or by transporting species along the
//!   pressure's optimal maps.
//! * [`skt`]: 2D joint-density simulation of a correlated SKT-type model.
//! * [`fdref`]: explicit finite-difference references and closed-form oracles.
//! * [`diagnostics`]: run records and pass/fail checks of the a-priori estimates.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod benchmarks;
pub mod diagnostics;
pub mod energies;
pub mod error;
pub mod fdref;
pub mod hyperbolic;
pub mod jko;
pub mod measures;
pub mod monotone;
pub mod skt;
pub mod transport1d;

pub use error::{Error, Result};
