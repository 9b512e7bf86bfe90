//! Numerical core for the white-noise analysis of Brownian stochastic currents
//!
//! ```text
//! xi_i(x) = int_0^T delta(x - B(t)) <> W_i(t) dt
//! ```
//!
//! The crate is `no_std` (it needs `alloc`) and carries no IO. Everything is
//! expressed through S-transforms evaluated on a concrete space of test
//! functions spanned by Hermite functions:
//!
//! | Module          | Contents                                                             |
//! |-----------------|----------------------------------------------------------------------|
//! | [`schwartz`]    | test functions, their norms, point values and running integrals      |
//! | [`special`]     | upper incomplete gamma function and the singular time-mass identity |
//! | [`quad`]        | adaptive Gauss-Kronrod with endpoint-singularity routing             |
//! | [`stransform`]  | closed-form S-transforms, Wick product, U-functional growth fits     |
//! | [`chaos`]       | chaos pairings by differentiation and the closed-form kernels        |
//! | [`rng`]         | Philox4x32-10 counter-based generator                                |
//! | [`montecarlo`]  | path simulation of the mollified current and S-transform estimates  |
//! | [`diagnostics`] | cutoff scans of the first-chaos mass at the origin                   |
//!
//! Component indices are zero-based throughout: component `i` of a
//! `d`-dimensional object satisfies `i < d`.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod chaos;
pub mod diagnostics;
mod error;
mod math;
pub mod montecarlo;
pub mod quad;
pub mod rng;
pub mod schwartz;
pub mod special;
pub mod stransform;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use schwartz::TestFunction;
pub use stransform::{CurrentParams, UFunctional};
