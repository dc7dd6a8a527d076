//! Functional regularized least squares classification.
//!
//! Observations are vectors of curves sampled on a shared uniform grid over
//! `[0, 1]`, labels are curves as well. The learner uses a separable
//! operator-valued kernel `K(x, x') = G(x, x') T` where `G` is a scalar kernel
//! on `(L²)^p` and `T` is the integral operator with kernel `e^{-|t-s|}`.
//! Because the block Gram operator factors as `𝒢 ⊗ T`, the regularized
//! system `(𝒦 + λI) β = y` is solved from the eigendecompositions of the
//! `n × n` matrix `𝒢` and of `T` alone.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`function_space`] | grids, sampled functions, trapezoid inner products |
//! | [`scalar_kernel`] | Gaussian / Laplacian kernels over `(L²)^p`, Gram matrices |
//! | [`integral_operator`] | eigenpairs and quadrature form of `T` |
//! | [`solver`] | spectral solve, prediction, dense oracle |
//! | [`classifier`] | one-vs-all training with function-valued labels |
//! | [`baseline`] | scalar RLSC on concatenated samples |
//! | [`data`] | dataset I/O, synthetic generators, stratified splits |
//! | [`benchmark`] | tuned functional-vs-baseline comparison |

pub mod baseline;
pub mod benchmark;
pub mod classifier;
pub mod data;
pub mod error;
pub mod function_space;
pub mod integral_operator;
pub mod linalg;
pub mod metrics;
pub mod model_io;
pub mod scalar_kernel;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use function_space::{FunctionalObservation, Grid, SampledFunction};
