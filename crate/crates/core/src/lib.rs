//! Symbolic and numerical tools for mean-square order conditions of
//! stochastic exponential integrators
//!
//! `dX = (A X + g_0(X)) dt + Σ_m g_m(X) ⋆ dW_m`,
//!
//! built on stochastic B-series over colored rooted trees.
//!
//! - [`trees`]: trees, orders, symmetry coefficients, elementary differentials.
//! - [`stochalg`]: exact algebra of iterated Itô/Stratonovich integrals.
//! - [`bseries`]: B-series coefficients of the exact solution and of a method.
//! - [`orderanalysis`]: order conditions, defects, certified order.
//! - [`numint`]: matrix functions, Brownian paths, the integrator step.
//! - [`harness`]: Monte-Carlo convergence experiments.

pub mod bseries;
pub mod grade;
pub mod harness;
pub mod numint;
pub mod orderanalysis;
pub mod stochalg;
pub mod trees;

pub use num_rational::BigRational as Rational;
