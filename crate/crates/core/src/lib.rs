//! Early-warning-sign scaling laws for linear SPDEs whose drift is a multiplication
//! operator `u -> (f + p) u`.
//!
//! The stationary variance of the solution along a probe `g` diverges as `p -> 0-`.
//! This crate computes that variance by quadrature, predicts its rate from a catalog
//! of laws, fits rates to sweeps, and checks both against a Monte Carlo simulation of
//! the implicit Euler–Maruyama scheme.

// `!(x > 0.0)` is used on purpose so that NaN is rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod noise;
pub mod quadrature;
pub mod scaling;
pub mod simulate;
pub mod spectral;
pub mod symbols;

pub use error::{Error, Result};
pub use quadrature::{
    appendix_c_closed_form, appendix_c_integral, dimension_reduce, monomial_integral, variance_quadrature,
    QuadEstimate, QuadOptions, TestFunction, VarianceQuery,
};
pub use symbols::{
    minimal_support, predicts_convergence, real_part_symbol, Coefficients, ComplexSymbol, ConvolutionKernel, Domain,
    FrequencySymbol, MultiIndex, SymbolKind, SymbolSpec,
};
pub use scaling::{
    best_upper_bound, classify, fit_loglog, law_1d, law_analytic_1d, law_upper_bound, Classification, FitWindow,
    LogLogFit, ScalingLaw, Source, SweepPoint, SweepResult,
};
pub use noise::{noise_increment, sample_eigenvalues, sample_haar_basis, NoiseModel, NoiseSpec};
pub use simulate::{predict_discrete_variance, project, run, step, Mesh, Projection, SimConfig, VarianceEstimate};
pub use spectral::{frequency_symbol, predicted_spectral_law, variance_spectral, FrequencyQuery};
