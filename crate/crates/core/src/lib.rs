//! Estimation of credit-rating migration models.
//!
//! Two data paradigms are covered. From discretely observed transition panels
//! the crate estimates a continuous-time Markov chain generator by EM, with
//! closed-form score/Hessian through block-augmented matrix exponentials,
//! Wald confidence intervals, and delta-method bands for transition and
//! default probabilities. From fully observed rating histories it fits a
//! self-exciting marked point process that captures downward rating momentum,
//! calibrated by single-component Metropolis-Hastings, plus simulation
//! (exact CTMC and Ogata thinning), Monte-Carlo and empirical transition
//! matrices, BIC model comparison and a Cox partial-likelihood momentum test.
//!
//! All numerics are generic over the scalar type through [`num::Real`]
//! (implemented for `f32` and `f64`); the aliases at the crate root fix the
//! default `f64` precision used by the CLI.

pub mod error;
pub mod num;

pub mod ctmc;
pub mod em;
pub mod linalg;
pub mod matexp;
pub mod mcmc;
pub mod momentum;
pub mod presets;
pub mod rating;
pub mod selection;
pub mod simulate;
pub mod stats;
pub mod wald;

pub use ctmc::AllowedPairs;
pub use error::{Error, Result};
pub use rating::{RatingScale, Terminal};
pub use selection::Direction;

/// Default-precision matrix.
pub type Mat = linalg::Mat<f64>;
/// Default-precision discrete transition panel.
pub type DiscretePanel = rating::DiscretePanel<f64>;
/// Default-precision entity track.
pub type EntityTrack = rating::EntityTrack<f64>;
/// Default-precision event history.
pub type EventHistory = rating::EventHistory<f64>;
/// Default-precision generator matrix.
pub type GeneratorMatrix = ctmc::GeneratorMatrix<f64>;
/// Default-precision momentum parameters.
pub type MomentumParams = momentum::MomentumParams<f64>;
/// Default-precision momentum model.
pub type MomentumModel = momentum::MomentumModel<f64>;
/// Default-precision EM configuration.
pub type EmConfig = em::EmConfig<f64>;
/// Default-precision EM result.
pub type EmFit = em::EmFit<f64>;
/// Default-precision MCMC configuration.
pub type McmcConfig = mcmc::McmcConfig<f64>;
/// Default-precision MCMC run.
pub type McmcRun = mcmc::McmcRun<f64>;
/// Default-precision simulation configuration.
pub type SimConfig = simulate::SimConfig<f64>;
/// Default-precision score/Hessian bundle.
pub type HessianBundle = wald::HessianBundle<f64>;
/// Default-precision interval matrix.
pub type IntervalMatrix = wald::IntervalMatrix<f64>;
