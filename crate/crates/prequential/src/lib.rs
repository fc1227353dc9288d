//! Prequential verification of sequential risk forecasts.
//!
//! A forecaster emits, week after week, a value-at-risk quantile (or a mean)
//! for the next observation before it is revealed. This crate evaluates such
//! forecast streams purely through the realized (forecast, outcome) pairs,
//! in the prequential spirit of Dawid: no access to the forecaster's model
//! is assumed, and every verdict is a function of the observed sequence.
//!
//! The pieces fit together as a pipeline:
//!
//! * [`series`] loads price data, builds return series, and fits power-law
//!   tail envelopes;
//! * [`predictors`] runs quantile/mean forecasters over a series (rolling
//!   order statistics, an adaptive error-feedback scheme, and a deliberately
//!   uninformative but calibrated control predictor), and measures a
//!   forecaster's sensitivity to its input history;
//! * [`calibration`] turns exceedance traces into running-frequency,
//!   law-of-the-iterated-logarithm and martingale mean-calibration
//!   statistics, plus probability integral transforms;
//! * [`dependence`] tests exceedance independence against a one-parameter
//!   Markov alternative, with simulated finite-sample confidence tables;
//! * [`scoring`] compares forecasters with consistent scoring functions
//!   (quantile, expectile, squared-error and the CVaR-linked score of
//!   Rockafellar–Uryasev) over moving windows, Diebold–Mariano style;
//! * [`tailrisk`] computes VaR/CVaR-type functionals of samples and
//!   quantile curves, including power-tail and truncated variants;
//! * [`simlab`] generates synthetic data (two-state exceedance chains,
//!   stochastic-volatility returns, Pareto samples) together with the exact
//!   conditional oracles needed to validate everything else.
//!
//! All randomness is counter-based and seeded (see [`rng`]), so simulation
//! output, confidence tables and CLI artifacts are bit-reproducible.

// Validation guards deliberately use `!(x > 0.0)`-style comparisons:
// unlike `x <= 0.0`, the negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod dependence;
mod error;
pub mod predictors;
pub mod rng;
pub mod scoring;
pub mod series;
pub mod simlab;
pub mod tailrisk;

pub use error::{Error, Result};
