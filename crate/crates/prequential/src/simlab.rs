//! Synthetic data with known ground truth.
//!
//! Three generators cover the needs of every statistical test in this
//! crate: a two-state Markov chain over hit flags (the alternative family
//! of the independence test, so its estimator can be checked against the
//! true transition parameter), a toy stochastic-volatility return process
//! whose conditional distribution is known exactly at every step (so
//! oracle predictors, PIT uniforms, and predictable variation are all
//! available in closed form), and an exact Pareto sampler for tail-index
//! and power-tail CVaR checks.
//!
//! Everything is driven by the splittable counter-based generator in
//! [`crate::rng`]; a fixed `(seed, generator)` pair reproduces bit-exactly
//! on any platform or worker count.

use serde::{Deserialize, Serialize};

use crate::dependence::theta_prime;
use crate::predictors::{PredictionTrace, Predictor, Target};
use crate::rng::{normal_cdf, normal_quantile, standard_normal, stream_rng, u01};
use crate::series::ReturnSeries;
use crate::{Error, Result};

// Distinct stream ids keep the three generators decorrelated when they
// share a user-facing seed.
const MARKOV_STREAM: u64 = 0x6d72_6b76;
const SV_STREAM: u64 = 0x7376_6f6c;
const PARETO_STREAM: u64 = 0x7061_7274;

/// Two-state hit-flag chain: marginal P[1] = β at every step, transitions
/// 0→1 with probability θ and 1→1 with probability θ' = 1 − θ(1−β)/β.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MarkovSpec {
    pub beta: f64,
    pub theta: f64,
    pub length: usize,
    pub seed: u64,
}

/// Samples the chain: x₀ ~ Bernoulli(β), then Markov transitions. θ = β
/// gives the i.i.d. null, θ = 0 freezes the initial state, θ = 1 forces a
/// hit after every miss.
pub fn sample_markov(spec: &MarkovSpec) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&spec.theta) {
        return Err(Error::invalid_param(format!(
            "theta {} not in [0, 1]",
            spec.theta
        )));
    }
    let tp = theta_prime(spec.theta, spec.beta)?;
    if spec.length == 0 {
        return Err(Error::invalid_param("length must be positive"));
    }
    let mut rng = stream_rng(spec.seed, MARKOV_STREAM);
    let mut flags = Vec::with_capacity(spec.length);
    let mut cur = u01(&mut rng) < spec.beta;
    flags.push(cur);
    for _ in 1..spec.length {
        let p = if cur { tp } else { spec.theta };
        cur = u01(&mut rng) < p;
        flags.push(cur);
    }
    Ok(flags)
}

/// Stochastic-volatility return process with a predictable log-volatility
/// AR(1):
///
/// Y_k = σ_k ε_k,   ln σ_{k+1} = (1−ρ) ln s + ρ ln σ_k + v η_k,
///
/// with ε, η independent standard Gaussians and σ_1 = s. Because σ_{k+1}
/// is measurable at time k, the conditional law of the next return is
/// N(0, σ_{k+1}²) with σ_{k+1} known — the generator can hand out exact
/// conditional quantiles, CDFs, and moments.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SvSpec {
    /// AR(1) coefficient ρ of log volatility; must lie in [0, 1).
    pub persistence: f64,
    /// Innovation scale v of log volatility; 0 degenerates to i.i.d.
    /// Gaussian returns.
    pub vol_of_vol: f64,
    /// Stationary volatility scale s (also the starting volatility).
    pub scale: f64,
    pub length: usize,
    pub seed: u64,
}

impl Default for SvSpec {
    /// Parameters tuned to produce visibly bursty volatility at weekly
    /// frequency; artifact defaults, nothing estimated.
    fn default() -> Self {
        SvSpec {
            persistence: 0.95,
            vol_of_vol: 0.2,
            scale: 0.02,
            length: 1000,
            seed: 0,
        }
    }
}

/// A simulated path together with its per-step true conditional
/// volatilities — the ground truth every oracle below reads from.
#[derive(Debug, Clone)]
pub struct SvSample {
    pub returns: ReturnSeries,
    sigmas: Vec<f64>,
}

/// Simulates the process and keeps the volatility path.
pub fn sample_sv(spec: &SvSpec) -> Result<SvSample> {
    if !(0.0..1.0).contains(&spec.persistence) {
        return Err(Error::invalid_param(format!(
            "persistence {} not in [0, 1)",
            spec.persistence
        )));
    }
    if !(spec.vol_of_vol >= 0.0 && spec.vol_of_vol.is_finite()) {
        return Err(Error::invalid_param(format!(
            "vol_of_vol {} must be finite and nonnegative",
            spec.vol_of_vol
        )));
    }
    if !(spec.scale > 0.0 && spec.scale.is_finite()) {
        return Err(Error::invalid_param(format!(
            "scale {} must be positive",
            spec.scale
        )));
    }
    if spec.length == 0 {
        return Err(Error::invalid_param("length must be positive"));
    }
    let mut rng = stream_rng(spec.seed, SV_STREAM);
    let log_scale = spec.scale.ln();
    let mut h = log_scale;
    let mut sigmas = Vec::with_capacity(spec.length);
    let mut values = Vec::with_capacity(spec.length);
    for _ in 0..spec.length {
        let sigma = h.exp();
        sigmas.push(sigma);
        values.push(sigma * standard_normal(&mut rng));
        h = (1.0 - spec.persistence) * log_scale
            + spec.persistence * h
            + spec.vol_of_vol * standard_normal(&mut rng);
    }
    Ok(SvSample {
        returns: ReturnSeries::synthetic_weekly(values),
        sigmas,
    })
}

impl SvSample {
    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    /// True conditional volatility of step `k` (0-based), known one step
    /// ahead.
    pub fn conditional_sigma(&self, k: usize) -> f64 {
        self.sigmas[k]
    }

    /// True conditional CDF of the step-`k` return: Φ(y/σ_k).
    pub fn conditional_cdf(&self, k: usize, y: f64) -> f64 {
        normal_cdf(y / self.sigmas[k])
    }

    /// True conditional β-quantile of the step-`k` return: σ_k Φ⁻¹(β).
    pub fn conditional_quantile(&self, k: usize, beta: f64) -> f64 {
        self.sigmas[k] * normal_quantile(beta)
    }

    pub fn conditional_mean(&self, _k: usize) -> f64 {
        0.0
    }

    pub fn conditional_variance(&self, k: usize) -> f64 {
        self.sigmas[k] * self.sigmas[k]
    }

    /// Predictor that emits the true conditional β-quantile at every step —
    /// the calibrated reference every feasible forecaster is measured
    /// against.
    pub fn quantile_oracle(&self, beta: f64) -> Result<OraclePredictor> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid_param(format!("beta {beta} not in (0, 1)")));
        }
        let z = normal_quantile(beta);
        Ok(OraclePredictor {
            predictions: self.sigmas.iter().map(|s| s * z).collect(),
            target: Target::Quantile(beta),
        })
    }

    /// Predictor that emits the true conditional mean (identically zero).
    pub fn mean_oracle(&self) -> OraclePredictor {
        OraclePredictor {
            predictions: vec![0.0; self.sigmas.len()],
            target: Target::Mean,
        }
    }

    /// PIT values Φ(Y_k/σ_k) of the whole path; i.i.d. uniform by
    /// construction.
    pub fn pit_values(&self) -> Vec<f64> {
        self.returns
            .values()
            .iter()
            .enumerate()
            .map(|(k, &y)| self.conditional_cdf(k, y))
            .collect()
    }
}

/// Replays a precomputed list of ground-truth forecasts, one per step.
#[derive(Debug, Clone)]
pub struct OraclePredictor {
    predictions: Vec<f64>,
    target: Target,
}

impl Predictor for OraclePredictor {
    fn target(&self) -> Target {
        self.target
    }

    fn predict_next(&mut self, history: &[f64]) -> Option<f64> {
        self.predictions.get(history.len()).copied()
    }

    fn reset(&mut self) {}
}

/// Exact Pareto samples by inverse transform: X = s (1−U)^{−1/κ}, so
/// P[X > x] = (s/x)^κ for x ≥ s. Valid for any κ > 0, including the
/// infinite-mean regime κ ≤ 1.
pub fn sample_pareto(kappa: f64, scale: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::invalid_param(format!(
            "kappa {kappa} must be positive"
        )));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid_param(format!(
            "scale {scale} must be positive"
        )));
    }
    let mut rng = stream_rng(seed, PARETO_STREAM);
    Ok((0..n)
        .map(|_| scale * (1.0 - u01(&mut rng)).powf(-1.0 / kappa))
        .collect())
}

/// Closed-form Pareto τ-quantile s (1−τ)^{−1/κ}.
pub fn pareto_quantile(kappa: f64, scale: f64, tau: f64) -> Result<f64> {
    if !(kappa > 0.0 && scale > 0.0) {
        return Err(Error::invalid_param(format!(
            "need positive kappa and scale, got ({kappa}, {scale})"
        )));
    }
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::invalid_param(format!("tau {tau} not in [0, 1)")));
    }
    Ok(scale * (1.0 - tau).powf(-1.0 / kappa))
}

/// Closed-form Pareto CVaR_β = q_β κ/(κ−1); the mean beyond any quantile
/// of a power law is that quantile scaled by κ/(κ−1). Undefined at κ ≤ 1.
pub fn pareto_cvar(kappa: f64, scale: f64, beta: f64) -> Result<f64> {
    if !(kappa > 1.0 + 1e-6) {
        return Err(Error::InfiniteMean { kappa });
    }
    Ok(pareto_quantile(kappa, scale, beta)? * kappa / (kappa - 1.0))
}

/// Predictable variation of the mean-calibration martingale along a trace:
///
/// ⟨S⟩_n = Σ_{k≤n} E[(Y_k − μ̂_k)² | info at k−1]
///       = Σ_{k≤n} (σ_k² + (μ̂_k − μ_k)²),
///
/// computable only because the generating model is known. Returns one
/// (k, ⟨S⟩_k) point per trace step. The trace must target the mean and
/// line up with the model's own path.
pub fn angle_bracket_trace(model: &SvSample, trace: &PredictionTrace) -> Result<Vec<(usize, f64)>> {
    if trace.target != Target::Mean {
        return Err(Error::Unsupported(
            "predictable variation is defined for mean-target traces only".into(),
        ));
    }
    let values = model.returns.values();
    let mut out = Vec::with_capacity(trace.steps.len());
    let mut acc = 0.0;
    for step in &trace.steps {
        let k = step.k;
        if k == 0 || k > model.len() {
            return Err(Error::Misaligned(format!(
                "trace step {k} outside the model path of length {}",
                model.len()
            )));
        }
        if step.realized != values[k - 1] {
            return Err(Error::Misaligned(format!(
                "realized value at step {k} does not match the model path"
            )));
        }
        let err = step.prediction - model.conditional_mean(k - 1);
        acc += model.conditional_variance(k - 1) + err * err;
        out.push((k, acc));
    }
    Ok(out)
}
