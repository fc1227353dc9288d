//! Tail-risk functionals of samples and quantile curves.
//!
//! Conventions: VaR_β is the lower β-quantile q_β⁻ (the ⌈βn⌉-th order
//! statistic of a sample), and CVaR_β is the mean of the β-tail
//! distribution, which splits the atom at the quantile when βn is not an
//! integer. The two are tied together by the Rockafellar-Uryasev objective
//! [`psi`]: Ψ(x) = x + E[(Y−x)⁺]/(1−β) is minimized exactly at q_β⁻ with
//! minimum value CVaR_β, a fact the tests pin down to float accuracy.
//!
//! For heavy tails where the empirical quantile curve runs out of data,
//! [`cvar_power_tail`] extends the curve beyond a trust level η with a
//! fitted power law, and [`cvar_truncated`] gives the assumption-free
//! truncated tail mean on [β, η].

use serde::Serialize;

use crate::series::empirical_quantile;
use crate::{Error, Result};

/// Which functional a [`RiskEstimate`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskKind {
    Var,
    Cvar,
    Cmvar,
    CvarPowerTail,
    CvarTruncated,
    Expectile,
}

/// Tail-model inputs that went into an estimate, recorded so that reports
/// are self-describing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailAssumptions {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

/// A tail-risk number, tagged with the functional and level it estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskEstimate {
    pub kind: RiskKind,
    pub level: f64,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assumptions: Option<TailAssumptions>,
}

/// Empirical VaR_β: the lower β-quantile of the sample.
pub fn var_of(sample: &[f64], beta: f64) -> Result<RiskEstimate> {
    let value = empirical_quantile(sample, beta)?;
    Ok(RiskEstimate {
        kind: RiskKind::Var,
        level: beta,
        value,
        assumptions: None,
    })
}

/// Empirical CVaR_β: the mean of the β-tail distribution,
///
/// (1/(1−β)) [ (1/n) Σ_{y > q} y + q (F̂(q) − β) ],   q = q_β⁻,
///
/// which averages the top (1−β)n order statistics when βn is an integer
/// and otherwise gives the quantile atom the fractional weight F̂(q) − β.
pub fn cvar_of(sample: &[f64], beta: f64) -> Result<RiskEstimate> {
    let q = empirical_quantile(sample, beta)?;
    let n = sample.len() as f64;
    let mut above = 0.0;
    let mut at_or_below = 0u64;
    for &y in sample {
        if y > q {
            above += y;
        } else {
            at_or_below += 1;
        }
    }
    let cdf_at_q = at_or_below as f64 / n;
    let value = (above / n + q * (cdf_at_q - beta)) / (1.0 - beta);
    Ok(RiskEstimate {
        kind: RiskKind::Cvar,
        level: beta,
        value,
        assumptions: None,
    })
}

/// Central-median VaR: the (1+β)/2 quantile, i.e. the median of the β-tail
/// in the VaR direction. β = 0 recovers the sample median.
pub fn cmvar(sample: &[f64], beta: f64) -> Result<RiskEstimate> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::invalid_param(format!("beta {beta} not in [0, 1)")));
    }
    let value = empirical_quantile(sample, (1.0 + beta) / 2.0)?;
    Ok(RiskEstimate {
        kind: RiskKind::Cmvar,
        level: beta,
        value,
        assumptions: None,
    })
}

/// Rockafellar-Uryasev objective over the empirical distribution:
/// Ψ(x) = x + (1/(1−β)) (1/n) Σ (y_i − x)⁺.
pub fn psi(x: f64, sample: &[f64], beta: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::insufficient("empty sample"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid_param(format!("beta {beta} not in (0, 1)")));
    }
    let mean_excess: f64 =
        sample.iter().map(|&y| (y - x).max(0.0)).sum::<f64>() / sample.len() as f64;
    Ok(x + mean_excess / (1.0 - beta))
}

/// Composite trapezoid rule with step at most 1e-4 in the quantile level:
/// plenty for the smooth, monotone curves integrated here.
fn trapezoid(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    if b == a {
        return Ok(0.0);
    }
    let m = ((b - a) / 1e-4).ceil().max(1.0) as usize;
    let h = (b - a) / m as f64;
    let mut sum = 0.5 * (f(a) + f(b));
    for i in 1..m {
        sum += f(a + i as f64 * h);
    }
    let integral = sum * h;
    if !integral.is_finite() {
        return Err(Error::Model(
            "quantile curve produced a non-finite value".into(),
        ));
    }
    Ok(integral)
}

/// CVaR_β under a power-law tail beyond trust level η:
///
/// CVaR_β = (1/(1−β)) [ ∫_β^η q_τ dτ + (κ/(κ−1)) (1−η) q_η ].
///
/// The integral uses the supplied quantile curve on [β, η] (empirical
/// quantiles in practice); beyond η the curve is replaced by the exact
/// tail mean of a κ-power law scaled through q_η. κ must exceed 1 or the
/// tail has no mean; η = β degenerates to the pure power-law formula
/// q_β κ/(κ−1).
pub fn cvar_power_tail(
    quantile_curve: impl Fn(f64) -> f64,
    q_eta: f64,
    kappa: f64,
    beta: f64,
    eta: f64,
) -> Result<RiskEstimate> {
    if !(beta > 0.0 && beta <= eta && eta < 1.0) {
        return Err(Error::invalid_param(format!(
            "need 0 < beta <= eta < 1, got ({beta}, {eta})"
        )));
    }
    if !(kappa > 1.0 + 1e-6) {
        return Err(Error::InfiniteMean { kappa });
    }
    if !q_eta.is_finite() {
        return Err(Error::invalid_param(format!("q_eta {q_eta} is not finite")));
    }
    let integral = trapezoid(&quantile_curve, beta, eta)?;
    let tail = kappa / (kappa - 1.0) * (1.0 - eta) * q_eta;
    Ok(RiskEstimate {
        kind: RiskKind::CvarPowerTail,
        level: beta,
        value: (integral + tail) / (1.0 - beta),
        assumptions: Some(TailAssumptions {
            kappa: Some(kappa),
            eta: Some(eta),
        }),
    })
}

/// Truncated tail mean (1/(η−β)) ∫_β^η q_τ dτ: the CVaR contribution of
/// the quantile range the data actually supports, with no tail model.
pub fn cvar_truncated(
    quantile_curve: impl Fn(f64) -> f64,
    beta: f64,
    eta: f64,
) -> Result<RiskEstimate> {
    if !(0.0 <= beta && beta < eta && eta <= 1.0) {
        return Err(Error::invalid_param(format!(
            "need 0 <= beta < eta <= 1, got ({beta}, {eta})"
        )));
    }
    let integral = trapezoid(&quantile_curve, beta, eta)?;
    Ok(RiskEstimate {
        kind: RiskKind::CvarTruncated,
        level: beta,
        value: integral / (eta - beta),
        assumptions: Some(TailAssumptions {
            kappa: None,
            eta: Some(eta),
        }),
    })
}

/// Tail exponent implied by two quantiles of an exact power law:
/// κ = ln((1−β)/(1−η)) / ln(q_η/q_β). A diagnostic, not an estimator: on
/// real data it inherits all the noise of the two quantiles.
pub fn implied_kappa(q_beta: f64, q_eta: f64, beta: f64, eta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < eta && eta < 1.0) {
        return Err(Error::invalid_param(format!(
            "need 0 < beta < eta < 1, got ({beta}, {eta})"
        )));
    }
    if !(q_beta > 0.0 && q_eta > q_beta) {
        return Err(Error::invalid_param(format!(
            "need 0 < q_beta < q_eta, got ({q_beta}, {q_eta})"
        )));
    }
    Ok(((1.0 - beta) / (1.0 - eta)).ln() / (q_eta / q_beta).ln())
}

/// Empirical τ-expectile: the unique root of
///
/// τ Σ (y_i − x)⁺ = (1−τ) Σ (x − y_i)⁺,
///
/// found by bisection on [min, max] to absolute tolerance 1e-10. τ = 1/2
/// gives the sample mean.
pub fn expectile(sample: &[f64], tau: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::insufficient("empty sample"));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid_param(format!("tau {tau} not in (0, 1)")));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData(
            "sample contains a non-finite value".into(),
        ));
    }
    let (mut lo, mut hi) = sample
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo == hi {
        return Ok(lo);
    }
    // Identification function: positive below the expectile, negative above.
    let balance = |x: f64| -> f64 {
        let up: f64 = sample.iter().map(|&y| (y - x).max(0.0)).sum();
        let down: f64 = sample.iter().map(|&y| (x - y).max(0.0)).sum();
        tau * up - (1.0 - tau) * down
    };
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // adjacent floats: the bracket cannot narrow further
        }
        if balance(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// [`expectile`] wrapped as a [`RiskEstimate`].
pub fn expectile_estimate(sample: &[f64], tau: f64) -> Result<RiskEstimate> {
    let value = expectile(sample, tau)?;
    Ok(RiskEstimate {
        kind: RiskKind::Expectile,
        level: tau,
        value,
        assumptions: None,
    })
}
