//! Running calibration statistics over forecast traces.
//!
//! Calibration here is the prequential notion: normalized sums of
//! identification errors along the realized path. For a β-quantile
//! forecast the natural error is the exceedance indicator minus (1−β); for
//! a mean forecast it is the raw forecast error. Three normalizations are
//! provided:
//!
//! * [`running_frequency`]: the plain exceedance frequency (1/n)Σ 1{Y_k > q_k},
//!   which should settle near 1−β;
//! * [`lil_statistic`]: the same centered sum divided by the
//!   law-of-the-iterated-logarithm envelope σ√(2n log log n), so that an
//!   honest forecaster's path has limsup +1 and liminf −1 — excursions far
//!   beyond ±1 are evidence against calibration at a resolution the plain
//!   frequency cannot see;
//! * [`mean_calibration`]: the martingale ratio S_n/Q_n of the cumulative
//!   forecast error to its cumulative squared increments, which converges
//!   to zero for conditionally unbiased mean forecasts.
//!
//! [`pit_transform`] supports the complementary model-based view: under the
//! true conditional distributions the probability integral transforms are
//! i.i.d. uniform, which [`ks_uniform_pvalue`] tests.

use std::io::Write;

use serde::Serialize;

use crate::predictors::{PredictionTrace, Target, TraceStep};
use crate::series::ReturnSeries;
use crate::{Error, Result};

/// Which statistic a [`CalibrationTrace`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    RelativeFrequency,
    Lil,
    MartingaleRatio,
}

/// A calibration statistic evaluated along a forecast trace.
///
/// `values` pairs each within-trace step count n (1-based, warm-up already
/// excluded by the trace) with the statistic after n steps. `degenerate` is
/// set by [`mean_calibration`] when the normalizer Q_n is still zero at the
/// end of the trace, i.e. every forecast was exact and the ratio is 0 only
/// by convention.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTrace {
    pub kind: TraceKind,
    pub beta: Option<f64>,
    pub values: Vec<(usize, f64)>,
    pub degenerate: bool,
}

impl CalibrationTrace {
    pub fn terminal(&self) -> Option<f64> {
        self.values.last().map(|&(_, v)| v)
    }

    /// Writes `n,statistic` CSV.
    pub fn write_csv(&self, mut writer: impl Write) -> Result<()> {
        writeln!(writer, "n,statistic")?;
        for (n, v) in &self.values {
            writeln!(writer, "{n},{v}")?;
        }
        Ok(())
    }
}

fn quantile_beta(trace: &PredictionTrace) -> Result<f64> {
    match trace.target {
        Target::Quantile(beta) => Ok(beta),
        Target::Mean => Err(Error::Unsupported(
            "exceedance calibration needs a quantile-target trace".into(),
        )),
    }
}

fn non_empty(trace: &PredictionTrace) -> Result<()> {
    if trace.steps.is_empty() {
        return Err(Error::insufficient("empty trace"));
    }
    Ok(())
}

/// Raw exceedance frequency y_n = (1/n) Σ_{k≤n} 1{Y_k > q_k}.
pub fn running_frequency(trace: &PredictionTrace) -> Result<CalibrationTrace> {
    non_empty(trace)?;
    let beta = quantile_beta(trace)?;
    let mut count = 0u64;
    let values = trace
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            count += u64::from(s.exceeded);
            (i + 1, count as f64 / (i + 1) as f64)
        })
        .collect();
    Ok(CalibrationTrace {
        kind: TraceKind::RelativeFrequency,
        beta: Some(beta),
        values,
        degenerate: false,
    })
}

/// Iterated-logarithm normalized calibration sum
///
/// ζ(n) = Σ_{k≤n} Z_k / (σ √(2 n log log n)),  Z_k = 1{Y_k ≤ q_k} − β,
///
/// with σ² = β(1−β). Defined from n = 3 (log log n > 0). For an honest
/// β-quantile forecaster the path visits every neighborhood of ±1 and
/// asymptotically stays within them.
pub fn lil_statistic(trace: &PredictionTrace) -> Result<CalibrationTrace> {
    let beta = quantile_beta(trace)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid_param(format!("beta {beta} not in (0, 1)")));
    }
    if trace.len() < 3 {
        return Err(Error::insufficient(format!(
            "iterated-logarithm normalization needs n >= 3, trace has {}",
            trace.len()
        )));
    }
    let sigma = (beta * (1.0 - beta)).sqrt();
    let mut sum = 0.0;
    let mut values = Vec::with_capacity(trace.len() - 2);
    for (i, s) in trace.steps.iter().enumerate() {
        let hit = if s.exceeded { 0.0 } else { 1.0 };
        sum += hit - beta;
        let n = i + 1;
        if n >= 3 {
            let norm = sigma * (2.0 * n as f64 * (n as f64).ln().ln()).sqrt();
            values.push((n, sum / norm));
        }
    }
    Ok(CalibrationTrace {
        kind: TraceKind::Lil,
        beta: Some(beta),
        values,
        degenerate: false,
    })
}

/// Martingale mean-calibration ratio S_n/Q_n with S_n = Σ (Y_k − μ_k) and
/// Q_n = Σ (Y_k − μ_k)². While Q_n is still 0 (every forecast exact) the
/// ratio is reported as 0; if that persists to the end of the trace the
/// result is flagged degenerate.
pub fn mean_calibration(trace: &PredictionTrace) -> Result<CalibrationTrace> {
    non_empty(trace)?;
    if trace.target != Target::Mean {
        return Err(Error::Unsupported(
            "mean calibration needs a mean-target trace".into(),
        ));
    }
    let mut s = 0.0;
    let mut q = 0.0;
    let values = trace
        .steps
        .iter()
        .enumerate()
        .map(|(i, step)| {
            let x = step.realized - step.prediction;
            s += x;
            q += x * x;
            (i + 1, if q > 0.0 { s / q } else { 0.0 })
        })
        .collect();
    Ok(CalibrationTrace {
        kind: TraceKind::MartingaleRatio,
        beta: None,
        values,
        degenerate: q == 0.0,
    })
}

/// Generic normalized identification sum Σ_{k≤n} ℓ(step_k) / b(n): the
/// building block behind the named statistics, exposed for custom
/// identification functions and norming sequences.
pub fn normalized_identification_sum(
    trace: &PredictionTrace,
    ell: impl Fn(&TraceStep) -> f64,
    norm: impl Fn(usize) -> f64,
) -> Vec<(usize, f64)> {
    let mut sum = 0.0;
    trace
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            sum += ell(s);
            (i + 1, sum / norm(i + 1))
        })
        .collect()
}

/// Probability integral transforms U_k = F_k(Y_k) of realized values under
/// per-step conditional CDFs. `cdf(k, y)` is indexed by the 0-based
/// position in the series; every returned value must lie in [0, 1].
pub fn pit_transform(cdf: impl Fn(usize, f64) -> f64, realized: &ReturnSeries) -> Result<Vec<f64>> {
    if realized.is_empty() {
        return Err(Error::insufficient("empty series"));
    }
    realized
        .observations
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let u = cdf(k, o.value);
            if !(0.0..=1.0).contains(&u) {
                return Err(Error::Model(format!(
                    "conditional CDF returned {u} at step {k}, outside [0, 1]"
                )));
            }
            Ok(u)
        })
        .collect()
}

/// Kolmogorov-Smirnov statistic of a sample against the uniform law on
/// [0, 1]: sup_u |F̂(u) − u|.
pub fn ks_statistic_uniform(sample: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::insufficient("empty sample"));
    }
    if sample.iter().any(|u| !(0.0..=1.0).contains(u)) {
        return Err(Error::InvalidData("sample value outside [0, 1]".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        d = d.max(u - i as f64 / n).max((i + 1) as f64 / n - u);
    }
    Ok(d)
}

/// Asymptotic Kolmogorov-Smirnov p-value for a sample of size n with
/// statistic d: P(sup |B(t)| > √n d) for a Brownian bridge B.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let t = d * (n as f64).sqrt();
    if t <= 0.0 {
        return 1.0;
    }
    if t < 0.2 {
        // The alternating series converges too slowly here; use the
        // theta-function form of the CDF instead.
        let mut cdf = 0.0;
        for j in 1..=10 {
            let m = (2 * j - 1) as f64;
            cdf += (-m * m * std::f64::consts::PI.powi(2) / (8.0 * t * t)).exp();
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / t;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut p = 0.0;
    for j in 1..=100 {
        let term = 2.0 * (-2.0 * (j as f64).powi(2) * t * t).exp();
        p += if j % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Convenience: KS test of uniformity, returning (statistic, p-value).
pub fn ks_uniform_pvalue(sample: &[f64]) -> Result<(f64, f64)> {
    let d = ks_statistic_uniform(sample)?;
    Ok((d, ks_pvalue(d, sample.len())))
}

/// min/max/terminal of a calibration statistic from step `from` onward,
/// the usual way to summarize whether a running frequency has settled into
/// a band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailSummary {
    pub from: usize,
    pub terminal: f64,
    pub min: f64,
    pub max: f64,
}

/// Summarizes `trace` over steps n ≥ `from`; `None` if the trace ends
/// before `from`.
pub fn tail_summary(trace: &CalibrationTrace, from: usize) -> Option<TailSummary> {
    let tail: Vec<f64> = trace
        .values
        .iter()
        .filter(|(n, _)| *n >= from)
        .map(|&(_, v)| v)
        .collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &tail {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Some(TailSummary {
        from,
        terminal: *tail.last()?,
        min: lo,
        max: hi,
    })
}
