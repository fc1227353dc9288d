//! Sequential forecasters and the machinery to run and probe them.
//!
//! A [`Predictor`] sees the history strictly before step k and emits a
//! forecast for step k; [`run_predictor`] folds one over a return series
//! into a [`PredictionTrace`] of (forecast, outcome, exceedance) rows, the
//! input to every calibration and comparison statistic in this crate.
//!
//! Two diagnostics motivated the design. First, a forecaster can be
//! perfectly calibrated while ignoring the data entirely; the
//! [`nonsense_predictor`] exists to demonstrate that. Second,
//! [`sensitivity`] measures how much a forecast actually responds to the
//! history, which separates such an ignorer (derivative ~ 0) from genuine
//! data-driven schemes (derivative ~ 1 in the all-ones direction).

use std::fmt;
use std::io::{Read, Write};

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::rng::mix64;
use crate::series::{empirical_quantile, ReturnSeries};
use crate::{Error, Result};

/// What a forecast stream claims to be: a β-quantile or the conditional mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Quantile(f64),
    Mean,
}

impl Target {
    /// The quantile level, if this is a quantile target.
    pub fn beta(&self) -> Option<f64> {
        match self {
            Target::Quantile(b) => Some(*b),
            Target::Mean => None,
        }
    }
}

impl Serialize for Target {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Target::Quantile(b) => serializer.serialize_f64(*b),
            Target::Mean => serializer.serialize_str("mean"),
        }
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct TargetVisitor;
        impl<'de> Visitor<'de> for TargetVisitor {
            type Value = Target;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a quantile level in (0,1) or the string \"mean\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Target, E> {
                Ok(Target::Quantile(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Target, E> {
                Ok(Target::Quantile(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Target, E> {
                if v == "mean" {
                    Ok(Target::Mean)
                } else {
                    Err(E::custom(format!("unknown target '{v}'")))
                }
            }
        }
        deserializer.deserialize_any(TargetVisitor)
    }
}

/// A sequential forecaster.
///
/// `predict_next` is called with the full history before the step being
/// forecast, in order, one step at a time; it returns `None` while the
/// predictor is still warming up. Implementations must be deterministic
/// given their construction parameters (stochastic predictors carry an
/// explicit seed), and must never consult anything but `history`: the
/// forecast for step k may not depend on data at or after k.
pub trait Predictor {
    fn target(&self) -> Target;

    /// Forecast for the step following `history`, or `None` during warm-up.
    fn predict_next(&mut self, history: &[f64]) -> Option<f64>;

    /// Restores the freshly-constructed state, so the predictor can be run
    /// again (the sensitivity diagnostic relies on this).
    fn reset(&mut self);
}

/// One evaluated forecast step. `k` is the 1-based position in the return
/// series; `exceeded` is the strict comparison `realized > prediction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub k: usize,
    pub prediction: f64,
    pub realized: f64,
    pub exceeded: bool,
}

/// The realized record of a forecaster run over a series: warm-up steps are
/// absent, the remaining step indices are contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTrace {
    #[serde(rename = "target_beta")]
    pub target: Target,
    pub steps: Vec<TraceStep>,
}

impl PredictionTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Writes `k,prediction,realized,exceeded` CSV (exceeded as 0/1).
    pub fn write_csv(&self, mut writer: impl Write) -> Result<()> {
        writeln!(writer, "k,prediction,realized,exceeded")?;
        for s in &self.steps {
            writeln!(
                writer,
                "{},{},{},{}",
                s.k,
                s.prediction,
                s.realized,
                u8::from(s.exceeded)
            )?;
        }
        Ok(())
    }

    /// Reads the CSV produced by [`PredictionTrace::write_csv`]. The target
    /// is not stored in CSV and must be supplied by the caller.
    pub fn read_csv(reader: impl Read, target: Target) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    message: format!("missing column '{name}' in header"),
                })
        };
        let (ki, pi, ri, ei) = (
            col("k")?,
            col("prediction")?,
            col("realized")?,
            col("exceeded")?,
        );
        let mut steps = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            let parse = |idx: usize, what: &str| -> Result<f64> {
                record
                    .get(idx)
                    .unwrap_or("")
                    .parse()
                    .map_err(|e| Error::Parse {
                        line,
                        message: format!("bad {what}: {e}"),
                    })
            };
            let exceeded = match record.get(ei).unwrap_or("") {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("exceeded flag '{other}' is not 0 or 1"),
                    })
                }
            };
            steps.push(TraceStep {
                k: parse(ki, "k")? as usize,
                prediction: parse(pi, "prediction")?,
                realized: parse(ri, "realized")?,
                exceeded,
            });
        }
        Ok(PredictionTrace { target, steps })
    }
}

/// Runs a predictor over a return series and records every emitted step.
///
/// The predictor is reset first, so a previously used instance starts
/// clean. Warm-up steps (where the predictor returns `None`) are skipped;
/// once it starts emitting it must keep emitting, which keeps trace
/// indices contiguous.
pub fn run_predictor(
    predictor: &mut dyn Predictor,
    data: &ReturnSeries,
) -> Result<PredictionTrace> {
    predictor.reset();
    let values = data.values();
    let mut steps = Vec::new();
    for k in 0..values.len() {
        match predictor.predict_next(&values[..k]) {
            Some(prediction) => {
                if !prediction.is_finite() {
                    return Err(Error::Model(format!(
                        "non-finite prediction {prediction} at step {}",
                        k + 1
                    )));
                }
                steps.push(TraceStep {
                    k: k + 1,
                    prediction,
                    realized: values[k],
                    exceeded: values[k] > prediction,
                });
            }
            None if steps.is_empty() => {}
            None => {
                return Err(Error::Model(format!(
                    "predictor stopped emitting at step {} after warming up",
                    k + 1
                )))
            }
        }
    }
    if steps.is_empty() {
        return Err(Error::insufficient(format!(
            "predictor never left warm-up on {} observations",
            values.len()
        )));
    }
    Ok(PredictionTrace {
        target: predictor.target(),
        steps,
    })
}

/// Order-statistic predictor: the forecast for step k+1 is the
/// `rank_from_top`-th largest of the previous `window` observations.
///
/// Its implied quantile target is β = 1 − rank_from_top/window (e.g. the
/// 2nd largest of 20 tracks the 90% quantile, the largest of 20 the 95%).
#[derive(Debug, Clone)]
pub struct RollingQuantile {
    window: usize,
    rank_from_top: usize,
}

pub fn rolling_quantile_predictor(window: usize, rank_from_top: usize) -> Result<RollingQuantile> {
    if window == 0 || rank_from_top == 0 || rank_from_top > window {
        return Err(Error::invalid_param(format!(
            "rank_from_top {rank_from_top} must lie in 1..={window}"
        )));
    }
    Ok(RollingQuantile {
        window,
        rank_from_top,
    })
}

impl Predictor for RollingQuantile {
    fn target(&self) -> Target {
        Target::Quantile(1.0 - self.rank_from_top as f64 / self.window as f64)
    }

    fn predict_next(&mut self, history: &[f64]) -> Option<f64> {
        if history.len() < self.window {
            return None;
        }
        let mut recent = history[history.len() - self.window..].to_vec();
        recent.sort_by(f64::total_cmp);
        Some(recent[self.window - self.rank_from_top])
    }

    fn reset(&mut self) {}
}

/// Error-feedback wrapper: shifts a base quantile forecast by
/// `varphi · (observed own exceedance frequency − (1 − target))`.
///
/// The frequency is taken over the wrapper's *own* emitted forecasts, so
/// the correction chases the target exceedance rate of the combined scheme
/// rather than of the base predictor. Before anything has been emitted the
/// correction is zero.
pub struct Adaptive {
    base: Box<dyn Predictor>,
    varphi: f64,
    target: f64,
    emitted: u64,
    exceeded: u64,
    last: Option<(usize, f64)>,
}

pub fn adaptive_predictor(base: Box<dyn Predictor>, varphi: f64, target: f64) -> Result<Adaptive> {
    if !(varphi >= 0.0) || !varphi.is_finite() {
        return Err(Error::invalid_param(format!(
            "varphi {varphi} must be finite and >= 0"
        )));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid_param(format!(
            "target {target} not in (0, 1)"
        )));
    }
    if base.target().beta().is_none() {
        return Err(Error::Unsupported(
            "adaptive feedback needs a quantile-target base predictor".into(),
        ));
    }
    Ok(Adaptive {
        base,
        varphi,
        target,
        emitted: 0,
        exceeded: 0,
        last: None,
    })
}

impl Adaptive {
    /// Exceedance frequency of the forecasts emitted so far, if any.
    pub fn own_frequency(&self) -> Option<f64> {
        (self.emitted > 0).then(|| self.exceeded as f64 / self.emitted as f64)
    }
}

impl Predictor for Adaptive {
    fn target(&self) -> Target {
        Target::Quantile(self.target)
    }

    fn predict_next(&mut self, history: &[f64]) -> Option<f64> {
        // Settle the previous forecast now that its outcome is visible.
        if let Some((at, prediction)) = self.last {
            if history.len() > at {
                self.emitted += 1;
                if history[at] > prediction {
                    self.exceeded += 1;
                }
                self.last = None;
            }
        }
        let base = self.base.predict_next(history)?;
        let correction = match self.own_frequency() {
            Some(freq) => self.varphi * (freq - (1.0 - self.target)),
            None => 0.0,
        };
        let prediction = base + correction;
        self.last = Some((history.len(), prediction));
        Some(prediction)
    }

    fn reset(&mut self) {
        self.base.reset();
        self.emitted = 0;
        self.exceeded = 0;
        self.last = None;
    }
}

/// Data-ignoring control predictor: at every step it emits `high` with
/// probability β and `low` with probability 1−β, independently of the
/// history.
///
/// On data that essentially always lies between `low` and `high` this is
/// calibrated as a β-quantile forecast (exceedances happen exactly when
/// `low` was emitted), yet it carries no information; scoring and the
/// sensitivity diagnostic expose it. Draw k is a pure function of
/// (seed, k), so the stream is reproducible and independent of call order.
#[derive(Debug, Clone)]
pub struct Nonsense {
    low: f64,
    high: f64,
    beta: f64,
    seed: u64,
}

pub fn nonsense_predictor(low: f64, high: f64, beta: f64, seed: u64) -> Result<Nonsense> {
    if !(low < high) {
        return Err(Error::invalid_param(format!(
            "low {low} must be below high {high}"
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid_param(format!("beta {beta} not in [0, 1]")));
    }
    Ok(Nonsense {
        low,
        high,
        beta,
        seed,
    })
}

impl Predictor for Nonsense {
    fn target(&self) -> Target {
        Target::Quantile(self.beta)
    }

    fn predict_next(&mut self, history: &[f64]) -> Option<f64> {
        let u = ((mix64(self.seed, history.len() as u64) >> 11) as f64 + 0.5)
            * (1.0 / (1u64 << 53) as f64);
        Some(if u < self.beta { self.high } else { self.low })
    }

    fn reset(&mut self) {}
}

/// Fixed-value predictor, mostly useful as a baseline and in tests.
#[derive(Debug, Clone)]
pub struct Constant {
    value: f64,
    target: Target,
}

pub fn constant_predictor(value: f64, target: Target) -> Constant {
    Constant { value, target }
}

impl Predictor for Constant {
    fn target(&self) -> Target {
        self.target
    }

    fn predict_next(&mut self, _history: &[f64]) -> Option<f64> {
        Some(self.value)
    }

    fn reset(&mut self) {}
}

/// Perturbation directions for [`sensitivity`].
#[derive(Debug, Clone)]
pub enum Direction {
    /// Every observation shifted equally.
    Ones,
    /// Geometrically decaying weights α^(n−k): recent observations move
    /// most, the distant past barely at all.
    Geometric {
        alpha: f64,
    },
    Custom(Vec<f64>),
}

impl Direction {
    /// Materializes the direction as a length-`n` vector.
    pub fn vector(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            Direction::Ones => Ok(vec![1.0; n]),
            Direction::Geometric { alpha } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(Error::invalid_param(format!("alpha {alpha} not in (0, 1]")));
                }
                Ok((0..n).map(|i| alpha.powi((n - 1 - i) as i32)).collect())
            }
            Direction::Custom(v) => {
                if v.len() != n {
                    return Err(Error::invalid_param(format!(
                        "direction has length {}, history {n}",
                        v.len()
                    )));
                }
                Ok(v.clone())
            }
        }
    }
}

/// Default perturbation size: 1e-6 of the interquartile range of the
/// history (falling back to the full range, then to 1e-6, for degenerate
/// histories).
pub fn default_epsilon(history: &[f64]) -> f64 {
    let iqr = match (
        empirical_quantile(history, 0.75),
        empirical_quantile(history, 0.25),
    ) {
        (Ok(hi), Ok(lo)) => hi - lo,
        _ => 0.0,
    };
    let scale = if iqr > 0.0 {
        iqr
    } else {
        let (lo, hi) = history
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if hi > lo {
            hi - lo
        } else {
            1.0
        }
    };
    1e-6 * scale
}

/// Forward-difference sensitivity of the next forecast to a history
/// perturbation:
///
/// (p(history + ε·direction) − p(history)) / ε
///
/// where p(·) runs the predictor over the given data and takes its forecast
/// for the following step. The baseline is evaluated twice; if the two runs
/// disagree the predictor is stochastic without a fixed seed and a
/// reproducibility error is returned rather than a meaningless derivative.
pub fn sensitivity(
    predictor: &mut dyn Predictor,
    history: &[f64],
    direction: &[f64],
    epsilon: f64,
) -> Result<f64> {
    if direction.len() != history.len() {
        return Err(Error::invalid_param(format!(
            "direction has length {}, history {}",
            direction.len(),
            history.len()
        )));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid_param(format!(
            "epsilon {epsilon} must be finite and > 0"
        )));
    }

    let base = final_prediction(predictor, history)?;
    let again = final_prediction(predictor, history)?;
    if base != again {
        return Err(Error::NotReproducible(format!(
            "two identical runs forecast {base} and {again}"
        )));
    }
    let perturbed: Vec<f64> = history
        .iter()
        .zip(direction)
        .map(|(y, z)| y + epsilon * z)
        .collect();
    let shifted = final_prediction(predictor, &perturbed)?;
    Ok((shifted - base) / epsilon)
}

/// Feeds the data through the predictor step by step and returns its
/// forecast for the step after the data ends.
fn final_prediction(predictor: &mut dyn Predictor, data: &[f64]) -> Result<f64> {
    predictor.reset();
    for k in 0..data.len() {
        let _ = predictor.predict_next(&data[..k]);
    }
    predictor.predict_next(data).ok_or_else(|| {
        Error::insufficient(format!(
            "predictor still warming up after {} observations",
            data.len()
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rolling_picks_rank_from_top_of_window() {
        let mut p = rolling_quantile_predictor(3, 2).unwrap();
        assert_eq!(p.predict_next(&[5.0, 1.0, 9.0]), Some(5.0));
        assert_eq!(p.predict_next(&[5.0, 1.0]), None);

        let history: Vec<f64> = (1..=20).map(f64::from).collect();
        let mut p = rolling_quantile_predictor(20, 2).unwrap();
        assert_eq!(p.predict_next(&history), Some(19.0));
        assert_eq!(p.target().beta(), Some(0.9));
        assert_eq!(
            rolling_quantile_predictor(20, 1).unwrap().target().beta(),
            Some(0.95)
        );
    }

    #[test]
    fn rolling_rejects_bad_rank() {
        assert!(rolling_quantile_predictor(20, 0).is_err());
        assert!(rolling_quantile_predictor(20, 21).is_err());
    }

    #[test]
    fn run_predictor_skips_warmup_and_flags_exceedances() {
        let data = ReturnSeries::synthetic_weekly(vec![1.0, 3.0, 2.0, 5.0, 0.0]);
        let mut p = rolling_quantile_predictor(2, 1).unwrap();
        let trace = run_predictor(&mut p, &data).unwrap();
        // Forecasts: max(1,3)=3 for k=3, max(3,2)=3 for k=4, max(2,5)=5 for k=5.
        assert_eq!(
            trace.steps.iter().map(|s| s.k).collect::<Vec<_>>(),
            vec![3, 4, 5]
        );
        assert_eq!(
            trace.steps.iter().map(|s| s.prediction).collect::<Vec<_>>(),
            vec![3.0, 3.0, 5.0]
        );
        assert_eq!(
            trace.steps.iter().map(|s| s.exceeded).collect::<Vec<_>>(),
            vec![false, true, false]
        );
    }

    #[test]
    fn exceedance_is_strict() {
        let data = ReturnSeries::synthetic_weekly(vec![0.5, 0.5]);
        let mut p = constant_predictor(0.5, Target::Quantile(0.9));
        let trace = run_predictor(&mut p, &data).unwrap();
        assert!(trace.steps.iter().all(|s| !s.exceeded));
    }

    #[test]
    fn run_predictor_errors_when_warmup_never_ends() {
        let data = ReturnSeries::synthetic_weekly(vec![1.0; 10]);
        let mut p = rolling_quantile_predictor(20, 2).unwrap();
        assert!(matches!(
            run_predictor(&mut p, &data),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn adaptive_applies_frequency_correction() {
        // 25 settled forecasts with exactly 3 exceedances: own frequency
        // 0.12, so the next forecast is base + 1.2 * (0.12 - 0.10).
        let base = constant_predictor(0.03, Target::Quantile(0.9));
        let mut p = adaptive_predictor(Box::new(base), 1.2, 0.9).unwrap();
        let mut history: Vec<f64> = vec![-2.0; 22];
        history.extend([2.0, 2.0, 2.0]);
        for k in 0..history.len() {
            p.predict_next(&history[..k]).unwrap();
        }
        let next = p.predict_next(&history).unwrap();
        assert_eq!(p.own_frequency(), Some(0.12));
        assert!((next - 0.054).abs() < 1e-12, "next = {next}");
    }

    #[test]
    fn adaptive_first_step_has_no_correction() {
        let base = constant_predictor(0.03, Target::Quantile(0.9));
        let mut p = adaptive_predictor(Box::new(base), 1.2, 0.9).unwrap();
        assert_eq!(p.predict_next(&[]), Some(0.03));
    }

    #[test]
    fn adaptive_with_zero_varphi_reproduces_base() {
        let values: Vec<f64> = (0..200)
            .map(|i| ((i * 37 % 101) as f64 - 50.0) / 25.0)
            .collect();
        let data = ReturnSeries::synthetic_weekly(values);
        let mut base = rolling_quantile_predictor(20, 2).unwrap();
        let mut wrapped = adaptive_predictor(
            Box::new(rolling_quantile_predictor(20, 2).unwrap()),
            0.0,
            0.9,
        )
        .unwrap();
        let a = run_predictor(&mut base, &data).unwrap();
        let b = run_predictor(&mut wrapped, &data).unwrap();
        assert_eq!(a.steps, b.steps);
    }

    #[test]
    fn adaptive_requires_quantile_base() {
        let base = constant_predictor(0.0, Target::Mean);
        assert!(matches!(
            adaptive_predictor(Box::new(base), 1.2, 0.9),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn nonsense_is_reproducible_and_roughly_bernoulli() {
        let mut a = nonsense_predictor(-0.06, 0.06, 0.9, 11).unwrap();
        let mut b = nonsense_predictor(-0.06, 0.06, 0.9, 11).unwrap();
        let n = 100_000usize;
        let mut history = Vec::with_capacity(n);
        let mut highs = 0usize;
        for _ in 0..n {
            let x = a.predict_next(&history).unwrap();
            assert_eq!(x, b.predict_next(&history).unwrap());
            if x == 0.06 {
                highs += 1;
            }
            history.push(0.0); // values are irrelevant, only position counts
        }
        let frac = highs as f64 / n as f64;
        let band = 3.0 * (0.9f64 * 0.1 / n as f64).sqrt();
        assert!((frac - 0.9).abs() < band, "frac = {frac}");

        let mut degenerate = nonsense_predictor(-1.0, 1.0, 1.0, 5).unwrap();
        let history = vec![0.0; 100];
        assert!((0..100).all(|k| degenerate.predict_next(&history[..k]) == Some(1.0)));
    }

    #[test]
    fn trace_csv_round_trips() {
        let data = ReturnSeries::synthetic_weekly(vec![1.0, 3.0, 2.0, 5.0, 0.0]);
        let mut p = rolling_quantile_predictor(2, 1).unwrap();
        let trace = run_predictor(&mut p, &data).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let back = PredictionTrace::read_csv(buf.as_slice(), trace.target).unwrap();
        assert_eq!(trace, back);
    }

    #[test]
    fn trace_json_encodes_mean_target_symbolically() {
        let trace = PredictionTrace {
            target: Target::Mean,
            steps: vec![],
        };
        let json = serde_json::to_string(&trace).unwrap();
        assert!(json.contains(r#""target_beta":"mean""#), "{json}");
        let trace = PredictionTrace {
            target: Target::Quantile(0.9),
            steps: vec![],
        };
        let json = serde_json::to_string(&trace).unwrap();
        assert!(json.contains(r#""target_beta":0.9"#), "{json}");
        let back: PredictionTrace = serde_json::from_str(&json).unwrap();
        assert_eq!(back.target, Target::Quantile(0.9));
    }

    #[test]
    fn sensitivity_of_rolling_to_uniform_shift_is_one() {
        let history: Vec<f64> = (0..60)
            .map(|i| ((i * 29 % 83) as f64 - 41.0) / 37.0)
            .collect();
        let mut p = rolling_quantile_predictor(20, 2).unwrap();
        let direction = Direction::Ones.vector(history.len()).unwrap();
        let d = sensitivity(&mut p, &history, &direction, default_epsilon(&history)).unwrap();
        assert!((d - 1.0).abs() < 1e-6, "d = {d}");
    }

    #[test]
    fn sensitivity_of_adaptive_to_uniform_shift_is_one() {
        let history: Vec<f64> = (0..120)
            .map(|i| ((i * 53 % 241) as f64 - 120.0) / 90.0)
            .collect();
        let base = rolling_quantile_predictor(20, 2).unwrap();
        let mut p = adaptive_predictor(Box::new(base), 1.2, 0.9).unwrap();
        let direction = Direction::Ones.vector(history.len()).unwrap();
        let d = sensitivity(&mut p, &history, &direction, default_epsilon(&history)).unwrap();
        assert!((d - 1.0).abs() < 0.1, "d = {d}");
    }

    #[test]
    fn sensitivity_of_nonsense_is_zero() {
        let history: Vec<f64> = (0..100).map(|i| (i as f64).sin() * 0.02).collect();
        let mut p = nonsense_predictor(-0.06, 0.06, 0.9, 3).unwrap();
        let direction = Direction::Ones.vector(history.len()).unwrap();
        let d = sensitivity(&mut p, &history, &direction, default_epsilon(&history)).unwrap();
        assert!(d.abs() < 1e-9, "d = {d}");
    }

    #[test]
    fn sensitivity_geometric_direction_decays_into_the_past() {
        let v = Direction::Geometric { alpha: 0.97 }.vector(4).unwrap();
        assert!((v[3] - 1.0).abs() < 1e-15);
        assert!((v[0] - 0.97f64.powi(3)).abs() < 1e-15);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sensitivity_rejects_unseeded_stochastic_predictors() {
        use std::sync::atomic::{AtomicU64, Ordering};
        struct Flaky(AtomicU64);
        impl Predictor for Flaky {
            fn target(&self) -> Target {
                Target::Quantile(0.9)
            }
            fn predict_next(&mut self, _history: &[f64]) -> Option<f64> {
                Some(self.0.fetch_add(1, Ordering::Relaxed) as f64)
            }
            fn reset(&mut self) {}
        }
        let mut p = Flaky(AtomicU64::new(0));
        let history = vec![0.0; 10];
        let err = sensitivity(&mut p, &history, &[1.0; 10], 1e-6).unwrap_err();
        assert!(matches!(err, Error::NotReproducible(_)));
    }

    #[test]
    fn sensitivity_validates_direction_and_epsilon() {
        let mut p = constant_predictor(0.0, Target::Quantile(0.9));
        let history = vec![0.0; 5];
        assert!(matches!(
            sensitivity(&mut p, &history, &[1.0; 4], 1e-6),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            sensitivity(&mut p, &history, &[1.0; 5], 0.0),
            Err(Error::InvalidParameter(_))
        ));
    }
}
