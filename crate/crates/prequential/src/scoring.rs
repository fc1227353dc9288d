//! Consistent scoring functions and moving-window forecast comparison.
//!
//! Calibration alone cannot rank forecasters (a data-ignoring coin flip can
//! be calibrated); realized scores can. Every score here is consistent for
//! its functional: the true conditional quantile/expectile/mean minimizes
//! its expectation, so lower realized averages are evidence of a better
//! forecaster. Quantile forecasts are additionally scored with the
//! Rockafellar-Uryasev function [`ru_score`], whose expectation at the true
//! β-quantile is the conditional CVaR rather than an abstract score unit,
//! which makes score gaps interpretable in return space.

use serde::Serialize;

use crate::predictors::PredictionTrace;
use crate::{Error, Result};

/// Squared error (x − y)², consistent for the mean.
pub fn mean_score(x: f64, y: f64) -> f64 {
    (x - y) * (x - y)
}

/// Generalized piecewise-linear quantile score
///
/// S(x, y) = (1{x ≥ y} − β)(g(x) − g(y))
///
/// consistent for the β-quantile for any strictly increasing g. `g = |t| t`
/// recovers the familiar pinball loss up to scale.
pub fn quantile_score(x: f64, y: f64, beta: f64, g: impl Fn(f64) -> f64) -> f64 {
    let indicator = if x >= y { 1.0 } else { 0.0 };
    (indicator - beta) * (g(x) - g(y))
}

/// Rockafellar-Uryasev score S*(x, y) = x + (y − x)⁺/(1−β).
///
/// Its expectation under F is the functional x + E[(Y−x)⁺]/(1−β), which is
/// minimized at the β-quantile with minimum value CVaR_β(F). Equal to the
/// quantile score with g(t) = t/(1−β) up to the forecast-independent term
/// −y (see the pointwise identity test below).
pub fn ru_score(x: f64, y: f64, beta: f64) -> f64 {
    x + (y - x).max(0.0) / (1.0 - beta)
}

/// Asymmetric squared error (τ·1{x < y} + (1−τ)·1{x ≥ y})(y − x)²,
/// consistent for the τ-expectile.
pub fn expectile_score(x: f64, y: f64, tau: f64) -> f64 {
    let weight = if x < y { tau } else { 1.0 - tau };
    weight * (y - x) * (y - x)
}

/// Per-step Rockafellar-Uryasev scores of a forecast trace together with
/// their moving-window averages x_j = (1/W) Σ_{k=j}^{j+W−1} s_k.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreSeries {
    pub scores: Vec<f64>,
    pub window: usize,
    pub window_averages: Vec<f64>,
}

fn window_averages(scores: &[f64], window: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(scores.len() + 1);
    prefix.push(0.0);
    for &s in scores {
        prefix.push(prefix.last().unwrap() + s);
    }
    (0..=scores.len() - window)
        .map(|j| (prefix[j + window] - prefix[j]) / window as f64)
        .collect()
}

/// Scores one trace with [`ru_score`] at level `beta` over a moving window.
pub fn score_series(trace: &PredictionTrace, beta: f64, window: usize) -> Result<ScoreSeries> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid_param(format!("beta {beta} not in (0, 1)")));
    }
    if window == 0 || window > trace.len() {
        return Err(Error::invalid_param(format!(
            "window {window} must lie in 1..={}",
            trace.len()
        )));
    }
    let scores: Vec<f64> = trace
        .steps
        .iter()
        .map(|s| ru_score(s.prediction, s.realized, beta))
        .collect();
    let averages = window_averages(&scores, window);
    Ok(ScoreSeries {
        scores,
        window,
        window_averages: averages,
    })
}

/// Which forecaster a window prefers (smaller average score wins).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Preference {
    A,
    B,
    Tie,
}

/// Window-by-window score comparison of two forecasters on the same data.
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub a: ScoreSeries,
    pub b: ScoreSeries,
    pub preferences: Vec<Preference>,
    /// 1-based series position of the first compared step.
    pub first_k: usize,
}

impl Comparison {
    /// Fraction of windows preferring A.
    pub fn preferred_fraction_a(&self) -> f64 {
        let a = self
            .preferences
            .iter()
            .filter(|p| **p == Preference::A)
            .count();
        a as f64 / self.preferences.len() as f64
    }
}

/// Compares two forecast traces by moving-window average RU score at level
/// `beta`.
///
/// The traces must come from the same realized series; they are aligned on
/// their overlapping step range (predictors with different warm-ups produce
/// traces of different spans) and any disagreement in realized values on
/// the overlap is a hard error. Each window prefers the forecaster with
/// the strictly smaller average score.
pub fn compare(
    trace_a: &PredictionTrace,
    trace_b: &PredictionTrace,
    beta: f64,
    window: usize,
) -> Result<Comparison> {
    let (a0, a1) = match (trace_a.steps.first(), trace_a.steps.last()) {
        (Some(f), Some(l)) => (f.k, l.k),
        _ => return Err(Error::insufficient("trace A is empty")),
    };
    let (b0, b1) = match (trace_b.steps.first(), trace_b.steps.last()) {
        (Some(f), Some(l)) => (f.k, l.k),
        _ => return Err(Error::insufficient("trace B is empty")),
    };
    let lo = a0.max(b0);
    let hi = a1.min(b1);
    if lo > hi {
        return Err(Error::Misaligned(format!(
            "traces cover steps {a0}..={a1} and {b0}..={b1}, which do not overlap"
        )));
    }
    let slice_a = &trace_a.steps[lo - a0..=hi - a0];
    let slice_b = &trace_b.steps[lo - b0..=hi - b0];
    for (x, y) in slice_a.iter().zip(slice_b) {
        if x.k != y.k || x.realized != y.realized {
            return Err(Error::Misaligned(format!(
                "realized values disagree at step {}: {} vs {}",
                x.k, x.realized, y.realized
            )));
        }
    }
    let restrict = |steps: &[crate::predictors::TraceStep], target| PredictionTrace {
        target,
        steps: steps.to_vec(),
    };
    let a = score_series(&restrict(slice_a, trace_a.target), beta, window)?;
    let b = score_series(&restrict(slice_b, trace_b.target), beta, window)?;
    let preferences = a
        .window_averages
        .iter()
        .zip(&b.window_averages)
        .map(|(x, y)| {
            if x < y {
                Preference::A
            } else if y < x {
                Preference::B
            } else {
                Preference::Tie
            }
        })
        .collect();
    Ok(Comparison {
        a,
        b,
        preferences,
        first_k: lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::{Target, TraceStep};

    #[test]
    fn quantile_score_examples() {
        // Symmetric level: half the absolute error for the identity g.
        for (x, y) in [(2.0, -1.0), (-0.5, 0.25), (3.0, 3.0)] {
            assert!((quantile_score(x, y, 0.5, |t| t) - 0.5 * (x - y).abs()).abs() < 1e-15);
        }
        assert!((quantile_score(1.0, 0.0, 0.9, |t| t) - 0.1).abs() < 1e-15);
        assert_eq!(quantile_score(0.7, 0.7, 0.3, |t| t), 0.0);
    }

    #[test]
    fn quantile_score_is_nonnegative_for_increasing_g() {
        for i in -10..=10 {
            for j in -10..=10 {
                let (x, y) = (i as f64 / 3.0, j as f64 / 3.0);
                for beta in [0.1, 0.5, 0.9] {
                    assert!(quantile_score(x, y, beta, |t| t) >= 0.0);
                    assert!(quantile_score(x, y, beta, |t| t / (1.0 - beta)) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn ru_score_examples() {
        assert!((ru_score(0.0, 1.0, 0.9) - 10.0).abs() < 1e-12);
        assert_eq!(ru_score(2.0, 1.5, 0.9), 2.0);
        assert_eq!(ru_score(-1.0, -1.0, 0.75), -1.0);
    }

    #[test]
    fn quantile_and_ru_scores_differ_by_minus_y() {
        // With g(t) = t/(1−β) the quantile score equals S*(x,y) − y for
        // every (x, y): the gap is forecast-independent, so both scores
        // rank forecasters identically.
        for i in -12..=12 {
            for j in -12..=12 {
                let (x, y) = (i as f64 / 4.0, j as f64 / 4.0);
                for beta in [0.6, 0.9, 0.95] {
                    let q = quantile_score(x, y, beta, |t| t / (1.0 - beta));
                    let star = ru_score(x, y, beta);
                    assert!(
                        (q - (star - y)).abs() < 1e-12,
                        "x={x} y={y} beta={beta}: {q} vs {}",
                        star - y
                    );
                }
            }
        }
    }

    #[test]
    fn expectile_score_halves_squared_error_at_tau_half() {
        for (x, y) in [(1.0, 4.0), (-2.0, 1.0), (0.3, 0.3)] {
            assert!((expectile_score(x, y, 0.5) - 0.5 * mean_score(x, y)).abs() < 1e-15);
        }
        // Overprediction is cheap and underprediction dear when tau > 1/2.
        assert!(expectile_score(0.0, 1.0, 0.9) > expectile_score(1.0, 0.0, 0.9));
    }

    fn trace_of(predictions: &[f64], realized: &[f64], start_k: usize) -> PredictionTrace {
        PredictionTrace {
            target: Target::Quantile(0.9),
            steps: predictions
                .iter()
                .zip(realized)
                .enumerate()
                .map(|(i, (&p, &r))| TraceStep {
                    k: start_k + i,
                    prediction: p,
                    realized: r,
                    exceeded: r > p,
                })
                .collect(),
        }
    }

    #[test]
    fn window_averages_match_naive_double_loop() {
        let preds = [0.1, 0.2, 0.0, -0.3, 0.5, 0.4, 0.2];
        let reals = [0.3, -0.2, 0.1, 0.0, 0.6, -0.4, 0.3];
        let trace = trace_of(&preds, &reals, 1);
        let s = score_series(&trace, 0.9, 3).unwrap();
        assert_eq!(s.window_averages.len(), preds.len() - 3 + 1);
        for (j, &avg) in s.window_averages.iter().enumerate() {
            let naive: f64 = s.scores[j..j + 3].iter().sum::<f64>() / 3.0;
            assert!((avg - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn compare_is_antisymmetric() {
        let reals = [0.3, -0.2, 0.1, 0.0, 0.6, -0.4, 0.3, 0.1];
        let pa = [0.1, 0.2, 0.0, -0.3, 0.5, 0.4, 0.2, 0.0];
        let pb = [0.4, -0.1, 0.2, 0.1, 0.3, 0.0, 0.1, 0.2];
        let a = trace_of(&pa, &reals, 1);
        let b = trace_of(&pb, &reals, 1);
        let fwd = compare(&a, &b, 0.9, 4).unwrap();
        let rev = compare(&b, &a, 0.9, 4).unwrap();
        for (x, y) in fwd.preferences.iter().zip(&rev.preferences) {
            let flipped = match y {
                Preference::A => Preference::B,
                Preference::B => Preference::A,
                Preference::Tie => Preference::Tie,
            };
            assert_eq!(*x, flipped);
        }
    }

    #[test]
    fn compare_on_identical_traces_is_all_ties() {
        let reals = [0.3, -0.2, 0.1, 0.0, 0.6];
        let t = trace_of(&[0.1, 0.2, 0.0, -0.3, 0.5], &reals, 1);
        let c = compare(&t, &t.clone(), 0.9, 2).unwrap();
        assert!(c.preferences.iter().all(|p| *p == Preference::Tie));
    }

    #[test]
    fn compare_aligns_different_warmups_on_overlap() {
        let reals_full = [0.3, -0.2, 0.1, 0.0, 0.6, -0.4];
        let a = trace_of(&[0.1; 6], &reals_full, 1);
        // B starts two steps later, as if it had a longer warm-up.
        let b = trace_of(&[0.2; 4], &reals_full[2..], 3);
        let c = compare(&a, &b, 0.9, 2).unwrap();
        assert_eq!(c.first_k, 3);
        assert_eq!(c.a.scores.len(), 4);
    }

    #[test]
    fn compare_rejects_disagreeing_realizations() {
        let a = trace_of(&[0.1; 4], &[0.3, -0.2, 0.1, 0.0], 1);
        let b = trace_of(&[0.1; 4], &[0.3, -0.2, 0.7, 0.0], 1);
        assert!(matches!(compare(&a, &b, 0.9, 2), Err(Error::Misaligned(_))));
        let far = trace_of(&[0.1; 4], &[0.3, -0.2, 0.1, 0.0], 100);
        assert!(matches!(
            compare(&a, &far, 0.9, 2),
            Err(Error::Misaligned(_))
        ));
    }

    #[test]
    fn score_series_validates_window() {
        let t = trace_of(&[0.1; 4], &[0.3, -0.2, 0.1, 0.0], 1);
        assert!(matches!(
            score_series(&t, 0.9, 0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            score_series(&t, 0.9, 5),
            Err(Error::InvalidParameter(_))
        ));
    }
}
