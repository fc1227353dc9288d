//! End-to-end run of the whole verification pipeline on synthetic data:
//! simulate → forecast → calibrate → test dependence → compare scores →
//! estimate tail risk, with artifacts round-tripped through their CSV
//! forms along the way. One fixed seed; every stage is deterministic.

use prequential::calibration::{lil_statistic, running_frequency, tail_summary};
use prequential::dependence::independence_test;
use prequential::predictors::{
    adaptive_predictor, nonsense_predictor, rolling_quantile_predictor, run_predictor,
    PredictionTrace,
};
use prequential::scoring::compare;
use prequential::series::{tail_fit, KappaGrid, ReturnSeries, TailSide};
use prequential::simlab::{sample_sv, SvSpec};
use prequential::tailrisk::{cvar_of, cvar_power_tail, cvar_truncated, var_of};

const BETA: f64 = 0.9;

#[test]
fn full_pipeline_on_stochastic_volatility_data() {
    let spec = SvSpec {
        length: 1500,
        seed: 21,
        ..SvSpec::default()
    };
    let data = sample_sv(&spec).unwrap();

    // Returns survive a CSV round trip before anything consumes them.
    let mut buf = Vec::new();
    data.returns.write_csv(&mut buf).unwrap();
    let series = ReturnSeries::read_csv(buf.as_slice()).unwrap();
    assert_eq!(series, data.returns);

    // Forecast: order-statistic base (2nd largest of 20) plus exceedance
    // feedback, aiming at the 90% quantile.
    let base = Box::new(rolling_quantile_predictor(20, 2).unwrap());
    let mut adaptive = adaptive_predictor(base, 1.2, BETA).unwrap();
    let trace = run_predictor(&mut adaptive, &series).unwrap();
    assert_eq!(
        trace.steps.first().unwrap().k,
        21,
        "20-step warm-up expected"
    );

    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    let trace = PredictionTrace::read_csv(buf.as_slice(), trace.target).unwrap();

    // Calibration: terminal exceedance frequency within two Bernoulli
    // standard deviations of the 10% target, and the iterated-logarithm
    // statistic comfortably inside its band.
    let freq = running_frequency(&trace).unwrap();
    let terminal = freq.terminal().unwrap();
    let n = trace.steps.len() as f64;
    let sd = (BETA * (1.0 - BETA) / n).sqrt();
    assert!(
        (terminal - (1.0 - BETA)).abs() <= 2.0 * sd,
        "terminal frequency {terminal} outside {} ± {}",
        1.0 - BETA,
        2.0 * sd
    );
    let freq_tail = tail_summary(&freq, 500).unwrap();
    assert!(
        freq_tail.min > 0.05 && freq_tail.max < 0.15,
        "late frequencies drifted"
    );

    let zeta = lil_statistic(&trace).unwrap().terminal().unwrap();
    assert!(zeta.abs() < 3.0, "zeta = {zeta}");

    // Independence of the hit sequence at 5%, with simulated critical
    // values for exactly this trace length.
    let hits: Vec<bool> = trace.steps.iter().map(|s| !s.exceeded).collect();
    let outcome = independence_test(&hits, BETA, 0.05, 20_000, 77).unwrap();
    assert!(!outcome.reject, "independence rejected: {outcome:?}");
    assert!(outcome.interval.0 <= outcome.theta_hat && outcome.theta_hat <= outcome.interval.1);

    // Score comparison against the nonsense benchmark that games the
    // frequency test: windowed tail-mean scores must prefer the adaptive
    // forecaster essentially everywhere.
    let mut nonsense = nonsense_predictor(-0.06, 0.06, BETA, 5).unwrap();
    let nonsense_trace = run_predictor(&mut nonsense, &series).unwrap();
    let duel = compare(&trace, &nonsense_trace, BETA, 500).unwrap();
    assert!(
        duel.preferred_fraction_a() >= 0.95,
        "adaptive preferred in only {:.1}% of windows",
        100.0 * duel.preferred_fraction_a()
    );

    // Tail risk on losses: the fitted power-law correction can only push
    // CVaR above the data-supported truncated tail mean.
    let losses: Vec<f64> = series.values().iter().map(|v| -v).collect();
    let fit = tail_fit(&losses, TailSide::Right, 0.05, &KappaGrid::default()).unwrap();
    assert!(fit.kappa >= 1.05 && fit.kappa <= 10.0 && fit.c1 <= fit.c2);

    let var = var_of(&losses, BETA).unwrap().value;
    let cvar = cvar_of(&losses, BETA).unwrap().value;
    assert!(cvar >= var);

    let mut sorted = losses.clone();
    sorted.sort_by(f64::total_cmp);
    let curve = |tau: f64| prequential::series::empirical_quantile(&sorted, tau).unwrap();
    let eta = 0.98;
    let trunc = cvar_truncated(curve, BETA, eta).unwrap().value;
    let power = cvar_power_tail(curve, curve(eta), fit.kappa, BETA, eta)
        .unwrap()
        .value;
    assert!(
        power > trunc,
        "power-law tail correction must add mass beyond eta"
    );
    assert!(power > var);
}

#[test]
fn pipeline_is_deterministic_from_the_seed() {
    let spec = SvSpec {
        length: 400,
        seed: 9,
        ..SvSpec::default()
    };
    let run = || {
        let data = sample_sv(&spec).unwrap();
        let base = Box::new(rolling_quantile_predictor(20, 2).unwrap());
        let mut adaptive = adaptive_predictor(base, 1.2, BETA).unwrap();
        let trace = run_predictor(&mut adaptive, &data.returns).unwrap();
        let hits: Vec<bool> = trace.steps.iter().map(|s| !s.exceeded).collect();
        let outcome = independence_test(&hits, BETA, 0.05, 5_000, 3).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        (buf, outcome.theta_hat, outcome.interval)
    };
    assert_eq!(run(), run());
}
