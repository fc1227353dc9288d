//! Exceedance independence testing against a one-parameter Markov
//! alternative.
//!
//! A calibrated β-quantile forecaster leaves behind hit flags
//! a_k = 1{Y_k ≤ q_k} that should look i.i.d. Bernoulli(β). The alternative
//! family keeps that marginal but lets hits cluster: a two-state chain with
//!
//! P[a_{k+1}=1 | a_k=0] = θ,   P[a_{k+1}=1 | a_k=1] = θ' = 1 − θ(1−β)/β.
//!
//! θ = β is exactly the i.i.d. null; θ < β means misses are followed by
//! more misses (volatility clustering the forecaster failed to absorb);
//! θ > β means hits and misses alternate too eagerly. The maximum
//! likelihood estimator [`theta_hat`] depends only on the frequencies of
//! adjacent 00 and 11 pairs and has a closed form; its finite-sample null
//! distribution is simulated to obtain confidence intervals
//! ([`ci_endpoints`]), which makes no appeal to asymptotics and is honest
//! for the short windows used in practice.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::rng::{stream_rng, u01};
use crate::series::ceil_index;
use crate::{Error, Result};

/// Counts of adjacent flag pairs: `n1` = 00, `n2` = 11, `n3` = 01, `n4` = 10.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PairCounts {
    pub n1: u64,
    pub n2: u64,
    pub n3: u64,
    pub n4: u64,
}

impl PairCounts {
    /// Total number of adjacent pairs (sequence length − 1).
    pub fn total(&self) -> u64 {
        self.n1 + self.n2 + self.n3 + self.n4
    }

    pub fn n1_bar(&self) -> f64 {
        self.n1 as f64 / self.total() as f64
    }

    pub fn n2_bar(&self) -> f64 {
        self.n2 as f64 / self.total() as f64
    }
}

/// Tallies adjacent pairs of a binary sequence. Needs at least two flags;
/// a length-m sequence yields m−1 pairs.
pub fn pair_counts(flags: &[bool]) -> Result<PairCounts> {
    if flags.len() < 2 {
        return Err(Error::insufficient(format!(
            "need at least 2 flags for pair counts, got {}",
            flags.len()
        )));
    }
    let mut counts = PairCounts {
        n1: 0,
        n2: 0,
        n3: 0,
        n4: 0,
    };
    for w in flags.windows(2) {
        match (w[0], w[1]) {
            (false, false) => counts.n1 += 1,
            (true, true) => counts.n2 += 1,
            (false, true) => counts.n3 += 1,
            (true, false) => counts.n4 += 1,
        }
    }
    Ok(counts)
}

fn check_beta(beta: f64) -> Result<f64> {
    if !(0.5..1.0).contains(&beta) {
        return Err(Error::invalid_param(format!(
            "beta {beta} not in [0.5, 1); flip the flags for levels below 1/2"
        )));
    }
    Ok((1.0 - beta) / beta)
}

/// Hit-after-hit probability θ' = 1 − θ(1−β)/β that keeps the chain's
/// stationary hit rate at β.
pub fn theta_prime(theta: f64, beta: f64) -> Result<f64> {
    let f = check_beta(beta)?;
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid_param(format!("theta {theta} not in [0, 1]")));
    }
    Ok(1.0 - f * theta)
}

fn xlogy(count: u64, y: f64) -> f64 {
    if count == 0 {
        0.0
    } else if y > 0.0 {
        count as f64 * y.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// θ-dependent part of the chain log-likelihood:
///
/// L(θ) = n1·ln(1−θ) + n2·ln(1−θ(1−β)/β) + (n−n1−n2)·ln θ.
///
/// At θ ∈ {0, 1} the usual limit conventions apply (0·ln 0 = 0, a positive
/// count against a vanishing probability gives −∞).
pub fn log_likelihood(theta: f64, counts: &PairCounts, beta: f64) -> Result<f64> {
    let f = check_beta(beta)?;
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid_param(format!("theta {theta} not in [0, 1]")));
    }
    let transitions = counts.n3 + counts.n4;
    Ok(xlogy(counts.n1, 1.0 - theta)
        + xlogy(counts.n2, 1.0 - f * theta)
        + xlogy(transitions, theta))
}

/// Closed-form maximizer of [`log_likelihood`] over θ ∈ [0, 1], as a
/// function of the pair frequencies n̄1 = n1/n and n̄2 = n2/n.
///
/// With f = (1−β)/β, c1 = 1 − f·n̄1 − n̄2 and c2 = 1 − n̄1 − n̄2, the score
/// is the smaller root of f·θ² − (c1+f)·θ + c2, computed here in the
/// cancellation-free form 2c2 / (c1 + f + √((f−c1)² + 4f(c1−c2))). The
/// discriminant is a sum of a square and a non-negative product, so a real
/// root always exists; degenerate all-zero or all-one samples give c2 = 0
/// and hence θ̂ = 0 without special-casing.
pub fn theta_hat(n1_bar: f64, n2_bar: f64, beta: f64) -> Result<f64> {
    let f = check_beta(beta)?;
    if !(n1_bar >= 0.0 && n2_bar >= 0.0 && n1_bar + n2_bar <= 1.0 + 1e-12) {
        return Err(Error::invalid_param(format!(
            "pair frequencies ({n1_bar}, {n2_bar}) outside the simplex"
        )));
    }
    let c1 = 1.0 - f * n1_bar - n2_bar;
    let c2 = (1.0 - n1_bar - n2_bar).max(0.0);
    let disc = (f - c1) * (f - c1) + 4.0 * f * (c1 - c2);
    let theta = 2.0 * c2 / (c1 + f + disc.max(0.0).sqrt());
    Ok(theta.clamp(0.0, 1.0))
}

/// Stationary distribution of adjacent pairs (00, 11, 01, 10) under the
/// chain (θ, β):
///
/// ((1−θ)(1−β), β−θ(1−β), θ(1−β), θ(1−β)).
///
/// Only defined for θ strictly inside (0, 1); at the boundaries the chain
/// is not irreducible and has no unique stationary law.
pub fn stationary_distribution(theta: f64, beta: f64) -> Result<[f64; 4]> {
    check_beta(beta)?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::invalid_param(format!(
            "theta {theta} is on the boundary; the chain is not irreducible"
        )));
    }
    let q = 1.0 - beta;
    Ok([(1.0 - theta) * q, beta - theta * q, theta * q, theta * q])
}

/// θ̂ over `reps` simulated i.i.d. Bernoulli(β) sequences of the given
/// length. Each replication draws from its own counter-derived stream, so
/// the output is identical for any worker count.
fn simulated_theta_hats(beta: f64, length: usize, reps: usize, seed: u64) -> Vec<f64> {
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let mut prev = u01(&mut rng) < beta;
            let (mut n1, mut n2) = (0u64, 0u64);
            for _ in 1..length {
                let cur = u01(&mut rng) < beta;
                n1 += u64::from(!prev & !cur);
                n2 += u64::from(prev & cur);
                prev = cur;
            }
            let n = (length - 1) as f64;
            theta_hat(n1 as f64 / n, n2 as f64 / n, beta)
                .expect("simulated frequencies are in domain")
        })
        .collect()
}

fn check_mc_params(beta: f64, length: usize, gamma: f64, reps: usize) -> Result<()> {
    check_beta(beta)?;
    if length < 2 {
        return Err(Error::invalid_param(format!(
            "length {length} must be at least 2"
        )));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid_param(format!("gamma {gamma} not in (0, 1)")));
    }
    if reps == 0 {
        return Err(Error::invalid_param("reps must be positive"));
    }
    Ok(())
}

/// Equal-tailed finite-sample acceptance interval [t1, t2] for θ̂ under the
/// i.i.d. null: the γ/2 and 1−γ/2 empirical quantiles of the simulated
/// null distribution for this data length. t2 is frequently exactly 1.0 at
/// short lengths and high β, where the null itself often produces a sample
/// without a single 00 pair; the test is then effectively one-sided.
pub fn ci_endpoints(
    beta: f64,
    length: usize,
    gamma: f64,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_mc_params(beta, length, gamma, reps)?;
    let mut hats = simulated_theta_hats(beta, length, reps, seed);
    hats.sort_by(f64::total_cmp);
    Ok(quantile_pair(&hats, gamma))
}

fn quantile_pair(sorted: &[f64], gamma: f64) -> (f64, f64) {
    let n = sorted.len();
    (
        sorted[ceil_index(gamma / 2.0, n) - 1],
        sorted[ceil_index(1.0 - gamma / 2.0, n) - 1],
    )
}

/// One row of a [`ci_table`]: endpoints per data length at a fixed γ.
#[derive(Debug, Clone, Serialize)]
pub struct CiRow {
    pub gamma: f64,
    pub endpoints: Vec<(f64, f64)>,
}

/// Acceptance intervals for several confidence levels and data lengths.
#[derive(Debug, Clone, Serialize)]
pub struct CiTable {
    pub beta: f64,
    pub lengths: Vec<usize>,
    pub rows: Vec<CiRow>,
}

impl CiTable {
    /// Writes `gamma,t1_<len>,t2_<len>,...` CSV.
    pub fn write_csv(&self, mut writer: impl Write) -> Result<()> {
        write!(writer, "gamma")?;
        for len in &self.lengths {
            write!(writer, ",t1_{len},t2_{len}")?;
        }
        writeln!(writer)?;
        for row in &self.rows {
            write!(writer, "{}", row.gamma)?;
            for (t1, t2) in &row.endpoints {
                write!(writer, ",{t1:.4},{t2:.4}")?;
            }
            writeln!(writer)?;
        }
        Ok(())
    }
}

/// Computes [`ci_endpoints`] for every (γ, length) combination, sharing one
/// simulated null sample per length. Identical to calling `ci_endpoints`
/// for each cell with the same seed, just without re-simulating.
pub fn ci_table(
    beta: f64,
    lengths: &[usize],
    gammas: &[f64],
    reps: usize,
    seed: u64,
) -> Result<CiTable> {
    if lengths.is_empty() || gammas.is_empty() {
        return Err(Error::invalid_param(
            "ci_table needs at least one length and gamma",
        ));
    }
    for &g in gammas {
        check_mc_params(beta, *lengths.iter().min().unwrap(), g, reps)?;
    }
    let mut per_length = Vec::with_capacity(lengths.len());
    for &len in lengths {
        let mut hats = simulated_theta_hats(beta, len, reps, seed);
        hats.sort_by(f64::total_cmp);
        per_length.push(hats);
    }
    let rows = gammas
        .iter()
        .map(|&gamma| CiRow {
            gamma,
            endpoints: per_length
                .iter()
                .map(|hats| quantile_pair(hats, gamma))
                .collect(),
        })
        .collect();
    Ok(CiTable {
        beta,
        lengths: lengths.to_vec(),
        rows,
    })
}

/// Outcome of the exceedance independence test.
#[derive(Debug, Clone, Serialize)]
pub struct DependenceResult {
    pub beta: f64,
    pub gamma: f64,
    pub n1_bar: f64,
    pub n2_bar: f64,
    pub theta_hat: f64,
    pub interval: (f64, f64),
    pub reject: bool,
    /// The simulated upper endpoint hit 1.0, so only clustering (θ̂ below
    /// t1) can be detected at this length and level.
    pub one_sided: bool,
}

/// Tests a hit/miss flag sequence for the i.i.d. null against the Markov
/// family: estimate θ̂ from the pair frequencies and reject when it falls
/// outside the simulated null interval.
///
/// For β below 1/2 the roles of hits and misses are swapped internally
/// (flags flipped, β ↦ 1−β), which leaves the family invariant.
pub fn independence_test(
    flags: &[bool],
    beta: f64,
    gamma: f64,
    reps: usize,
    seed: u64,
) -> Result<DependenceResult> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid_param(format!("beta {beta} not in (0, 1)")));
    }
    let flipped: Vec<bool>;
    let (eff_flags, eff_beta) = if beta < 0.5 {
        flipped = flags.iter().map(|f| !f).collect();
        (flipped.as_slice(), 1.0 - beta)
    } else {
        (flags, beta)
    };
    let counts = pair_counts(eff_flags)?;
    let hat = theta_hat(counts.n1_bar(), counts.n2_bar(), eff_beta)?;
    let (t1, t2) = ci_endpoints(eff_beta, eff_flags.len(), gamma, reps, seed)?;
    Ok(DependenceResult {
        beta,
        gamma,
        n1_bar: counts.n1_bar(),
        n2_bar: counts.n2_bar(),
        theta_hat: hat,
        interval: (t1, t2),
        reject: hat < t1 || hat > t2,
        one_sided: t2 >= 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_counts_tallies_adjacent_pairs() {
        let c = pair_counts(&[false, true, true, false]).unwrap();
        assert_eq!(
            c,
            PairCounts {
                n1: 0,
                n2: 1,
                n3: 1,
                n4: 1
            }
        );
        assert_eq!(c.total(), 3);
        assert!(matches!(
            pair_counts(&[true]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn transitions_alternate_so_n3_n4_differ_by_at_most_one() {
        let patterns: [&[bool]; 4] = [
            &[true, false, false, true, true, false],
            &[false, false, false],
            &[true, false, true, false, true],
            &[false, true, true, true, false, false, true],
        ];
        for flags in patterns {
            let c = pair_counts(flags).unwrap();
            assert!(c.n3.abs_diff(c.n4) <= 1, "{flags:?}");
        }
    }

    #[test]
    fn theta_prime_examples() {
        assert_eq!(theta_prime(0.0, 0.9).unwrap(), 1.0);
        assert!((theta_prime(0.9, 0.9).unwrap() - 0.9).abs() < 1e-15);
        // Decreasing in theta, and still a probability at the extreme.
        let lo = theta_prime(1.0, 0.6).unwrap();
        assert!((0.0..=1.0).contains(&lo));
        assert!(matches!(
            theta_prime(0.5, 0.3),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn log_likelihood_boundary_conventions() {
        let no_transitions = PairCounts {
            n1: 5,
            n2: 5,
            n3: 0,
            n4: 0,
        };
        assert_eq!(log_likelihood(0.0, &no_transitions, 0.9).unwrap(), 0.0);
        let with_zeros = PairCounts {
            n1: 3,
            n2: 4,
            n3: 2,
            n4: 1,
        };
        assert_eq!(
            log_likelihood(1.0, &with_zeros, 0.9).unwrap(),
            f64::NEG_INFINITY
        );
        assert_eq!(
            log_likelihood(0.0, &with_zeros, 0.9).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(log_likelihood(0.5, &with_zeros, 0.9).unwrap().is_finite());
    }

    #[test]
    fn theta_hat_recovers_null_frequencies_exactly() {
        // Stationary i.i.d. frequencies n̄1 = (1−β)², n̄2 = β² must map back
        // to θ̂ = β.
        for beta in [0.5, 0.6, 0.75, 0.9, 0.95, 0.99] {
            let hat = theta_hat((1.0 - beta) * (1.0 - beta), beta * beta, beta).unwrap();
            assert!((hat - beta).abs() < 1e-12, "beta = {beta}, hat = {hat}");
        }
    }

    #[test]
    fn theta_hat_degenerate_and_missing_zero_pairs() {
        // All-zero or all-one samples: no transitions, θ̂ = 0.
        assert_eq!(theta_hat(1.0, 0.0, 0.9).unwrap(), 0.0);
        assert_eq!(theta_hat(0.0, 1.0, 0.9).unwrap(), 0.0);
        // No 00 pairs but plenty of transitions: the formula stays finite
        // and caps at 1.
        assert!((theta_hat(0.0, 0.8, 0.9).unwrap() - 1.0).abs() < 1e-12);
        // Perfectly alternating flags: nothing but transitions.
        assert!((theta_hat(0.0, 0.0, 0.9).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            theta_hat(0.7, 0.7, 0.9),
            Err(Error::InvalidParameter(_))
        ));
    }

    /// Printed textbook form of the estimator, kept as an independent
    /// cross-check of the stable implementation.
    fn theta_hat_display_form(n1_bar: f64, n2_bar: f64, beta: f64) -> f64 {
        let f = (1.0 - beta) / beta;
        let c1 = 1.0 - f * n1_bar - n2_bar;
        let c2 = 1.0 - n1_bar - n2_bar;
        let disc = (f - c1) * (f - c1) + 4.0 * f * (c1 - c2);
        (1.0 / (2.0 * f)) * (1.0 - n2_bar + f * (1.0 - n1_bar) - disc.sqrt())
    }

    #[test]
    fn theta_hat_agrees_with_display_form() {
        for i in 0..40 {
            for j in 0..40 {
                let n1 = i as f64 / 50.0;
                let n2 = j as f64 / 50.0;
                if n1 + n2 > 1.0 {
                    continue;
                }
                for beta in [0.55, 0.7, 0.9, 0.95] {
                    let stable = theta_hat(n1, n2, beta).unwrap();
                    let display = theta_hat_display_form(n1, n2, beta);
                    assert!(
                        (stable - display).abs() < 1e-9,
                        "n1={n1} n2={n2} beta={beta}: {stable} vs {display}"
                    );
                }
            }
        }
    }

    #[test]
    fn theta_hat_maximizes_likelihood_on_coarse_grid() {
        let cases = [
            (
                PairCounts {
                    n1: 12,
                    n2: 160,
                    n3: 14,
                    n4: 13,
                },
                0.9,
            ),
            (
                PairCounts {
                    n1: 4,
                    n2: 420,
                    n3: 38,
                    n4: 37,
                },
                0.95,
            ),
            (
                PairCounts {
                    n1: 60,
                    n2: 90,
                    n3: 25,
                    n4: 25,
                },
                0.6,
            ),
        ];
        for (counts, beta) in cases {
            let n = counts.total() as f64;
            let hat = theta_hat(counts.n1 as f64 / n, counts.n2 as f64 / n, beta).unwrap();
            let mut best = (f64::NEG_INFINITY, 0.0);
            for i in 1..10_000 {
                let theta = i as f64 / 10_000.0;
                let ll = log_likelihood(theta, &counts, beta).unwrap();
                if ll > best.0 {
                    best = (ll, theta);
                }
            }
            assert!(
                (hat - best.1).abs() < 2e-4,
                "hat = {hat}, grid = {}",
                best.1
            );
        }
    }

    #[test]
    fn stationary_distribution_values_and_boundaries() {
        let m = stationary_distribution(0.9, 0.9).unwrap();
        let expect = [0.01, 0.81, 0.09, 0.09];
        for (a, b) in m.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let m = stationary_distribution(0.5, 0.9).unwrap();
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(stationary_distribution(0.0, 0.9).is_err());
        assert!(stationary_distribution(1.0, 0.9).is_err());
    }

    #[test]
    fn ci_endpoints_are_deterministic_and_nested_in_gamma() {
        let a = ci_endpoints(0.9, 250, 0.1, 4000, 7).unwrap();
        let b = ci_endpoints(0.9, 250, 0.1, 4000, 7).unwrap();
        assert_eq!(a, b);
        let narrow = ci_endpoints(0.9, 250, 0.5, 4000, 7).unwrap();
        assert!(a.0 <= narrow.0 && narrow.1 <= a.1);
        assert!(narrow.0 <= narrow.1);
    }

    #[test]
    fn ci_table_matches_individual_endpoint_calls() {
        let table = ci_table(0.9, &[100, 250], &[0.1, 0.5], 2000, 99).unwrap();
        for (row, &gamma) in table.rows.iter().zip(&[0.1, 0.5]) {
            for (cell, &len) in row.endpoints.iter().zip(&[100usize, 250]) {
                let single = ci_endpoints(0.9, len, gamma, 2000, 99).unwrap();
                assert_eq!(*cell, single, "gamma={gamma} len={len}");
            }
        }
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("gamma,t1_100,t2_100,t1_250,t2_250\n"));
    }

    #[test]
    fn independence_test_flips_low_beta() {
        let flags: Vec<bool> = (0..300).map(|i| (i * 13 + i / 7) % 10 == 0).collect();
        let flipped: Vec<bool> = flags.iter().map(|f| !f).collect();
        let low = independence_test(&flags, 0.1, 0.05, 2000, 5).unwrap();
        let high = independence_test(&flipped, 0.9, 0.05, 2000, 5).unwrap();
        assert_eq!(low.theta_hat, high.theta_hat);
        assert_eq!(low.reject, high.reject);
        assert_eq!(low.interval, high.interval);
        assert_eq!(low.beta, 0.1);
    }
}
