//! Predictor specification grammar: `name:key=value,key=value`.
//!
//! Supported predictors:
//!
//! - `rolling:window=20,rank=2` — the rank-th largest of the last `window`
//!   observations; its quantile target is 1 − rank/window.
//! - `adaptive:window=20,rank=2,varphi=1.2` — the rolling forecast plus
//!   exceedance feedback steering the predictor's own hit rate toward the
//!   `--beta` target.
//! - `nonsense:low=-0.06,high=0.06,seed=7` — the frequency-gaming
//!   benchmark: `high` with probability `--beta`, else `low`, by a seeded
//!   coin independent of the data.
//! - `constant:value=0.01` — fixed forecast at the `--beta` quantile
//!   target; `constant:value=0.0,target=mean` targets the mean instead.

use std::collections::HashMap;

use prequential::predictors::{
    adaptive_predictor, constant_predictor, nonsense_predictor, rolling_quantile_predictor,
    Predictor, Target,
};

use crate::failure::Failure;

pub fn parse_predictor(spec: &str, beta: f64) -> Result<Box<dyn Predictor>, Failure> {
    let (name, params) = match spec.split_once(':') {
        Some((name, rest)) => (name, parse_params(spec, rest)?),
        None => (spec, HashMap::new()),
    };
    let mut params = params;
    let predictor: Box<dyn Predictor> = match name {
        "rolling" => {
            let window = take(&mut params, spec, "window")?;
            let rank = take(&mut params, spec, "rank")?;
            Box::new(rolling_quantile_predictor(window, rank)?)
        }
        "adaptive" => {
            let window = take(&mut params, spec, "window")?;
            let rank = take(&mut params, spec, "rank")?;
            let varphi = take_or(&mut params, spec, "varphi", 1.2)?;
            let base = Box::new(rolling_quantile_predictor(window, rank)?);
            Box::new(adaptive_predictor(base, varphi, beta)?)
        }
        "nonsense" => {
            let low = take(&mut params, spec, "low")?;
            let high = take(&mut params, spec, "high")?;
            let seed = take(&mut params, spec, "seed")?;
            Box::new(nonsense_predictor(low, high, beta, seed)?)
        }
        "constant" => {
            let value: f64 = take(&mut params, spec, "value")?;
            let target = match params.remove("target").as_deref() {
                None => Target::Quantile(beta),
                Some("mean") => Target::Mean,
                Some(other) => {
                    let level: f64 = other.parse().map_err(|_| {
                        Failure::validation(format!(
                            "predictor {spec:?}: target must be \"mean\" or a quantile level, got {other:?}"
                        ))
                    })?;
                    Target::Quantile(level)
                }
            };
            Box::new(constant_predictor(value, target))
        }
        other => {
            return Err(Failure::validation(format!(
                "unknown predictor {other:?}; expected rolling, adaptive, nonsense or constant"
            )))
        }
    };
    if let Some(stray) = params.keys().next() {
        return Err(Failure::validation(format!(
            "predictor {spec:?}: unknown parameter {stray:?}"
        )));
    }
    Ok(predictor)
}

fn parse_params(spec: &str, rest: &str) -> Result<HashMap<String, String>, Failure> {
    let mut params = HashMap::new();
    for part in rest.split(',') {
        let Some((key, value)) = part.split_once('=') else {
            return Err(Failure::validation(format!(
                "predictor {spec:?}: expected key=value, got {part:?}"
            )));
        };
        if params
            .insert(key.trim().to_string(), value.trim().to_string())
            .is_some()
        {
            return Err(Failure::validation(format!(
                "predictor {spec:?}: duplicate parameter {key:?}"
            )));
        }
    }
    Ok(params)
}

fn take<T: std::str::FromStr>(
    params: &mut HashMap<String, String>,
    spec: &str,
    key: &str,
) -> Result<T, Failure> {
    let raw = params
        .remove(key)
        .ok_or_else(|| Failure::validation(format!("predictor {spec:?}: missing {key}=")))?;
    raw.parse()
        .map_err(|_| Failure::validation(format!("predictor {spec:?}: cannot parse {key}={raw:?}")))
}

fn take_or<T: std::str::FromStr>(
    params: &mut HashMap<String, String>,
    spec: &str,
    key: &str,
    fallback: T,
) -> Result<T, Failure> {
    match params.remove(key) {
        None => Ok(fallback),
        Some(raw) => raw.parse().map_err(|_| {
            Failure::validation(format!("predictor {spec:?}: cannot parse {key}={raw:?}"))
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_forms() {
        assert_eq!(
            parse_predictor("rolling:window=20,rank=2", 0.9)
                .unwrap()
                .target(),
            Target::Quantile(0.9)
        );
        assert_eq!(
            parse_predictor("adaptive:window=20,rank=1,varphi=1.2", 0.95)
                .unwrap()
                .target(),
            Target::Quantile(0.95)
        );
        assert_eq!(
            parse_predictor("nonsense:low=-0.06,high=0.06,seed=7", 0.9)
                .unwrap()
                .target(),
            Target::Quantile(0.9)
        );
        assert_eq!(
            parse_predictor("constant:value=0.5,target=mean", 0.9)
                .unwrap()
                .target(),
            Target::Mean
        );
    }

    #[test]
    fn rejects_malformed_specs() {
        for bad in [
            "unknown",
            "rolling",
            "rolling:window=20",
            "rolling:window=20,rank=two",
            "rolling:window=20,rank=2,extra=1",
            "nonsense:low=0.1,high=0.2",
            "adaptive:window=0,rank=1",
        ] {
            assert!(
                matches!(parse_predictor(bad, 0.9), Err(Failure::Validation(_))),
                "{bad} should be rejected"
            );
        }
    }
}
