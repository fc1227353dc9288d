//! Price and return series, empirical quantiles, and power-law tail fits.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Ordered price observations. Dates are strictly increasing and every
/// price is strictly positive; construction enforces both.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    prices: Vec<f64>,
}

impl PriceSeries {
    /// Builds a series from raw observations. Rows may arrive in any order;
    /// they are sorted by date. Duplicate dates and non-positive prices are
    /// rejected.
    pub fn new(mut observations: Vec<(NaiveDate, f64)>) -> Result<Self> {
        observations.sort_by_key(|(d, _)| *d);
        let mut dates = Vec::with_capacity(observations.len());
        let mut prices = Vec::with_capacity(observations.len());
        for (row, (date, price)) in observations.into_iter().enumerate() {
            if !(price > 0.0) || !price.is_finite() {
                return Err(Error::InvalidData(format!(
                    "non-positive price {price} at {date} (row {} after sorting)",
                    row + 1
                )));
            }
            if dates.last() == Some(&date) {
                return Err(Error::InvalidData(format!("duplicate date {date}")));
            }
            dates.push(date);
            prices.push(price);
        }
        Ok(PriceSeries { dates, prices })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }
}

/// Column mapping for price CSV files. Defaults to `date,price` with a
/// comma delimiter; ISO dates (`YYYY-MM-DD`) are expected either way.
#[derive(Debug, Clone)]
pub struct CsvFormat {
    pub delimiter: u8,
    pub date_column: String,
    pub price_column: String,
}

impl Default for CsvFormat {
    fn default() -> Self {
        CsvFormat {
            delimiter: b',',
            date_column: "date".to_string(),
            price_column: "price".to_string(),
        }
    }
}

/// Reads a price CSV from `path`. See [`read_prices`] for the format rules.
pub fn load_prices(path: impl AsRef<Path>, format: &CsvFormat) -> Result<PriceSeries> {
    let file = std::fs::File::open(path)?;
    read_prices(file, format)
}

/// Reads a price CSV from any reader. The header row must contain the two
/// mapped columns; extra columns are ignored. Parse failures report the
/// 1-based line number (header included).
pub fn read_prices(reader: impl Read, format: &CsvFormat) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
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
    let date_idx = col(&format.date_column)?;
    let price_idx = col(&format.price_column)?;

    let mut observations = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |idx: usize| {
            record.get(idx).ok_or_else(|| Error::Parse {
                line,
                message: format!("row has only {} fields", record.len()),
            })
        };
        let date =
            NaiveDate::parse_from_str(field(date_idx)?, "%Y-%m-%d").map_err(|e| Error::Parse {
                line,
                message: format!("bad date: {e}"),
            })?;
        let price: f64 = field(price_idx)?.parse().map_err(|e| Error::Parse {
            line,
            message: format!("bad price: {e}"),
        })?;
        if !(price > 0.0) || !price.is_finite() {
            return Err(Error::InvalidData(format!(
                "non-positive price {price} at line {line}"
            )));
        }
        observations.push((date, price));
    }
    PriceSeries::new(observations)
}

/// One dated return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnObservation {
    pub date: NaiveDate,
    #[serde(rename = "return")]
    pub value: f64,
}

/// Ordered return observations, the common currency of the crate: series
/// loading produces one, predictors consume one, the simulation lab emits
/// synthetic ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub observations: Vec<ReturnObservation>,
}

impl ReturnSeries {
    pub fn from_parts(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::InvalidData(format!(
                "{} dates for {} values",
                dates.len(),
                values.len()
            )));
        }
        Ok(ReturnSeries {
            observations: dates
                .into_iter()
                .zip(values)
                .map(|(date, value)| ReturnObservation { date, value })
                .collect(),
        })
    }

    /// Wraps bare values with synthetic weekly dates (Fridays from
    /// 2000-01-07). Used for simulated data where the calendar is
    /// meaningless but the interfaces want dates.
    pub fn synthetic_weekly(values: Vec<f64>) -> Self {
        let start = NaiveDate::from_ymd_opt(2000, 1, 7).unwrap();
        ReturnSeries {
            observations: values
                .into_iter()
                .enumerate()
                .map(|(i, value)| ReturnObservation {
                    date: start + chrono::Days::new(7 * i as u64),
                    value,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.value).collect()
    }

    /// Writes `date,return` CSV.
    pub fn write_csv(&self, mut writer: impl Write) -> Result<()> {
        writeln!(writer, "date,return")?;
        for o in &self.observations {
            writeln!(writer, "{},{}", o.date.format("%Y-%m-%d"), o.value)?;
        }
        Ok(())
    }

    /// Reads the CSV produced by [`ReturnSeries::write_csv`].
    pub fn read_csv(reader: impl Read) -> Result<Self> {
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
        let (di, vi) = (col("date")?, col("return")?);
        let mut observations = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            let date = NaiveDate::parse_from_str(record.get(di).unwrap_or(""), "%Y-%m-%d")
                .map_err(|e| Error::Parse {
                    line,
                    message: format!("bad date: {e}"),
                })?;
            let value: f64 = record
                .get(vi)
                .unwrap_or("")
                .parse()
                .map_err(|e| Error::Parse {
                    line,
                    message: format!("bad return: {e}"),
                })?;
            observations.push(ReturnObservation { date, value });
        }
        Ok(ReturnSeries { observations })
    }
}

/// Simple returns r_k = P_k / P_{k-1} - 1, dated by the later observation.
pub fn returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::insufficient(
            "need at least 2 prices to form returns",
        ));
    }
    let p = prices.prices();
    let observations = (1..p.len())
        .map(|k| ReturnObservation {
            date: prices.dates()[k],
            value: p[k] / p[k - 1] - 1.0,
        })
        .collect();
    Ok(ReturnSeries { observations })
}

/// Lower empirical `beta`-quantile: the ⌈βn⌉-th smallest sample value,
/// i.e. the left endpoint inf{y : F̂(y) ≥ β} of the empirical CDF.
pub fn empirical_quantile(sample: &[f64], beta: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::insufficient("empty sample"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid_param(format!(
            "quantile level {beta} not in (0, 1)"
        )));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData(
            "sample contains a non-finite value".into(),
        ));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[ceil_index(beta, sorted.len()) - 1])
}

/// ⌈βn⌉ with a small guard against decimal β picking up the wrong integer
/// in binary floating point (e.g. 0.9 × 20 evaluating to 18.000000000000004).
pub(crate) fn ceil_index(beta: f64, n: usize) -> usize {
    let idx = (beta * n as f64 - 1e-9).ceil() as usize;
    idx.clamp(1, n)
}

/// Which extreme of the sample a tail fit describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailSide {
    Left,
    Right,
}

/// Grid of candidate tail exponents for [`tail_fit`].
#[derive(Debug, Clone, Copy)]
pub struct KappaGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for KappaGrid {
    /// κ from 1.05 to 10.0 in steps of 0.01: exponents below ~1 have no tail
    /// mean and above ~10 are indistinguishable from thin tails at weekly
    /// sample sizes.
    fn default() -> Self {
        KappaGrid {
            min: 1.05,
            max: 10.0,
            step: 0.01,
        }
    }
}

impl KappaGrid {
    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        let steps = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        (0..=steps).map(move |i| self.min + i as f64 * self.step)
    }
}

/// Tightest power-law envelope for one tail of a sample.
///
/// For the chosen κ, every tail point x satisfies
/// `c1·|x|^-κ ≤ p(x) ≤ c2·|x|^-κ`, where p is the empirical probability of
/// the tail beyond x, and no κ on the grid admits a smaller c2/c1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TailFit {
    pub side: TailSide,
    pub kappa: f64,
    pub c1: f64,
    pub c2: f64,
    pub sample_fraction: f64,
}

/// Fits a power-law envelope to the most extreme `fraction` of the sample.
///
/// The envelope constraint is evaluated at the tail sample points: for the
/// left tail, p(x) is the empirical CDF at x; for the right tail, the
/// empirical probability of values ≥ x. The returned κ minimizes c2/c1 over
/// the grid, with ties resolved toward the smallest κ.
pub fn tail_fit(
    sample: &[f64],
    side: TailSide,
    fraction: f64,
    grid: &KappaGrid,
) -> Result<TailFit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid_param(format!(
            "tail fraction {fraction} not in (0, 1)"
        )));
    }
    if !(grid.min > 0.0) || grid.max < grid.min || !(grid.step > 0.0) {
        return Err(Error::invalid_param(format!(
            "bad kappa grid [{}, {}] step {}",
            grid.min, grid.max, grid.step
        )));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData(
            "sample contains a non-finite value".into(),
        ));
    }
    let n = sample.len();
    let count = (n as f64 * fraction).floor() as usize;
    if count < 20 {
        return Err(Error::insufficient(format!(
            "tail fraction {fraction} of {n} points selects only {count} (< 20)"
        )));
    }

    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);

    // (ln p, ln |x|) per tail point; duplicates collapse to identical pairs,
    // so a degenerate all-equal tail yields a width-zero envelope.
    let mut log_pts = Vec::with_capacity(count);
    for i in 0..count {
        let (x, p) = match side {
            TailSide::Left => {
                let x = sorted[i];
                let le = sorted.partition_point(|v| *v <= x);
                (x, le as f64 / n as f64)
            }
            TailSide::Right => {
                let x = sorted[n - 1 - i];
                let ge = n - sorted.partition_point(|v| *v < x);
                (x, ge as f64 / n as f64)
            }
        };
        if x == 0.0 {
            return Err(Error::InvalidData(
                "tail sample contains zero; no power-law envelope exists".into(),
            ));
        }
        log_pts.push((p.ln(), x.abs().ln()));
    }

    let mut best: Option<(f64, f64, f64)> = None; // (kappa, ln c1, ln c2)
    for kappa in grid.values() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(lp, lx) in &log_pts {
            let v = lp + kappa * lx;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let better = match best {
            None => true,
            Some((_, blo, bhi)) => hi - lo < bhi - blo,
        };
        if better {
            best = Some((kappa, lo, hi));
        }
    }
    let (kappa, lo, hi) = best.expect("grid is non-empty");
    Ok(TailFit {
        side,
        kappa,
        c1: lo.exp(),
        c2: hi.exp(),
        sample_fraction: fraction,
    })
}
