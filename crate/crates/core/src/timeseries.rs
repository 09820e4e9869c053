//! Daily price series, log-returns and rolling realized volatility.
//!
//! Everything downstream works in index time: one row of the input file is
//! one time step, regardless of calendar gaps. All window arithmetic in the
//! crate (volatility windows, fit windows, horizons) is in row counts.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TimeSeriesError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: malformed row: {msg}")]
    MalformedRow { line: u64, msg: String },
    #[error("line {line}: non-positive price {price}")]
    NonPositivePrice { line: u64, price: f64 },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("calendar gap before {0} (strict daily mode)")]
    CalendarGap(NaiveDate),
    #[error("series too short: {len} rows, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("window of {window} returns does not fit a series of {len} returns")]
    WindowTooLarge { window: usize, len: usize },
    #[error("volatility window must be at least 2, got {0}")]
    WindowTooSmall(usize),
}

/// Validated daily close prices, sorted by date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    prices: Vec<f64>,
}

impl PriceSeries {
    /// Builds a series from parallel date/price vectors.
    ///
    /// Rows are sorted by date; duplicate dates and non-positive prices are
    /// rejected, as are series shorter than two rows.
    pub fn new(dates: Vec<NaiveDate>, prices: Vec<f64>) -> Result<Self, TimeSeriesError> {
        if dates.len() != prices.len() || dates.len() < 2 {
            return Err(TimeSeriesError::TooShort {
                len: dates.len().min(prices.len()),
                min: 2,
            });
        }
        for (i, &p) in prices.iter().enumerate() {
            if p.is_nan() || p <= 0.0 || !p.is_finite() {
                return Err(TimeSeriesError::NonPositivePrice {
                    line: i as u64 + 2, // header is line 1
                    price: p,
                });
            }
        }
        let mut rows: Vec<(NaiveDate, f64)> = dates.into_iter().zip(prices).collect();
        rows.sort_by_key(|&(d, _)| d);
        for w in rows.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(TimeSeriesError::DuplicateDate(w[0].0));
            }
        }
        let (dates, prices) = rows.into_iter().unzip();
        Ok(Self { dates, prices })
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

    pub fn date_at(&self, index: usize) -> NaiveDate {
        self.dates[index]
    }

    pub fn price_at(&self, index: usize) -> f64 {
        self.prices[index]
    }

    /// Index of an exact date, if present.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Natural log of every price.
    pub fn log_prices(&self) -> Vec<f64> {
        self.prices.iter().map(|p| p.ln()).collect()
    }

    /// Errors if any two consecutive dates are not exactly one day apart.
    pub fn reject_calendar_gaps(&self) -> Result<(), TimeSeriesError> {
        for w in self.dates.windows(2) {
            if w[1] != w[0].succ_opt().expect("date overflow") {
                return Err(TimeSeriesError::CalendarGap(w[1]));
            }
        }
        Ok(())
    }

    /// Reads a `date,close` CSV (ISO-8601 dates, plain decimal prices).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, TimeSeriesError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        {
            let headers = rdr.headers()?;
            if headers.len() < 2 || &headers[0] != "date" || &headers[1] != "close" {
                return Err(TimeSeriesError::MalformedRow {
                    line: 1,
                    msg: format!("expected header `date,close`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
                });
            }
        }
        let mut dates = Vec::new();
        let mut prices = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i as u64 + 2;
            let rec = rec?;
            if rec.len() < 2 {
                return Err(TimeSeriesError::MalformedRow {
                    line,
                    msg: format!("expected 2 fields, got {}", rec.len()),
                });
            }
            let date: NaiveDate = rec[0].parse().map_err(|e| TimeSeriesError::MalformedRow {
                line,
                msg: format!("bad date `{}`: {e}", &rec[0]),
            })?;
            let price: f64 = rec[1].parse().map_err(|e| TimeSeriesError::MalformedRow {
                line,
                msg: format!("bad price `{}`: {e}", &rec[1]),
            })?;
            if price.is_nan() || price <= 0.0 || !price.is_finite() {
                return Err(TimeSeriesError::NonPositivePrice { line, price });
            }
            dates.push(date);
            prices.push(price);
        }
        Self::new(dates, prices)
    }

    /// Writes the `date,close` schema back out. Prices use the shortest
    /// decimal representation that round-trips, so write → load → write is
    /// byte-stable.
    pub fn to_csv<W: Write>(&self, writer: W) -> Result<(), TimeSeriesError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["date", "close"])?;
        for (d, p) in self.dates.iter().zip(&self.prices) {
            wtr.write_record([d.to_string(), p.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Loads a validated price series from a `date,close` CSV file.
pub fn load_prices<P: AsRef<Path>>(path: P) -> Result<PriceSeries, TimeSeriesError> {
    let file = std::fs::File::open(path)?;
    PriceSeries::from_csv(std::io::BufReader::new(file))
}

/// Writes a price series to a CSV file with the same schema the loader reads.
pub fn write_prices<P: AsRef<Path>>(series: &PriceSeries, path: P) -> Result<(), TimeSeriesError> {
    let file = std::fs::File::create(path)?;
    series.to_csv(std::io::BufWriter::new(file))
}

/// Daily discrete log-returns, dated on the later day of each pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LogReturnSeries {
    dates: Vec<NaiveDate>,
    returns: Vec<f64>,
}

impl LogReturnSeries {
    pub fn from_prices(series: &PriceSeries) -> Self {
        let returns = series
            .prices()
            .windows(2)
            .map(|w| (w[1] / w[0]).ln())
            .collect();
        Self {
            dates: series.dates()[1..].to_vec(),
            returns,
        }
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }
}

/// Trailing-window sample standard deviation of log-returns.
///
/// The value at return index `i` covers returns `i-w+1 ..= i`; the first
/// defined index is `w - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingVolatility {
    window: usize,
    first_index: usize,
    values: Vec<f64>,
}

impl RollingVolatility {
    pub fn of(returns: &LogReturnSeries, window: usize) -> Result<Self, TimeSeriesError> {
        if window < 2 {
            return Err(TimeSeriesError::WindowTooSmall(window));
        }
        let r = returns.returns();
        if r.len() < window {
            return Err(TimeSeriesError::WindowTooLarge {
                window,
                len: r.len(),
            });
        }
        let mut values = Vec::with_capacity(r.len() - window + 1);
        for end in window..=r.len() {
            let w = &r[end - window..end];
            values.push(sample_std(w));
        }
        Ok(Self {
            window,
            first_index: window - 1,
            values,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// First return index with a full trailing window.
    pub fn first_index(&self) -> usize {
        self.first_index
    }

    /// Volatility at a return index, `None` before the window fills.
    pub fn value_at(&self, return_index: usize) -> Option<f64> {
        return_index
            .checked_sub(self.first_index)
            .and_then(|i| self.values.get(i).copied())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// One value per return index, with the pre-window prefix backfilled
    /// from the first defined value.
    pub fn backfilled(&self) -> Vec<f64> {
        let first = self.values[0];
        let mut out = vec![first; self.first_index];
        out.extend_from_slice(&self.values);
        out
    }
}

/// Sample standard deviation (mean subtracted, denominator n-1).
fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (ss / (n - 1.0)).sqrt()
}
