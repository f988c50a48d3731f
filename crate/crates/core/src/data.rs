//! Price ingestion, date alignment and return construction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("series {0} has no valid observations")]
    EmptySeries(String),
    #[error("series {ticker} has duplicate date {date}")]
    DuplicateDate { ticker: String, date: NaiveDate },
    #[error("series {ticker} is invalid: {reason}")]
    InvalidSeries { ticker: String, reason: String },
    #[error("date axes have an empty intersection")]
    EmptyIntersection,
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("ticker {0} not found")]
    UnknownTicker(String),
}

/// Daily return convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReturnConvention {
    #[default]
    Log,
    Simple,
}

impl fmt::Display for ReturnConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReturnConvention::Log => f.write_str("log"),
            ReturnConvention::Simple => f.write_str("simple"),
        }
    }
}

/// Adjusted closing prices of one instrument on strictly increasing dates.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    ticker: String,
    dates: Vec<NaiveDate>,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(ticker: impl Into<String>, dates: Vec<NaiveDate>, prices: Vec<f64>) -> Result<Self, DataError> {
        let ticker = ticker.into();
        if dates.len() != prices.len() {
            return Err(DataError::InvalidSeries {
                ticker,
                reason: format!("{} dates but {} prices", dates.len(), prices.len()),
            });
        }
        if dates.is_empty() {
            return Err(DataError::EmptySeries(ticker));
        }
        for w in dates.windows(2) {
            if w[1] == w[0] {
                return Err(DataError::DuplicateDate { ticker, date: w[0] });
            }
            if w[1] < w[0] {
                return Err(DataError::InvalidSeries {
                    ticker,
                    reason: format!("dates not increasing at {}", w[1]),
                });
            }
        }
        if let Some(p) = prices.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(DataError::InvalidSeries {
                ticker,
                reason: format!("non-positive or non-finite price {p}"),
            });
        }
        Ok(Self { ticker, dates, prices })
    }

    pub fn ticker(&self) -> &str {
        &self.ticker
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    fn restricted_to(&self, keep: &BTreeSet<NaiveDate>) -> Self {
        let (dates, prices) = self
            .dates
            .iter()
            .zip(&self.prices)
            .filter(|(d, _)| keep.contains(d))
            .map(|(d, p)| (*d, *p))
            .unzip();
        Self {
            ticker: self.ticker.clone(),
            dates,
            prices,
        }
    }
}

/// Per-period returns. `dates[t]` is the date of the later price of the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub ticker: String,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
    pub convention: ReturnConvention,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice(&self, range: Range<usize>) -> Self {
        Self {
            ticker: self.ticker.clone(),
            dates: self.dates[range.clone()].to_vec(),
            values: self.values[range].to_vec(),
            convention: self.convention,
        }
    }
}

/// Running compounded (simple) or summed (log) return since the first observation.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeReturnSeries {
    pub ticker: String,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
    pub convention: ReturnConvention,
}

/// Column mapping for a wide price file (one date column, one column per ticker).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub date_column: String,
    /// Restrict to these ticker columns; `None` loads every non-date column.
    pub tickers: Option<Vec<String>>,
    pub date_format: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            date_column: "date".to_owned(),
            tickers: None,
            date_format: "%Y-%m-%d".to_owned(),
        }
    }
}

/// One rejected row (or cell) from a CSV load. `line` is 1-based with the header on line 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowDiagnostic {
    pub line: usize,
    pub column: Option<String>,
    pub reason: String,
}

impl fmt::Display for RowDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.column {
            Some(c) => write!(f, "line {} column {}: {}", self.line, c, self.reason),
            None => write!(f, "line {}: {}", self.line, self.reason),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedPrices {
    pub series: Vec<PriceSeries>,
    pub rejected: Vec<RowDiagnostic>,
}

/// Loads a wide CSV of prices from disk.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LoadedPrices, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, schema)
}

/// Parses a wide price CSV from any reader.
///
/// A row whose date does not parse is dropped entirely. A non-positive or
/// unparseable price drops only that ticker's observation for the row; blank
/// cells are treated as missing without a diagnostic, so ragged starts load cleanly.
pub fn read_csv<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<LoadedPrices, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let date_idx = headers
        .iter()
        .position(|h| h == schema.date_column)
        .ok_or_else(|| DataError::MalformedHeader(format!("no date column named {:?}", schema.date_column)))?;

    let columns: Vec<(usize, String)> = match &schema.tickers {
        Some(wanted) => wanted
            .iter()
            .map(|t| {
                headers
                    .iter()
                    .position(|h| h == t)
                    .map(|i| (i, t.clone()))
                    .ok_or_else(|| DataError::UnknownTicker(t.clone()))
            })
            .collect::<Result<_, _>>()?,
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != date_idx)
            .map(|(i, h)| (i, h.to_owned()))
            .collect(),
    };
    if columns.is_empty() {
        return Err(DataError::MalformedHeader("no ticker columns".to_owned()));
    }
    let mut seen = BTreeSet::new();
    for (_, name) in &columns {
        if name.is_empty() || !seen.insert(name.as_str()) {
            return Err(DataError::MalformedHeader(format!(
                "empty or repeated column name {name:?}"
            )));
        }
    }

    let mut rejected = Vec::new();
    let mut cells: Vec<BTreeMap<NaiveDate, f64>> = vec![BTreeMap::new(); columns.len()];
    for (row_idx, record) in rdr.records().enumerate() {
        let line = row_idx + 2;
        let record = record?;
        let raw_date = record.get(date_idx).unwrap_or("");
        let date = match NaiveDate::parse_from_str(raw_date, &schema.date_format) {
            Ok(d) => d,
            Err(_) => {
                rejected.push(RowDiagnostic {
                    line,
                    column: None,
                    reason: format!("unparseable date {raw_date:?}"),
                });
                continue;
            }
        };
        for (slot, (col, name)) in columns.iter().enumerate() {
            let raw = record.get(*col).unwrap_or("");
            if raw.is_empty() {
                continue;
            }
            match raw.parse::<f64>() {
                Ok(p) if p.is_finite() && p > 0.0 => {
                    if cells[slot].insert(date, p).is_some() {
                        return Err(DataError::DuplicateDate {
                            ticker: name.clone(),
                            date,
                        });
                    }
                }
                _ => rejected.push(RowDiagnostic {
                    line,
                    column: Some(name.clone()),
                    reason: format!("invalid price {raw:?}"),
                }),
            }
        }
    }

    let series = columns
        .into_iter()
        .zip(cells)
        .map(|((_, name), map)| {
            if map.is_empty() {
                return Err(DataError::EmptySeries(name));
            }
            let (dates, prices) = map.into_iter().unzip();
            PriceSeries::new(name, dates, prices)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LoadedPrices { series, rejected })
}

/// Restricts every series to the dates common to all of them.
pub fn align(series: &[PriceSeries]) -> Result<Vec<PriceSeries>, DataError> {
    let Some(first) = series.first() else {
        return Err(DataError::EmptyIntersection);
    };
    let mut common: BTreeSet<NaiveDate> = first.dates.iter().copied().collect();
    for s in &series[1..] {
        let other: BTreeSet<NaiveDate> = s.dates.iter().copied().collect();
        common = common.intersection(&other).copied().collect();
    }
    if common.is_empty() {
        return Err(DataError::EmptyIntersection);
    }
    Ok(series.iter().map(|s| s.restricted_to(&common)).collect())
}

pub fn to_returns(series: &PriceSeries, convention: ReturnConvention) -> Result<ReturnSeries, DataError> {
    if series.len() < 2 {
        return Err(DataError::TooShort {
            needed: 2,
            got: series.len(),
        });
    }
    let values = series
        .prices
        .windows(2)
        .map(|w| match convention {
            ReturnConvention::Log => (w[1] / w[0]).ln(),
            ReturnConvention::Simple => w[1] / w[0] - 1.0,
        })
        .collect();
    Ok(ReturnSeries {
        ticker: series.ticker.clone(),
        dates: series.dates[1..].to_vec(),
        values,
        convention,
    })
}

pub fn to_cumulative(series: &ReturnSeries) -> Result<CumulativeReturnSeries, DataError> {
    if series.is_empty() {
        return Err(DataError::TooShort { needed: 1, got: 0 });
    }
    let values = match series.convention {
        ReturnConvention::Log => series
            .values
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect(),
        ReturnConvention::Simple => series
            .values
            .iter()
            .scan(1.0, |acc, r| {
                *acc *= 1.0 + r;
                Some(*acc - 1.0)
            })
            .collect(),
    };
    Ok(CumulativeReturnSeries {
        ticker: series.ticker.clone(),
        dates: series.dates.clone(),
        values,
        convention: series.convention,
    })
}

/// Rectangular date × ticker return matrix plus the benchmark on the same axis.
///
/// Stored column-major: `returns[i]` is the full series of asset `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    returns: Vec<Vec<f64>>,
    market: ReturnSeries,
}

impl ReturnPanel {
    pub fn new(assets: Vec<ReturnSeries>, market: ReturnSeries) -> Result<Self, DataError> {
        for a in &assets {
            if a.dates != market.dates {
                return Err(DataError::InvalidSeries {
                    ticker: a.ticker.clone(),
                    reason: "date axis differs from the market series".to_owned(),
                });
            }
            if a.values.iter().any(|v| !v.is_finite()) {
                return Err(DataError::InvalidSeries {
                    ticker: a.ticker.clone(),
                    reason: "non-finite return".to_owned(),
                });
            }
        }
        if market.values.iter().any(|v| !v.is_finite()) {
            return Err(DataError::InvalidSeries {
                ticker: market.ticker.clone(),
                reason: "non-finite return".to_owned(),
            });
        }
        let (tickers, returns) = assets.into_iter().map(|a| (a.ticker, a.values)).unzip();
        Ok(Self {
            dates: market.dates.clone(),
            tickers,
            returns,
            market,
        })
    }

    /// Aligns the price series, then derives returns for every asset and the market.
    pub fn from_prices(
        prices: &[PriceSeries],
        market_ticker: &str,
        convention: ReturnConvention,
    ) -> Result<Self, DataError> {
        let aligned = align(prices)?;
        let mut market = None;
        let mut assets = Vec::new();
        for s in &aligned {
            let r = to_returns(s, convention)?;
            if s.ticker == market_ticker {
                market = Some(r);
            } else {
                assets.push(r);
            }
        }
        let market = market.ok_or_else(|| DataError::UnknownTicker(market_ticker.to_owned()))?;
        Self::new(assets, market)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn asset(&self, i: usize) -> &[f64] {
        &self.returns[i]
    }

    pub fn market(&self) -> &ReturnSeries {
        &self.market
    }

    pub fn cell(&self, t: usize, i: usize) -> f64 {
        self.returns[i][t]
    }

    pub fn asset_series(&self, i: usize) -> ReturnSeries {
        ReturnSeries {
            ticker: self.tickers[i].clone(),
            dates: self.dates.clone(),
            values: self.returns[i].clone(),
            convention: self.market.convention,
        }
    }

    pub fn asset_by_ticker(&self, ticker: &str) -> Option<ReturnSeries> {
        self.tickers
            .iter()
            .position(|t| t == ticker)
            .map(|i| self.asset_series(i))
    }

    /// Sub-panel over a contiguous range of dates.
    pub fn slice(&self, range: Range<usize>) -> Self {
        Self {
            dates: self.dates[range.clone()].to_vec(),
            tickers: self.tickers.clone(),
            returns: self.returns.iter().map(|r| r[range.clone()].to_vec()).collect(),
            market: self.market.slice(range),
        }
    }

    /// Multiplies every asset and market return by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for col in &mut out.returns {
            col.iter_mut().for_each(|v| *v *= factor);
        }
        out.market.values.iter_mut().for_each(|v| *v *= factor);
        out
    }
}
