//! Seeded synthetic price panels for fixtures and demos.
//!
//! The market follows piecewise-Gaussian log returns whose mean and volatility
//! switch at configured regime starts. Each asset return is the market return
//! plus a standard normal shock scaled by
//! `idio_sd + linear·|R_m| + quadratic·R_m²` (floored at a small positive value),
//! so a negative `quadratic` plants herding in CSAD and a positive one plants
//! anti-herding.

use std::io::Write;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, PriceSeries};

const DISPERSION_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("invalid synthetic configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    /// Index of the first return in this regime.
    pub start: usize,
    pub market_mean: f64,
    pub market_sd: f64,
    pub dispersion_linear: f64,
    pub dispersion_quadratic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub start_date: NaiveDate,
    /// Number of returns; the price series have one more point.
    pub n_returns: usize,
    pub tickers: Vec<String>,
    pub market_ticker: String,
    pub idio_sd: f64,
    pub start_price: f64,
    /// Sorted by `start`; the first regime must start at 0.
    pub regimes: Vec<Regime>,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let regime = |start, sd, quad| Regime {
            start,
            market_mean: 0.0003,
            market_sd: sd,
            dispersion_linear: 0.4,
            dispersion_quadratic: quad,
        };
        Self {
            start_date: NaiveDate::from_ymd_opt(2014, 3, 31).expect("valid date"),
            n_returns: 1500,
            tickers: ["COPX", "IYM", "LIT", "PICK", "REMX", "VAW"].map(String::from).to_vec(),
            market_ticker: "SPX".to_owned(),
            idio_sd: 0.006,
            start_price: 100.0,
            regimes: vec![
                regime(0, 0.008, -4.0),
                regime(500, 0.025, -4.0),
                regime(1000, 0.012, 6.0),
            ],
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<(), SyntheticError> {
        let bad = |m: &str| Err(SyntheticError::Invalid(m.to_owned()));
        if self.n_returns < 2 {
            return bad("n_returns must be at least 2");
        }
        if self.tickers.is_empty() {
            return bad("at least one asset ticker is required");
        }
        if self.tickers.contains(&self.market_ticker) {
            return bad("market ticker duplicates an asset ticker");
        }
        if self.regimes.first().map(|r| r.start) != Some(0) {
            return bad("the first regime must start at index 0");
        }
        if self.regimes.windows(2).any(|w| w[1].start <= w[0].start) {
            return bad("regime starts must be strictly increasing");
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !self.regimes.iter().all(|r| positive(r.market_sd))
            || !(self.idio_sd == 0.0 || positive(self.idio_sd))
            || !positive(self.start_price)
        {
            return bad("volatilities must be positive and the start price positive");
        }
        Ok(())
    }
}

/// Weekdays starting at `start` (rolled forward if it falls on a weekend).
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

/// Market series last, after the assets in configured order.
pub fn generate_prices(config: &SyntheticConfig) -> Result<Vec<PriceSeries>, SyntheticError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_returns;
    let k = config.tickers.len();
    let mut market = Vec::with_capacity(n);
    let mut assets = vec![Vec::with_capacity(n); k];
    let mut regime = 0;
    for t in 0..n {
        while regime + 1 < config.regimes.len() && config.regimes[regime + 1].start <= t {
            regime += 1;
        }
        let r = &config.regimes[regime];
        let z: f64 = StandardNormal.sample(&mut rng);
        let rm = r.market_mean + r.market_sd * z;
        let scale =
            (config.idio_sd + r.dispersion_linear * rm.abs() + r.dispersion_quadratic * rm * rm).max(DISPERSION_FLOOR);
        for a in assets.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            a.push(rm + scale * e);
        }
        market.push(rm);
    }
    let dates = business_days(config.start_date, n + 1);
    let to_prices = |returns: &[f64]| {
        let mut p = Vec::with_capacity(n + 1);
        let mut level = config.start_price;
        p.push(level);
        for r in returns {
            level *= r.exp();
            p.push(level);
        }
        p
    };
    let mut out = Vec::with_capacity(k + 1);
    for (ticker, returns) in config.tickers.iter().zip(&assets) {
        out.push(PriceSeries::new(ticker.clone(), dates.clone(), to_prices(returns))?);
    }
    out.push(PriceSeries::new(
        config.market_ticker.clone(),
        dates,
        to_prices(&market),
    )?);
    Ok(out)
}

/// Writes aligned series as `date,<ticker>...` with full-precision prices.
pub fn write_price_csv(series: &[PriceSeries], path: &Path) -> Result<(), SyntheticError> {
    let io = |source| SyntheticError::Io {
        path: path.display().to_string(),
        source,
    };
    let Some(first) = series.first() else {
        return Err(SyntheticError::Invalid("no series to write".to_owned()));
    };
    if series.iter().any(|s| s.dates() != first.dates()) {
        return Err(SyntheticError::Invalid("series must share one date axis".to_owned()));
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let header: Vec<&str> = series.iter().map(|s| s.ticker()).collect();
    writeln!(w, "date,{}", header.join(",")).map_err(io)?;
    for (t, d) in first.dates().iter().enumerate() {
        write!(w, "{}", d.format("%Y-%m-%d")).map_err(io)?;
        for s in series {
            write!(w, ",{}", s.prices()[t]).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}
