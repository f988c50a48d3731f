//! Run configuration (TOML) and its validation.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::changepoint::{CostKind, Penalty, DEFAULT_MIN_SEG};
use crate::data::{CsvSchema, ReturnConvention};
use crate::dependence::DEFAULT_MI_BINS;
use crate::herding::{DeviationBasis, HerdingSettings, StandardErrors};
use crate::stats::DEFAULT_ARCH_LAGS;

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

/// Either a named information criterion or an absolute β.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PenaltySetting {
    Named(String),
    Value(f64),
}

impl Default for PenaltySetting {
    fn default() -> Self {
        PenaltySetting::Named("bic".to_owned())
    }
}

impl PenaltySetting {
    pub fn resolve(&self, n: usize, cost: CostKind) -> Result<Penalty, String> {
        match self {
            PenaltySetting::Named(s) if s.eq_ignore_ascii_case("bic") => Ok(Penalty::bic(n, cost)),
            PenaltySetting::Named(s) if s.eq_ignore_ascii_case("aic") => Ok(Penalty::aic(cost)),
            PenaltySetting::Named(s) => Err(format!("unknown penalty {s:?}; use \"bic\", \"aic\" or a number")),
            PenaltySetting::Value(v) => Penalty::manual(*v).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChangepointConfig {
    pub cost: CostKind,
    pub penalty: PenaltySetting,
    pub min_seg: usize,
    /// Absolute penalty values for the sweep table; empty disables it.
    pub sweep: Vec<f64>,
    /// Dates the sweep table checks for nearby change points.
    pub target_dates: Vec<NaiveDate>,
    /// Match tolerance in trading days.
    pub tolerance_days: usize,
}

impl Default for ChangepointConfig {
    fn default() -> Self {
        Self {
            cost: CostKind::NormalMeanVar,
            penalty: PenaltySetting::default(),
            min_seg: DEFAULT_MIN_SEG,
            sweep: Vec::new(),
            target_dates: vec![date(2015, 7, 23), date(2020, 3, 17), date(2020, 12, 1)],
            tolerance_days: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HerdingConfig {
    pub tail_fractions: Vec<f64>,
    pub basis: DeviationBasis,
    pub significance: f64,
    /// Newey-West bandwidth; classical standard errors when absent.
    pub hac_bandwidth: Option<usize>,
    /// Anchors for the full-horizon before/after split derived from change points.
    pub cpd_anchors: Vec<NaiveDate>,
    /// Anchors for the full-horizon before/after split at external events.
    pub event_anchors: Vec<NaiveDate>,
    /// Anchors for the horizon grid; defaults to all of the above.
    pub sensitivity_anchors: Option<Vec<NaiveDate>>,
    pub horizons_months: Vec<u32>,
}

impl Default for HerdingConfig {
    fn default() -> Self {
        Self {
            tail_fractions: vec![0.05, 0.01],
            basis: DeviationBasis::Market,
            significance: 0.05,
            hac_bandwidth: None,
            cpd_anchors: vec![date(2015, 7, 23), date(2020, 3, 17), date(2020, 12, 1)],
            event_anchors: vec![date(2022, 2, 22), date(2023, 10, 7)],
            sensitivity_anchors: None,
            horizons_months: vec![2, 4, 6],
        }
    }
}

impl HerdingConfig {
    pub fn sensitivity_anchors(&self) -> Vec<NaiveDate> {
        self.sensitivity_anchors
            .clone()
            .unwrap_or_else(|| self.cpd_anchors.iter().chain(&self.event_anchors).copied().collect())
    }

    pub fn settings(&self, tail_fraction: f64) -> HerdingSettings {
        HerdingSettings {
            basis: self.basis,
            tail_fraction,
            significance: self.significance,
            standard_errors: match self.hac_bandwidth {
                Some(bandwidth) => StandardErrors::NeweyWest { bandwidth },
                None => StandardErrors::Classical,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestsConfig {
    pub arch_lags: usize,
    /// Fixed ADF lag; AIC selection up to the default maximum when absent.
    pub adf_lag: Option<usize>,
    pub mi_bins: usize,
}

impl Default for TestsConfig {
    fn default() -> Self {
        Self {
            arch_lags: DEFAULT_ARCH_LAGS,
            adf_lag: None,
            mi_bins: DEFAULT_MI_BINS,
        }
    }
}

fn default_market() -> String {
    "SPX".to_owned()
}

fn default_date_column() -> String {
    "date".to_owned()
}

fn default_date_format() -> String {
    "%Y-%m-%d".to_owned()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("report")
}

/// One experiment. Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data_path: PathBuf,
    /// Asset columns to analyse; every non-market column when absent.
    #[serde(default)]
    pub tickers: Option<Vec<String>>,
    #[serde(default = "default_market")]
    pub market_ticker: String,
    #[serde(default = "default_date_column")]
    pub date_column: String,
    #[serde(default = "default_date_format")]
    pub date_format: String,
    #[serde(default)]
    pub return_convention: ReturnConvention,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Recorded in the manifest; no pipeline stage draws random numbers.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub changepoint: ChangepointConfig,
    #[serde(default)]
    pub herding: HerdingConfig,
    #[serde(default)]
    pub tests: TestsConfig,
}

impl RunConfig {
    pub fn new(data_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_path: data_path.into(),
            tickers: None,
            market_ticker: default_market(),
            date_column: default_date_column(),
            date_format: default_date_format(),
            return_convention: ReturnConvention::default(),
            output_dir: output_dir.into(),
            seed: 0,
            changepoint: ChangepointConfig::default(),
            herding: HerdingConfig::default(),
            tests: TestsConfig::default(),
        }
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, String> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.data_path = base_dir.join(&cfg.data_path);
        cfg.output_dir = base_dir.join(&cfg.output_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }

    pub fn csv_schema(&self) -> CsvSchema {
        CsvSchema {
            date_column: self.date_column.clone(),
            tickers: self.tickers.as_ref().map(|t| {
                let mut cols = t.clone();
                if !cols.contains(&self.market_ticker) {
                    cols.push(self.market_ticker.clone());
                }
                cols
            }),
            date_format: self.date_format.clone(),
        }
    }

    /// Checks that need no data. Every problem is reported, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let cp = &self.changepoint;
        if cp.min_seg == 0 {
            issues.push("changepoint.min_seg must be at least 1".to_owned());
        }
        if let Err(e) = cp.penalty.resolve(100, cp.cost) {
            issues.push(format!("changepoint.penalty: {e}"));
        }
        for v in &cp.sweep {
            if !(v.is_finite() && *v >= 0.0) {
                issues.push(format!("changepoint.sweep: penalty {v} must be finite and nonnegative"));
            }
        }
        let h = &self.herding;
        if h.tail_fractions.is_empty() {
            issues.push("herding.tail_fractions must not be empty".to_owned());
        }
        for t in &h.tail_fractions {
            if !(*t > 0.0 && *t <= 0.25) {
                issues.push(format!("herding.tail_fractions: {t} is outside (0, 0.25]"));
            }
        }
        if !(h.significance > 0.0 && h.significance < 1.0) {
            issues.push(format!("herding.significance: {} is outside (0, 1)", h.significance));
        }
        if h.horizons_months.contains(&0) {
            issues.push("herding.horizons_months must be positive".to_owned());
        }
        if self.tests.arch_lags == 0 {
            issues.push("tests.arch_lags must be at least 1".to_owned());
        }
        if self.tests.mi_bins < 2 {
            issues.push("tests.mi_bins must be at least 2".to_owned());
        }
        if let Some(t) = &self.tickers {
            if t.is_empty() {
                issues.push("tickers must not be empty when given".to_owned());
            }
        }
        if self.output_dir.exists() && !self.output_dir.is_dir() {
            issues.push(format!("output_dir {} is not a directory", self.output_dir.display()));
        }
        issues
    }

    /// Every anchor the herding stages use, with the config key that introduced it.
    pub fn anchors(&self) -> Vec<(&'static str, NaiveDate)> {
        let h = &self.herding;
        let mut out: Vec<(&'static str, NaiveDate)> = Vec::new();
        out.extend(h.cpd_anchors.iter().map(|d| ("herding.cpd_anchors", *d)));
        out.extend(h.event_anchors.iter().map(|d| ("herding.event_anchors", *d)));
        if let Some(s) = &h.sensitivity_anchors {
            out.extend(s.iter().map(|d| ("herding.sensitivity_anchors", *d)));
        }
        out
    }
}
