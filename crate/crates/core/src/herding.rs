//! Cross-sectional dispersion (CSSD, CSAD) and the herding regressions.
//!
//! CSSD is regressed on extreme-day dummies; CSAD is regressed on the market
//! return, its absolute value and its square. A significantly negative
//! coefficient on the squared market return (or on the lower-tail dummy for
//! CSSD) is read as herding, a significantly positive one as anti-herding.

use std::fmt;
use std::ops::Range;

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ReturnPanel, ReturnSeries};
use crate::regression::{ols, ols_hac, DesignMatrix, RegressionError, RegressionFit};

pub const DEFAULT_TAIL_FRACTION: f64 = 0.05;
pub const MIN_WINDOW_DAYS: usize = 20;
pub const MIN_REGRESSION_OBS: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HerdingError {
    #[error("{needed} assets required, panel has {got}")]
    TooFewAssets { needed: usize, got: usize },
    #[error("anchor {0} lies outside the data range")]
    AnchorOutOfRange(NaiveDate),
    #[error("window {label} needs data from {needed} but the panel covers {first} to {last}")]
    WindowOutsideData {
        label: String,
        needed: NaiveDate,
        first: NaiveDate,
        last: NaiveDate,
    },
    #[error("window {label} has {got} trading days, need {needed}")]
    WindowTooShort { label: String, needed: usize, got: usize },
    #[error("tail fraction must lie in (0, 0.25], got {0}")]
    InvalidTail(f64),
    #[error("market returns are degenerate in the window")]
    DegenerateMarket,
    #[error("date axes of dispersion and regressors differ")]
    Misaligned,
    #[error("{direction} subsample has {got} observations, need {needed}")]
    SubsampleTooSmall {
        direction: MarketDirection,
        needed: usize,
        got: usize,
    },
    #[error("regression failed: {0}")]
    Regression(#[from] RegressionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DispersionKind {
    Cssd,
    Csad,
}

/// Return that individual assets are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DeviationBasis {
    /// The benchmark index return.
    #[default]
    Market,
    /// The equal-weighted mean of the panel's asset returns.
    CrossSectionalMean,
}

impl fmt::Display for DeviationBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeviationBasis::Market => "market",
            DeviationBasis::CrossSectionalMean => "cross_sectional_mean",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionSeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
    pub kind: DispersionKind,
    pub n_assets: usize,
    pub basis: DeviationBasis,
}

fn basis_returns(panel: &ReturnPanel, basis: DeviationBasis) -> Vec<f64> {
    match basis {
        DeviationBasis::Market => panel.market().values.clone(),
        DeviationBasis::CrossSectionalMean => (0..panel.n_dates())
            .map(|t| (0..panel.n_assets()).map(|i| panel.cell(t, i)).sum::<f64>() / panel.n_assets() as f64)
            .collect(),
    }
}

/// `CSSD_t = sqrt(Σ_i (R_it - B_t)² / (N - 1))`.
pub fn cssd_series(panel: &ReturnPanel, basis: DeviationBasis) -> Result<DispersionSeries, HerdingError> {
    let n = panel.n_assets();
    if n < 2 {
        return Err(HerdingError::TooFewAssets { needed: 2, got: n });
    }
    let b = basis_returns(panel, basis);
    let values = (0..panel.n_dates())
        .map(|t| {
            let ss: f64 = (0..n).map(|i| (panel.cell(t, i) - b[t]).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        })
        .collect();
    Ok(DispersionSeries {
        dates: panel.dates().to_vec(),
        values,
        kind: DispersionKind::Cssd,
        n_assets: n,
        basis,
    })
}

/// `CSAD_t = (1/N) Σ_i |R_it - B_t|`.
pub fn csad_series(panel: &ReturnPanel, basis: DeviationBasis) -> Result<DispersionSeries, HerdingError> {
    let n = panel.n_assets();
    if n < 1 {
        return Err(HerdingError::TooFewAssets { needed: 1, got: n });
    }
    let b = basis_returns(panel, basis);
    let values = (0..panel.n_dates())
        .map(|t| (0..n).map(|i| (panel.cell(t, i) - b[t]).abs()).sum::<f64>() / n as f64)
        .collect();
    Ok(DispersionSeries {
        dates: panel.dates().to_vec(),
        values,
        kind: DispersionKind::Csad,
        n_assets: n,
        basis,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Before,
    After,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Before => "before",
            Side::After => "after",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Horizon {
    Full,
    Months(u32),
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Full => f.write_str("full"),
            Horizon::Months(k) => write!(f, "{k}m"),
        }
    }
}

/// A before/after slice of the trading axis around an anchor date.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventWindow {
    pub anchor: NaiveDate,
    pub side: Side,
    pub horizon: Horizon,
}

impl EventWindow {
    pub fn new(anchor: NaiveDate, side: Side, horizon: Horizon) -> Self {
        Self { anchor, side, horizon }
    }

    pub fn label(&self) -> String {
        format!("{} {} ({})", self.side, self.anchor, self.horizon)
    }

    /// Index range on `dates`.
    ///
    /// Before-windows end on the last trading day strictly before the anchor;
    /// after-windows start on the first trading day on or after it. A k-month
    /// horizon spans `[anchor - k months, anchor)` or `[anchor, anchor + k months)`
    /// in calendar time and must lie inside the data.
    pub fn resolve(&self, dates: &[NaiveDate]) -> Result<Range<usize>, HerdingError> {
        let (Some(&first), Some(&last)) = (dates.first(), dates.last()) else {
            return Err(HerdingError::AnchorOutOfRange(self.anchor));
        };
        if self.anchor < first || self.anchor > last {
            return Err(HerdingError::AnchorOutOfRange(self.anchor));
        }
        let split = dates.partition_point(|d| *d < self.anchor);
        let outside = |needed| HerdingError::WindowOutsideData {
            label: self.label(),
            needed,
            first,
            last,
        };
        Ok(match (self.side, self.horizon) {
            (Side::Before, Horizon::Full) => 0..split,
            (Side::After, Horizon::Full) => split..dates.len(),
            (Side::Before, Horizon::Months(k)) => {
                let start = self
                    .anchor
                    .checked_sub_months(Months::new(k))
                    .ok_or(HerdingError::AnchorOutOfRange(self.anchor))?;
                if start < first {
                    return Err(outside(start));
                }
                dates.partition_point(|d| *d < start)..split
            }
            (Side::After, Horizon::Months(k)) => {
                let end = self
                    .anchor
                    .checked_add_months(Months::new(k))
                    .ok_or(HerdingError::AnchorOutOfRange(self.anchor))?;
                if end > last {
                    return Err(outside(end));
                }
                split..dates.partition_point(|d| *d < end)
            }
        })
    }
}

/// Lower/upper extreme-day indicators for one regression window.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremeDummies {
    pub dates: Vec<NaiveDate>,
    pub d_lower: Vec<f64>,
    pub d_upper: Vec<f64>,
    pub tail_fraction: f64,
    pub basis_window: (NaiveDate, NaiveDate),
}

impl ExtremeDummies {
    pub fn lower_count(&self) -> usize {
        self.d_lower.iter().filter(|v| **v == 1.0).count()
    }

    pub fn upper_count(&self) -> usize {
        self.d_upper.iter().filter(|v| **v == 1.0).count()
    }
}

/// Flags market returns at or beyond the empirical tail quantiles of `market`.
///
/// With `k = max(1, floor(tail_fraction · n))`, the lower threshold is the
/// k-th smallest return and the upper threshold the k-th largest; values equal
/// to a threshold are included in the tail.
pub fn extreme_dummies(market: &ReturnSeries, tail_fraction: f64) -> Result<ExtremeDummies, HerdingError> {
    if !(tail_fraction > 0.0 && tail_fraction <= 0.25) {
        return Err(HerdingError::InvalidTail(tail_fraction));
    }
    let n = market.len();
    if n < MIN_WINDOW_DAYS {
        return Err(HerdingError::WindowTooShort {
            label: format!(
                "{}..{}",
                market.dates.first().map_or(String::new(), |d| d.to_string()),
                market.dates.last().map_or(String::new(), |d| d.to_string())
            ),
            needed: MIN_WINDOW_DAYS,
            got: n,
        });
    }
    let mut sorted = market.values.clone();
    sorted.sort_by(f64::total_cmp);
    let k = ((tail_fraction * n as f64 + 1e-9).floor() as usize).max(1);
    let lo = sorted[k - 1];
    let hi = sorted[n - k];
    if lo >= hi {
        return Err(HerdingError::DegenerateMarket);
    }
    let d_lower = market.values.iter().map(|r| f64::from(u8::from(*r <= lo))).collect();
    let d_upper = market.values.iter().map(|r| f64::from(u8::from(*r >= hi))).collect();
    Ok(ExtremeDummies {
        dates: market.dates.clone(),
        d_lower,
        d_upper,
        tail_fraction,
        basis_window: (market.dates[0], market.dates[n - 1]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HerdingModel {
    /// CSSD on a constant and the two extreme-day dummies.
    CssdEq4,
    /// CSAD on R_m and R_m².
    CsadEq5,
    /// CSAD on |R_m| and R_m² over up-market days.
    CsadEq6Up,
    /// CSAD on |R_m| and R_m² over down-market days.
    CsadEq7Down,
    /// CSAD on R_m, |R_m| and R_m².
    CsadEq8,
}

impl HerdingModel {
    /// Name of the regressor whose sign and significance decide the verdict.
    pub fn deciding_coefficient(self) -> &'static str {
        match self {
            HerdingModel::CssdEq4 => "d_lower",
            _ => "rm_sq",
        }
    }
}

impl fmt::Display for HerdingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HerdingModel::CssdEq4 => "cssd_eq4",
            HerdingModel::CsadEq5 => "csad_eq5",
            HerdingModel::CsadEq6Up => "csad_eq6_up",
            HerdingModel::CsadEq7Down => "csad_eq7_down",
            HerdingModel::CsadEq8 => "csad_eq8",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Herding,
    AntiHerding,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Herding => "herding",
            Verdict::AntiHerding => "anti_herding",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarketDirection {
    Up,
    Down,
}

impl fmt::Display for MarketDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarketDirection::Up => "up",
            MarketDirection::Down => "down",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StandardErrors {
    Classical,
    NeweyWest { bandwidth: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HerdingSettings {
    pub basis: DeviationBasis,
    pub tail_fraction: f64,
    /// Two-sided level at which a deciding coefficient counts as significant.
    pub significance: f64,
    pub standard_errors: StandardErrors,
}

impl Default for HerdingSettings {
    fn default() -> Self {
        Self {
            basis: DeviationBasis::Market,
            tail_fraction: DEFAULT_TAIL_FRACTION,
            significance: 0.05,
            standard_errors: StandardErrors::Classical,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HerdingFit {
    pub window_label: String,
    pub model: HerdingModel,
    pub fit: RegressionFit,
    pub verdict: Verdict,
    pub deciding_coefficient: &'static str,
}

impl HerdingFit {
    fn new(window_label: &str, model: HerdingModel, fit: RegressionFit, significance: f64) -> Self {
        let name = model.deciding_coefficient();
        let verdict = verdict_from_fit(&fit, name, significance);
        Self {
            window_label: window_label.to_owned(),
            model,
            fit,
            verdict,
            deciding_coefficient: name,
        }
    }

    pub fn coefficient(&self, name: &str) -> Option<(f64, f64, f64)> {
        self.fit
            .index_of(name)
            .map(|i| (self.fit.coef[i], self.fit.t_stat[i], self.fit.p_value[i]))
    }
}

/// Herding iff the deciding coefficient is significantly negative, anti-herding iff significantly positive.
pub fn verdict_from_fit(fit: &RegressionFit, coefficient: &str, significance: f64) -> Verdict {
    let Some(i) = fit.index_of(coefficient) else {
        return Verdict::Inconclusive;
    };
    if fit.p_value[i] > significance {
        Verdict::Inconclusive
    } else if fit.coef[i] < 0.0 {
        Verdict::Herding
    } else {
        Verdict::AntiHerding
    }
}

fn run_ols(x: &DesignMatrix, y: &[f64], se: StandardErrors) -> Result<RegressionFit, HerdingError> {
    Ok(match se {
        StandardErrors::Classical => ols(x, y)?,
        StandardErrors::NeweyWest { bandwidth } => ols_hac(x, y, bandwidth)?,
    })
}

/// CSSD on a constant, `D^L` and `D^U`.
pub fn fit_cssd(
    dispersion: &DispersionSeries,
    dummies: &ExtremeDummies,
    settings: &HerdingSettings,
    label: &str,
) -> Result<HerdingFit, HerdingError> {
    if dispersion.dates != dummies.dates {
        return Err(HerdingError::Misaligned);
    }
    let x = DesignMatrix::new(dispersion.values.len())
        .with_intercept()
        .with_column("d_lower", dummies.d_lower.clone())
        .with_column("d_upper", dummies.d_upper.clone());
    let fit = run_ols(&x, &dispersion.values, settings.standard_errors)?;
    Ok(HerdingFit::new(
        label,
        HerdingModel::CssdEq4,
        fit,
        settings.significance,
    ))
}

fn check_aligned(dispersion: &DispersionSeries, market: &ReturnSeries) -> Result<(), HerdingError> {
    if dispersion.dates != market.dates {
        Err(HerdingError::Misaligned)
    } else {
        Ok(())
    }
}

/// CSAD on a constant, `R_m` and `R_m²`.
pub fn fit_csad_base(
    dispersion: &DispersionSeries,
    market: &ReturnSeries,
    settings: &HerdingSettings,
    label: &str,
) -> Result<HerdingFit, HerdingError> {
    check_aligned(dispersion, market)?;
    let rm = &market.values;
    let x = DesignMatrix::new(rm.len())
        .with_intercept()
        .with_column("rm", rm.clone())
        .with_column("rm_sq", rm.iter().map(|r| r * r).collect());
    let fit = run_ols(&x, &dispersion.values, settings.standard_errors)?;
    Ok(HerdingFit::new(
        label,
        HerdingModel::CsadEq5,
        fit,
        settings.significance,
    ))
}

/// CSAD on a constant, `|R_m|` and `R_m²` over days where the market rose (or fell).
/// Days with a zero market return belong to neither subsample.
pub fn fit_csad_directional(
    dispersion: &DispersionSeries,
    market: &ReturnSeries,
    direction: MarketDirection,
    settings: &HerdingSettings,
    label: &str,
) -> Result<HerdingFit, HerdingError> {
    check_aligned(dispersion, market)?;
    let keep: Vec<usize> = (0..market.len())
        .filter(|&t| match direction {
            MarketDirection::Up => market.values[t] > 0.0,
            MarketDirection::Down => market.values[t] < 0.0,
        })
        .collect();
    if keep.len() < MIN_REGRESSION_OBS {
        return Err(HerdingError::SubsampleTooSmall {
            direction,
            needed: MIN_REGRESSION_OBS,
            got: keep.len(),
        });
    }
    let rm: Vec<f64> = keep.iter().map(|&t| market.values[t]).collect();
    let y: Vec<f64> = keep.iter().map(|&t| dispersion.values[t]).collect();
    let x = DesignMatrix::new(rm.len())
        .with_intercept()
        .with_column("abs_rm", rm.iter().map(|r| r.abs()).collect())
        .with_column("rm_sq", rm.iter().map(|r| r * r).collect());
    let fit = run_ols(&x, &y, settings.standard_errors)?;
    let model = match direction {
        MarketDirection::Up => HerdingModel::CsadEq6Up,
        MarketDirection::Down => HerdingModel::CsadEq7Down,
    };
    Ok(HerdingFit::new(label, model, fit, settings.significance))
}

/// CSAD on a constant, `R_m`, `|R_m|` and `R_m²`.
pub fn fit_csad_asymmetric(
    dispersion: &DispersionSeries,
    market: &ReturnSeries,
    settings: &HerdingSettings,
    label: &str,
) -> Result<HerdingFit, HerdingError> {
    check_aligned(dispersion, market)?;
    let rm = &market.values;
    if rm.len() < MIN_REGRESSION_OBS {
        return Err(HerdingError::WindowTooShort {
            label: label.to_owned(),
            needed: MIN_REGRESSION_OBS,
            got: rm.len(),
        });
    }
    let x = DesignMatrix::new(rm.len())
        .with_intercept()
        .with_column("rm", rm.clone())
        .with_column("abs_rm", rm.iter().map(|r| r.abs()).collect())
        .with_column("rm_sq", rm.iter().map(|r| r * r).collect());
    let fit = run_ols(&x, &dispersion.values, settings.standard_errors)?;
    Ok(HerdingFit::new(
        label,
        HerdingModel::CsadEq8,
        fit,
        settings.significance,
    ))
}

/// CSSD (extreme-dummy) and CSAD (asymmetric) fits over one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFits {
    pub window: EventWindow,
    pub range: Range<usize>,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    pub cssd: HerdingFit,
    pub csad: HerdingFit,
}

/// Full-sample fits of every model, including the supplementary CSAD variants.
#[derive(Debug, Clone, PartialEq)]
pub struct FullPeriodFits {
    pub cssd: HerdingFit,
    pub csad_base: HerdingFit,
    pub csad_up: Result<HerdingFit, HerdingError>,
    pub csad_down: Result<HerdingFit, HerdingError>,
    pub csad: HerdingFit,
}

pub fn full_period_analysis(panel: &ReturnPanel, settings: &HerdingSettings) -> Result<FullPeriodFits, HerdingError> {
    let label = "full period";
    let cssd = cssd_series(panel, settings.basis)?;
    let csad = csad_series(panel, settings.basis)?;
    let dummies = extreme_dummies(panel.market(), settings.tail_fraction)?;
    let market = panel.market();
    Ok(FullPeriodFits {
        cssd: fit_cssd(&cssd, &dummies, settings, label)?,
        csad_base: fit_csad_base(&csad, market, settings, label)?,
        csad_up: fit_csad_directional(&csad, market, MarketDirection::Up, settings, label),
        csad_down: fit_csad_directional(&csad, market, MarketDirection::Down, settings, label),
        csad: fit_csad_asymmetric(&csad, market, settings, label)?,
    })
}

/// Fits CSSD and CSAD regressions over one resolved window; tails are computed within it.
pub fn analyze_window(
    panel: &ReturnPanel,
    window: EventWindow,
    settings: &HerdingSettings,
) -> Result<WindowFits, HerdingError> {
    let range = window.resolve(panel.dates())?;
    let label = window.label();
    if range.len() < MIN_REGRESSION_OBS {
        return Err(HerdingError::WindowTooShort {
            label,
            needed: MIN_REGRESSION_OBS,
            got: range.len(),
        });
    }
    let sub = panel.slice(range.clone());
    let cssd = cssd_series(&sub, settings.basis)?;
    let csad = csad_series(&sub, settings.basis)?;
    let dummies = extreme_dummies(sub.market(), settings.tail_fraction)?;
    Ok(WindowFits {
        window,
        first_date: sub.dates()[0],
        last_date: sub.dates()[sub.n_dates() - 1],
        range,
        cssd: fit_cssd(&cssd, &dummies, settings, &label)?,
        csad: fit_csad_asymmetric(&csad, sub.market(), settings, &label)?,
    })
}

/// Before/after fits for each anchor at one horizon. Fails on the first unusable window.
pub fn event_split_analysis(
    panel: &ReturnPanel,
    anchors: &[NaiveDate],
    horizon: Horizon,
    settings: &HerdingSettings,
) -> Result<Vec<WindowFits>, HerdingError> {
    let mut out = Vec::with_capacity(anchors.len() * 2);
    for &anchor in anchors {
        for side in [Side::Before, Side::After] {
            out.push(analyze_window(
                panel,
                EventWindow::new(anchor, side, horizon),
                settings,
            )?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityCell {
    pub anchor: NaiveDate,
    pub side: Side,
    pub months: u32,
    /// `Err` marks a non-estimable cell; it is never replaced by zeros.
    pub result: Result<WindowFits, HerdingError>,
}

/// Anchor × side × horizon grid of window fits; each cell fails independently.
pub fn sensitivity_analysis(
    panel: &ReturnPanel,
    anchors: &[NaiveDate],
    horizons_months: &[u32],
    settings: &HerdingSettings,
) -> Vec<SensitivityCell> {
    let mut cells = Vec::with_capacity(anchors.len() * 2 * horizons_months.len());
    for &anchor in anchors {
        for side in [Side::Before, Side::After] {
            for &months in horizons_months {
                let window = EventWindow::new(anchor, side, Horizon::Months(months));
                cells.push(SensitivityCell {
                    anchor,
                    side,
                    months,
                    result: analyze_window(panel, window, settings),
                });
            }
        }
    }
    cells
}
