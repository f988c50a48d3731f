//! Descriptive moments and the normality, heteroskedasticity and unit-root tests.

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

use crate::regression::{ols, DesignMatrix, RegressionError, RegressionFit};

/// Conventional significance levels, matched to `.`, `*`, `**`, `***`.
pub const SIGNIFICANCE_LEVELS: [f64; 4] = [0.1, 0.05, 0.01, 0.005];

pub const DEFAULT_ARCH_LAGS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("{test}: need at least {needed} observations, got {got}")]
    TooShort {
        test: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("{0}: series has zero variance")]
    ZeroVariance(&'static str),
    #[error("{0}: non-finite input")]
    NonFinite(&'static str),
    #[error("{test}: {source}")]
    Regression {
        test: &'static str,
        #[source]
        source: RegressionError,
    },
}

/// Star marker for a p-value under [`SIGNIFICANCE_LEVELS`].
pub fn significance_stars(p: f64) -> &'static str {
    if p <= 0.005 {
        "***"
    } else if p <= 0.01 {
        "**"
    } else if p <= 0.05 {
        "*"
    } else if p <= 0.1 {
        "."
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
    /// Every tunable that affected the statistic (lags, observations used, ...).
    pub params: BTreeMap<String, f64>,
    /// Levels from [`SIGNIFICANCE_LEVELS`] at which the null is rejected.
    pub reject_at: Vec<f64>,
}

impl TestResult {
    fn new(name: &str, statistic: f64, p_value: f64, params: BTreeMap<String, f64>) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self {
            name: name.to_owned(),
            statistic,
            p_value,
            params,
            reject_at: SIGNIFICANCE_LEVELS.iter().copied().filter(|a| p_value <= *a).collect(),
        }
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample variance with the `n - 1` divisor.
    pub variance: f64,
    /// `m3 / m2^{3/2}` with `1/n` central moments.
    pub skewness: f64,
    /// `m4 / m2² - 3` with `1/n` central moments.
    pub excess_kurtosis: f64,
    pub skew_pvalue: f64,
    pub kurt_pvalue: f64,
}

fn check_finite(test: &'static str, x: &[f64]) -> Result<(), StatsError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite(test))
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Central moments m2, m3, m4 with the 1/n divisor.
fn central_moments(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (mean, m2 / n, m3 / n, m4 / n)
}

fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Shape statistics `(g1, g2)`, failing on a constant series.
fn skew_kurt(test: &'static str, x: &[f64]) -> Result<(f64, f64), StatsError> {
    let (mean, m2, m3, m4) = central_moments(x);
    // Relative threshold so that large constant levels still count as degenerate.
    if m2 <= (f64::EPSILON * mean.abs()).powi(2) || m2 == 0.0 {
        return Err(StatsError::ZeroVariance(test));
    }
    Ok((m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0))
}

pub fn moments(x: &[f64]) -> Result<MomentSummary, StatsError> {
    const NAME: &str = "moments";
    if x.len() < 4 {
        return Err(StatsError::TooShort {
            test: NAME,
            needed: 4,
            got: x.len(),
        });
    }
    check_finite(NAME, x)?;
    let n = x.len();
    let nf = n as f64;
    let (mean, m2, _, _) = central_moments(x);
    let (skewness, excess_kurtosis) = skew_kurt(NAME, x)?;
    let normal = std_normal();
    let two_sided = |z: f64| (2.0 * normal.sf(z.abs())).clamp(0.0, 1.0);
    Ok(MomentSummary {
        n,
        mean,
        median: median(x),
        variance: m2 * nf / (nf - 1.0),
        skewness,
        excess_kurtosis,
        skew_pvalue: two_sided(skewness / (6.0 / nf).sqrt()),
        kurt_pvalue: two_sided(excess_kurtosis / (24.0 / nf).sqrt()),
    })
}

/// Jarque-Bera normality test: `n/6 (g1² + g2²/4)` against χ²(2).
pub fn jarque_bera(x: &[f64]) -> Result<TestResult, StatsError> {
    const NAME: &str = "jarque_bera";
    if x.len() < 8 {
        return Err(StatsError::TooShort {
            test: NAME,
            needed: 8,
            got: x.len(),
        });
    }
    check_finite(NAME, x)?;
    let (g1, g2) = skew_kurt(NAME, x)?;
    let n = x.len() as f64;
    let jb = n / 6.0 * (g1 * g1 + g2 * g2 / 4.0);
    // χ²(2) survival function is exp(-x/2).
    let p = (-jb / 2.0).exp();
    let params = BTreeMap::from([
        ("n".to_owned(), n),
        ("skewness".to_owned(), g1),
        ("excess_kurtosis".to_owned(), g2),
    ]);
    Ok(TestResult::new(NAME, jb, p, params))
}

/// Engle's ARCH LM test.
///
/// The series is demeaned and squared; the squares are regressed on a constant
/// and their own `lags` lags, and `LM = n_eff · R²` is compared with χ²(lags).
pub fn arch_lm(x: &[f64], lags: usize) -> Result<TestResult, StatsError> {
    const NAME: &str = "arch_lm";
    if lags == 0 || x.len() <= 2 * lags + 1 {
        return Err(StatsError::TooShort {
            test: NAME,
            needed: 2 * lags.max(1) + 2,
            got: x.len(),
        });
    }
    check_finite(NAME, x)?;
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let sq: Vec<f64> = x.iter().map(|v| (v - mean).powi(2)).collect();
    let sq_mean = sq.iter().sum::<f64>() / sq.len() as f64;
    let sq_var = sq.iter().map(|v| (v - sq_mean).powi(2)).sum::<f64>();
    if sq_var <= f64::EPSILON * sq_mean * sq_mean * sq.len() as f64 {
        return Err(StatsError::Regression {
            test: NAME,
            source: RegressionError::RankDeficient {
                column: "squared series is constant".to_owned(),
            },
        });
    }
    let n_eff = sq.len() - lags;
    let mut dm = DesignMatrix::new(n_eff).with_intercept();
    for l in 1..=lags {
        dm = dm.with_column(format!("lag{l}"), sq[lags - l..sq.len() - l].to_vec());
    }
    let fit = ols(&dm, &sq[lags..]).map_err(|source| StatsError::Regression { test: NAME, source })?;
    let lm = n_eff as f64 * fit.r_squared;
    let p = ChiSquared::new(lags as f64).expect("lags > 0").sf(lm);
    let params = BTreeMap::from([("lags".to_owned(), lags as f64), ("n_eff".to_owned(), n_eff as f64)]);
    Ok(TestResult::new(NAME, lm, p, params))
}

/// Lag-order selection for the ADF regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagSelection {
    /// Use exactly `max_lag` lagged differences.
    Fixed,
    /// Minimise AIC over `0..=max_lag` on a common sample, then refit.
    Aic,
}

/// Default maximum lag: `ceil(12 (n/100)^{1/4})`, capped at `n/2 - 2`.
pub fn schwert_max_lag(n: usize) -> usize {
    let raw = (12.0 * (n as f64 / 100.0).powf(0.25)).ceil() as usize;
    raw.min((n / 2).saturating_sub(2))
}

/// Builds the ADF regression `Δx_t = α + γ x_{t-1} + Σ δ_i Δx_{t-i}` using
/// `lags` lagged differences, on the last `nobs` available differences.
fn adf_design(x: &[f64], lags: usize, nobs: usize) -> (DesignMatrix, Vec<f64>) {
    let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let start = dx.len() - nobs;
    let level: Vec<f64> = (start..dx.len()).map(|t| x[t]).collect();
    let mut dm = DesignMatrix::new(nobs).with_intercept().with_column("level_lag", level);
    for i in 1..=lags {
        dm = dm.with_column(format!("diff_lag{i}"), (start..dx.len()).map(|t| dx[t - i]).collect());
    }
    (dm, dx[start..].to_vec())
}

/// Augmented Dickey-Fuller test with a constant and no trend.
///
/// The statistic is the t-ratio on the lagged level. Under AIC selection
/// every candidate lag is fitted on the sample trimmed by `max_lag` so the
/// criteria are comparable; the chosen lag is then refitted on its full sample.
pub fn adf(x: &[f64], max_lag: Option<usize>, selection: LagSelection) -> Result<TestResult, StatsError> {
    const NAME: &str = "adf";
    check_finite(NAME, x)?;
    let n = x.len();
    let max_lag = max_lag.unwrap_or_else(|| schwert_max_lag(n));
    if n < max_lag + 4 {
        return Err(StatsError::TooShort {
            test: NAME,
            needed: max_lag + 4,
            got: n,
        });
    }
    let reg_err = |source| StatsError::Regression { test: NAME, source };
    let n_diff = n - 1;
    let lag = match selection {
        LagSelection::Fixed => max_lag,
        LagSelection::Aic => {
            let nobs = n_diff - max_lag;
            let mut best: Option<(f64, usize)> = None;
            for k in 0..=max_lag {
                let (dm, y) = adf_design(x, k, nobs);
                let fit = ols(&dm, &y).map_err(reg_err)?;
                let aic = fit.aic();
                if best.is_none_or(|(b, _)| aic < b) {
                    best = Some((aic, k));
                }
            }
            best.map(|(_, k)| k).unwrap_or(0)
        }
    };
    let nobs = n_diff - lag;
    let (dm, y) = adf_design(x, lag, nobs);
    let fit: RegressionFit = ols(&dm, &y).map_err(reg_err)?;
    let stat = fit.t_stat[1];
    let p = mackinnon_pvalue(stat);
    let crit = mackinnon_critical_values(nobs);
    let params = BTreeMap::from([
        ("lag".to_owned(), lag as f64),
        ("max_lag".to_owned(), max_lag as f64),
        ("nobs".to_owned(), nobs as f64),
        (
            "aic_selection".to_owned(),
            f64::from(u8::from(selection == LagSelection::Aic)),
        ),
        ("crit_1pct".to_owned(), crit[0]),
        ("crit_5pct".to_owned(), crit[1]),
        ("crit_10pct".to_owned(), crit[2]),
    ]);
    Ok(TestResult::new(NAME, stat, p, params))
}

// MacKinnon (1994) response surface for one integrated variable, constant only.
const TAU_MAX_C: f64 = 2.74;
const TAU_MIN_C: f64 = -18.83;
const TAU_STAR_C: f64 = -1.61;
const TAU_C_SMALLP: [f64; 3] = [2.1659, 1.4412, 3.8269e-2];
const TAU_C_LARGEP: [f64; 4] = [1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2];

// MacKinnon (2010) finite-sample critical values (1%, 5%, 10%), constant only.
const TAU_C_2010: [[f64; 4]; 3] = [
    [-3.43035, -6.5393, -16.786, -79.433],
    [-2.86154, -2.8903, -4.234, -40.040],
    [-2.56677, -1.5384, -2.809, 0.0],
];

/// Approximate p-value of an ADF statistic (constant, no trend).
pub fn mackinnon_pvalue(stat: f64) -> f64 {
    if stat.is_nan() {
        return 1.0;
    }
    if stat > TAU_MAX_C {
        return 1.0;
    }
    if stat < TAU_MIN_C {
        return 0.0;
    }
    let poly = |c: &[f64]| c.iter().rev().fold(0.0, |acc, b| acc * stat + b);
    let z = if stat <= TAU_STAR_C {
        poly(&TAU_C_SMALLP)
    } else {
        poly(&TAU_C_LARGEP)
    };
    std_normal().cdf(z)
}

/// Critical values at 1%, 5% and 10% for a sample of `nobs` regression observations.
pub fn mackinnon_critical_values(nobs: usize) -> [f64; 3] {
    let inv = 1.0 / nobs as f64;
    TAU_C_2010.map(|b| b[0] + b[1] * inv + b[2] * inv * inv + b[3] * inv * inv * inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn symmetric_two_point_sample_has_zero_skew() {
        let x: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let m = moments(&x).unwrap();
        assert_eq!(m.skewness, 0.0);
        assert_relative_eq!(m.excess_kurtosis, -2.0, epsilon = 1e-12);
        assert_eq!(m.mean, 0.0);
    }

    #[test]
    fn ten_point_sample_against_frozen_oracle() {
        // Frozen from scipy.stats (skew, kurtosis with bias=True) and numpy var(ddof=1).
        let x = [0.3, -1.2, 0.8, 2.5, -0.4, 0.0, 1.1, -2.2, 0.6, 3.0];
        let m = moments(&x).unwrap();
        assert_relative_eq!(m.mean, 0.45, epsilon = 1e-12);
        assert_relative_eq!(m.median, 0.45, epsilon = 1e-12);
        assert_relative_eq!(m.variance, 2.440555555555556, max_relative = 1e-12);
        assert_relative_eq!(m.skewness, 0.052436863880477726, max_relative = 1e-10);
        assert_relative_eq!(m.excess_kurtosis, -0.5660518106921448, max_relative = 1e-10);
    }

    #[test]
    fn moments_errors() {
        assert!(matches!(moments(&[1.0, 2.0, 3.0]), Err(StatsError::TooShort { .. })));
        assert!(matches!(moments(&[2.0; 10]), Err(StatsError::ZeroVariance(_))));
        assert!(matches!(jarque_bera(&[2.0; 10]), Err(StatsError::ZeroVariance(_))));
    }

    #[test]
    fn jarque_bera_zero_for_mesokurtic_symmetric_sample() {
        // Mass 2/3 at zero and 1/6 at each of +-1 gives m4 / m2² = 3 exactly.
        let x = [-1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let jb = jarque_bera(&x).unwrap();
        assert!(jb.statistic.abs() < 1e-12, "{}", jb.statistic);
        assert_relative_eq!(jb.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn jarque_bera_matches_frozen_oracle() {
        // statsmodels.stats.stattools.jarque_bera on the same sample.
        let x = [0.3, -1.2, 0.8, 2.5, -0.4, 0.0, 1.1, -2.2, 0.6, 3.0];
        let jb = jarque_bera(&x).unwrap();
        assert_relative_eq!(jb.statistic, 0.13808881298430617, max_relative = 1e-10);
        assert_relative_eq!(jb.p_value, 0.9332852352345237, max_relative = 1e-10);
    }

    #[test]
    fn mackinnon_matches_published_surface() {
        // statsmodels.tsa.adfvalues.mackinnonp(stat, "c", 1)
        assert_relative_eq!(mackinnon_pvalue(-13.87), 6.49111807130508e-26, max_relative = 1e-9);
        assert_relative_eq!(mackinnon_pvalue(-16.21), 3.995515955093256e-29, max_relative = 1e-9);
        assert_relative_eq!(mackinnon_pvalue(-2.0), 0.28657309916843154, max_relative = 1e-9);
        assert_relative_eq!(mackinnon_pvalue(-1.0), 0.7532643012005655, max_relative = 1e-9);
        assert_relative_eq!(mackinnon_pvalue(-5.0), 2.2193154713956276e-05, max_relative = 1e-9);
        assert_eq!(mackinnon_pvalue(-45.57), 0.0);
        assert_eq!(mackinnon_pvalue(3.0), 1.0);
        let crit = mackinnon_critical_values(1000);
        assert_relative_eq!(crit[0], -3.43690617, epsilon = 1e-7);
        assert_relative_eq!(crit[1], -2.86443457, epsilon = 1e-7);
        assert_relative_eq!(crit[2], -2.56831121, epsilon = 1e-7);
    }

    /// Deterministic AR(1)-ARCH(1) path driven by a 31-bit LCG, reproducible outside Rust.
    fn lcg_arch_path(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut state: u64 = 12345;
        let e: Vec<f64> = (0..n)
            .map(|_| {
                state = (state * 1103515245 + 12345) % (1 << 31);
                state as f64 / (1u64 << 31) as f64 - 0.5
            })
            .collect();
        let mut x = vec![0.0f64; n];
        for t in 1..n {
            let v = 0.1 + 0.5 * x[t - 1] * x[t - 1];
            x[t] = 0.3 * x[t - 1] + v.sqrt() * e[t];
        }
        (x, e)
    }

    #[test]
    fn adf_and_arch_match_frozen_statsmodels_values() {
        // adfuller(x, autolag="AIC"), adfuller(x, maxlag=3, autolag=None),
        // het_arch(x - x.mean(), nlags) on the same path.
        let (x, e) = lcg_arch_path(600);
        assert_relative_eq!(x.iter().sum::<f64>(), -1.8070072807672966, epsilon = 1e-10);

        let r = adf(&x, None, LagSelection::Aic).unwrap();
        assert_relative_eq!(r.statistic, -18.67254804199161, max_relative = 1e-8);
        assert_eq!(r.param("lag"), Some(0.0));
        assert_eq!(r.param("nobs"), Some(599.0));

        let r = adf(&x, Some(3), LagSelection::Fixed).unwrap();
        assert_relative_eq!(r.statistic, -10.610437998089347, max_relative = 1e-8);
        assert_relative_eq!(r.p_value, 5.852918852047919e-19, max_relative = 1e-6);
        assert_eq!(r.param("nobs"), Some(596.0));

        let walk: Vec<f64> = e
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        let r = adf(&walk, None, LagSelection::Aic).unwrap();
        assert_relative_eq!(r.statistic, -1.774552731713186, max_relative = 1e-8);
        assert_relative_eq!(r.p_value, 0.3931667188356908, max_relative = 1e-8);

        let a = arch_lm(&x, 12).unwrap();
        assert_relative_eq!(a.statistic, 14.588835093009846, max_relative = 1e-8);
        assert_relative_eq!(a.p_value, 0.26469526878328725, max_relative = 1e-8);
        let a = arch_lm(&x, 3).unwrap();
        assert_relative_eq!(a.statistic, 6.219194041894752, max_relative = 1e-8);
        assert_relative_eq!(a.p_value, 0.1014195414685516, max_relative = 1e-8);
        assert_eq!(a.param("lags"), Some(3.0));
    }

    #[test]
    fn schwert_bound() {
        assert_eq!(schwert_max_lag(100), 12);
        assert_eq!(schwert_max_lag(2530), 27);
        assert_eq!(schwert_max_lag(20), 8);
    }

    #[test]
    fn short_inputs_are_rejected() {
        assert!(matches!(
            arch_lm(&[0.1, 0.2, 0.3], 12),
            Err(StatsError::TooShort { .. })
        ));
        assert!(matches!(
            adf(&[0.1, 0.2, 0.3], None, LagSelection::Aic),
            Err(StatsError::TooShort { .. })
        ));
        assert!(matches!(
            jarque_bera(&[0.1, 0.2, 0.3]),
            Err(StatsError::TooShort { .. })
        ));
    }

    #[test]
    fn arch_rejects_constant_squares() {
        let x: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(matches!(arch_lm(&x, 2), Err(StatsError::Regression { .. })));
    }

    #[test]
    fn stars_follow_legend() {
        assert_eq!(significance_stars(0.004), "***");
        assert_eq!(significance_stars(0.005), "***");
        assert_eq!(significance_stars(0.009), "**");
        assert_eq!(significance_stars(0.04), "*");
        assert_eq!(significance_stars(0.08), ".");
        assert_eq!(significance_stars(0.2), "");
    }
}
