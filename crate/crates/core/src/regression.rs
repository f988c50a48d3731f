//! Ordinary least squares with classical and Newey-West inference.
//!
//! Coefficients come from a Householder QR factorisation of the design
//! matrix; the normal equations are never formed.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

/// Relative threshold on `|R_jj| / max |R_ii|` below which a column is declared collinear.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("design matrix has {rows} rows but response has {len} values")]
    DimensionMismatch { rows: usize, len: usize },
    #[error("need more observations ({rows}) than regressors ({cols})")]
    TooFewObservations { rows: usize, cols: usize },
    #[error("design matrix is rank deficient at column {column:?}")]
    RankDeficient { column: String },
    #[error("non-finite value in column {0:?}")]
    NonFinite(String),
    #[error("design matrix has no columns")]
    Empty,
}

/// Named regressor columns over a fixed number of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl DesignMatrix {
    pub fn new(rows: usize) -> Self {
        Self {
            rows,
            names: Vec::new(),
            columns: Vec::new(),
        }
    }

    /// Adds a constant column named `const`.
    pub fn with_intercept(self) -> Self {
        let rows = self.rows;
        self.with_column("const", vec![1.0; rows])
    }

    /// Adds a named column.
    ///
    /// Panics if the column length does not match the row count; that is a
    /// programming error, not a data condition.
    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.rows, "column length must equal row count");
        self.names.push(name.into());
        self.columns.push(values);
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn has_intercept(&self) -> bool {
        self.columns
            .iter()
            .any(|c| !c.is_empty() && c.iter().all(|v| *v == c[0]) && c[0] != 0.0)
    }

    fn validate(&self, y: &[f64]) -> Result<(), RegressionError> {
        if self.columns.is_empty() {
            return Err(RegressionError::Empty);
        }
        if y.len() != self.rows {
            return Err(RegressionError::DimensionMismatch {
                rows: self.rows,
                len: y.len(),
            });
        }
        if self.rows <= self.cols() {
            return Err(RegressionError::TooFewObservations {
                rows: self.rows,
                cols: self.cols(),
            });
        }
        for (name, col) in self.names.iter().zip(&self.columns) {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(RegressionError::NonFinite(name.clone()));
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(RegressionError::NonFinite("response".to_owned()));
        }
        Ok(())
    }

    fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols(), |i, j| self.columns[j][i])
    }
}

/// Standard-error convention used for a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Covariance {
    Classical,
    NeweyWest { bandwidth: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub t_stat: Vec<f64>,
    pub p_value: Vec<f64>,
    pub r_squared: f64,
    pub n: usize,
    pub df_resid: usize,
    pub ssr: f64,
    pub residuals: Vec<f64>,
    pub covariance: Covariance,
}

impl RegressionFit {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Gaussian log-likelihood at the MLE variance `ssr / n`.
    pub fn log_likelihood(&self) -> f64 {
        let n = self.n as f64;
        -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + (self.ssr / n).ln() + 1.0)
    }

    pub fn aic(&self) -> f64 {
        -2.0 * self.log_likelihood() + 2.0 * self.coef.len() as f64
    }
}

struct QrSolution {
    coef: DVector<f64>,
    /// (X'X)^{-1}
    xtx_inv: DMatrix<f64>,
    residuals: Vec<f64>,
}

fn solve(x: &DesignMatrix, y: &[f64]) -> Result<QrSolution, RegressionError> {
    x.validate(y)?;
    let xm = x.to_matrix();
    let yv = DVector::from_column_slice(y);
    let qr = xm.clone().qr();
    let r = qr.r();
    let k = x.cols();
    let max_diag = (0..k).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    for j in 0..k {
        if max_diag == 0.0 || r[(j, j)].abs() <= RANK_TOLERANCE * max_diag {
            return Err(RegressionError::RankDeficient {
                column: x.names[j].clone(),
            });
        }
    }
    let qty = qr.q().transpose() * &yv;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| RegressionError::RankDeficient {
            column: x.names[k - 1].clone(),
        })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| RegressionError::RankDeficient {
            column: x.names[k - 1].clone(),
        })?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let fitted = &xm * &coef;
    let residuals = (yv - fitted).iter().copied().collect();
    Ok(QrSolution {
        coef,
        xtx_inv,
        residuals,
    })
}

fn assemble(x: &DesignMatrix, y: &[f64], sol: QrSolution, cov: DMatrix<f64>, covariance: Covariance) -> RegressionFit {
    let n = x.rows();
    let k = x.cols();
    let df_resid = n - k;
    let ssr: f64 = sol.residuals.iter().map(|e| e * e).sum();
    let r_squared = if x.has_intercept() {
        let mean = y.iter().sum::<f64>() / n as f64;
        let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        if sst > 0.0 {
            (1.0 - ssr / sst).clamp(0.0, 1.0)
        } else {
            0.0
        }
    } else {
        let sst: f64 = y.iter().map(|v| v * v).sum();
        if sst > 0.0 {
            1.0 - ssr / sst
        } else {
            0.0
        }
    };
    let coef: Vec<f64> = sol.coef.iter().copied().collect();
    let se: Vec<f64> = (0..k).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    let t_stat: Vec<f64> = coef.iter().zip(&se).map(|(b, s)| b / s).collect();
    let dist = StudentsT::new(0.0, 1.0, df_resid as f64).expect("df_resid > 0");
    let p_value = t_stat
        .iter()
        .map(|t| {
            if t.is_finite() {
                (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
            } else if t.is_nan() {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    RegressionFit {
        names: x.names().to_vec(),
        coef,
        se,
        t_stat,
        p_value,
        r_squared,
        n,
        df_resid,
        ssr,
        residuals: sol.residuals,
        covariance,
    }
}

/// OLS with homoskedastic standard errors `s² (X'X)^{-1}`, `s² = SSR / (n - k)`.
pub fn ols(x: &DesignMatrix, y: &[f64]) -> Result<RegressionFit, RegressionError> {
    let sol = solve(x, y)?;
    let dof = (x.rows() - x.cols()) as f64;
    let s2 = sol.residuals.iter().map(|e| e * e).sum::<f64>() / dof;
    let cov = &sol.xtx_inv * s2;
    Ok(assemble(x, y, sol, cov, Covariance::Classical))
}

/// OLS coefficients with Newey-West (Bartlett kernel) standard errors.
///
/// Bandwidth 0 gives White's HC0 estimator. No small-sample scaling is applied.
pub fn ols_hac(x: &DesignMatrix, y: &[f64], bandwidth: usize) -> Result<RegressionFit, RegressionError> {
    let sol = solve(x, y)?;
    let n = x.rows();
    let k = x.cols();
    let mut meat = DMatrix::<f64>::zeros(k, k);
    let score = |t: usize| -> DVector<f64> { DVector::from_fn(k, |j, _| x.column(j)[t] * sol.residuals[t]) };
    let scores: Vec<DVector<f64>> = (0..n).map(score).collect();
    for s in &scores {
        meat += s * s.transpose();
    }
    for lag in 1..=bandwidth.min(n - 1) {
        let w = 1.0 - lag as f64 / (bandwidth as f64 + 1.0);
        let mut gamma = DMatrix::<f64>::zeros(k, k);
        for t in lag..n {
            gamma += &scores[t] * scores[t - lag].transpose();
        }
        meat += (&gamma + gamma.transpose()) * w;
    }
    let cov = &sol.xtx_inv * meat * &sol.xtx_inv;
    Ok(assemble(x, y, sol, cov, Covariance::NeweyWest { bandwidth }))
}
