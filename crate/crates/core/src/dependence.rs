//! Pairwise dependence: histogram mutual information and Kendall's tau-b.

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::data::ReturnPanel;

pub const DEFAULT_MI_BINS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DependenceError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("series is degenerate (all values tied)")]
    Degenerate,
    #[error("bin count must be positive")]
    ZeroBins,
    #[error("non-finite input")]
    NonFinite,
}

fn check_pair(x: &[f64], y: &[f64], min_len: usize) -> Result<(), DependenceError> {
    if x.len() != y.len() {
        return Err(DependenceError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < min_len {
        return Err(DependenceError::TooShort {
            needed: min_len,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(DependenceError::NonFinite);
    }
    Ok(())
}

/// Equal-frequency bin labels in `0..bins`.
///
/// Observations are ranked; each value takes the bin of the first rank in its
/// tie group, so tied values never straddle a bin edge.
pub fn quantile_bins(x: &[f64], bins: usize) -> Result<Vec<usize>, DependenceError> {
    if bins == 0 {
        return Err(DependenceError::ZeroBins);
    }
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    if n == 0 || x[order[0]] == x[order[n - 1]] {
        return Err(DependenceError::Degenerate);
    }
    let mut labels = vec![0; n];
    let mut group_rank = 0;
    for (rank, &idx) in order.iter().enumerate() {
        if rank > 0 && x[idx] != x[order[rank - 1]] {
            group_rank = rank;
        }
        labels[idx] = group_rank * bins / n;
    }
    Ok(labels)
}

fn entropy_from_counts(counts: &[usize], n: usize) -> f64 {
    let nf = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / nf;
            -p * p.ln()
        })
        .sum()
}

/// Entropy (nats) of the equal-frequency discretisation of `x`.
pub fn binned_entropy(x: &[f64], bins: usize) -> Result<f64, DependenceError> {
    let labels = quantile_bins(x, bins)?;
    let mut counts = vec![0usize; bins];
    labels.iter().for_each(|&l| counts[l] += 1);
    Ok(entropy_from_counts(&counts, x.len()))
}

/// Mutual information in nats between the equal-frequency discretisations of `x` and `y`.
///
/// Empty joint cells contribute nothing. Cell terms are summed in sorted order,
/// which makes the result bit-identical under swapping `x` and `y`.
pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> Result<f64, DependenceError> {
    check_pair(x, y, 10 * bins.max(1))?;
    let lx = quantile_bins(x, bins)?;
    let ly = quantile_bins(y, bins)?;
    let n = x.len();
    let mut joint = vec![0usize; bins * bins];
    let mut cx = vec![0usize; bins];
    let mut cy = vec![0usize; bins];
    for (&a, &b) in lx.iter().zip(&ly) {
        joint[a * bins + b] += 1;
        cx[a] += 1;
        cy[b] += 1;
    }
    let nf = n as f64;
    let mut terms: Vec<f64> = Vec::with_capacity(bins * bins);
    for a in 0..bins {
        for b in 0..bins {
            let c = joint[a * bins + b];
            if c == 0 {
                continue;
            }
            let ratio = (c as f64 * nf) / (cx[a] as f64 * cy[b] as f64);
            terms.push(c as f64 / nf * ratio.ln());
        }
    }
    terms.sort_by(f64::total_cmp);
    Ok(terms.iter().sum::<f64>().max(0.0))
}

/// Pair counts behind tau-b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConcordanceCounts {
    pub n: usize,
    /// Concordant minus discordant pairs.
    pub con_minus_dis: i64,
    /// Pairs tied in x.
    pub x_ties: i64,
    /// Pairs tied in y.
    pub y_ties: i64,
}

impl ConcordanceCounts {
    pub fn tau_b(&self) -> Result<f64, DependenceError> {
        let n = self.n as i64;
        let total = n * (n - 1) / 2;
        let dx = total - self.x_ties;
        let dy = total - self.y_ties;
        if dx == 0 || dy == 0 {
            return Err(DependenceError::Degenerate);
        }
        Ok(self.con_minus_dis as f64 / (dx as f64).sqrt() / (dy as f64).sqrt())
    }
}

fn tie_groups(sorted: &[f64]) -> impl Iterator<Item = i64> + '_ {
    sorted
        .chunk_by(|a, b| a == b)
        .map(|g| g.len() as i64)
        .filter(|&len| len > 1)
}

/// Counts inversions of `v` by bottom-up merge sort, leaving `v` sorted.
fn merge_count_inversions(v: &mut [f64]) -> i64 {
    let n = v.len();
    let mut buf = v.to_vec();
    let mut swaps = 0i64;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            let (mut i, mut j, mut k) = (lo, mid, lo);
            while i < mid && j < hi {
                if v[j] < v[i] {
                    buf[k] = v[j];
                    swaps += (mid - i) as i64;
                    j += 1;
                } else {
                    buf[k] = v[i];
                    i += 1;
                }
                k += 1;
            }
            buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
            k += mid - i;
            buf[k..k + hi - j].copy_from_slice(&v[j..hi]);
            lo = hi;
        }
        v.copy_from_slice(&buf);
        width *= 2;
    }
    swaps
}

/// O(n log n) concordance counts (Knight's algorithm).
pub fn concordance_counts(x: &[f64], y: &[f64]) -> ConcordanceCounts {
    let n = x.len();
    // `v + 0.0` folds -0.0 into 0.0 so that total_cmp agrees with `==`.
    let x: Vec<f64> = x.iter().map(|v| v + 0.0).collect();
    let y: Vec<f64> = y.iter().map(|v| v + 0.0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let mut x_ties = 0i64;
    let mut joint_ties = 0i64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[order[j]] == x[order[i]] {
            j += 1;
        }
        let t = (j - i) as i64;
        x_ties += t * (t - 1) / 2;
        let mut k = i;
        while k < j {
            let mut m = k + 1;
            while m < j && y[order[m]] == y[order[k]] {
                m += 1;
            }
            let u = (m - k) as i64;
            joint_ties += u * (u - 1) / 2;
            k = m;
        }
        i = j;
    }

    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let swaps = merge_count_inversions(&mut ys);
    let y_ties: i64 = tie_groups(&ys).map(|u| u * (u - 1) / 2).sum();

    let total = (n as i64) * (n as i64 - 1) / 2;
    ConcordanceCounts {
        n,
        con_minus_dis: total - x_ties - y_ties + joint_ties - 2 * swaps,
        x_ties,
        y_ties,
    }
}

/// O(n²) pair enumeration; the reference for [`concordance_counts`].
pub fn concordance_counts_bruteforce(x: &[f64], y: &[f64]) -> ConcordanceCounts {
    let n = x.len();
    let (mut s, mut tx, mut ty) = (0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = (x[i] + 0.0).total_cmp(&(x[j] + 0.0)) as i64;
            let dy = (y[i] + 0.0).total_cmp(&(y[j] + 0.0)) as i64;
            s += dx * dy;
            tx += i64::from(dx == 0);
            ty += i64::from(dy == 0);
        }
    }
    ConcordanceCounts {
        n,
        con_minus_dis: s,
        x_ties: tx,
        y_ties: ty,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KendallTau {
    pub tau: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Tie-group sums `Σ t(t-1)/2`, `Σ t(t-1)(t-2)`, `Σ t(t-1)(2t+5)`.
fn tie_sums(v: &[f64]) -> (f64, f64, f64) {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    tie_groups(&s).fold((0.0, 0.0, 0.0), |acc, t| {
        let t = t as f64;
        (
            acc.0 + t * (t - 1.0) / 2.0,
            acc.1 + t * (t - 1.0) * (t - 2.0),
            acc.2 + t * (t - 1.0) * (2.0 * t + 5.0),
        )
    })
}

/// Kendall's tau-b with a two-sided p-value from the tie-adjusted normal approximation.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<KendallTau, DependenceError> {
    check_pair(x, y, 10)?;
    let counts = concordance_counts(x, y);
    let tau = counts.tau_b()?;
    let n = x.len() as f64;
    let (xt, x0, x1) = tie_sums(x);
    let (yt, y0, y1) = tie_sums(y);
    let m = n * (n - 1.0);
    let var = (m * (2.0 * n + 5.0) - x1 - y1) / 18.0 + (2.0 * xt * yt) / m + x0 * y0 / (9.0 * m * (n - 2.0));
    let z = counts.con_minus_dis as f64 / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p_value = (2.0 * normal.sf(z.abs())).clamp(0.0, 1.0);
    Ok(KendallTau { tau, z, p_value })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DependenceMethod {
    MutualInformation { bins: usize },
    KendallTau,
}

impl DependenceMethod {
    pub fn label(&self) -> &'static str {
        match self {
            DependenceMethod::MutualInformation { .. } => "mutual_information",
            DependenceMethod::KendallTau => "kendall_tau",
        }
    }
}

/// Symmetric matrix of pairwise scores.
///
/// The diagonal holds self-dependence: marginal bin entropy for MI, 1 for tau.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceMatrix {
    pub tickers: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub p_values: Option<Vec<Vec<f64>>>,
    pub method: DependenceMethod,
    pub pair_evaluations: usize,
}

/// Evaluates every unordered pair of columns once and mirrors the result.
pub fn dependence_matrix_from_columns(
    tickers: &[String],
    columns: &[&[f64]],
    method: DependenceMethod,
) -> Result<DependenceMatrix, DependenceError> {
    let k = columns.len();
    let mut values = vec![vec![0.0; k]; k];
    let mut p_values = match method {
        DependenceMethod::KendallTau => Some(vec![vec![0.0; k]; k]),
        DependenceMethod::MutualInformation { .. } => None,
    };
    let mut evaluations = 0;
    for i in 0..k {
        values[i][i] = match method {
            DependenceMethod::MutualInformation { bins } => binned_entropy(columns[i], bins)?,
            DependenceMethod::KendallTau => 1.0,
        };
        for j in i + 1..k {
            evaluations += 1;
            let (v, p) = match method {
                DependenceMethod::MutualInformation { bins } => {
                    (mutual_information(columns[i], columns[j], bins)?, None)
                }
                DependenceMethod::KendallTau => {
                    let kt = kendall_tau(columns[i], columns[j])?;
                    (kt.tau, Some(kt.p_value))
                }
            };
            values[i][j] = v;
            values[j][i] = v;
            if let (Some(pm), Some(p)) = (p_values.as_mut(), p) {
                pm[i][j] = p;
                pm[j][i] = p;
            }
        }
    }
    Ok(DependenceMatrix {
        tickers: tickers.to_vec(),
        values,
        p_values,
        method,
        pair_evaluations: evaluations,
    })
}

pub fn dependence_matrix(panel: &ReturnPanel, method: DependenceMethod) -> Result<DependenceMatrix, DependenceError> {
    let cols: Vec<&[f64]> = (0..panel.n_assets()).map(|i| panel.asset(i)).collect();
    dependence_matrix_from_columns(panel.tickers(), &cols, method)
}
