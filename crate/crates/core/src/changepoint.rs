//! Exact multiple change-point detection.
//!
//! [`pelt`] minimises `Σ C(segment) + β·m` over all segmentations whose
//! segments have at least `min_seg` points. [`optimal_partition_bruteforce`]
//! solves the same recurrence without pruning and exists as a reference.
//!
//! Change points are boundary indices: a change point `k` splits `y[..k]`
//! from `y[k..]`, so `k` is the 1-based position of the last point of the
//! segment it closes.

use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MIN_SEG: usize = 30;
/// Floor on the segment variance in the Gaussian costs.
pub const VARIANCE_FLOOR: f64 = 1e-12;
/// Largest series accepted by the unpruned oracle.
pub const BRUTEFORCE_MAX_LEN: usize = 500;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChangepointError {
    #[error("series of length {n} is shorter than two minimum segments ({min_seg} each)")]
    TooShort { n: usize, min_seg: usize },
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("penalty must be finite and non-negative, got {0}")]
    NegativePenalty(f64),
    #[error("minimum segment length must be positive")]
    ZeroMinSeg,
    #[error("segment [{lo}, {hi}) is invalid or shorter than {min_seg}")]
    BadSegment { lo: usize, hi: usize, min_seg: usize },
    #[error("oracle limited to {BRUTEFORCE_MAX_LEN} points, got {0}")]
    TooLongForOracle(usize),
    #[error("segmentation covers {seg} points but the date axis has {dates}")]
    LengthMismatch { seg: usize, dates: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// Gaussian likelihood with segment-specific mean and variance.
    #[default]
    NormalMeanVar,
    /// Gaussian likelihood with segment-specific mean and a global variance.
    NormalMean,
    /// Sum of squared deviations from the segment mean.
    L2,
}

impl CostKind {
    pub const ALL: [CostKind; 3] = [CostKind::NormalMeanVar, CostKind::NormalMean, CostKind::L2];

    /// Free parameters per segment, used by the information-criterion penalties.
    pub fn params_per_segment(self) -> usize {
        match self {
            CostKind::NormalMeanVar => 2,
            CostKind::NormalMean | CostKind::L2 => 1,
        }
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostKind::NormalMeanVar => "normal_mean_var",
            CostKind::NormalMean => "normal_mean",
            CostKind::L2 => "l2",
        })
    }
}

/// Segment cost over a fixed series, evaluated in O(1) from prefix sums.
#[derive(Debug, Clone)]
pub struct CostModel {
    kind: CostKind,
    /// Prefix sums of the centred series; `s1[k] = Σ_{i<k} (y_i - c)`.
    s1: Vec<f64>,
    s2: Vec<f64>,
    /// Global variance used by [`CostKind::NormalMean`].
    sigma2: f64,
}

impl CostModel {
    pub fn new(kind: CostKind, y: &[f64]) -> Result<Self, ChangepointError> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(ChangepointError::NonFinite);
        }
        let n = y.len();
        let centre = if n > 0 { y.iter().sum::<f64>() / n as f64 } else { 0.0 };
        let mut s1 = Vec::with_capacity(n + 1);
        let mut s2 = Vec::with_capacity(n + 1);
        s1.push(0.0);
        s2.push(0.0);
        for v in y {
            let d = v - centre;
            s1.push(s1.last().unwrap() + d);
            s2.push(s2.last().unwrap() + d * d);
        }
        let sigma2 = if n > 0 {
            let mean_d = s1[n] / n as f64;
            (s2[n] / n as f64 - mean_d * mean_d).max(VARIANCE_FLOOR)
        } else {
            1.0
        };
        Ok(Self { kind, s1, s2, sigma2 })
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.s1.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cost of `y[lo..hi]`; the caller guarantees `lo < hi <= n`.
    #[inline]
    pub(crate) fn cost(&self, lo: usize, hi: usize) -> f64 {
        let len = (hi - lo) as f64;
        let sum = self.s1[hi] - self.s1[lo];
        let sq = self.s2[hi] - self.s2[lo];
        let ss = (sq - sum * sum / len).max(0.0);
        match self.kind {
            CostKind::L2 => ss,
            CostKind::NormalMean => len * (LN_2PI + self.sigma2.ln()) + ss / self.sigma2,
            CostKind::NormalMeanVar => {
                let var = (ss / len).max(VARIANCE_FLOOR);
                len * (LN_2PI + var.ln() + 1.0)
            }
        }
    }

    /// Checked segment cost.
    pub fn segment_cost(&self, lo: usize, hi: usize, min_seg: usize) -> Result<f64, ChangepointError> {
        if hi > self.len() || hi <= lo || hi - lo < min_seg.max(1) {
            return Err(ChangepointError::BadSegment { lo, hi, min_seg });
        }
        Ok(self.cost(lo, hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Bic,
    Aic,
    Manual,
}

/// Per-change-point penalty β (linear in the number of change points).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub kind: PenaltyKind,
    pub value: f64,
}

impl Penalty {
    /// `p · ln n`.
    pub fn bic(n: usize, cost: CostKind) -> Self {
        Self {
            kind: PenaltyKind::Bic,
            value: cost.params_per_segment() as f64 * (n as f64).ln(),
        }
    }

    /// `2p`.
    pub fn aic(cost: CostKind) -> Self {
        Self {
            kind: PenaltyKind::Aic,
            value: 2.0 * cost.params_per_segment() as f64,
        }
    }

    pub fn manual(value: f64) -> Result<Self, ChangepointError> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(ChangepointError::NegativePenalty(value));
        }
        Ok(Self {
            kind: PenaltyKind::Manual,
            value,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub n: usize,
    /// Strictly increasing boundary indices, each in `[min_seg, n - min_seg]`.
    pub changepoints: Vec<usize>,
    /// `Σ segment costs + β·m`, summed segment by segment from the left.
    pub total_cost: f64,
    /// Optimal value as produced by the dynamic program itself.
    pub dp_objective: f64,
    pub penalty: Penalty,
    pub cost_kind: CostKind,
    pub min_seg: usize,
}

impl Segmentation {
    /// Half-open `(start, end)` segment bounds.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut bounds = Vec::with_capacity(self.changepoints.len() + 2);
        bounds.push(0);
        bounds.extend(&self.changepoints);
        bounds.push(self.n);
        bounds.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Re-evaluates the penalised objective from scratch.
    pub fn recompute_cost(&self, cost: &CostModel) -> f64 {
        penalised_cost(cost, &self.changepoints, self.penalty.value)
    }
}

fn penalised_cost(cost: &CostModel, changepoints: &[usize], beta: f64) -> f64 {
    let mut total = 0.0;
    let mut lo = 0;
    for &hi in changepoints.iter().chain(std::iter::once(&cost.len())) {
        total += cost.cost(lo, hi);
        lo = hi;
    }
    total + beta * changepoints.len() as f64
}

/// Candidate-set statistics from one PELT run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PeltDiagnostics {
    pub max_candidates: usize,
    pub mean_candidates: f64,
    pub cost_evaluations: usize,
}

fn validate(cost: &CostModel, penalty: Penalty, min_seg: usize) -> Result<(), ChangepointError> {
    if min_seg == 0 {
        return Err(ChangepointError::ZeroMinSeg);
    }
    if !(penalty.value.is_finite() && penalty.value >= 0.0) {
        return Err(ChangepointError::NegativePenalty(penalty.value));
    }
    let n = cost.len();
    if n < 2 * min_seg {
        return Err(ChangepointError::TooShort { n, min_seg });
    }
    Ok(())
}

fn backtrack(prev: &[usize], n: usize) -> Vec<usize> {
    let mut cps = Vec::new();
    let mut t = n;
    while t > 0 {
        let s = prev[t];
        if s > 0 {
            cps.push(s);
        }
        t = s;
    }
    cps.reverse();
    cps
}

fn finish(cost: &CostModel, penalty: Penalty, min_seg: usize, prev: &[usize], objective: f64) -> Segmentation {
    let n = cost.len();
    let changepoints = backtrack(prev, n);
    Segmentation {
        n,
        total_cost: penalised_cost(cost, &changepoints, penalty.value),
        dp_objective: objective,
        changepoints,
        penalty,
        cost_kind: cost.kind(),
        min_seg,
    }
}

/// PELT: optimal partitioning with candidate pruning.
pub fn pelt(cost: &CostModel, penalty: Penalty, min_seg: usize) -> Result<Segmentation, ChangepointError> {
    pelt_with_diagnostics(cost, penalty, min_seg).map(|(seg, _)| seg)
}

/// As [`pelt`], also reporting how large the candidate set grew.
///
/// A candidate `s` that fails `F(s) + C(s, t) <= F(t)` at time `t` can no
/// longer be optimal once the segment `(t, T]` is itself admissible, i.e. for
/// `T >= t + min_seg`. It is therefore retired `min_seg` steps later rather
/// than immediately, which keeps the search exact under a minimum segment length.
pub fn pelt_with_diagnostics(
    cost: &CostModel,
    penalty: Penalty,
    min_seg: usize,
) -> Result<(Segmentation, PeltDiagnostics), ChangepointError> {
    validate(cost, penalty, min_seg)?;
    let n = cost.len();
    let beta = penalty.value;
    let mut f = vec![f64::INFINITY; n + 1];
    let mut prev = vec![0usize; n + 1];
    f[0] = -beta;

    struct Candidate {
        s: usize,
        retire_at: usize,
    }
    let mut candidates = vec![Candidate {
        s: 0,
        retire_at: usize::MAX,
    }];
    let mut diag = PeltDiagnostics::default();
    let mut candidate_total = 0usize;
    let mut steps = 0usize;

    for t in min_seg..=n {
        if t >= 2 * min_seg {
            candidates.push(Candidate {
                s: t - min_seg,
                retire_at: usize::MAX,
            });
        }
        candidates.retain(|c| c.retire_at > t);
        diag.max_candidates = diag.max_candidates.max(candidates.len());
        candidate_total += candidates.len();
        steps += 1;

        let mut best = f64::INFINITY;
        let mut arg = 0;
        for c in &candidates {
            let v = f[c.s] + cost.cost(c.s, t) + beta;
            diag.cost_evaluations += 1;
            if v < best {
                best = v;
                arg = c.s;
            }
        }
        f[t] = best;
        prev[t] = arg;

        // A small slack keeps rounding from pruning a candidate that ties.
        let slack = 1e-9 * (1.0 + best.abs());
        for c in candidates.iter_mut().filter(|c| c.retire_at == usize::MAX) {
            if f[c.s] + cost.cost(c.s, t) > best + slack {
                c.retire_at = t + min_seg;
            }
        }
    }
    diag.mean_candidates = candidate_total as f64 / steps.max(1) as f64;
    Ok((finish(cost, penalty, min_seg, &prev, f[n]), diag))
}

/// Unpruned optimal partitioning, O(n²). Same objective and tie-breaking as [`pelt`].
pub fn optimal_partition_bruteforce(
    cost: &CostModel,
    penalty: Penalty,
    min_seg: usize,
) -> Result<Segmentation, ChangepointError> {
    validate(cost, penalty, min_seg)?;
    let n = cost.len();
    if n > BRUTEFORCE_MAX_LEN {
        return Err(ChangepointError::TooLongForOracle(n));
    }
    let beta = penalty.value;
    let mut f = vec![f64::INFINITY; n + 1];
    let mut prev = vec![0usize; n + 1];
    f[0] = -beta;
    for t in min_seg..=n {
        let starts = std::iter::once(0).chain(min_seg..=t.saturating_sub(min_seg));
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for s in starts.filter(|&s| s == 0 || t - s >= min_seg) {
            let v = f[s] + cost.cost(s, t) + beta;
            if v < best {
                best = v;
                arg = s;
            }
        }
        f[t] = best;
        prev[t] = arg;
    }
    Ok(finish(cost, penalty, min_seg, &prev, f[n]))
}

/// Date of each change point `k`: `dates[k]`.
pub fn map_changepoints_to_dates(seg: &Segmentation, dates: &[NaiveDate]) -> Result<Vec<NaiveDate>, ChangepointError> {
    if seg.n != dates.len() {
        return Err(ChangepointError::LengthMismatch {
            seg: seg.n,
            dates: dates.len(),
        });
    }
    Ok(seg.changepoints.iter().map(|&k| dates[k]).collect())
}
