//! One function per pipeline stage, each producing tables from the shared inputs.

use chrono::NaiveDate;

use super::bundle::{Cell, ColumnType, Table};
use super::config::{ChangepointConfig, RunConfig};
use super::Inputs;
use crate::changepoint::{map_changepoints_to_dates, pelt, CostModel, Penalty, Segmentation};
use crate::data::{to_cumulative, ReturnPanel, ReturnSeries};
use crate::dependence::{dependence_matrix_from_columns, DependenceMatrix, DependenceMethod};
use crate::herding::{
    analyze_window, csad_series, cssd_series, full_period_analysis, sensitivity_analysis, EventWindow, HerdingError,
    HerdingFit, HerdingModel, Horizon, Side,
};
use crate::stats::{adf, arch_lm, jarque_bera, moments, significance_stars, LagSelection};

use ColumnType::{Boolean, Date, Integer, Number, String as Text};

/// Tables from one stage plus per-item failures.
#[derive(Debug, Default)]
pub struct StageOutput {
    pub tables: Vec<Table>,
    pub errors: Vec<String>,
    /// Set when the stage could not produce its primary outputs.
    pub failed: bool,
}

fn stars(p: f64) -> Cell {
    Cell::Str(significance_stars(p).to_owned())
}

/// Assets in panel order, then the market.
fn all_series(panel: &ReturnPanel) -> Vec<ReturnSeries> {
    let mut out: Vec<ReturnSeries> = (0..panel.n_assets()).map(|i| panel.asset_series(i)).collect();
    out.push(panel.market().clone());
    out
}

fn role(panel: &ReturnPanel, ticker: &str) -> &'static str {
    if ticker == panel.market().ticker {
        "market"
    } else {
        "asset"
    }
}

pub fn describe(inputs: &Inputs) -> StageOutput {
    let mut out = StageOutput::default();
    let mut t = Table::new(
        "table4a_descriptive",
        "Descriptive statistics of daily returns; variance uses n - 1, kurtosis is excess kurtosis",
        &[
            ("ticker", Text, "instrument"),
            ("role", Text, "asset or market"),
            ("n", Integer, "number of returns"),
            ("mean", Number, "sample mean"),
            ("median", Number, "sample median"),
            ("variance", Number, "sample variance (n - 1 denominator)"),
            ("skewness", Number, "moment skewness g1"),
            (
                "skewness_p_value",
                Number,
                "two-sided normal-approximation p-value of g1",
            ),
            ("skewness_stars", Text, "significance marker of the skewness p-value"),
            ("excess_kurtosis", Number, "moment excess kurtosis g2"),
            (
                "kurtosis_p_value",
                Number,
                "two-sided normal-approximation p-value of g2",
            ),
            ("kurtosis_stars", Text, "significance marker of the kurtosis p-value"),
            ("error", Text, "reason the row could not be computed"),
        ],
    );
    for s in all_series(&inputs.panel) {
        let r = role(&inputs.panel, &s.ticker);
        match moments(&s.values) {
            Ok(m) => t.push(vec![
                s.ticker.clone().into(),
                r.into(),
                m.n.into(),
                m.mean.into(),
                m.median.into(),
                m.variance.into(),
                m.skewness.into(),
                m.skew_pvalue.into(),
                stars(m.skew_pvalue),
                m.excess_kurtosis.into(),
                m.kurt_pvalue.into(),
                stars(m.kurt_pvalue),
                Cell::Empty,
            ]),
            Err(e) => {
                out.errors.push(format!("{}: {e}", s.ticker));
                let mut row = vec![s.ticker.clone().into(), r.into(), s.len().into()];
                row.extend(std::iter::repeat_n(Cell::Empty, 9));
                row.push(e.to_string().into());
                t.push(row);
            }
        }
    }
    out.tables.push(t);

    let mut d = Table::new(
        "ingest_diagnostics",
        "Input cells or rows rejected while reading the price file",
        &[
            (
                "line",
                Integer,
                "1-based line number in the input file (header is line 1)",
            ),
            (
                "column",
                Text,
                "offending column, empty when the whole row was rejected",
            ),
            ("reason", Text, "why the input was rejected"),
        ],
    );
    for r in &inputs.rejected {
        d.push(vec![r.line.into(), r.column.clone().into(), r.reason.clone().into()]);
    }
    out.tables.push(d);
    out
}

pub fn tests(config: &RunConfig, inputs: &Inputs) -> StageOutput {
    let mut out = StageOutput::default();
    let mut t4b = Table::new(
        "table4b_arch_jb",
        "ARCH LM and Jarque-Bera tests on daily returns",
        &[
            ("ticker", Text, "instrument"),
            ("test", Text, "arch_lm or jarque_bera"),
            ("statistic", Number, "test statistic"),
            ("p_value", Number, "chi-squared p-value"),
            ("stars", Text, "significance marker"),
            ("lags", Integer, "ARCH lag order (empty for Jarque-Bera)"),
            ("error", Text, "reason the test could not be computed"),
        ],
    );
    let mut t5 = Table::new(
        "table5_adf",
        "Augmented Dickey-Fuller test with constant on daily returns",
        &[
            ("ticker", Text, "instrument"),
            ("statistic", Number, "t-ratio on the lagged level"),
            ("p_value", Number, "MacKinnon approximate p-value"),
            ("stars", Text, "significance marker"),
            ("lag", Integer, "number of lagged differences used"),
            ("max_lag", Integer, "largest lag considered"),
            ("nobs", Integer, "observations in the final regression"),
            ("crit_1pct", Number, "1% critical value"),
            ("crit_5pct", Number, "5% critical value"),
            ("crit_10pct", Number, "10% critical value"),
            ("error", Text, "reason the test could not be computed"),
        ],
    );
    let lags = config.tests.arch_lags;
    for s in all_series(&inputs.panel) {
        let arch = arch_lm(&s.values, lags);
        let jb = jarque_bera(&s.values);
        for (name, res) in [("arch_lm", arch), ("jarque_bera", jb)] {
            let lag_cell: Cell = if name == "arch_lm" { lags.into() } else { Cell::Empty };
            match res {
                Ok(r) => t4b.push(vec![
                    s.ticker.clone().into(),
                    name.into(),
                    r.statistic.into(),
                    r.p_value.into(),
                    stars(r.p_value),
                    lag_cell,
                    Cell::Empty,
                ]),
                Err(e) => {
                    out.errors.push(format!("{} {name}: {e}", s.ticker));
                    t4b.push(vec![
                        s.ticker.clone().into(),
                        name.into(),
                        Cell::Empty,
                        Cell::Empty,
                        Cell::Empty,
                        lag_cell,
                        e.to_string().into(),
                    ]);
                }
            }
        }
        let res = match config.tests.adf_lag {
            Some(l) => adf(&s.values, Some(l), LagSelection::Fixed),
            None => adf(&s.values, None, LagSelection::Aic),
        };
        match res {
            Ok(r) => {
                let p = |k: &str| r.param(k).unwrap_or(f64::NAN);
                t5.push(vec![
                    s.ticker.clone().into(),
                    r.statistic.into(),
                    r.p_value.into(),
                    stars(r.p_value),
                    (p("lag") as usize).into(),
                    (p("max_lag") as usize).into(),
                    (p("nobs") as usize).into(),
                    p("crit_1pct").into(),
                    p("crit_5pct").into(),
                    p("crit_10pct").into(),
                    Cell::Empty,
                ]);
            }
            Err(e) => {
                out.errors.push(format!("{} adf: {e}", s.ticker));
                let mut row = vec![s.ticker.clone().into()];
                row.extend(std::iter::repeat_n(Cell::Empty, 9));
                row.push(e.to_string().into());
                t5.push(row);
            }
        }
    }
    out.tables.push(t4b);
    out.tables.push(t5);
    out
}

fn matrix_rows(t: &mut Table, basis: Option<&str>, m: &DependenceMatrix) {
    for (i, a) in m.tickers.iter().enumerate() {
        for (j, b) in m.tickers.iter().enumerate() {
            let mut row: Vec<Cell> = Vec::with_capacity(5);
            if let Some(basis) = basis {
                row.push(basis.into());
            }
            row.push(a.clone().into());
            row.push(b.clone().into());
            row.push(m.values[i][j].into());
            if let Some(p) = &m.p_values {
                row.push(p[i][j].into());
                row.push(stars(p[i][j]));
            }
            t.push(row);
        }
    }
}

pub fn dependence(config: &RunConfig, inputs: &Inputs) -> StageOutput {
    let mut out = StageOutput::default();
    let panel = &inputs.panel;
    let bins = config.tests.mi_bins;
    let daily: Vec<&[f64]> = (0..panel.n_assets()).map(|i| panel.asset(i)).collect();
    let cumulative: Vec<Vec<f64>> = (0..panel.n_assets())
        .map(|i| {
            to_cumulative(&panel.asset_series(i))
                .map(|c| c.values)
                .unwrap_or_default()
        })
        .collect();
    let cumulative: Vec<&[f64]> = cumulative.iter().map(Vec::as_slice).collect();

    let mut t6 = Table::new(
        "table6_mutual_information",
        "Pairwise mutual information (nats) with equal-frequency bins; the diagonal is the binned entropy",
        &[
            ("basis", Text, "daily returns or cumulative returns"),
            ("row", Text, "first instrument"),
            ("column", Text, "second instrument"),
            ("value", Number, "mutual information in nats"),
        ],
    );
    let mi = DependenceMethod::MutualInformation { bins };
    for (label, cols) in [("daily", &daily), ("cumulative", &cumulative)] {
        match dependence_matrix_from_columns(panel.tickers(), cols, mi) {
            Ok(m) => matrix_rows(&mut t6, Some(label), &m),
            Err(e) => out.errors.push(format!("mutual information ({label}): {e}")),
        }
    }

    let mut t7 = Table::new(
        "table7_kendall_tau",
        "Pairwise Kendall tau-b of daily returns with two-sided normal-approximation p-values",
        &[
            ("row", Text, "first instrument"),
            ("column", Text, "second instrument"),
            ("tau", Number, "Kendall tau-b"),
            ("p_value", Number, "two-sided p-value"),
            ("stars", Text, "significance marker"),
        ],
    );
    match dependence_matrix_from_columns(panel.tickers(), &daily, DependenceMethod::KendallTau) {
        Ok(m) => matrix_rows(&mut t7, None, &m),
        Err(e) => out.errors.push(format!("kendall tau: {e}")),
    }
    out.failed = t6.rows.is_empty() && t7.rows.is_empty();
    out.tables.push(t6);
    out.tables.push(t7);
    out
}

fn segment(cp: &ChangepointConfig, y: &[f64], penalty: Option<f64>) -> Result<Segmentation, String> {
    let cost = CostModel::new(cp.cost, y).map_err(|e| e.to_string())?;
    let pen = match penalty {
        Some(v) => Penalty::manual(v).map_err(|e| e.to_string())?,
        None => cp.penalty.resolve(y.len(), cp.cost)?,
    };
    pelt(&cost, pen, cp.min_seg).map_err(|e| e.to_string())
}

pub fn changepoints(config: &RunConfig, inputs: &Inputs) -> StageOutput {
    let mut out = StageOutput::default();
    let cp = &config.changepoint;
    let panel = &inputs.panel;
    let mut t = Table::new(
        "table8_changepoints",
        "PELT change points of daily returns",
        &[
            ("ticker", Text, "instrument"),
            ("cost", Text, "segment cost function"),
            ("penalty_kind", Text, "bic, aic or manual"),
            ("penalty", Number, "penalty per change point"),
            ("min_seg", Integer, "minimum segment length"),
            ("n_changepoints", Integer, "number of change points for this ticker"),
            ("index", Integer, "boundary index k: the segment y[..k] ends here"),
            ("date", Date, "date at index k of the return axis"),
        ],
    );
    for i in 0..panel.n_assets() {
        let ticker = &panel.tickers()[i];
        match segment(cp, panel.asset(i), None) {
            Ok(seg) => {
                let pen = seg.penalty;
                let cps = &seg.changepoints;
                let cp_dates = map_changepoints_to_dates(&seg, panel.dates()).expect("segmentation spans the panel");
                let head = |n: usize| -> Vec<Cell> {
                    vec![
                        ticker.clone().into(),
                        cp.cost.to_string().into(),
                        format!("{:?}", pen.kind).to_lowercase().into(),
                        pen.value.into(),
                        cp.min_seg.into(),
                        n.into(),
                    ]
                };
                if cps.is_empty() {
                    let mut row = head(0);
                    row.extend([Cell::Empty, Cell::Empty]);
                    t.push(row);
                }
                for (&k, d) in cps.iter().zip(cp_dates) {
                    let mut row = head(cps.len());
                    row.extend([k.into(), d.into()]);
                    t.push(row);
                }
            }
            Err(e) => out.errors.push(format!("{ticker}: {e}")),
        }
    }
    out.failed = t.rows.is_empty() && panel.n_assets() > 0;
    out.tables.push(t);
    if !cp.sweep.is_empty() {
        match penalty_sweep(panel, cp, &cp.sweep) {
            Ok(s) => out.tables.push(s),
            Err(e) => out.errors.push(format!("penalty sweep: {e}")),
        }
    }
    out
}

fn target_column(d: NaiveDate) -> String {
    format!("near_{}", d.format("%Y_%m_%d"))
}

/// Whether some change point falls within `tolerance` trading days of `target`.
///
/// The target is placed on the first trading day on or after it; change point `k` sits on `dates[k]`.
pub fn near_target(dates: &[NaiveDate], changepoints: &[usize], target: NaiveDate, tolerance: usize) -> bool {
    if dates.is_empty() || target < dates[0] || target > dates[dates.len() - 1] {
        return false;
    }
    let pos = dates.partition_point(|d| *d < target);
    changepoints.iter().any(|&k| k.abs_diff(pos) <= tolerance)
}

/// Change-point counts and dates per ticker at each absolute penalty in `grid`.
pub fn penalty_sweep(panel: &ReturnPanel, cp: &ChangepointConfig, grid: &[f64]) -> Result<Table, String> {
    if grid.is_empty() {
        return Err("penalty grid must not be empty".to_owned());
    }
    if let Some(v) = grid.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(format!("penalty {v} must be finite and nonnegative"));
    }
    let targets: Vec<String> = cp.target_dates.iter().map(|d| target_column(*d)).collect();
    let mut cols: Vec<(&str, ColumnType, &str)> = vec![
        ("ticker", Text, "instrument"),
        ("penalty", Number, "absolute penalty per change point"),
        ("n_changepoints", Integer, "number of change points"),
        ("dates", Text, "semicolon-separated change-point dates"),
    ];
    for c in &targets {
        cols.push((
            c,
            Boolean,
            "a change point lies within the tolerance of this target date",
        ));
    }
    cols.push(("all_targets", Boolean, "every target date is matched"));
    let mut t = Table::new(
        "penalty_sweep",
        "PELT change points of daily returns over a grid of penalties",
        &cols,
    );
    let dates = panel.dates();
    for i in 0..panel.n_assets() {
        for &beta in grid {
            let seg = segment(cp, panel.asset(i), Some(beta)).map_err(|e| format!("{}: {e}", panel.tickers()[i]))?;
            let cps = &seg.changepoints;
            let joined = map_changepoints_to_dates(&seg, dates)
                .expect("segmentation spans the panel")
                .iter()
                .map(|d| d.format("%Y-%m-%d").to_string())
                .collect::<Vec<_>>()
                .join(";");
            let hits: Vec<bool> = cp
                .target_dates
                .iter()
                .map(|d| near_target(dates, cps, *d, cp.tolerance_days))
                .collect();
            let mut row: Vec<Cell> = vec![
                panel.tickers()[i].clone().into(),
                beta.into(),
                cps.len().into(),
                joined.into(),
            ];
            row.extend(hits.iter().map(|h| Cell::Bool(*h)));
            row.push(hits.iter().all(|h| *h).into());
            t.push(row);
        }
    }
    Ok(t)
}

const FIT_COLUMNS: &[(&str, ColumnType, &str)] = &[
    ("anchor", Date, "anchor date of the window (empty for the full period)"),
    ("side", Text, "before or after the anchor"),
    ("horizon", Text, "full or k months"),
    ("window_start", Date, "first date in the window"),
    ("window_end", Date, "last date in the window"),
    ("n_obs", Integer, "observations used by the regression"),
    ("tail_fraction", Number, "extreme-day tail fraction (CSSD model only)"),
    ("model", Text, "regression model"),
    ("coefficient", Text, "regressor name"),
    ("estimate", Number, "OLS coefficient"),
    ("std_error", Number, "standard error"),
    ("t_stat", Number, "t statistic"),
    ("p_value", Number, "two-sided Student-t p-value"),
    ("stars", Text, "significance marker"),
    ("r_squared", Number, "coefficient of determination"),
    (
        "verdict",
        Text,
        "herding, anti_herding or inconclusive; set on the deciding coefficient",
    ),
    ("status", Text, "estimated or non_estimable"),
    ("note", Text, "reason a window could not be estimated"),
];

#[derive(Debug, Clone, Default)]
struct WindowCtx {
    anchor: Option<NaiveDate>,
    side: Option<Side>,
    horizon: String,
    start: Option<NaiveDate>,
    end: Option<NaiveDate>,
}

impl WindowCtx {
    fn head(&self, n_obs: Option<usize>, tail: Option<f64>, model: HerdingModel) -> Vec<Cell> {
        vec![
            self.anchor.into(),
            self.side.map(|s| s.to_string()).into(),
            self.horizon.clone().into(),
            self.start.into(),
            self.end.into(),
            n_obs.into(),
            tail.into(),
            model.to_string().into(),
        ]
    }
}

fn fit_table(name: &str, description: &str) -> Table {
    Table::new(name, description, FIT_COLUMNS)
}

fn push_fit(t: &mut Table, ctx: &WindowCtx, tail: Option<f64>, f: &HerdingFit) {
    let fit = &f.fit;
    for (j, name) in fit.names.iter().enumerate() {
        let mut row = ctx.head(Some(fit.n), tail, f.model);
        row.extend([
            name.clone().into(),
            fit.coef[j].into(),
            fit.se[j].into(),
            fit.t_stat[j].into(),
            fit.p_value[j].into(),
            stars(fit.p_value[j]),
            fit.r_squared.into(),
            if name == f.deciding_coefficient {
                f.verdict.to_string().into()
            } else {
                Cell::Empty
            },
            "estimated".into(),
            Cell::Empty,
        ]);
        t.push(row);
    }
}

fn push_non_estimable(t: &mut Table, ctx: &WindowCtx, tail: Option<f64>, model: HerdingModel, reason: &HerdingError) {
    let mut row = ctx.head(None, tail, model);
    row.extend(std::iter::repeat_n(Cell::Empty, 8));
    row.extend(["non_estimable".into(), reason.to_string().into()]);
    t.push(row);
}

/// Window fits for every tail; the CSAD model does not depend on the tail and is emitted once.
fn push_window(t: &mut Table, panel: &ReturnPanel, config: &RunConfig, window: EventWindow) {
    let mut ctx = WindowCtx {
        anchor: Some(window.anchor),
        side: Some(window.side),
        horizon: window.horizon.to_string(),
        ..WindowCtx::default()
    };
    let results: Vec<_> = config
        .herding
        .tail_fractions
        .iter()
        .map(|&tail| (tail, analyze_window(panel, window, &config.herding.settings(tail))))
        .collect();
    if let Some(Ok(w)) = results.iter().map(|(_, r)| r).find(|r| r.is_ok()) {
        ctx.start = Some(w.first_date);
        ctx.end = Some(w.last_date);
    }
    for (tail, r) in &results {
        match r {
            Ok(w) => push_fit(t, &ctx, Some(*tail), &w.cssd),
            Err(e) => push_non_estimable(t, &ctx, Some(*tail), HerdingModel::CssdEq4, e),
        }
    }
    match results.first().map(|(_, r)| r) {
        Some(Ok(w)) => push_fit(t, &ctx, None, &w.csad),
        Some(Err(e)) => push_non_estimable(t, &ctx, None, HerdingModel::CsadEq8, e),
        None => {}
    }
}

pub fn herding(config: &RunConfig, inputs: &Inputs) -> StageOutput {
    let mut out = StageOutput::default();
    let panel = &inputs.panel;
    let dates = panel.dates();
    let full_ctx = WindowCtx {
        horizon: Horizon::Full.to_string(),
        start: dates.first().copied(),
        end: dates.last().copied(),
        ..WindowCtx::default()
    };
    let mut t9 = fit_table(
        "table9_full_period",
        "Full-period CSSD regression on extreme-day dummies and CSAD regression on R_m, |R_m| and R_m^2",
    );
    let mut sup = fit_table(
        "herding_supplementary",
        "Full-period CSAD regressions on R_m and R_m^2, and on |R_m| and R_m^2 over up and down markets",
    );
    let mut csad = None;
    for &tail in &config.herding.tail_fractions {
        match full_period_analysis(panel, &config.herding.settings(tail)) {
            Ok(f) => {
                push_fit(&mut t9, &full_ctx, Some(tail), &f.cssd);
                if csad.is_none() {
                    csad = Some(f.csad.clone());
                    push_fit(&mut sup, &full_ctx, None, &f.csad_base);
                    for (model, r) in [
                        (HerdingModel::CsadEq6Up, &f.csad_up),
                        (HerdingModel::CsadEq7Down, &f.csad_down),
                    ] {
                        match r {
                            Ok(fit) => push_fit(&mut sup, &full_ctx, None, fit),
                            Err(e) => {
                                out.errors.push(format!("{model}: {e}"));
                                push_non_estimable(&mut sup, &full_ctx, None, model, e);
                            }
                        }
                    }
                }
            }
            Err(e) => out.errors.push(format!("full period (tail {tail}): {e}")),
        }
    }
    if let Some(f) = &csad {
        push_fit(&mut t9, &full_ctx, None, f);
    }
    out.failed = t9.rows.is_empty();

    let mut t10 = fit_table(
        "table10_cpd_split",
        "CSSD and CSAD regressions before and after change-point anchor dates",
    );
    for &anchor in &config.herding.cpd_anchors {
        for side in [Side::Before, Side::After] {
            push_window(&mut t10, panel, config, EventWindow::new(anchor, side, Horizon::Full));
        }
    }
    let mut t11 = fit_table(
        "table11_event_split",
        "CSSD and CSAD regressions before and after event anchor dates",
    );
    for &anchor in &config.herding.event_anchors {
        for side in [Side::Before, Side::After] {
            push_window(&mut t11, panel, config, EventWindow::new(anchor, side, Horizon::Full));
        }
    }
    out.tables.extend([t9, sup, t10, t11]);
    out
}

pub fn sensitivity(config: &RunConfig, inputs: &Inputs) -> StageOutput {
    let mut out = StageOutput::default();
    let h = &config.herding;
    let anchors = h.sensitivity_anchors();
    let grids: Vec<_> = h
        .tail_fractions
        .iter()
        .map(|&tail| {
            (
                tail,
                sensitivity_analysis(&inputs.panel, &anchors, &h.horizons_months, &h.settings(tail)),
            )
        })
        .collect();
    let mut t = fit_table(
        "table12_sensitivity",
        "CSSD and CSAD regressions over 2/4/6-month style windows around each anchor; \
         windows that cannot be estimated are flagged non_estimable instead of being filled with zeros",
    );
    let Some((_, first)) = grids.first() else {
        out.failed = true;
        return out;
    };
    for (c, cell) in first.iter().enumerate() {
        let mut ctx = WindowCtx {
            anchor: Some(cell.anchor),
            side: Some(cell.side),
            horizon: Horizon::Months(cell.months).to_string(),
            ..WindowCtx::default()
        };
        if let Ok(w) = &cell.result {
            ctx.start = Some(w.first_date);
            ctx.end = Some(w.last_date);
        }
        for (tail, grid) in &grids {
            match &grid[c].result {
                Ok(w) => push_fit(&mut t, &ctx, Some(*tail), &w.cssd),
                Err(e) => push_non_estimable(&mut t, &ctx, Some(*tail), HerdingModel::CssdEq4, e),
            }
        }
        match &cell.result {
            Ok(w) => push_fit(&mut t, &ctx, None, &w.csad),
            Err(e) => push_non_estimable(&mut t, &ctx, None, HerdingModel::CsadEq8, e),
        }
    }
    out.tables.push(t);
    out
}

pub fn plots(config: &RunConfig, inputs: &Inputs) -> StageOutput {
    let mut out = StageOutput::default();
    let mut prices = Table::long_format("figure1_prices", "Aligned adjusted closing prices");
    for s in &inputs.prices {
        for (d, p) in s.dates().iter().zip(s.prices()) {
            prices.push(vec![(*d).into(), s.ticker().into(), (*p).into()]);
        }
    }
    let mut cum = Table::long_format(
        "figure2_cumulative_returns",
        "Cumulative returns under the configured return convention",
    );
    for s in all_series(&inputs.panel) {
        match to_cumulative(&s) {
            Ok(c) => {
                for (d, v) in c.dates.iter().zip(&c.values) {
                    cum.push(vec![(*d).into(), c.ticker.clone().into(), (*v).into()]);
                }
            }
            Err(e) => out.errors.push(format!("{}: {e}", s.ticker)),
        }
    }
    let mut disp = Table::long_format("figure4_dispersion", "Daily CSSD and CSAD around the deviation basis");
    for (label, series) in [
        ("CSSD", cssd_series(&inputs.panel, config.herding.basis)),
        ("CSAD", csad_series(&inputs.panel, config.herding.basis)),
    ] {
        match series {
            Ok(s) => {
                for (d, v) in s.dates.iter().zip(&s.values) {
                    disp.push(vec![(*d).into(), label.into(), (*v).into()]);
                }
            }
            Err(e) => out.errors.push(format!("{label}: {e}")),
        }
    }
    out.tables.extend([prices, cum, disp]);
    out
}
