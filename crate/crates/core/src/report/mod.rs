//! Configurable pipeline: ingest, statistics, change points, herding, and report emission.
//!
//! Every stage reads the same validated inputs and fails independently; a
//! stage that errors is recorded in the manifest while the others still write
//! their tables. All files go through a single [`BundleWriter`], which also
//! produces `manifest.json` with a SHA-256 digest per file.

mod bundle;
mod config;
mod stages;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use thiserror::Error;

pub use bundle::{
    sha256_hex, BundleWriter, Cell, Column, ColumnType, FileEntry, Manifest, StageState, StageStatus, Table,
    MANIFEST_FILE,
};
pub use config::{ChangepointConfig, HerdingConfig, PenaltySetting, RunConfig, TestsConfig};
pub use stages::{near_target, penalty_sweep};

use crate::data::{align, load_csv, PriceSeries, ReturnPanel, RowDiagnostic};

pub const SOFTWARE: &str = "comove";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Describe,
    Tests,
    Dependence,
    Cpd,
    Herding,
    Sensitivity,
    Plots,
}

impl Stage {
    /// Execution order.
    pub const ALL: [Stage; 7] = [
        Stage::Describe,
        Stage::Tests,
        Stage::Dependence,
        Stage::Cpd,
        Stage::Herding,
        Stage::Sensitivity,
        Stage::Plots,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Describe => "describe",
            Stage::Tests => "tests",
            Stage::Dependence => "dependence",
            Stage::Cpd => "cpd",
            Stage::Herding => "herding",
            Stage::Sensitivity => "sensitivity",
            Stage::Plots => "plots",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| {
            let names: Vec<_> = Stage::ALL.iter().map(|s| s.name()).collect();
            format!("unknown stage {s:?}; expected one of {}", names.join(", "))
        })
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    /// Problems found before any computation started.
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
    #[error("cannot write report: {0}")]
    Output(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Run a single stage instead of all of them.
    pub stage: Option<Stage>,
    /// Replaces `changepoint.sweep`.
    pub sweep: Option<Vec<f64>>,
    /// Replaces `output_dir`.
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

impl RunSummary {
    pub fn is_complete(&self) -> bool {
        !self.manifest.partial
    }
}

/// Validated, aligned data shared by every stage.
#[derive(Debug, Clone)]
pub struct Inputs {
    /// Aligned prices, assets first and the market last.
    pub prices: Vec<PriceSeries>,
    pub panel: ReturnPanel,
    pub rejected: Vec<RowDiagnostic>,
    pub data_sha256: String,
}

/// Reads the price file and checks every data-dependent config constraint.
pub fn load_inputs(config: &RunConfig) -> Result<Inputs, Vec<String>> {
    let bytes = std::fs::read(&config.data_path)
        .map_err(|e| vec![format!("cannot read data_path {}: {e}", config.data_path.display())])?;
    let loaded = load_csv(&config.data_path, &config.csv_schema()).map_err(|e| vec![e.to_string()])?;
    let mut issues = Vec::new();
    if !loaded.series.iter().any(|s| s.ticker() == config.market_ticker) {
        issues.push(format!(
            "market_ticker {} is not a column of the data",
            config.market_ticker
        ));
    }
    if loaded.series.len() < 2 {
        issues.push("the data needs at least one asset column besides the market".to_owned());
    }
    if !issues.is_empty() {
        return Err(issues);
    }
    let aligned = align(&loaded.series).map_err(|e| vec![e.to_string()])?;
    let (mut prices, market): (Vec<_>, Vec<_>) = aligned.into_iter().partition(|s| s.ticker() != config.market_ticker);
    prices.extend(market);
    let panel = ReturnPanel::from_prices(&prices, &config.market_ticker, config.return_convention)
        .map_err(|e| vec![e.to_string()])?;
    let dates = panel.dates();
    if dates.is_empty() {
        return Err(vec!["the aligned data has fewer than two dates".to_owned()]);
    }
    let (first, last) = (dates[0], dates[dates.len() - 1]);
    for (key, anchor) in config.anchors() {
        if anchor < first || anchor > last {
            issues.push(format!(
                "{key}: anchor {anchor} is outside the data range {first} to {last}"
            ));
        }
    }
    if !issues.is_empty() {
        return Err(issues);
    }
    Ok(Inputs {
        prices,
        panel,
        rejected: loaded.rejected,
        data_sha256: sha256_hex(&bytes),
    })
}

fn effective_config(config: &RunConfig, options: &RunOptions) -> RunConfig {
    let mut cfg = config.clone();
    if let Some(dir) = &options.out_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(sweep) = &options.sweep {
        cfg.changepoint.sweep = sweep.clone();
    }
    cfg
}

fn check_output_dir(dir: &Path) -> Option<String> {
    let entries = std::fs::read_dir(dir).ok()?;
    let has_files = entries.flatten().next().is_some();
    if has_files && !dir.join(MANIFEST_FILE).is_file() {
        Some(format!(
            "output directory {} is not empty and holds no previous {MANIFEST_FILE}",
            dir.display()
        ))
    } else {
        None
    }
}

/// Runs the requested stages and writes the bundle.
///
/// Returns `Ok` when validation passed, even if some stages failed; check
/// [`RunSummary::is_complete`].
pub fn run(config: &RunConfig, options: &RunOptions) -> Result<RunSummary, RunError> {
    let cfg = effective_config(config, options);
    let mut issues = cfg.validate();
    if matches!(&options.sweep, Some(s) if s.is_empty()) {
        issues.push("--sweep needs at least one penalty value".to_owned());
    }
    issues.extend(check_output_dir(&cfg.output_dir));
    if !issues.is_empty() {
        return Err(RunError::Validation(issues));
    }
    let inputs = load_inputs(&cfg).map_err(RunError::Validation)?;
    info!(
        "loaded {} assets plus {} over {} return dates ({} rejected input cells)",
        inputs.panel.n_assets(),
        cfg.market_ticker,
        inputs.panel.n_dates(),
        inputs.rejected.len()
    );

    let mut writer = BundleWriter::open(&cfg.output_dir)?;
    let mut statuses = BTreeMap::new();
    let selected: Vec<Stage> = match options.stage {
        Some(s) => vec![s],
        None => Stage::ALL.to_vec(),
    };
    for stage in selected {
        info!("stage {stage}: running");
        let out = match stage {
            Stage::Describe => stages::describe(&inputs),
            Stage::Tests => stages::tests(&cfg, &inputs),
            Stage::Dependence => stages::dependence(&cfg, &inputs),
            Stage::Cpd => stages::changepoints(&cfg, &inputs),
            Stage::Herding => stages::herding(&cfg, &inputs),
            Stage::Sensitivity => stages::sensitivity(&cfg, &inputs),
            Stage::Plots => stages::plots(&cfg, &inputs),
        };
        for table in &out.tables {
            writer.write_table(table, stage.name())?;
        }
        for e in &out.errors {
            warn!("stage {stage}: {e}");
        }
        let status = if out.failed {
            StageState::Failed
        } else if out.errors.is_empty() {
            StageState::Ok
        } else {
            StageState::Partial
        };
        info!("stage {stage}: {status:?}, {} tables", out.tables.len());
        statuses.insert(
            stage.name().to_owned(),
            StageStatus {
                status,
                errors: out.errors,
            },
        );
    }
    let partial = statuses.values().any(|s: &StageStatus| s.status != StageState::Ok);
    let config_json = serde_json::to_vec(&cfg).expect("config serializes");
    let manifest = writer.finish(Manifest {
        software: SOFTWARE.to_owned(),
        version: VERSION.to_owned(),
        config_sha256: sha256_hex(&config_json),
        data_sha256: inputs.data_sha256.clone(),
        seed: cfg.seed,
        partial,
        stages: statuses,
        files: Vec::new(),
    })?;
    Ok(RunSummary {
        out_dir: cfg.output_dir,
        manifest,
    })
}

pub fn run_all(config: &RunConfig) -> Result<RunSummary, RunError> {
    run(config, &RunOptions::default())
}

pub fn run_stage(config: &RunConfig, stage: Stage) -> Result<RunSummary, RunError> {
    run(
        config,
        &RunOptions {
            stage: Some(stage),
            ..RunOptions::default()
        },
    )
}
