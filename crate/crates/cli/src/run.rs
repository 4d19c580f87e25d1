//! Command dispatch.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ginibre_tau::hub::{self, Comparison, Experiment, Verdict};
use ginibre_tau::moments::{self, MomentStore};
use ginibre_tau::tauseries;
use serde::Serialize;

use crate::config::{Command, Format, RunConfig};
use crate::emit::{self, Cell, Table};

/// What a command produced.
#[derive(Debug)]
pub struct Outcome {
    pub table: Table,
    /// Summary line for the terminal.
    pub summary: String,
    /// None for commands without a pass/fail notion.
    pub verdicts: Option<Vec<Verdict>>,
    json: serde_json::Value,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.verdicts.as_ref().is_none_or(|v| v.iter().all(|v| v.pass))
    }
}

#[derive(Debug)]
pub enum RunError {
    Compute(ginibre_tau::Error),
    Io(PathBuf, io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Compute(e) => write!(f, "{e}"),
            RunError::Io(p, e) => write!(f, "cannot write {}: {e}", p.display()),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ginibre_tau::Error> for RunError {
    fn from(e: ginibre_tau::Error) -> Self {
        RunError::Compute(e)
    }
}

fn verdict_outcome(verdicts: Vec<Verdict>) -> Outcome {
    let mut table = Table::new(&["name", "pass", "margin", "measured", "tolerance", "detail", "error"]);
    for v in &verdicts {
        table.push(vec![
            v.name.clone().into(),
            v.pass.into(),
            v.margin.into(),
            v.measured.into(),
            v.tolerance.into(),
            v.detail.clone().into(),
            v.error.clone().unwrap_or_default().into(),
        ]);
    }
    let passed = verdicts.iter().filter(|v| v.pass).count();
    let summary = format!("{passed} of {} verdicts pass", verdicts.len());
    let json = serde_json::to_value(&verdicts).expect("verdicts serialize");
    Outcome { table, summary, verdicts: Some(verdicts), json }
}

fn single(config: &RunConfig, comparison: Comparison, store: &dyn MomentStore) -> Outcome {
    let e = Experiment {
        name: format!("{}-{}-N{}", config.command.name(), config.kind, config.n),
        spec: config.spec(),
        cutoffs: config.cutoffs(),
        tolerance: config.tolerance,
        comparison,
    };
    verdict_outcome(vec![hub::run_experiment(&e, store)])
}

#[derive(Serialize)]
struct SeriesResults {
    value: [f64; 2],
    terms: Vec<serde_json::Map<String, serde_json::Value>>,
}

pub fn execute(config: &RunConfig, store: &dyn MomentStore) -> Result<Outcome, RunError> {
    let spec = config.spec();
    Ok(match config.command {
        Command::PartitionFunction => {
            let tau = tauseries::tau_series(&spec, config.w, &config.quad, store)?;
            let t = spec.t.with_order(config.w.max(spec.t.order()));
            let value = tau.evaluate(&t);
            let mut table = Table::new(&["partition", "weight", "coefficient_re", "coefficient_im"]);
            for (lambda, c) in tau.terms() {
                table.push(vec![lambda.to_string().into(), i64::from(lambda.weight()).into(), c.re.into(), c.im.into()]);
            }
            let summary = format!("{} terms, series value {} {:+}i", tau.len(), emit::format_float(value.re), value.im);
            let json = serde_json::to_value(SeriesResults { value: [value.re, value.im], terms: emit::table_records(&table) }).expect("results serialize");
            Outcome { table, summary, verdicts: None, json }
        }
        Command::MomentsDump => {
            let size = moments::table_size(spec.charge(), spec.l, config.w);
            let pair = moments::moment_pair_cached(&spec, size, &config.quad, store)?;
            let mut table = Table::new(&["entry", "n", "m", "re", "im"]);
            for i in 0..pair.size() {
                let n = pair.base() + i as i64;
                for j in 0..pair.size() {
                    let z = pair.matrix()[(i, j)];
                    table.push(vec!["A".into(), n.into(), (pair.base() + j as i64).into(), z.re.into(), z.im.into()]);
                }
            }
            for i in 0..pair.size() {
                let z = pair.border()[i];
                table.push(vec!["a".into(), (pair.base() + i as i64).into(), Cell::Text(String::new()), z.re.into(), z.im.into()]);
            }
            let summary = format!("moment table of size {} from index {}", pair.size(), pair.base());
            let json = serde_json::to_value(emit::table_records(&table)).expect("records serialize");
            Outcome { table, summary, verdicts: None, json }
        }
        Command::CompareOracle => single(config, Comparison::SeriesVsOracleRatio, store),
        Command::KernelCheck => single(config, Comparison::KernelVsOracle { p: config.points() }, store),
        Command::GroupIntegral => {
            let group = config.group.expect("validated");
            single(config, Comparison::GroupSeriesVsMc { group }, store)
        }
        Command::DiscreteCheck => single(config, Comparison::DiscreteExact { trials: config.trials }, store),
        Command::HirotaCheck => {
            let h = &config.hirota;
            let comparison = Comparison::HirotaDecay {
                cutoffs: h.cutoffs.clone(),
                alpha: h.alpha,
                beta: h.beta,
                charge: h.charge,
                min_factor: h.min_factor,
            };
            single(config, comparison, store)
        }
        Command::Suite => verdict_outcome(hub::run_suite(&hub::standard_suite(config.seed), store)),
    })
}

/// Serialized output in the configured format.
pub fn render(config: &RunConfig, outcome: &Outcome) -> io::Result<Vec<u8>> {
    match config.format {
        Format::Csv => emit::csv_bytes(config, &outcome.table),
        Format::Json => emit::json_bytes(config, &outcome.json),
    }
}

/// Writes into `dir/<command>.<ext>` and returns the path.
pub fn write_output(config: &RunConfig, outcome: &Outcome, dir: &Path) -> Result<PathBuf, RunError> {
    let ext = match config.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let path = dir.join(format!("{}.{ext}", config.command.name()));
    let bytes = render(config, outcome).map_err(|e| RunError::Io(path.clone(), e))?;
    fs::create_dir_all(dir).map_err(|e| RunError::Io(dir.to_path_buf(), e))?;
    fs::write(&path, bytes).map_err(|e| RunError::Io(path.clone(), e))?;
    Ok(path)
}
