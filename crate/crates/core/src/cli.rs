//! Library side of the `dsimon` binary: benchmark sweeps, verification
//! reports and the exit-code contract.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    exact_distribution, max_qubits_from_env, statevector_qubits, statevector_run, CostModel,
};
use crate::error::{Error, Result};
use crate::gf2::BitString;
use crate::instance::{
    big_s, check_theorem1, generate, random_nonzero_shift, verify_promise, TruthTable,
};
use crate::rng::{self, derive_seed, label_tag};
use crate::solver::{solve, Algorithm, RunReport, SolveOptions};

/// Process exit codes. Each error class has its own code.
pub mod exit {
    pub const OK: i32 = 0;
    /// A check failed or a report came back unverified.
    pub const CHECK_FAILED: i32 = 1;
    /// Command-line usage error (reported by the argument parser).
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const PROMISE_VIOLATION: i32 = 4;
    pub const BUDGET_EXHAUSTED: i32 = 5;
    pub const INVALID_ARGUMENT: i32 = 6;
    pub const IO: i32 = 7;
    pub const SIMULATION_INTEGRITY: i32 = 8;
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } => exit::PARSE,
        Error::PromiseViolation(_) => exit::PROMISE_VIOLATION,
        Error::BudgetExhausted { .. } => exit::BUDGET_EXHAUSTED,
        Error::InvalidArgument(_) | Error::TooManyQubits { .. } => exit::INVALID_ARGUMENT,
        Error::Io(_) => exit::IO,
        Error::SimulationIntegrity(_) => exit::SIMULATION_INTEGRITY,
    }
}

pub fn load_table(path: &Path) -> Result<TruthTable> {
    let text = std::fs::read_to_string(path)?;
    Ok(TruthTable::parse(&text)?.table)
}

/// Sweep description, read from a TOML file of flat keys.
#[derive(Clone, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub n_values: Vec<usize>,
    pub t_values: Vec<usize>,
    /// Codomain width; when absent each cell uses `m = n`.
    #[serde(default)]
    pub m: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<String>,
    /// Output stem: results go to `<stem>.jsonl` and `<stem>.csv`.
    pub output_path: PathBuf,
    #[serde(default)]
    pub max_runs: Option<u64>,
    /// Records wall time in each report; makes output nondeterministic.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default = "default_true")]
    pub round_trip_results: bool,
}

fn default_true() -> bool {
    true
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: BenchConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn width_for(&self, n: usize) -> usize {
        self.m.unwrap_or(n)
    }

    pub fn algorithms(&self) -> Result<Vec<Algorithm>> {
        self.algorithms.iter().map(|a| a.parse()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.n_values.is_empty() || self.t_values.is_empty() || self.algorithms.is_empty() {
            return Err(Error::invalid(
                "n_values, t_values and algorithms must be nonempty",
            ));
        }
        self.algorithms()?;
        for &n in &self.n_values {
            if !(2..=crate::instance::MAX_N).contains(&n) {
                return Err(Error::invalid(format!(
                    "n = {n} outside 2..={}",
                    crate::instance::MAX_N
                )));
            }
            let m = self.width_for(n);
            if m + 1 < n || m > crate::instance::MAX_M {
                return Err(Error::invalid(format!(
                    "m = {m} cannot hold 2^{} distinct values for n = {n}",
                    n - 1
                )));
            }
            for &t in &self.t_values {
                if t >= n {
                    return Err(Error::invalid(format!("t = {t} must be below n = {n}")));
                }
            }
        }
        Ok(())
    }
}

/// One sweep cell: a fresh instance and one solver run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub n: usize,
    pub t: usize,
    pub algorithm: Algorithm,
    pub trial: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
struct FailedRun {
    algorithm: Algorithm,
    n: usize,
    m: usize,
    t: usize,
    trial: usize,
    seed: u64,
    hidden_s: BitString,
    error: String,
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub cell: Cell,
    pub hidden_s: BitString,
    pub outcome: std::result::Result<RunReport, String>,
}

/// Seeds for a cell. The instance depends on `(n, t, trial)` only, so every
/// algorithm in a sweep sees the same functions.
pub fn cell_seeds(master: u64, cell: &Cell) -> (u64, u64, u64) {
    let base = [cell.n as u64, cell.t as u64, cell.trial as u64];
    let shift = derive_seed(master, &[base[0], base[1], base[2], label_tag("shift")]);
    let instance = derive_seed(master, &[base[0], base[1], base[2], label_tag("instance")]);
    let solver = derive_seed(
        master,
        &[base[0], base[1], label_tag(cell.algorithm.name()), base[2]],
    );
    (shift, instance, solver)
}

pub fn run_cell(config: &BenchConfig, cell: Cell) -> CellResult {
    let m = config.width_for(cell.n);
    let (shift_seed, instance_seed, solver_seed) = cell_seeds(config.seed, &cell);
    let hidden_s = random_nonzero_shift(cell.n, &mut rng::seeded(shift_seed));
    let options = SolveOptions {
        max_runs: config.max_runs,
        cost_model: CostModel {
            round_trip_results: config.round_trip_results,
        },
        ..SolveOptions::default()
    };
    let outcome = generate(cell.n, m, hidden_s, instance_seed)
        .and_then(|f| solve(&f, cell.t, cell.algorithm, solver_seed, &options))
        .map(|mut report| {
            if !config.record_timing {
                report.wall_time_ms = None;
            }
            report
        })
        .map_err(|e| e.to_string());
    CellResult {
        cell,
        hidden_s,
        outcome,
    }
}

pub fn cells(config: &BenchConfig) -> Result<Vec<Cell>> {
    let mut algorithms = config.algorithms()?;
    algorithms.sort_by_key(|a| a.name());
    algorithms.dedup();
    let mut n_values = config.n_values.clone();
    n_values.sort_unstable();
    n_values.dedup();
    let mut t_values = config.t_values.clone();
    t_values.sort_unstable();
    t_values.dedup();
    let mut out = Vec::new();
    for &n in &n_values {
        for &t in &t_values {
            for &algorithm in &algorithms {
                for trial in 0..config.trials {
                    out.push(Cell {
                        n,
                        t,
                        algorithm,
                        trial,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Runs every cell on the worker pool; results come back in cell order.
pub fn run_sweep(config: &BenchConfig) -> Result<Vec<CellResult>> {
    config.validate()?;
    Ok(cells(config)?
        .into_par_iter()
        .map(|cell| run_cell(config, cell))
        .collect())
}

pub fn jsonl(config: &BenchConfig, results: &[CellResult]) -> String {
    let mut out = String::new();
    for r in results {
        let line = match &r.outcome {
            Ok(report) => serde_json::to_string(report),
            Err(error) => serde_json::to_string(&FailedRun {
                algorithm: r.cell.algorithm,
                n: r.cell.n,
                m: config.width_for(r.cell.n),
                t: r.cell.t,
                trial: r.cell.trial,
                seed: cell_seeds(config.seed, &r.cell).2,
                hidden_s: r.hidden_s,
                error: error.clone(),
            }),
        }
        .expect("reports serialize");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Summary statistics for one `(n, t, algorithm)` group.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub n: usize,
    pub t: usize,
    pub algorithm: Algorithm,
    pub trials: usize,
    pub verified: usize,
    pub failures: usize,
    pub mean_runs: f64,
    pub median_runs: f64,
    pub mean_node_queries: f64,
    pub max_node_queries: u64,
    pub mean_total_queries: f64,
    pub median_total_queries: f64,
    pub mean_extra_queries: f64,
    pub mean_ebits: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub fn summarize(results: &[CellResult]) -> Vec<CellSummary> {
    let mut out = Vec::new();
    for group in results.chunk_by(|a, b| {
        (a.cell.n, a.cell.t, a.cell.algorithm) == (b.cell.n, b.cell.t, b.cell.algorithm)
    }) {
        let cell = group[0].cell;
        let reports: Vec<&RunReport> = group
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok())
            .collect();
        let column =
            |f: &dyn Fn(&RunReport) -> f64| -> Vec<f64> { reports.iter().map(|r| f(r)).collect() };
        let runs = column(&|r| r.runs as f64);
        let per_node =
            column(&|r| r.total_queries() as f64 / r.node_queries.as_slice().len() as f64);
        let totals = column(&|r| r.total_queries() as f64);
        out.push(CellSummary {
            n: cell.n,
            t: cell.t,
            algorithm: cell.algorithm,
            trials: group.len(),
            verified: reports.iter().filter(|r| r.verified).count(),
            failures: group.len() - reports.len(),
            mean_runs: mean(&runs),
            median_runs: median(&mut runs.clone()),
            mean_node_queries: mean(&per_node),
            max_node_queries: reports
                .iter()
                .map(|r| r.node_queries.max())
                .max()
                .unwrap_or(0),
            mean_total_queries: mean(&totals),
            median_total_queries: median(&mut totals.clone()),
            mean_extra_queries: mean(&column(&|r| r.extra_classical_queries as f64)),
            mean_ebits: mean(&column(&|r| r.ebits as f64)),
        });
    }
    out
}

pub const CSV_HEADER: &str = "n,t,algorithm,trials,verified,failures,mean_runs,median_runs,\
mean_node_queries,max_node_queries,mean_total_queries,median_total_queries,mean_extra_queries,mean_ebits";

pub fn csv(summaries: &[CellSummary]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in summaries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.4},{:.4},{:.4},{},{:.4},{:.4},{:.4},{:.4}",
            s.n,
            s.t,
            s.algorithm,
            s.trials,
            s.verified,
            s.failures,
            s.mean_runs,
            s.median_runs,
            s.mean_node_queries,
            s.max_node_queries,
            s.mean_total_queries,
            s.median_total_queries,
            s.mean_extra_queries,
            s.mean_ebits
        );
    }
    out
}

pub struct BenchOutput {
    pub jsonl_path: PathBuf,
    pub csv_path: PathBuf,
    pub csv: String,
    pub failures: usize,
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Runs the sweep and writes `<stem>.jsonl` and `<stem>.csv`.
pub fn run_bench(config: &BenchConfig) -> Result<BenchOutput> {
    let results = run_sweep(config)?;
    let summary = csv(&summarize(&results));
    let jsonl_path = with_suffix(&config.output_path, ".jsonl");
    let csv_path = with_suffix(&config.output_path, ".csv");
    if let Some(dir) = jsonl_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&jsonl_path, jsonl(config, &results))?;
    std::fs::write(&csv_path, &summary)?;
    Ok(BenchOutput {
        jsonl_path,
        csv_path,
        csv: summary,
        failures: results.iter().filter(|r| r.outcome.is_err()).count(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub n: usize,
    pub m: usize,
    pub t: usize,
    pub s: Option<BitString>,
    /// `(u, G(u) in node order, S(u))`.
    pub slices: Vec<(BitString, Vec<BitString>, String)>,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .map(|c| c.name)
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "instance: n={} m={} t={}", self.n, self.m, self.t);
        if !self.slices.is_empty() {
            let _ = writeln!(out, "G(u):");
            for (u, g, _) in &self.slices {
                let items: Vec<String> = g.iter().map(ToString::to_string).collect();
                let _ = writeln!(out, "  {u}  {{{}}}", items.join(","));
            }
            let _ = writeln!(out, "S(u):");
            for (u, _, s) in &self.slices {
                let _ = writeln!(out, "  {u}  {s}");
            }
        }
        for c in &self.checks {
            let status = match c.status {
                CheckStatus::Pass => "ok",
                CheckStatus::Fail => "FAILED",
                CheckStatus::Skipped => "skipped",
            };
            let _ = writeln!(out, "{}: {status} ({})", c.name, c.detail);
        }
        out
    }
}

pub const VERIFY_MAX_N: usize = 12;

/// Exhaustive checks on a table split at `t`.
pub fn verify_table(table: &TruthTable, t: usize) -> Result<VerifyReport> {
    let (n, m) = (table.n(), table.m());
    if n > VERIFY_MAX_N {
        return Err(Error::invalid(format!(
            "verify supports n ≤ {VERIFY_MAX_N}, got {n}"
        )));
    }
    if t >= n {
        return Err(Error::invalid(format!("t = {t} must be below n = {n}")));
    }
    let k = n - t;
    let mut report = VerifyReport {
        n,
        m,
        t,
        s: None,
        slices: Vec::new(),
        checks: Vec::new(),
    };

    let s = match verify_promise(table) {
        Ok(s) => {
            report.checks.push(Check {
                name: "promise",
                status: CheckStatus::Pass,
                detail: format!("s = {s}"),
            });
            s
        }
        Err(e) => {
            report.checks.push(Check {
                name: "promise",
                status: CheckStatus::Fail,
                detail: e.to_string(),
            });
            return Ok(report);
        }
    };
    report.s = Some(s);
    let (s1, _) = s.split_at(k)?;

    for u in BitString::all(k) {
        let g: Vec<BitString> = BitString::all(t)
            .map(|w| table.get(&u.concat(&w)?))
            .collect::<Result<_>>()?;
        report.slices.push((u, g, big_s(table, t, &u)?.to_string()));
    }

    report.checks.push(if s.is_zero() {
        Check {
            name: "sorted slices",
            status: CheckStatus::Skipped,
            detail: "s = 0^n hypothesis unmet".into(),
        }
    } else {
        let ok = check_theorem1(table, &s, t)?;
        Check {
            name: "sorted slices",
            status: if ok {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            detail: format!("S(u) = S(v) iff u ⊕ v ∈ {{0, {s1}}} over all pairs"),
        }
    });

    if !s1.is_zero() {
        let repeats = report.slices.iter().filter(|(_, g, _)| {
            let mut sorted = g.clone();
            sorted.sort();
            sorted.windows(2).any(|p| p[0] == p[1])
        });
        let count = repeats.count();
        report.checks.push(Check {
            name: "distinct G(u)",
            status: if count == 0 {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            detail: format!("{count} slices with repeated values"),
        });
    }

    let dist = exact_distribution(table, t)?;
    let expected: Vec<BitString> = BitString::all(k)
        .filter(|y| !y.dot_unchecked(&s1))
        .collect();
    let support = dist.support();
    let ok = support == expected && dist.is_uniform_on_support();
    let p = dist.prob(&expected[0]);
    report.checks.push(Check {
        name: "distribution",
        status: if ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        detail: format!(
            "support of {} outcomes = {s1}^⊥, each with probability {p}",
            support.len()
        ),
    });

    let qubits = statevector_qubits(n, m, t);
    let cap = max_qubits_from_env();
    report.checks.push(if qubits > cap {
        Check {
            name: "statevector",
            status: CheckStatus::Skipped,
            detail: format!("{qubits} qubits exceed cap {cap}"),
        }
    } else {
        match statevector_run(table, t) {
            Ok(sv) if sv == dist => Check {
                name: "statevector",
                status: CheckStatus::Pass,
                detail: format!("{qubits}-qubit state vector equals the structured law"),
            },
            Ok(_) => Check {
                name: "statevector",
                status: CheckStatus::Fail,
                detail: "state-vector law differs from the structured law".into(),
            },
            Err(e) => Check {
                name: "statevector",
                status: CheckStatus::Fail,
                detail: e.to_string(),
            },
        }
    });
    Ok(report)
}
