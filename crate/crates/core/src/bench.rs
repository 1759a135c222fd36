//! Accuracy metrics against ground truth, benchmark suites and table output.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::instance::{generate_instance, GenParams};
use crate::model::{l1_norm, GroundTruth, SolverConfig, SpcpProblem, SpcpSolution};
use crate::prox::singular_values;
use crate::solvers::solve;

/// Singular values at or below this are treated as zero when counting rank.
pub const RANK_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionMetrics {
    pub rel_err_x: f64,
    pub rel_err_s: f64,
    pub rank_sol: usize,
    pub rel_nuclear_gap: f64,
    pub rel_l1_gap: f64,
    /// `max |sigma_i - sigma0_i|` over the planted nonzero singular values.
    pub max_sigma_err_nonzero: f64,
    /// `max sigma_i` over indices where the planted value is zero.
    pub max_sigma_zero: f64,
    pub max_s_err_support: f64,
    pub max_s_off_support: f64,
    /// `||X + S - D||_F / ||D||_F`.
    pub residual_ratio: f64,
    pub svd_count: usize,
    /// Wall-clock seconds of the solve call; 0 when not measured.
    pub cpu_seconds: f64,
}

/// Column order used by every table.
pub const METRIC_NAMES: [&str; 12] = [
    "rel_err_x",
    "rel_err_s",
    "rank_sol",
    "rel_nuclear_gap",
    "rel_l1_gap",
    "max_sigma_err_nonzero",
    "max_sigma_zero",
    "max_s_err_support",
    "max_s_off_support",
    "residual_ratio",
    "svd_count",
    "cpu_seconds",
];

impl SolutionMetrics {
    pub fn values(&self) -> [f64; 12] {
        [
            self.rel_err_x,
            self.rel_err_s,
            self.rank_sol as f64,
            self.rel_nuclear_gap,
            self.rel_l1_gap,
            self.max_sigma_err_nonzero,
            self.max_sigma_zero,
            self.max_s_err_support,
            self.max_s_off_support,
            self.residual_ratio,
            self.svd_count as f64,
            self.cpu_seconds,
        ]
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Compares a solution with the planted decomposition. Relative errors fall
/// back to absolute ones when the reference is zero.
pub fn evaluate_solution(gt: &GroundTruth, sol: &SpcpSolution, p: &SpcpProblem) -> SolutionMetrics {
    let sigma = singular_values(&sol.x).unwrap_or_default();
    let sigma0 = singular_values(&gt.x0).unwrap_or_default();
    let nuc: f64 = sigma.iter().sum();
    let nuc0: f64 = sigma0.iter().take(gt.rank0).sum();
    let (l1, l10) = (l1_norm(&sol.s), l1_norm(&gt.s0));
    let mut max_sigma_err_nonzero: f64 = 0.0;
    let mut max_sigma_zero: f64 = 0.0;
    for (i, &s) in sigma.iter().enumerate() {
        if i < gt.rank0 {
            max_sigma_err_nonzero = max_sigma_err_nonzero.max((s - sigma0[i]).abs());
        } else {
            max_sigma_zero = max_sigma_zero.max(s);
        }
    }
    let mut on_support = vec![false; gt.s0.len()];
    for &i in &gt.support {
        on_support[i] = true;
    }
    let mut max_s_err_support: f64 = 0.0;
    let mut max_s_off_support: f64 = 0.0;
    for (i, (&s, &s0)) in sol.s.iter().zip(gt.s0.iter()).enumerate() {
        if on_support[i] {
            max_s_err_support = max_s_err_support.max((s - s0).abs());
        } else {
            max_s_off_support = max_s_off_support.max(s.abs());
        }
    }
    SolutionMetrics {
        rel_err_x: ratio((&sol.x - &gt.x0).norm(), gt.x0.norm()),
        rel_err_s: ratio((&sol.s - &gt.s0).norm(), gt.s0.norm()),
        rank_sol: sigma.iter().filter(|&&s| s > RANK_THRESHOLD).count(),
        rel_nuclear_gap: ratio((nuc - nuc0).abs(), nuc0),
        rel_l1_gap: ratio((l1 - l10).abs(), l10),
        max_sigma_err_nonzero,
        max_sigma_zero,
        max_s_err_support,
        max_s_off_support,
        residual_ratio: ratio(p.infeasibility(&sol.x, &sol.s), p.d.norm()),
        svd_count: sol.svd_count,
        cpu_seconds: 0.0,
    }
}

/// Stopping tolerance used for a suite cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TolRule {
    /// Use `config.tol` as given.
    Fixed,
    /// `factor * varrho` of each generated instance.
    TimesVarrho(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteCell {
    /// Instance family; repetition `r` uses seed `gen.seed + r`.
    pub gen: GenParams,
    pub config: SolverConfig,
    pub tol_rule: TolRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub cell: usize,
    pub seed: u64,
    pub varrho: f64,
    pub delta: f64,
    pub converged: bool,
    /// Metrics, or the solver error message for a failed run.
    pub outcome: Result<SolutionMetrics, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub min: f64,
    pub avg: f64,
    pub max: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let avg = (values.iter().sum::<f64>() / values.len() as f64).clamp(min, max);
        Some(Self { min, avg, max })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub n: usize,
    pub c_r: f64,
    pub c_p: f64,
    pub snr_db: f64,
    pub algorithm: &'static str,
    pub varrho: f64,
    pub runs: usize,
    pub failed: usize,
    /// One aggregate per entry of [`METRIC_NAMES`]; empty if every run failed.
    pub metrics: Vec<Aggregate>,
}

impl CellSummary {
    pub fn metric(&self, name: &str) -> Option<Aggregate> {
        let i = METRIC_NAMES.iter().position(|m| *m == name)?;
        self.metrics.get(i).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuiteReport {
    pub runs: Vec<RunRecord>,
    pub cells: Vec<CellSummary>,
}

fn run_one(cell: &SuiteCell, idx: usize, rep: usize) -> RunRecord {
    let gen = GenParams { seed: cell.gen.seed.wrapping_add(rep as u64), ..cell.gen.clone() };
    let varrho = gen.varrho();
    let mut rec = RunRecord { cell: idx, seed: gen.seed, varrho, delta: f64::NAN, converged: false, outcome: Err(String::new()) };
    let (problem, truth) = match generate_instance(&gen) {
        Ok(v) => v,
        Err(e) => {
            rec.outcome = Err(e.to_string());
            return rec;
        }
    };
    rec.delta = problem.delta;
    let mut cfg = cell.config.clone();
    if let TolRule::TimesVarrho(f) = cell.tol_rule {
        cfg.tol = f * varrho;
    }
    let start = Instant::now();
    match solve(&problem, &cfg) {
        Ok(out) => {
            let secs = start.elapsed().as_secs_f64();
            let mut m = evaluate_solution(&truth, &out.solution, &problem);
            m.cpu_seconds = secs;
            rec.converged = out.solution.status == crate::model::SolveStatus::Converged;
            rec.outcome = Ok(m);
        }
        Err(e) => rec.outcome = Err(e.to_string()),
    }
    rec
}

/// Runs every cell `repetitions` times on up to `jobs` threads. Failed runs are
/// recorded and excluded from the aggregates. The report does not depend on
/// `jobs`, apart from timings.
pub fn run_suite(cells: &[SuiteCell], repetitions: usize, jobs: usize) -> SuiteReport {
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..repetitions).map(move |r| (c, r)))
        .collect();
    let results: Mutex<Vec<Option<RunRecord>>> = Mutex::new(vec![None; tasks.len()]);
    let next = AtomicUsize::new(0);
    let workers = jobs.clamp(1, tasks.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let t = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(c, r)) = tasks.get(t) else { break };
                let rec = run_one(&cells[c], c, r);
                results.lock().expect("result slot poisoned")[t] = Some(rec);
            });
        }
    });
    let runs: Vec<RunRecord> = results
        .into_inner()
        .expect("result slot poisoned")
        .into_iter()
        .map(|r| r.expect("every task ran"))
        .collect();
    let cells = cells
        .iter()
        .enumerate()
        .map(|(i, cell)| summarize(i, cell, &runs))
        .collect();
    SuiteReport { runs, cells }
}

fn summarize(idx: usize, cell: &SuiteCell, runs: &[RunRecord]) -> CellSummary {
    let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.cell == idx).collect();
    let ok: Vec<&SolutionMetrics> = mine.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let metrics = if ok.is_empty() {
        Vec::new()
    } else {
        (0..METRIC_NAMES.len())
            .map(|j| {
                let vals: Vec<f64> = ok.iter().map(|m| m.values()[j]).collect();
                Aggregate::of(&vals).expect("nonempty")
            })
            .collect()
    };
    CellSummary {
        n: cell.gen.n,
        c_r: cell.gen.c_r,
        c_p: cell.gen.c_p,
        snr_db: cell.gen.snr_db,
        algorithm: cell.config.algorithm.name(),
        varrho: cell.gen.varrho(),
        runs: mine.len(),
        failed: mine.len() - ok.len(),
        metrics,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

const KEY_COLUMNS: [&str; 8] = ["n", "c_r", "c_p", "snr_db", "algorithm", "varrho", "runs", "failed"];

/// Aggregate table. CSV has one row per (cell, statistic) with columns
/// `n,c_r,c_p,snr_db,algorithm,varrho,runs,failed,statistic` followed by
/// [`METRIC_NAMES`]. Markdown has one row per cell with `min/avg/max` entries.
pub fn render_table(report: &SuiteReport, format: TableFormat) -> String {
    match format {
        TableFormat::Csv => render_csv(report),
        TableFormat::Markdown => render_markdown(report),
    }
}

fn key_fields(c: &CellSummary) -> Vec<String> {
    vec![
        c.n.to_string(),
        c.c_r.to_string(),
        c.c_p.to_string(),
        c.snr_db.to_string(),
        c.algorithm.to_string(),
        c.varrho.to_string(),
        c.runs.to_string(),
        c.failed.to_string(),
    ]
}

fn csv_text(header: Vec<String>, rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("writing to memory");
    for r in rows {
        w.write_record(&r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf8 output")
}

fn render_csv(report: &SuiteReport) -> String {
    let header = KEY_COLUMNS
        .iter()
        .chain(["statistic"].iter())
        .chain(METRIC_NAMES.iter())
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for c in report.cells.iter().filter(|c| !c.metrics.is_empty()) {
        for (stat, pick) in [("min", 0), ("avg", 1), ("max", 2)] {
            let mut row = key_fields(c);
            row.push(stat.to_string());
            row.extend(c.metrics.iter().map(|a| [a.min, a.avg, a.max][pick].to_string()));
            rows.push(row);
        }
    }
    csv_text(header, rows)
}

fn render_markdown(report: &SuiteReport) -> String {
    let mut out = String::new();
    let cols: Vec<&str> = KEY_COLUMNS.iter().chain(METRIC_NAMES.iter()).copied().collect();
    let _ = writeln!(out, "| {} |", cols.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(cols.len()));
    for c in &report.cells {
        if c.metrics.is_empty() {
            continue;
        }
        let key = key_fields(c).join(" | ");
        let vals: Vec<String> = c
            .metrics
            .iter()
            .map(|a| format!("{:.1e}/**{:.1e}**/{:.1e}", a.min, a.avg, a.max))
            .collect();
        let _ = writeln!(out, "| {key} | {} |", vals.join(" | "));
    }
    out
}

/// Per-run CSV: `cell,seed,varrho,delta,converged,error` followed by
/// [`METRIC_NAMES`]. Failed runs leave the metric columns empty.
pub fn render_runs_csv(report: &SuiteReport) -> String {
    let header = ["cell", "seed", "varrho", "delta", "converged", "error"]
        .iter()
        .chain(METRIC_NAMES.iter())
        .map(|s| s.to_string())
        .collect();
    let rows = report
        .runs
        .iter()
        .map(|r| {
            let mut row = vec![r.cell.to_string(), r.seed.to_string(), r.varrho.to_string(), r.delta.to_string(), r.converged.to_string()];
            match &r.outcome {
                Ok(m) => {
                    row.push(String::new());
                    row.extend(m.values().iter().map(|v| v.to_string()));
                }
                Err(e) => {
                    row.push(e.clone());
                    row.extend(std::iter::repeat_n(String::new(), METRIC_NAMES.len()));
                }
            }
            row
        })
        .collect();
    csv_text(header, rows)
}
