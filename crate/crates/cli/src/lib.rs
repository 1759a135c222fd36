//! `spcp` command line: instance generation, solving, benchmark suites and
//! video background subtraction.
//!
//! Exit status is 0 on success, 1 on a usage or input error and 2 when a
//! solver fails.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use spcp::bench::{render_runs_csv, render_table, run_suite, SuiteCell, TableFormat, TolRule};
use spcp::instance::{delta_for, generate_instance, DeltaRule, GenParams};
use spcp::io::{
    add_video_noise, frames_to_matrix, matrix_to_frames, parse_config, read_frame_dir, read_matrix, suite_from_config,
    synthetic_video, write_frame_dir, write_matrix, MatrixFile, MatrixFormat,
};
use spcp::model::{Algorithm, Matrix, RhoGrowth, SolveStatus, SolverConfig, SpcpProblem, SvdMode};
use spcp::prox::singular_values;
use spcp::solvers::{solve, IterStats, SolveOutput};
use spcp::subproblem::ThetaMethod;
use spcp::SpcpError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "spcp", version, about = "Low-rank plus sparse decomposition under a noise ball")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random instance with known decomposition.
    Generate(GenerateArgs),
    /// Decompose a data matrix.
    #[command(allow_negative_numbers = true)]
    Solve(SolveArgs),
    /// Run a benchmark suite described by a config file.
    Bench(BenchArgs),
    /// Split a PGM frame sequence into background and foreground.
    #[command(allow_negative_numbers = true)]
    Video(VideoArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FileFormat {
    Bin,
    Csv,
}

impl FileFormat {
    fn ext(self) -> &'static str {
        match self {
            FileFormat::Bin => "bin",
            FileFormat::Csv => "csv",
        }
    }

    fn file(self, dir: &Path, stem: &str) -> MatrixFile {
        let format = match self {
            FileFormat::Bin => MatrixFormat::Bin,
            FileFormat::Csv => MatrixFormat::Csv,
        };
        MatrixFile::new(format, dir.join(format!("{stem}.{}", self.ext())))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DeltaRuleArg {
    Dimension,
    Entries,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SvdArg {
    Full,
    Partial,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ThetaArg {
    Bracketed,
    Quartic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableArg {
    Csv,
    Markdown,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Column count.
    #[arg(long)]
    n: usize,
    /// Row count, defaults to `n`.
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long = "c-r", default_value_t = 0.05)]
    c_r: f64,
    #[arg(long = "c-p", default_value_t = 0.05)]
    c_p: f64,
    /// Signal-to-noise ratio in dB.
    #[arg(long, default_value_t = 80.0)]
    snr: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long = "delta-rule", value_enum, default_value_t = DeltaRuleArg::Dimension)]
    delta_rule: DeltaRuleArg,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FileFormat::Bin)]
    format: FileFormat,
}

#[derive(Debug, Args)]
struct SolverFlags {
    #[arg(long, value_parser = parse_algorithm, default_value = "nsa")]
    algo: Algorithm,
    /// Stopping tolerance on the relative change of `(X, S)`.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    #[arg(long)]
    rho0: Option<f64>,
    /// `sqrtk`, `arithmetic` or `geometric:<factor>`.
    #[arg(long = "rho-growth", value_parser = parse_growth)]
    rho_growth: Option<RhoGrowth>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    /// Seed of the partial SVD start blocks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    svd: Option<SvdArg>,
    #[arg(long, value_enum)]
    theta: Option<ThetaArg>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Data matrix, `.csv` or binary.
    #[arg(long)]
    input: PathBuf,
    /// Noise radius.
    #[arg(long)]
    delta: f64,
    /// Weight of the l1 term, defaults to `1/sqrt(max(m, n))`.
    #[arg(long)]
    xi: Option<f64>,
    #[command(flatten)]
    solver: SolverFlags,
    /// Output directory for X, S and stats.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FileFormat::Bin)]
    format: FileFormat,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Suite config file.
    config: PathBuf,
    /// Worker threads, overrides the config.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum, default_value_t = TableArg::Markdown)]
    format: TableArg,
    /// Write the table here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write one CSV row per run.
    #[arg(long)]
    runs: Option<PathBuf>,
    /// Print the expanded cells with their noise level and radius as CSV
    /// instead of running them.
    #[arg(long)]
    list: bool,
}

#[derive(Debug, Args)]
struct VideoArgs {
    /// Directory of `*.pgm` frames, read in file-name order.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    frames: Option<PathBuf>,
    /// Use a generated `HxWxT` sequence instead of `--frames`.
    #[arg(long, value_parser = parse_dims)]
    synthetic: Option<(usize, usize, usize)>,
    /// Noise added before decomposing, in dB.
    #[arg(long, default_value_t = 20.0)]
    snr: f64,
    /// Noise seed.
    #[arg(long = "noise-seed", default_value_t = 1)]
    noise_seed: u64,
    /// Noise radius, defaults to `sqrt(N + sqrt(8 N)) varrho` with `N` entries.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[command(flatten)]
    solver: SolverFlags,
    /// Receives `background/`, `foreground/`, `noisy/` and the raw matrices.
    #[arg(long)]
    out: PathBuf,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    Algorithm::parse(s).ok_or_else(|| format!("expected apg, papg, alms or nsa, got {s:?}"))
}

fn parse_growth(s: &str) -> Result<RhoGrowth, String> {
    RhoGrowth::parse(s).ok_or_else(|| format!("expected sqrtk, arithmetic or geometric:<factor>, got {s:?}"))
}

fn parse_dims(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse().map_err(|_| format!("expected HxWxT, got {s:?}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [h, w, t] if h > 0 && w > 0 && t > 0 => Ok((h, w, t)),
        _ => Err(format!("expected HxWxT with positive sizes, got {s:?}")),
    }
}

enum Failure {
    Usage(String),
    Solver(String),
}

fn usage(e: impl Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn solver_failure(e: SpcpError) -> Failure {
    Failure::Solver(e.to_string())
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Bench(a) => bench(a),
        Command::Video(a) => video(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver failed: {msg}");
            EXIT_SOLVER
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn generate(a: GenerateArgs) -> Result<(), Failure> {
    let delta_rule = match a.delta_rule {
        DeltaRuleArg::Dimension => DeltaRule::Dimension,
        DeltaRuleArg::Entries => DeltaRule::EntryCount,
    };
    let gen = GenParams { rows: a.rows, delta_rule, ..GenParams::new(a.n, a.c_r, a.c_p, a.snr, a.seed) };
    gen.validate().map_err(|e| usage(format!("--n/--rows/--c-r/--c-p/--snr: {e}")))?;
    let (p, gt) = generate_instance(&gen).map_err(usage)?;
    create_dir(&a.out)?;
    for (stem, m) in [("D", &p.d), ("X0", &gt.x0), ("S0", &gt.s0), ("noise", &gt.zeta0)] {
        write_matrix(m, &a.format.file(&a.out, stem)).map_err(usage)?;
    }
    let (m, n) = p.shape();
    let meta = format!(
        "rows = {m}\ncols = {n}\nrank = {}\nsparsity = {}\nvarrho = {}\ndelta = {}\nxi = {}\nsnr_db = {}\nseed = {}\n",
        gt.rank0,
        gt.support.len(),
        gt.varrho,
        p.delta,
        p.xi,
        a.snr,
        a.seed
    );
    write_text(&a.out.join("instance.txt"), &meta)?;
    println!("wrote {m}x{n} instance to {} (delta = {}, varrho = {})", a.out.display(), p.delta, gt.varrho);
    Ok(())
}

fn build_config(f: &SolverFlags, default_tol: Option<f64>) -> Result<SolverConfig, Failure> {
    let mut cfg = match f.algo {
        Algorithm::Nsa => SolverConfig::nsa_benchmark(1e-6),
        alg => SolverConfig::new(alg),
    };
    cfg.tol = f.tol.or(default_tol).unwrap_or(cfg.tol);
    if let Some(v) = f.max_iters {
        cfg.max_iters = v;
    }
    if let Some(g) = f.rho_growth {
        cfg.rho_growth = g;
    }
    cfg.rho0 = f.rho0;
    cfg.mu = f.mu;
    cfg.nu = f.nu;
    cfg.seed = f.seed;
    if let Some(s) = f.svd {
        cfg.svd_mode = match s {
            SvdArg::Full => SvdMode::Full,
            SvdArg::Partial => SvdMode::PartialWithPrediction,
        };
    }
    if let Some(t) = f.theta {
        cfg.theta_method = match t {
            ThetaArg::Bracketed => ThetaMethod::Bracketed,
            ThetaArg::Quartic => ThetaMethod::Quartic,
        };
    }
    for (flag, v) in [("--tol", Some(cfg.tol)), ("--rho0", cfg.rho0), ("--mu", cfg.mu), ("--nu", cfg.nu)] {
        if let Some(v) = v {
            if !(v > 0.0 && v.is_finite()) {
                return Err(usage(format!("{flag} must be positive, got {v}")));
            }
        }
    }
    if let RhoGrowth::Geometric(g) = cfg.rho_growth {
        if !(g >= 1.0 && g.is_finite()) {
            return Err(usage(format!("--rho-growth factor must be at least 1, got {g}")));
        }
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn check_weights(delta: Option<f64>, xi: Option<f64>) -> Result<(), Failure> {
    if let Some(d) = delta.filter(|d| !(*d >= 0.0 && d.is_finite())) {
        return Err(usage(format!("--delta must be nonnegative, got {d}")));
    }
    if let Some(x) = xi.filter(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(usage(format!("--xi must be positive, got {x}")));
    }
    Ok(())
}

fn build_problem(d: Matrix, delta: f64, xi: Option<f64>) -> Result<SpcpProblem, Failure> {
    check_weights(Some(delta), xi)?;
    if d.is_empty() {
        return Err(usage("input matrix is empty"));
    }
    Ok(match xi {
        Some(x) => SpcpProblem::with_xi(d, delta, x),
        None => SpcpProblem::new(d, delta),
    })
}

fn stats_csv(history: &[IterStats]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "iter", "objective", "smoothed_objective", "infeasibility", "rel_change", "svd_count", "theta", "rho", "skipped",
    ];
    w.write_record(header).expect("writing to memory");
    for h in history {
        w.write_record([
            h.iter.to_string(),
            h.objective.to_string(),
            h.smoothed_objective.map(|v| v.to_string()).unwrap_or_default(),
            h.infeasibility.to_string(),
            h.rel_change.to_string(),
            h.svd_count_cumulative.to_string(),
            h.theta.to_string(),
            h.rho.to_string(),
            h.skipped.to_string(),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf8 output")
}

fn report(out: &SolveOutput, p: &SpcpProblem) {
    let s = &out.solution;
    let rank = singular_values(&s.x).map(|v| v.iter().filter(|&&x| x > 1e-12).count()).unwrap_or(0);
    println!(
        "status = {:?}\niters = {}\nsvd_count = {}\nobjective = {}\nrank = {rank}\nresidual = {}\ndelta = {}",
        s.status, s.iters, s.svd_count, s.objective, s.infeasibility, p.delta
    );
    if s.status == SolveStatus::MaxItersReached {
        eprintln!("warning: stopped at the iteration limit before meeting the tolerance");
    }
}

fn solve_cmd(a: SolveArgs) -> Result<(), Failure> {
    check_weights(Some(a.delta), a.xi)?;
    let cfg = build_config(&a.solver, None)?;
    let d = read_matrix(&MatrixFile::from_path(&a.input)).map_err(|e| usage(format!("--input: {e}")))?;
    let p = build_problem(d, a.delta, a.xi)?;
    let out = solve(&p, &cfg).map_err(solver_failure)?;
    create_dir(&a.out)?;
    write_matrix(&out.solution.x, &a.format.file(&a.out, "X")).map_err(usage)?;
    write_matrix(&out.solution.s, &a.format.file(&a.out, "S")).map_err(usage)?;
    write_text(&a.out.join("stats.csv"), &stats_csv(&out.history))?;
    report(&out, &p);
    Ok(())
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&a.config).map_err(|e| usage(format!("{}: {e}", a.config.display())))?;
    let spec = parse_config(&text)
        .and_then(|c| suite_from_config(&c))
        .map_err(|e| usage(format!("{}: {e}", a.config.display())))?;
    if a.jobs == Some(0) {
        return Err(usage("--jobs must be at least 1"));
    }
    if a.list {
        print!("{}", list_cells(&spec.cells));
        return Ok(());
    }
    let report = run_suite(&spec.cells, spec.repetitions, a.jobs.unwrap_or(spec.jobs));
    let format = match a.format {
        TableArg::Csv => TableFormat::Csv,
        TableArg::Markdown => TableFormat::Markdown,
    };
    let table = render_table(&report, format);
    match &a.out {
        Some(path) => write_text(path, &table)?,
        None => print!("{table}"),
    }
    if let Some(path) = &a.runs {
        write_text(path, &render_runs_csv(&report))?;
    }
    let failed: usize = report.cells.iter().map(|c| c.failed).sum();
    if failed > 0 {
        for r in report.runs.iter().filter(|r| r.outcome.is_err()) {
            eprintln!("cell {} seed {}: {}", r.cell, r.seed, r.outcome.as_ref().unwrap_err());
        }
        return Err(Failure::Solver(format!("{failed} of {} runs failed", report.runs.len())));
    }
    Ok(())
}

fn list_cells(cells: &[SuiteCell]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "rows", "c_r", "c_p", "snr_db", "algorithm", "seed", "varrho", "delta", "tol"])
        .expect("writing to memory");
    for c in cells {
        let (m, n) = c.gen.shape();
        let varrho = c.gen.varrho();
        let tol = match c.tol_rule {
            TolRule::Fixed => c.config.tol,
            TolRule::TimesVarrho(f) => f * varrho,
        };
        w.write_record([
            n.to_string(),
            m.to_string(),
            c.gen.c_r.to_string(),
            c.gen.c_p.to_string(),
            c.gen.snr_db.to_string(),
            c.config.algorithm.name().to_string(),
            c.gen.seed.to_string(),
            varrho.to_string(),
            delta_for(c.gen.delta_rule, m, n, varrho).to_string(),
            tol.to_string(),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf8 output")
}

fn video(a: VideoArgs) -> Result<(), Failure> {
    check_weights(a.delta, a.xi)?;
    let frames = match (&a.frames, a.synthetic) {
        (Some(dir), _) => read_frame_dir(dir).map_err(|e| usage(format!("--frames: {e}")))?,
        (None, Some((h, w, t))) => synthetic_video(h, w, t, (h.min(w) / 4).max(1)),
        (None, None) => return Err(usage("--frames or --synthetic is required")),
    };
    if !a.snr.is_finite() {
        return Err(usage(format!("--snr must be finite, got {}", a.snr)));
    }
    let (h, w) = frames.frame_shape();
    let clean = frames_to_matrix(&frames);
    let (d, varrho) = add_video_noise(&clean, a.snr, a.noise_seed);
    let (m, n) = d.shape();
    let delta = a.delta.unwrap_or_else(|| delta_for(DeltaRule::EntryCount, m, n, varrho));
    let p = build_problem(d, delta, a.xi)?;
    let default_tol = (varrho > 0.0).then_some(varrho * 1e-4);
    let cfg = build_config(&a.solver, default_tol)?;
    let out = solve(&p, &cfg).map_err(solver_failure)?;
    create_dir(&a.out)?;
    let (bg, fg) = (&out.solution.x, &out.solution.s);
    let to_frames = |mat: &Matrix| matrix_to_frames(mat, h, w).map_err(usage);
    write_frame_dir(&a.out.join("background"), &to_frames(bg)?).map_err(usage)?;
    write_frame_dir(&a.out.join("foreground"), &to_frames(fg)?).map_err(usage)?;
    write_frame_dir(&a.out.join("noisy"), &to_frames(&p.d)?).map_err(usage)?;
    for (stem, mat) in [("background", bg), ("foreground", fg), ("noisy", &p.d)] {
        write_matrix(mat, &MatrixFile::new(MatrixFormat::Bin, a.out.join(format!("{stem}.bin")))).map_err(usage)?;
    }
    write_text(&a.out.join("stats.csv"), &stats_csv(&out.history))?;
    println!("frames = {}x{}x{}\nvarrho = {varrho}\nresidual_ratio = {}", h, w, frames.len(), out.solution.infeasibility / p.d.norm());
    report(&out, &p);
    Ok(())
}
