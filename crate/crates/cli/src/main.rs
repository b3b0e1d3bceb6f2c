//! `gsfuse` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O, 2 usage, 3 numerical guard, 4 structural or
//! invalid input, 5 verification failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gsfuse::analysis::{bench_merge, spectrum_csv, spectrum_table, trajectory, trajectory_csv};
use gsfuse::geodesic::{guard_margin, is_extrapolation};
use gsfuse::io::{self, FormatError};
use gsfuse::linalg::{DEFAULT_GUARD, DETERMINANT_TOL, ORTHOGONALITY_TOL};
use gsfuse::lowrank::{als_merge, AlsOptions};
use gsfuse::structure::validate_with_tolerance;
use gsfuse::verify::{self, Suite, VerifyOptions};
use gsfuse::{epsilon_of, merge_adapters, random_adapter, EtaSchedule, Factor, GsAdapter, MergeConfig, MergeMethod, MergeOutput, Storage, SynthSpec};

#[derive(Parser)]
#[command(name = "gsfuse", version, about = "Merge group-and-shuffle orthogonal adapters")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Worker threads for block-parallel work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Minimum distance (radians) of any eigenphase from ±π.
    #[arg(long, global = true, default_value_t = DEFAULT_GUARD)]
    guard: f64,
    /// Orthogonality tolerance applied to input adapters.
    #[arg(long, global = true, default_value_t = ORTHOGONALITY_TOL)]
    ortho_tol: f64,
    /// Determinant tolerance applied to input adapters.
    #[arg(long, global = true, default_value_t = DETERMINANT_TOL)]
    det_tol: f64,
    /// Seed for commands that draw random numbers.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic adapter and print its distance to the identity.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        b: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long, value_enum, default_value_t = StorageArg::Orthogonal)]
        storage: StorageArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge a concept adapter with a style adapter.
    Merge {
        concept: PathBuf,
        style: PathBuf,
        #[arg(long, default_value_t = 0.6, allow_negative_numbers = true)]
        t: f64,
        #[arg(long, default_value_t = 2.0)]
        eta0: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Full)]
        method: MethodArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Eigenphase table of every block, as CSV.
    Spectrum {
        adapter: PathBuf,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Chord lengths of the merged adapter along a uniform t grid, as CSV.
    Trajectory {
        concept: PathBuf,
        style: PathBuf,
        #[arg(long, default_value_t = 11)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Geodesic)]
        method: MethodArg,
        #[arg(long, default_value_t = 2.0)]
        eta0: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the property and error-order batteries.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
        /// Block sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [2usize, 8])]
        sizes: Vec<usize>,
        /// Seeds, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2, 3, 4])]
        seeds: Vec<u64>,
        /// Flip the sign of the restoration generator (canary for the order checks).
        #[arg(long, hide = true)]
        inject_defect: bool,
    },
    /// Fixed-rank ALS merge of two low-rank adapters.
    LowrankMerge {
        concept: PathBuf,
        style: PathBuf,
        #[arg(long, default_value_t = 0.6)]
        t: f64,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Random initialization from --seed instead of the concept factors.
        #[arg(long)]
        random_init: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time merges on synthetic adapters; prints CSV.
    Bench {
        #[arg(long, default_value_t = 2048)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        b: usize,
        #[arg(long, default_value_t = 0.05)]
        sigma: f64,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::Full, MethodArg::Fast])]
        methods: Vec<MethodArg>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 0.6)]
        t: f64,
        /// Storage of the synthetic inputs.
        #[arg(long, value_enum, default_value_t = StorageArg::Cayley)]
        storage: StorageArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StorageArg {
    Orthogonal,
    Cayley,
}

impl From<StorageArg> for Storage {
    fn from(s: StorageArg) -> Storage {
        match s {
            StorageArg::Orthogonal => Storage::Orthogonal,
            StorageArg::Cayley => Storage::Cayley,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Geodesic,
    Full,
    Fast,
    Naive,
    Exact,
}

impl From<MethodArg> for MergeMethod {
    fn from(m: MethodArg) -> MergeMethod {
        match m {
            MethodArg::Geodesic => MergeMethod::GeodesicOnly,
            MethodArg::Full => MergeMethod::Full,
            MethodArg::Fast => MergeMethod::Fast,
            MethodArg::Naive => MergeMethod::NaiveMultiply,
            MethodArg::Exact => MergeMethod::ExactRotate,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Props,
    Orders,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Suite {
        match s {
            SuiteArg::Props => Suite::Props,
            SuiteArg::Orders => Suite::Orders,
            SuiteArg::All => Suite::All,
        }
    }
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn structural(message: impl Into<String>) -> Self {
        Failure { code: 4, message: message.into() }
    }
}

impl From<gsfuse::Error> for Failure {
    fn from(e: gsfuse::Error) -> Self {
        use gsfuse::Error as E;
        let code = match e.root() {
            E::EigenvalueNearMinusOne { .. } | E::PhaseOverflow { .. } | E::SolveFailed { .. } | E::ObjectiveIncreased { .. } => 3,
            E::BlockSize { .. } | E::InvalidArgument(_) | E::OracleBudget { .. } => 2,
            _ => 4,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        let code = if matches!(e, FormatError::Io { .. }) { 1 } else { 4 };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("gsfuse: error: {}", f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let g = &cli.global;
    if !(g.guard > 0.0) || !(g.ortho_tol > 0.0) || !(g.det_tol > 0.0) {
        return Err(Failure::usage("--guard, --ortho-tol and --det-tol must be positive"));
    }
    if let Some(threads) = g.threads {
        if threads == 0 {
            return Err(Failure::usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Gen { n, b, sigma, storage, out } => cmd_gen(g, n, b, sigma, storage.into(), &out),
        Command::Merge { concept, style, t, eta0, method, out } => {
            cmd_merge(g, &concept, &style, t, eta0, method.into(), &out)
        }
        Command::Spectrum { adapter, out } => cmd_spectrum(g, &adapter, out.as_deref()),
        Command::Trajectory { concept, style, steps, method, eta0, out } => {
            cmd_trajectory(g, &concept, &style, steps, method.into(), eta0, out.as_deref())
        }
        Command::Verify { suite, sizes, seeds, inject_defect } => cmd_verify(suite.into(), sizes, seeds, inject_defect),
        Command::LowrankMerge { concept, style, t, iters, tol, random_init, out } => {
            cmd_lowrank(g, &concept, &style, t, iters, tol, random_init, &out)
        }
        Command::Bench { n, b, sigma, methods, repeats, t, storage } => {
            cmd_bench(SynthSpec::new(n, b, sigma, g.seed).with_storage(storage.into()), &methods, repeats, t)
        }
    }
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| Failure { code: 1, message: format!("I/O error on {}: {e}", path.display()) })
}

fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_adapter(g: &Global, path: &Path) -> Result<GsAdapter, Failure> {
    let a = io::read_adapter(path)?;
    let report = validate_with_tolerance(&a, g.ortho_tol, g.det_tol);
    if let Some(bad) = report.failures().next() {
        return Err(Failure::structural(format!(
            "{}: {} block {} is not orthogonal (residual {:e}, det deviation {:e})",
            path.display(),
            bad.factor,
            bad.index,
            bad.orthogonality_residual,
            bad.determinant_deviation
        )));
    }
    if !report.passed {
        return Err(Failure::structural(format!("{}: invalid adapter", path.display())));
    }
    Ok(a)
}

fn cmd_gen(g: &Global, n: usize, b: usize, sigma: f64, storage: Storage, out: &Path) -> CmdResult {
    let spec = SynthSpec::new(n, b, sigma, g.seed).with_storage(storage);
    spec.validate()?;
    let a = random_adapter(&spec)?;
    io::write_adapter(&a, out)?;
    println!("epsilon = {}", epsilon_of(&a)?);
    Ok(())
}

fn min_guard_margin(c: &GsAdapter, s: &GsAdapter) -> Result<f64, Failure> {
    let mut margin = f64::INFINITY;
    for factor in [Factor::Left, Factor::Right] {
        let bc = c.factor(factor).materialize(factor)?;
        let bs = s.factor(factor).materialize(factor)?;
        for (x, y) in bc.iter().zip(&bs) {
            margin = margin.min(guard_margin(x, y));
        }
    }
    Ok(margin)
}

fn cmd_merge(g: &Global, concept: &Path, style: &Path, t: f64, eta0: f64, method: MergeMethod, out: &Path) -> CmdResult {
    let cfg = MergeConfig {
        t,
        eta: EtaSchedule::new(eta0).map_err(|e| Failure::usage(e.to_string()))?,
        method,
        guard: g.guard,
    };
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let c = load_adapter(g, concept)?;
    let s = load_adapter(g, style)?;
    c.check_compatible(&s)?;
    if is_extrapolation(t) {
        eprintln!("gsfuse: warning: t = {t} lies outside [0, 1] (extrapolation)");
    }
    let margin = min_guard_margin(&c, &s)?;
    match merge_adapters(&c, &s, &cfg)? {
        MergeOutput::Adapter(merged) => {
            io::write_adapter(&merged, out)?;
            let report = validate_with_tolerance(&merged, g.ortho_tol, g.det_tol);
            println!("method = {method}");
            println!("left max residual = {:e}", report.max_residual(Factor::Left));
            println!("right max residual = {:e}", report.max_residual(Factor::Right));
        }
        MergeOutput::Dense(m) => {
            io::write_dense(&m, out)?;
            let residual = (m.transpose() * &m - gsfuse::Matrix::identity(m.nrows(), m.ncols())).norm();
            println!("method = {method}");
            println!("dense residual = {residual:e}");
        }
    }
    println!("guard margin = {margin:e}");
    Ok(())
}

fn cmd_spectrum(g: &Global, adapter: &Path, out: Option<&Path>) -> CmdResult {
    let a = load_adapter(g, adapter)?;
    emit(out, &spectrum_csv(&spectrum_table(&a)?))
}

fn cmd_trajectory(
    g: &Global,
    concept: &Path,
    style: &Path,
    steps: usize,
    method: MergeMethod,
    eta0: f64,
    out: Option<&Path>,
) -> CmdResult {
    if steps < 2 {
        return Err(Failure::usage("--steps must be >= 2"));
    }
    if !method.is_blockwise() {
        return Err(Failure::usage(format!("--method {method} has no blockwise trajectory")));
    }
    let base = MergeConfig {
        eta: EtaSchedule::new(eta0).map_err(|e| Failure::usage(e.to_string()))?,
        guard: g.guard,
        ..MergeConfig::default()
    };
    let c = load_adapter(g, concept)?;
    let s = load_adapter(g, style)?;
    c.check_compatible(&s)?;
    emit(out, &trajectory_csv(&trajectory(&c, &s, steps, method, &base)?))
}

fn cmd_verify(suite: Suite, sizes: Vec<usize>, seeds: Vec<u64>, inject_defect: bool) -> CmdResult {
    if sizes.is_empty() || sizes.contains(&0) || seeds.is_empty() {
        return Err(Failure::usage("--sizes and --seeds must be non-empty and sizes positive"));
    }
    let rows = verify::run(&VerifyOptions { suite, sizes, seeds, inject_defect })?;
    print!("{}", verify::format_table(&rows));
    if verify::all_passed(&rows) {
        Ok(())
    } else {
        let failed = rows.iter().filter(|r| !r.passed).count();
        Err(Failure { code: 5, message: format!("{failed} check(s) failed") })
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_lowrank(
    g: &Global,
    concept: &Path,
    style: &Path,
    t: f64,
    iters: usize,
    tol: f64,
    random_init: bool,
    out: &Path,
) -> CmdResult {
    if iters == 0 || !(tol >= 0.0) {
        return Err(Failure::usage("--iters must be >= 1 and --tol >= 0"));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Failure::usage(format!("--t must lie in [0, 1], got {t}")));
    }
    let c = io::read_lowrank(concept)?;
    let s = io::read_lowrank(style)?;
    let opts = AlsOptions {
        max_iters: iters,
        tol,
        init: if random_init { gsfuse::lowrank::AlsInit::Random(g.seed) } else { gsfuse::lowrank::AlsInit::Warm },
        ..AlsOptions::default()
    };
    let trace = als_merge(&c, &s, t, &opts)?;
    io::write_lowrank(&trace.factors, out)?;
    println!("iterations = {}", trace.iterations());
    println!("converged = {}", trace.converged);
    println!("objective = {:e}", trace.final_objective());
    Ok(())
}

fn cmd_bench(spec: SynthSpec, methods: &[MethodArg], repeats: usize, t: f64) -> CmdResult {
    if repeats < 3 {
        return Err(Failure::usage("--repeats must be >= 3"));
    }
    if methods.contains(&MethodArg::Naive) {
        return Err(Failure::usage("bench times blockwise methods only"));
    }
    spec.validate()?;
    let methods: Vec<MergeMethod> = methods.iter().map(|&m| m.into()).collect();
    let report = bench_merge(&spec, &methods, repeats, t)?;
    print!("{}", report.to_csv());
    if let Some(ratio) = report.median_ratio(MergeMethod::Fast, MergeMethod::Full) {
        eprintln!("fast/full median ratio = {ratio:.4}");
    }
    if let Some(p) = report.phases {
        eprintln!(
            "full merge phases: geodesic {:.6}s, restore {:.6}s (geodesic share {:.1}%)",
            p.geodesic,
            p.restore,
            100.0 * p.geodesic_share()
        );
    }
    Ok(())
}
