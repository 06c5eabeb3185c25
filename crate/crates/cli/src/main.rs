use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ssnmf_core::datagen::{self, SyntheticSpec, WSource};
use ssnmf_core::extract::{self, ExtractionResult};
use ssnmf_core::io::{self, HsiCube};
use ssnmf_core::linalg::DEFAULT_POWER_ITERS;
use ssnmf_core::metrics::mrsa;
use ssnmf_core::rng::derive_seed;
use ssnmf_core::solver::{nnls_cd, reconstruction_error, relative_error};
use ssnmf_core::sweep::{export_csv, run_sweep, SweepSpec};
use ssnmf_core::{
    AlgoConfig, Aggregation, Algorithm, DataMatrix, EndmemberMatrix, Error, NnlsSettings, Sign,
};

/// Smoothed separable NMF: synthetic data, vertex extraction, abundances
/// and evaluation.
#[derive(Debug, Parser)]
#[command(name = "ssnmf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate X = W H + N and write X.ssnmf, W.ssnmf and H.ssnmf
    Synth(SynthArgs),
    /// Estimate the endmember matrix W from X
    Extract(ExtractArgs),
    /// Solve min ‖X - W H‖ over H >= 0 and write H
    Abundances(AbundanceArgs),
    /// Print MRSA (--w-true/--w-est) or the relative error (--in/--w) as JSON
    Eval(EvalArgs),
    /// Run a sweep described by a JSON file and write a CSV report
    Bench(BenchArgs),
    /// Render each row of H as a PGM image
    Maps(MapsArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Number of bands (rows)
    #[arg(long, default_value_t = 224)]
    m: usize,
    /// Number of data points (columns)
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Number of endmembers
    #[arg(long, default_value_t = 10)]
    r: usize,
    /// Dirichlet concentration of the mixed columns
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Noise level ‖N‖_F / ‖W H‖_F
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Read W from this file instead of drawing it at random
    #[arg(long)]
    w: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

/// Cube geometry and extreme-pixel clipping.
#[derive(Debug, Args)]
struct CubeArgs {
    /// JSON file with width, height and bands of the input cube
    #[arg(long, conflicts_with_all = ["width", "height"])]
    sidecar: Option<PathBuf>,
    #[arg(long, requires = "height")]
    width: Option<usize>,
    #[arg(long, requires = "width")]
    height: Option<usize>,
    /// Zero the pixels among the k largest of any band (0 disables; needs
    /// the cube geometry)
    #[arg(long, default_value_t = 10)]
    clip_k: usize,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long, value_parser = parse_algo)]
    algo: Algorithm,
    /// Number of endmembers
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    r: u64,
    /// Columns aggregated per endmember
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    p: u64,
    #[arg(long, default_value = "median", value_parser = parse_agg)]
    agg: Aggregation,
    /// Required for vca, alls and svca
    #[arg(long)]
    seed: Option<u64>,
    /// Run a randomized algorithm this many times and keep the lowest
    /// relative error
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, default_value_t = DEFAULT_POWER_ITERS)]
    power_iters: usize,
    /// Data matrix (.ssnmf or .csv)
    #[arg(long = "in")]
    input: PathBuf,
    /// Estimated W (.ssnmf or .csv)
    #[arg(long)]
    out: PathBuf,
    /// Selected index sets as JSON [default: OUT with extension .sets.json]
    #[arg(long)]
    sets: Option<PathBuf>,
    #[command(flatten)]
    cube: CubeArgs,
}

#[derive(Debug, Args)]
struct AbundanceArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    w: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 500)]
    max_sweeps: usize,
    #[command(flatten)]
    cube: CubeArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, requires = "w_est", conflicts_with_all = ["input", "w"])]
    w_true: Option<PathBuf>,
    #[arg(long, requires = "w_true")]
    w_est: Option<PathBuf>,
    #[arg(long = "in", requires = "w")]
    input: Option<PathBuf>,
    #[arg(long, requires = "input")]
    w: Option<PathBuf>,
    /// Evaluate a given H instead of solving for it
    #[arg(long, requires = "input")]
    h: Option<PathBuf>,
    #[command(flatten)]
    cube: CubeArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Sweep description (JSON)
    #[arg(long)]
    config: PathBuf,
    /// CSV report
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MapsArgs {
    /// Abundance matrix, one row per endmember
    #[arg(long)]
    h: PathBuf,
    #[arg(long, conflicts_with_all = ["width", "height"])]
    sidecar: Option<PathBuf>,
    #[arg(long, requires = "height", required_unless_present = "sidecar")]
    width: Option<usize>,
    #[arg(long, requires = "width")]
    height: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_agg(s: &str) -> Result<Aggregation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let outcome = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Extract(a) => extract_cmd(a),
        Command::Abundances(a) => abundances(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Maps(a) => maps(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                e if e.is_numerical() => 3,
                Error::Parameter(_) => 1,
                _ => 2,
            })
        }
    }
}

fn write_by_extension(path: &Path, x: &DataMatrix) -> CliResult<()> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        io::write_csv(path, x)?;
    } else {
        io::write_matrix(path, x)?;
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(|e| {
        Failure::Core(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| {
        Failure::Core(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

/// Reads X and, when the geometry is known, clips extreme pixels.
fn load_x(path: &Path, cube: &CubeArgs) -> CliResult<DataMatrix> {
    let x = io::read_any(path)?;
    let cube_data = match (&cube.sidecar, cube.width, cube.height) {
        (Some(side), _, _) => HsiCube::with_sidecar(x, &io::read_sidecar(side)?)?,
        (None, Some(w), Some(h)) => HsiCube::new(x, w, h)?,
        _ => return Ok(x),
    };
    if cube.clip_k == 0 {
        return Ok(cube_data.into_data());
    }
    let (clipped, removed) = io::clip_extremes(&cube_data, cube.clip_k)?;
    eprintln!("clipped {} extreme pixels", removed.len());
    Ok(clipped.into_data())
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let spec = SyntheticSpec {
        m: a.m,
        n: a.n,
        r: a.r,
        alpha: a.alpha,
        epsilon: a.eps,
        seed: a.seed,
        w_source: a.w.map_or(WSource::Random, WSource::File),
    };
    let inst = datagen::generate(&spec)?;
    create_dir(&a.out)?;
    io::write_matrix(a.out.join("X.ssnmf"), &inst.x)?;
    io::write_matrix(a.out.join("W.ssnmf"), &inst.w_true)?;
    io::write_matrix(a.out.join("H.ssnmf"), &inst.h_true)?;
    write_json(&a.out.join("spec.json"), &spec)?;
    Ok(())
}

#[derive(Serialize)]
struct SetsFile<'a> {
    algorithm: String,
    r: usize,
    p: usize,
    aggregation: String,
    seed: Option<u64>,
    trial: u64,
    relative_error: Option<f64>,
    selected_sets: &'a [Vec<usize>],
    signs: &'a [Sign],
}

fn extract_cmd(a: ExtractArgs) -> CliResult<()> {
    if a.algo.is_randomized() && a.seed.is_none() {
        return Err(Failure::Usage(format!("--seed is required for {}", a.algo)));
    }
    if !a.algo.is_smoothed() && a.p != 1 {
        return Err(Failure::Usage(format!("{} takes no --p other than 1", a.algo)));
    }
    let x = load_x(&a.input, &a.cube)?;
    let base = AlgoConfig::new(a.r as usize)
        .with_p(a.p as usize)
        .with_aggregation(a.agg)
        .with_power_iters(a.power_iters);
    let seed = a.seed.unwrap_or(0);
    let trials = if a.algo.is_randomized() { a.trials } else { 1 };

    let mut best: Option<(u64, f64, ExtractionResult)> = None;
    for t in 0..trials {
        let trial_seed = if t == 0 { seed } else { derive_seed(seed, &[t]) };
        let res = extract::extract(&x, a.algo, &base.with_seed(trial_seed))?;
        if trials == 1 {
            best = Some((t, f64::NAN, res));
            break;
        }
        let err = relative_error(&x, &res.endmembers, &NnlsSettings::default())?;
        if best.as_ref().is_none_or(|(_, e, _)| err < *e) {
            best = Some((t, err, res));
        }
    }
    let (trial, err, res) = best.expect("at least one trial");

    write_by_extension(&a.out, &res.endmembers)?;
    let sets_path = a.sets.unwrap_or_else(|| a.out.with_extension("sets.json"));
    write_json(
        &sets_path,
        &SetsFile {
            algorithm: res.algorithm.to_string(),
            r: a.r as usize,
            p: res.p,
            aggregation: res.aggregation.to_string(),
            seed: a.seed,
            trial,
            relative_error: (!err.is_nan()).then_some(err),
            selected_sets: &res.selected_sets,
            signs: &res.signs,
        },
    )
}

fn abundances(a: AbundanceArgs) -> CliResult<()> {
    let x = load_x(&a.input, &a.cube)?;
    let w = EndmemberMatrix::new(io::read_any(&a.w)?);
    let settings = NnlsSettings {
        max_sweeps: a.max_sweeps,
        ..NnlsSettings::default()
    };
    let h = nnls_cd(&x, &w, &settings)?;
    write_by_extension(&a.out, &h)
}

#[derive(Serialize)]
struct MrsaReport {
    mrsa_total: f64,
    mrsa_mean: f64,
    permutation: Vec<usize>,
    per_column: Vec<f64>,
}

#[derive(Serialize)]
struct ErrorReport {
    relative_error: f64,
}

fn eval(a: EvalArgs) -> CliResult<()> {
    let line = match (&a.w_true, &a.w_est, &a.input, &a.w) {
        (Some(t), Some(e), _, _) => {
            let res = mrsa(&io::read_any(t)?, &io::read_any(e)?)?;
            serde_json::to_string(&MrsaReport {
                mrsa_total: res.total,
                mrsa_mean: res.mean(),
                permutation: res.permutation,
                per_column: res.per_column_angles,
            })
        }
        (_, _, Some(x), Some(w)) => {
            let x = load_x(x, &a.cube)?;
            let w = io::read_any(w)?;
            let relative_error = match &a.h {
                Some(h) => reconstruction_error(&x, &w, &io::read_any(h)?)?,
                None => relative_error(&x, &EndmemberMatrix::new(w), &NnlsSettings::default())?,
            };
            serde_json::to_string(&ErrorReport { relative_error })
        }
        _ => {
            return Err(Failure::Usage(
                "give either --w-true and --w-est, or --in and --w".into(),
            ))
        }
    };
    println!("{}", line.expect("serializable"));
    Ok(())
}

fn bench(a: BenchArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| {
        Failure::Core(Error::Io {
            path: a.config.clone(),
            source: e,
        })
    })?;
    let spec = SweepSpec::from_json(&text)?;
    let report = run_sweep(&spec)?;
    for row in report.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "{} p={}: {} of {} trials failed: {}",
            row.algorithm,
            row.p,
            spec.trials - row.trials_ok,
            spec.trials,
            row.error.as_deref().unwrap_or_default()
        );
    }
    export_csv(&report, &a.out)?;
    Ok(())
}

fn maps(a: MapsArgs) -> CliResult<()> {
    let h = io::read_any(&a.h)?;
    let (width, height) = match (&a.sidecar, a.width, a.height) {
        (Some(side), _, _) => {
            let s = io::read_sidecar(side)?;
            (s.width, s.height)
        }
        (None, Some(w), Some(hh)) => (w, hh),
        _ => return Err(Failure::Usage("maps needs --sidecar or --width/--height".into())),
    };
    let paths = io::write_abundance_maps(&h, width, height, &a.out)?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}
