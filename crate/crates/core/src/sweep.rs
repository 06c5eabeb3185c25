//! Seeded multi-trial experiment runner.
//!
//! A sweep is a grid of cells `(alpha, epsilon)`; in every cell each
//! configured algorithm is run on `trials` instances and the per-trial
//! MRSA (against the planted endmembers) and relative reconstruction error
//! are reduced to summary statistics. Seeds are derived from
//! `(base_seed, cell, trial)` alone, so the report does not depend on how
//! trials are scheduled across threads.
//!
//! For a fixed `alpha` the factors `W` and `H` are shared by all cells and
//! trials; only the noise is redrawn per trial. With
//! `resample_factors_per_trial` the factors are also redrawn per trial.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{self, SyntheticSpec, WSource};
use crate::error::{Error, Result};
use crate::extract::{extract, AlgoConfig, Aggregation, Algorithm, EndmemberMatrix};
use crate::io::{self, HsiCube};
use crate::linalg::{DataMatrix, DEFAULT_POWER_ITERS};
use crate::metrics::mrsa;
use crate::rng::derive_seed;
use crate::solver::{relative_error, NnlsSettings};

const NOISE_SALT: u64 = 0x4e;
const ALGO_SALT: u64 = 0xa1;
const FACTOR_SALT: u64 = 0xf0;

/// One algorithm entry of a sweep. Without `p`, the algorithm is run for
/// every value of [`SweepSpec::ps`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoSpec {
    pub algo: Algorithm,
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default, rename = "agg")]
    pub aggregation: Option<Aggregation>,
}

impl AlgoSpec {
    pub fn new(algo: Algorithm, p: usize, aggregation: Aggregation) -> Self {
        AlgoSpec {
            algo,
            p: Some(p),
            aggregation: Some(aggregation),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Min,
    Median,
    Max,
    Std,
    /// The trial with the smallest relative error, reported by its MRSA.
    BestByQf,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::Min => "min",
            Statistic::Median => "median",
            Statistic::Max => "max",
            Statistic::Std => "std",
            Statistic::BestByQf => "best_by_qf",
        }
    }
}

/// Where the trial data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic {
        #[serde(default = "default_m")]
        m: usize,
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_r")]
        r: usize,
        #[serde(default)]
        w_source: WSource,
    },
    /// A fixed data matrix (for example a hyperspectral cube); only relative
    /// errors are reported and the `alphas`/`epsilons` grid is ignored.
    Matrix {
        path: PathBuf,
        r: usize,
        /// Cube geometry, required for pixel clipping.
        #[serde(default)]
        sidecar: Option<PathBuf>,
        #[serde(default)]
        clip_k: Option<usize>,
    },
}

fn default_m() -> usize {
    224
}
fn default_n() -> usize {
    1000
}
fn default_r() -> usize {
    10
}
fn default_trials() -> usize {
    30
}
fn default_ps() -> Vec<usize> {
    vec![1]
}
fn default_epsilons() -> Vec<f64> {
    vec![0.0]
}
fn default_alphas() -> Vec<f64> {
    vec![0.05]
}
fn default_statistics() -> Vec<Statistic> {
    vec![
        Statistic::Min,
        Statistic::Median,
        Statistic::Max,
        Statistic::BestByQf,
    ]
}
fn default_power_iters() -> usize {
    DEFAULT_POWER_ITERS
}
fn default_source() -> DataSource {
    DataSource::Synthetic {
        m: default_m(),
        n: default_n(),
        r: default_r(),
        w_source: WSource::Random,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub algorithms: Vec<AlgoSpec>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_ps")]
    pub ps: Vec<usize>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_statistics")]
    pub statistics: Vec<Statistic>,
    #[serde(default = "default_source")]
    pub source: DataSource,
    /// Compute relative errors even when no statistic needs them.
    #[serde(default)]
    pub with_rel_error: bool,
    #[serde(default)]
    pub resample_factors_per_trial: bool,
    #[serde(default = "default_power_iters")]
    pub power_iters: usize,
}

impl SweepSpec {
    /// A synthetic sweep with default sizes and statistics.
    pub fn synthetic(algorithms: Vec<AlgoSpec>) -> Self {
        SweepSpec {
            algorithms,
            epsilons: default_epsilons(),
            ps: default_ps(),
            alphas: default_alphas(),
            trials: default_trials(),
            base_seed: 0,
            statistics: default_statistics(),
            source: default_source(),
            with_rel_error: false,
            resample_factors_per_trial: false,
            power_iters: DEFAULT_POWER_ITERS,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Parameter("trials must be at least 1".into()));
        }
        if self.algorithms.is_empty() || self.statistics.is_empty() || self.ps.is_empty() {
            return Err(Error::Parameter(
                "algorithms, statistics and ps must be non-empty".into(),
            ));
        }
        if matches!(self.source, DataSource::Synthetic { .. })
            && (self.epsilons.is_empty() || self.alphas.is_empty())
        {
            return Err(Error::Parameter(
                "synthetic sweeps need non-empty alphas and epsilons".into(),
            ));
        }
        Ok(())
    }

    fn needs_rel_error(&self) -> bool {
        self.with_rel_error
            || self.statistics.contains(&Statistic::BestByQf)
            || matches!(self.source, DataSource::Matrix { .. })
    }

    /// Expands the algorithm list against `ps` into concrete runs.
    pub fn runs(&self) -> Vec<RunConfig> {
        let mut out = Vec::new();
        for a in &self.algorithms {
            let ps: Vec<usize> = match a.p {
                Some(p) => vec![p],
                None if a.algo.is_smoothed() => self.ps.clone(),
                None => vec![1],
            };
            let aggregation = match a.algo {
                Algorithm::Svca | Algorithm::Sspa => a.aggregation.unwrap_or_default(),
                _ => Aggregation::Mean,
            };
            for p in ps {
                out.push(RunConfig {
                    algo: a.algo,
                    p,
                    aggregation,
                });
            }
        }
        out
    }
}

/// A concrete `(algorithm, p, aggregation)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub algo: Algorithm,
    pub p: usize,
    pub aggregation: Aggregation,
}

impl RunConfig {
    /// Label used in reports, e.g. `svca/median`.
    pub fn label(&self) -> String {
        match self.algo {
            Algorithm::Svca | Algorithm::Sspa => format!("{}/{}", self.algo, self.aggregation),
            a => a.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub algorithm: String,
    pub p: usize,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    /// A [`Statistic`] name, or `failed` when no trial succeeded.
    pub statistic: String,
    pub mrsa: Option<f64>,
    pub rel_error: Option<f64>,
    pub seconds: f64,
    pub trials_ok: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// First row matching the given keys.
    pub fn find(&self, algorithm: &str, p: usize, statistic: Statistic) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.algorithm == algorithm && r.p == p && r.statistic == statistic.name())
    }

    /// Rows for one `(alpha, epsilon)` cell.
    pub fn cell(&self, alpha: f64, epsilon: f64) -> impl Iterator<Item = &SweepRow> + '_ {
        self.rows
            .iter()
            .filter(move |r| r.alpha == Some(alpha) && r.epsilon == Some(epsilon))
    }
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    mrsa: Option<f64>,
    rel_error: Option<f64>,
    seconds: f64,
}

struct Cell {
    alpha: Option<f64>,
    epsilon: Option<f64>,
}

/// Runs the sweep. Extraction failures are recorded per row instead of
/// aborting.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    spec.validate()?;
    let runs = spec.runs();
    let want_rel = spec.needs_rel_error();

    match &spec.source {
        DataSource::Synthetic { m, n, r, w_source } => {
            let mut cells = Vec::new();
            for (ai, &alpha) in spec.alphas.iter().enumerate() {
                for &epsilon in &spec.epsilons {
                    cells.push((ai, alpha, epsilon));
                }
            }
            let jobs: Vec<(usize, usize)> = (0..cells.len())
                .flat_map(|c| (0..spec.trials).map(move |t| (c, t)))
                .collect();
            let results: Vec<Result<Vec<std::result::Result<TrialOutcome, String>>>> = jobs
                .par_iter()
                .map(|&(c, t)| {
                    let (ai, alpha, epsilon) = cells[c];
                    let factor_seed = if spec.resample_factors_per_trial {
                        derive_seed(spec.base_seed, &[FACTOR_SALT, ai as u64, t as u64])
                    } else {
                        derive_seed(spec.base_seed, &[FACTOR_SALT, ai as u64])
                    };
                    let syn = SyntheticSpec {
                        m: *m,
                        n: *n,
                        r: *r,
                        alpha,
                        epsilon,
                        seed: factor_seed,
                        w_source: w_source.clone(),
                    };
                    let noise_seed = derive_seed(spec.base_seed, &[NOISE_SALT, c as u64, t as u64]);
                    let inst = datagen::generate_with_noise_seed(&syn, noise_seed)?;
                    let algo_seed = derive_seed(spec.base_seed, &[ALGO_SALT, c as u64, t as u64]);
                    Ok(runs
                        .iter()
                        .map(|run| {
                            run_trial(&inst.x, Some(&inst.w_true), *r, run, algo_seed, spec, want_rel)
                        })
                        .collect())
                })
                .collect();

            let mut rows = Vec::new();
            for (c, &(_, alpha, epsilon)) in cells.iter().enumerate() {
                let per_trial: Vec<&Vec<_>> = results[c * spec.trials..(c + 1) * spec.trials]
                    .iter()
                    .map(|r| r.as_ref().map_err(|e| Error::Input(e.to_string())))
                    .collect::<Result<_>>()?;
                let cell = Cell {
                    alpha: Some(alpha),
                    epsilon: Some(epsilon),
                };
                summarize_cell(&cell, &runs, &per_trial, spec, &mut rows);
            }
            Ok(SweepReport { rows })
        }
        DataSource::Matrix {
            path,
            r,
            sidecar,
            clip_k,
        } => {
            let x = load_data(path, sidecar.as_deref(), *clip_k)?;
            let per_trial: Vec<Vec<_>> = (0..spec.trials)
                .into_par_iter()
                .map(|t| {
                    let algo_seed = derive_seed(spec.base_seed, &[ALGO_SALT, 0, t as u64]);
                    runs.iter()
                        .map(|run| run_trial(&x, None, *r, run, algo_seed, spec, true))
                        .collect()
                })
                .collect();
            let refs: Vec<&Vec<_>> = per_trial.iter().collect();
            let mut rows = Vec::new();
            let cell = Cell {
                alpha: None,
                epsilon: None,
            };
            summarize_cell(&cell, &runs, &refs, spec, &mut rows);
            Ok(SweepReport { rows })
        }
    }
}

/// Reads a data matrix, optionally clipping extreme pixels of a cube.
pub fn load_data(path: &Path, sidecar: Option<&Path>, clip_k: Option<usize>) -> Result<DataMatrix> {
    let x = io::read_any(path)?;
    match (sidecar, clip_k) {
        (Some(side), Some(k)) if k > 0 => {
            let cube = HsiCube::with_sidecar(x, &io::read_sidecar(side)?)?;
            Ok(io::clip_extremes(&cube, k)?.0.into_data())
        }
        (None, Some(k)) if k > 0 => Err(Error::Parameter(
            "pixel clipping needs the cube geometry (sidecar)".into(),
        )),
        _ => Ok(x),
    }
}

fn run_trial(
    x: &DataMatrix,
    truth: Option<&EndmemberMatrix>,
    r: usize,
    run: &RunConfig,
    seed: u64,
    spec: &SweepSpec,
    want_rel: bool,
) -> std::result::Result<TrialOutcome, String> {
    let cfg = AlgoConfig::new(r)
        .with_p(run.p)
        .with_aggregation(run.aggregation)
        .with_seed(seed)
        .with_power_iters(spec.power_iters);
    let start = Instant::now();
    let res = extract(x, run.algo, &cfg).map_err(|e| e.to_string())?;
    let seconds = start.elapsed().as_secs_f64();
    let mrsa = match truth {
        Some(w) => Some(mrsa(w, &res.endmembers).map_err(|e| e.to_string())?.total),
        None => None,
    };
    let rel_error = if want_rel {
        Some(relative_error(x, &res.endmembers, &NnlsSettings::default()).map_err(|e| e.to_string())?)
    } else {
        None
    };
    Ok(TrialOutcome {
        mrsa,
        rel_error,
        seconds,
    })
}

fn summarize_cell(
    cell: &Cell,
    runs: &[RunConfig],
    per_trial: &[&Vec<std::result::Result<TrialOutcome, String>>],
    spec: &SweepSpec,
    rows: &mut Vec<SweepRow>,
) {
    for (ri, run) in runs.iter().enumerate() {
        let mut ok = Vec::new();
        let mut first_err = None;
        for trial in per_trial {
            match &trial[ri] {
                Ok(o) => ok.push(*o),
                Err(e) => {
                    first_err.get_or_insert_with(|| e.clone());
                }
            }
        }
        let base = SweepRow {
            algorithm: run.label(),
            p: run.p,
            alpha: cell.alpha,
            epsilon: cell.epsilon,
            statistic: String::new(),
            mrsa: None,
            rel_error: None,
            seconds: 0.0,
            trials_ok: ok.len(),
            error: first_err,
        };
        if ok.is_empty() {
            rows.push(SweepRow {
                statistic: "failed".into(),
                ..base
            });
            continue;
        }
        for &stat in &spec.statistics {
            let row = match stat {
                Statistic::BestByQf => {
                    let best = ok
                        .iter()
                        .enumerate()
                        .filter_map(|(i, o)| o.rel_error.map(|e| (i, e)))
                        .fold(None, |acc: Option<(usize, f64)>, (i, e)| match acc {
                            Some((_, be)) if be <= e => acc,
                            _ => Some((i, e)),
                        });
                    match best {
                        Some((i, _)) => SweepRow {
                            statistic: stat.name().into(),
                            mrsa: ok[i].mrsa,
                            rel_error: ok[i].rel_error,
                            seconds: ok[i].seconds,
                            ..base.clone()
                        },
                        None => continue,
                    }
                }
                _ => {
                    let reduce = |vals: Vec<f64>| summary(stat, vals);
                    SweepRow {
                        statistic: stat.name().into(),
                        mrsa: reduce(ok.iter().filter_map(|o| o.mrsa).collect()),
                        rel_error: reduce(ok.iter().filter_map(|o| o.rel_error).collect()),
                        seconds: reduce(ok.iter().map(|o| o.seconds).collect()).unwrap_or(0.0),
                        ..base.clone()
                    }
                }
            };
            rows.push(row);
        }
    }
}

/// `min`, `median` (mean of the middle pair for even counts), `max`, or the
/// population standard deviation of `vals`; `None` when `vals` is empty.
pub fn summary(stat: Statistic, mut vals: Vec<f64>) -> Option<f64> {
    if vals.is_empty() {
        return None;
    }
    vals.sort_by(|a, b| a.total_cmp(b));
    let n = vals.len();
    Some(match stat {
        Statistic::Min => vals[0],
        Statistic::Max => vals[n - 1],
        Statistic::Median => {
            if n % 2 == 1 {
                vals[n / 2]
            } else {
                0.5 * (vals[n / 2 - 1] + vals[n / 2])
            }
        }
        Statistic::Std => {
            let mean = vals.iter().sum::<f64>() / n as f64;
            (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt()
        }
        Statistic::BestByQf => return None,
    })
}

pub const CSV_HEADER: &str = "algorithm,p,alpha,epsilon,statistic,mrsa,rel_error,seconds";

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Renders the report as CSV text.
pub fn render_csv(report: &SweepReport) -> Result<String> {
    if report.rows.is_empty() {
        return Err(Error::Parameter("cannot export an empty report".into()));
    }
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.algorithm,
            r.p,
            opt(r.alpha),
            opt(r.epsilon),
            r.statistic,
            opt(r.mrsa),
            opt(r.rel_error),
            r.seconds
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

pub fn export_csv(report: &SweepReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = render_csv(report)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
