//! Greedy vertex extraction: VCA, SPA, ALLS, SVCA and SSPA.
//!
//! All five share one skeleton. At step `k` a score vector `u_k` over the
//! data columns is formed from the residual of a direction after projecting
//! out the endmembers found so far, a selection rule turns `u_k` into an
//! index set, the selected columns are aggregated into the `k`-th endmember,
//! and the projector is extended by that endmember. The algorithms differ in
//! where the direction comes from (a random draw in the dominant left
//! singular subspace, or the data column with the largest residual norm) and
//! in the selection rule.

mod select;

use std::ops::Deref;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use select::{
    aggregate, top_p_abs, top_p_signed_extreme, top_p_signed_median, Aggregation, Selection, Sign,
};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, truncated_svd_basis, DataMatrix, OrthoBasis};
use crate::rng;

/// Estimated simplex vertices, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct EndmemberMatrix(DataMatrix);

impl EndmemberMatrix {
    pub fn new(w: DataMatrix) -> Self {
        EndmemberMatrix(w)
    }

    pub fn into_inner(self) -> DataMatrix {
        self.0
    }
}

impl Deref for EndmemberMatrix {
    type Target = DataMatrix;

    fn deref(&self) -> &DataMatrix {
        &self.0
    }
}

impl From<DataMatrix> for EndmemberMatrix {
    fn from(w: DataMatrix) -> Self {
        EndmemberMatrix(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Vca,
    Spa,
    Alls,
    Svca,
    Sspa,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Vca,
        Algorithm::Spa,
        Algorithm::Alls,
        Algorithm::Svca,
        Algorithm::Sspa,
    ];

    /// Whether the result depends on the seed.
    pub fn is_randomized(self) -> bool {
        matches!(self, Algorithm::Vca | Algorithm::Alls | Algorithm::Svca)
    }

    /// Whether the algorithm accepts `p > 1`.
    pub fn is_smoothed(self) -> bool {
        matches!(self, Algorithm::Alls | Algorithm::Svca | Algorithm::Sspa)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Vca => "vca",
            Algorithm::Spa => "spa",
            Algorithm::Alls => "alls",
            Algorithm::Svca => "svca",
            Algorithm::Sspa => "sspa",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parameter(format!("unknown algorithm '{s}'")))
    }
}

/// Parameters shared by all extraction algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    /// Number of vertices to extract.
    pub r: usize,
    /// Number of columns aggregated per vertex.
    pub p: usize,
    /// Used by SVCA and SSPA only; ALLS always averages.
    pub aggregation: Aggregation,
    pub seed: u64,
    pub power_iters: usize,
}

impl AlgoConfig {
    pub fn new(r: usize) -> Self {
        AlgoConfig {
            r,
            p: 1,
            aggregation: Aggregation::Median,
            seed: 0,
            power_iters: linalg::DEFAULT_POWER_ITERS,
        }
    }

    pub fn with_p(mut self, p: usize) -> Self {
        self.p = p;
        self
    }

    pub fn with_aggregation(mut self, aggregation: Aggregation) -> Self {
        self.aggregation = aggregation;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_power_iters(mut self, power_iters: usize) -> Self {
        self.power_iters = power_iters;
        self
    }

    fn validate(&self, x: &DataMatrix) -> Result<()> {
        let (m, n) = x.shape();
        if self.r == 0 || self.r > m.min(n) {
            return Err(Error::Parameter(format!(
                "r = {} must lie in [1, min({m}, {n})]",
                self.r
            )));
        }
        if self.p == 0 || self.p > n {
            return Err(Error::Parameter(format!(
                "p = {} must lie in [1, {n}]",
                self.p
            )));
        }
        if self.power_iters == 0 {
            return Err(Error::Parameter("power_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-step bookkeeping that is not part of the estimate itself.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// SPA/SSPA: the column of largest residual norm at each step.
    pub pivots: Vec<usize>,
    /// Largest `|u_k(j)|` (VCA family) or largest residual squared norm
    /// (SPA family) at each step.
    pub scores: Vec<f64>,
    /// Orthonormal basis of the projected-out endmember span.
    pub basis: Option<OrthoBasis>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionResult {
    pub endmembers: EndmemberMatrix,
    /// `selected_sets[k]` holds the columns aggregated into endmember `k`,
    /// ascending.
    pub selected_sets: Vec<Vec<usize>>,
    pub signs: Vec<Sign>,
    pub algorithm: Algorithm,
    pub p: usize,
    pub aggregation: Aggregation,
    pub diagnostics: Diagnostics,
}

impl ExtractionResult {
    /// Concatenation of the selected sets, step by step.
    pub fn index_sequence(&self) -> Vec<usize> {
        self.selected_sets.iter().flatten().copied().collect()
    }
}

/// Runs `algorithm` on `x`.
pub fn extract(x: &DataMatrix, algorithm: Algorithm, cfg: &AlgoConfig) -> Result<ExtractionResult> {
    match algorithm {
        Algorithm::Vca => vca(x, cfg),
        Algorithm::Spa => spa(x, cfg),
        Algorithm::Alls => alls(x, cfg),
        Algorithm::Svca => svca(x, cfg),
        Algorithm::Sspa => sspa(x, cfg),
    }
}

fn require_unsmoothed(algorithm: Algorithm, cfg: &AlgoConfig) -> Result<()> {
    if cfg.p != 1 {
        return Err(Error::Parameter(format!(
            "{algorithm} selects single columns; p must be 1, got {}",
            cfg.p
        )));
    }
    Ok(())
}

/// Vertex component analysis.
pub fn vca(x: &DataMatrix, cfg: &AlgoConfig) -> Result<ExtractionResult> {
    require_unsmoothed(Algorithm::Vca, cfg)?;
    random_direction_family(x, cfg, Algorithm::Vca)
}

/// Latent-simplex learning by averaging the `p` columns of largest `|u_k|`.
pub fn alls(x: &DataMatrix, cfg: &AlgoConfig) -> Result<ExtractionResult> {
    random_direction_family(x, cfg, Algorithm::Alls)
}

/// Smoothed VCA: signed-median selection, mean or median aggregation.
pub fn svca(x: &DataMatrix, cfg: &AlgoConfig) -> Result<ExtractionResult> {
    random_direction_family(x, cfg, Algorithm::Svca)
}

/// Successive projection algorithm.
pub fn spa(x: &DataMatrix, cfg: &AlgoConfig) -> Result<ExtractionResult> {
    require_unsmoothed(Algorithm::Spa, cfg)?;
    projection_family(x, cfg, Algorithm::Spa, |_, _, _| {})
}

/// Smoothed SPA: the residual-norm pivot gives the direction, the `p`
/// extreme columns along it are aggregated.
pub fn sspa(x: &DataMatrix, cfg: &AlgoConfig) -> Result<ExtractionResult> {
    projection_family(x, cfg, Algorithm::Sspa, |_, _, _| {})
}

/// [`spa`] that reports `(step, residual squared norms, basis)` after every
/// norm update.
pub fn spa_observed<F>(x: &DataMatrix, cfg: &AlgoConfig, observer: F) -> Result<ExtractionResult>
where
    F: FnMut(usize, &[f64], &OrthoBasis),
{
    require_unsmoothed(Algorithm::Spa, cfg)?;
    projection_family(x, cfg, Algorithm::Spa, observer)
}

/// [`sspa`] with the same observer hook as [`spa_observed`].
pub fn sspa_observed<F>(x: &DataMatrix, cfg: &AlgoConfig, observer: F) -> Result<ExtractionResult>
where
    F: FnMut(usize, &[f64], &OrthoBasis),
{
    projection_family(x, cfg, Algorithm::Sspa, observer)
}

/// Random direction for step `k`: `Y g` with `g ~ N(0, I_r)` drawn from the
/// stream for `(seed, k)`.
pub fn random_direction(y: &OrthoBasis, seed: u64, step: usize) -> Vec<f64> {
    let mut rng = rng::stream(seed, rng::tag::DIRECTION, step as u64);
    let mut d = vec![0.0; y.rows()];
    for col in y.columns() {
        let g: f64 = StandardNormal.sample(&mut rng);
        linalg::axpy(g, col, &mut d);
    }
    d
}

fn random_direction_family(
    x: &DataMatrix,
    cfg: &AlgoConfig,
    algorithm: Algorithm,
) -> Result<ExtractionResult> {
    cfg.validate(x)?;
    let aggregation = match algorithm {
        Algorithm::Alls | Algorithm::Vca => Aggregation::Mean,
        _ => cfg.aggregation,
    };
    let y = truncated_svd_basis(x, cfg.r, cfg.power_iters, cfg.seed)?;
    let mut basis = OrthoBasis::empty(x.rows());
    let mut builder = ResultBuilder::new(x.rows(), cfg.r);

    for k in 0..cfg.r {
        let d = random_direction(&y, cfg.seed, k);
        let residual = basis.apply(&d)?;
        let u = x.tr_mul_vec(&residual);
        let selection = match algorithm {
            Algorithm::Vca | Algorithm::Alls => {
                let indices = top_p_abs(&u, cfg.p)?;
                // orientation of the first (for p = 1, only) pick
                let sign = if u[indices[0]] >= 0.0 {
                    Sign::Positive
                } else {
                    Sign::Negative
                };
                Selection { indices, sign }
            }
            _ => top_p_signed_median(&u, cfg.p)?,
        };
        let w = aggregate(x, &selection.indices, aggregation)?;
        basis.extend(&w)?;
        let score = u.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        builder.push(w, selection, score);
    }

    Ok(builder.finish(algorithm, cfg.p, aggregation, Vec::new(), basis))
}

fn projection_family<F>(
    x: &DataMatrix,
    cfg: &AlgoConfig,
    algorithm: Algorithm,
    mut observer: F,
) -> Result<ExtractionResult>
where
    F: FnMut(usize, &[f64], &OrthoBasis),
{
    cfg.validate(x)?;
    let aggregation = match algorithm {
        Algorithm::Spa => Aggregation::Mean,
        _ => cfg.aggregation,
    };
    let mut norms: Vec<f64> = x.columns().map(|c| dot(c, c)).collect();
    let mut basis = OrthoBasis::empty(x.rows());
    let mut builder = ResultBuilder::new(x.rows(), cfg.r);
    let mut pivots = Vec::with_capacity(cfg.r);

    for k in 0..cfg.r {
        let pivot = argmax_first(&norms);
        let score = norms[pivot];
        pivots.push(pivot);
        let (w, selection) = match algorithm {
            Algorithm::Spa => (
                x.col(pivot).to_vec(),
                Selection {
                    indices: vec![pivot],
                    sign: Sign::Positive,
                },
            ),
            _ => {
                let residual = basis.apply(x.col(pivot))?;
                let mut u = x.tr_mul_vec(&residual);
                // u[pivot] = ‖residual‖² bounds every |u[j]|, so the pivot
                // always leads the positive side; pin it against rounding
                u[pivot] = f64::INFINITY;
                let selection = top_p_signed_extreme(&u, cfg.p)?;
                (aggregate(x, &selection.indices, aggregation)?, selection)
            }
        };
        basis.extend(&w)?;
        let v = basis.col(k);
        for (q, c) in norms.iter_mut().zip(x.columns()) {
            let t = dot(v, c);
            *q -= t * t;
        }
        observer(k, &norms, &basis);
        builder.push(w, selection, score);
    }

    Ok(builder.finish(algorithm, cfg.p, aggregation, pivots, basis))
}

/// First index of the maximum.
fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (j, &q) in v.iter().enumerate().skip(1) {
        if q > v[best] {
            best = j;
        }
    }
    best
}

struct ResultBuilder {
    rows: usize,
    values: Vec<f64>,
    sets: Vec<Vec<usize>>,
    signs: Vec<Sign>,
    scores: Vec<f64>,
}

impl ResultBuilder {
    fn new(rows: usize, r: usize) -> Self {
        ResultBuilder {
            rows,
            values: Vec::with_capacity(rows * r),
            sets: Vec::with_capacity(r),
            signs: Vec::with_capacity(r),
            scores: Vec::with_capacity(r),
        }
    }

    fn push(&mut self, w: Vec<f64>, selection: Selection, score: f64) {
        self.values.extend(w);
        self.sets.push(selection.indices);
        self.signs.push(selection.sign);
        self.scores.push(score);
    }

    fn finish(
        self,
        algorithm: Algorithm,
        p: usize,
        aggregation: Aggregation,
        pivots: Vec<usize>,
        basis: OrthoBasis,
    ) -> ExtractionResult {
        let cols = self.sets.len();
        let endmembers = DataMatrix::new(self.rows, cols, self.values)
            .expect("aggregates of finite columns are finite");
        ExtractionResult {
            endmembers: EndmemberMatrix(endmembers),
            selected_sets: self.sets,
            signs: self.signs,
            algorithm,
            p,
            aggregation,
            diagnostics: Diagnostics {
                pivots,
                scores: self.scores,
                basis: Some(basis),
            },
        }
    }
}
