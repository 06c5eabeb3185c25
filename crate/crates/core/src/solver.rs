//! Nonnegative least squares by cyclic coordinate descent.
//!
//! `min_{H >= 0} ‖X - W H‖_F` decouples over the columns of `X`; each column
//! is solved independently (and in parallel) through the Gram matrix
//! `W^T W` and the correlations `W^T x`, so one coordinate update costs
//! `O(r)` rather than `O(m)`.

use std::ops::Deref;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extract::EndmemberMatrix;
use crate::linalg::{dot, DataMatrix};

/// Nonnegative `r x n` mixing weights. Columns are not constrained to sum
/// to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceMatrix(DataMatrix);

impl AbundanceMatrix {
    pub fn new(h: DataMatrix) -> Result<Self> {
        if let Some(pos) = h.as_slice().iter().position(|&v| v < 0.0) {
            return Err(Error::Input(format!(
                "abundance entry ({}, {}) is negative",
                pos % h.rows(),
                pos / h.rows()
            )));
        }
        Ok(AbundanceMatrix(h))
    }

    pub fn into_inner(self) -> DataMatrix {
        self.0
    }
}

impl Deref for AbundanceMatrix {
    type Target = DataMatrix;

    fn deref(&self) -> &DataMatrix {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum NnlsInit {
    #[default]
    Zeros,
    Given(AbundanceMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSettings {
    pub max_sweeps: usize,
    /// Stop once every coordinate satisfies the optimality conditions to
    /// within `kkt_tol * ‖W(:, k)‖ * ‖x‖`.
    pub kkt_tol: f64,
    pub init: NnlsInit,
}

impl Default for NnlsSettings {
    fn default() -> Self {
        NnlsSettings {
            max_sweeps: 500,
            kkt_tol: 1e-6,
            init: NnlsInit::Zeros,
        }
    }
}

impl NnlsSettings {
    fn validate(&self) -> Result<()> {
        if !self.kkt_tol.is_finite() || self.kkt_tol <= 0.0 {
            return Err(Error::Parameter(format!(
                "kkt_tol must be positive, got {}",
                self.kkt_tol
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Parameter("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Precomputed quantities for solving many columns against one `W`.
#[derive(Debug, Clone)]
pub struct GramSystem {
    r: usize,
    /// `W^T W`, column-major `r x r`.
    gram: Vec<f64>,
}

impl GramSystem {
    pub fn new(w: &DataMatrix) -> Result<Self> {
        let r = w.cols();
        for k in 0..r {
            if dot(w.col(k), w.col(k)) == 0.0 {
                return Err(Error::Parameter(format!("column {k} of W is zero")));
            }
        }
        let gram = w.tr_matmul(w)?.into_vec();
        Ok(GramSystem { r, gram })
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    /// Solves one column in place. `wtx = W^T x`, `xx = ‖x‖²`, `h` holds the
    /// starting point. Returns the squared residual after each sweep,
    /// starting with the initial value.
    pub fn solve_column(
        &self,
        wtx: &[f64],
        xx: f64,
        h: &mut [f64],
        max_sweeps: usize,
        kkt_tol: f64,
    ) -> Vec<f64> {
        let r = self.r;
        let g = &self.gram;
        // gh = G h
        let mut gh = vec![0.0; r];
        for (l, &hl) in h.iter().enumerate() {
            if hl != 0.0 {
                for (k, ghk) in gh.iter_mut().enumerate() {
                    *ghk += g[l * r + k] * hl;
                }
            }
        }
        let objective = |h: &[f64], gh: &[f64]| {
            let f = xx - 2.0 * dot(h, wtx) + dot(h, gh);
            f.max(0.0)
        };
        let floor = f64::EPSILON * xx;
        let x_norm = xx.sqrt();
        let converged = |h: &[f64], gh: &[f64]| {
            (0..r).all(|k| {
                let tol = kkt_tol * g[k * r + k].sqrt() * x_norm;
                let grad = wtx[k] - gh[k];
                if h[k] > 0.0 {
                    grad.abs() <= tol
                } else {
                    grad <= tol
                }
            })
        };
        let mut history = Vec::with_capacity(max_sweeps.min(64) + 1);
        history.push(objective(h, &gh));

        for _ in 0..max_sweeps {
            for k in 0..r {
                let gkk = g[k * r + k];
                let grad = wtx[k] - gh[k];
                let new = (h[k] + grad / gkk).max(0.0);
                let delta = new - h[k];
                if delta != 0.0 {
                    h[k] = new;
                    let gcol = &g[k * r..(k + 1) * r];
                    for (ghl, &gl) in gh.iter_mut().zip(gcol) {
                        *ghl += delta * gl;
                    }
                }
            }
            let f = objective(h, &gh);
            history.push(f);
            if f <= floor || converged(h, &gh) {
                break;
            }
        }
        history
    }
}

fn check_inputs(x: &DataMatrix, w: &DataMatrix) -> Result<()> {
    if x.rows() != w.rows() {
        return Err(Error::Dimension(format!(
            "X has {} rows but W has {}",
            x.rows(),
            w.rows()
        )));
    }
    if x.as_slice().iter().chain(w.as_slice()).any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite entries in X or W".into()));
    }
    Ok(())
}

/// Approximately minimizes `‖X - W H‖_F` over `H >= 0`.
pub fn nnls_cd(
    x: &DataMatrix,
    w: &EndmemberMatrix,
    settings: &NnlsSettings,
) -> Result<AbundanceMatrix> {
    settings.validate()?;
    check_inputs(x, w)?;
    let system = GramSystem::new(w)?;
    let r = w.cols();
    let n = x.cols();

    let mut h = match &settings.init {
        NnlsInit::Zeros => vec![0.0; r * n],
        NnlsInit::Given(h0) => {
            if h0.shape() != (r, n) {
                return Err(Error::Dimension(format!(
                    "initial H is {:?}, expected ({r}, {n})",
                    h0.shape()
                )));
            }
            h0.as_slice().to_vec()
        }
    };

    h.par_chunks_mut(r).enumerate().for_each(|(j, hj)| {
        let xj = x.col(j);
        let wtx = w.tr_mul_vec(xj);
        system.solve_column(&wtx, dot(xj, xj), hj, settings.max_sweeps, settings.kkt_tol);
    });

    AbundanceMatrix::new(DataMatrix::new(r, n, h)?)
}

/// `‖X - W H‖_F / ‖X‖_F` for a given `H`.
pub fn reconstruction_error(x: &DataMatrix, w: &DataMatrix, h: &DataMatrix) -> Result<f64> {
    let norm_x = x.frobenius_norm();
    if norm_x == 0.0 {
        return Err(Error::Parameter("X is identically zero".into()));
    }
    let wh = w.matmul(h)?;
    Ok(x.sub(&wh)?.frobenius_norm() / norm_x)
}

/// `min_{H >= 0} ‖X - W H‖_F / ‖X‖_F`, with `H` from [`nnls_cd`].
pub fn relative_error(x: &DataMatrix, w: &EndmemberMatrix, settings: &NnlsSettings) -> Result<f64> {
    if x.frobenius_norm() == 0.0 {
        return Err(Error::Parameter("X is identically zero".into()));
    }
    let h = nnls_cd(x, w, settings)?;
    Ok(reconstruction_error(x, w, &h)?.min(1.0))
}
