//! Synthetic near-separable data: `X = W H + N` with `H = [I_r, H']`,
//! Dirichlet-distributed columns of `H'`, and Gaussian noise rescaled to a
//! prescribed relative norm.
//!
//! `W`, `H` and `N` are drawn from three independent streams of the same
//! seed, so the noise can be redrawn without touching the factors.

use std::path::PathBuf;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::EndmemberMatrix;
use crate::io;
use crate::linalg::{condition_number, DataMatrix};
use crate::rng;
use crate::solver::AbundanceMatrix;

/// Largest accepted condition number for a randomly drawn `W`.
pub const MAX_CONDITION: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WSource {
    /// I.i.d. uniform `[0, 1]` entries, redrawn until well conditioned.
    #[default]
    Random,
    /// An `m x r` matrix in the binary matrix format.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    /// Dirichlet concentration of the mixed columns.
    pub alpha: f64,
    /// `‖N‖_F / ‖W H‖_F`.
    pub epsilon: f64,
    pub seed: u64,
    pub w_source: WSource,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            m: 224,
            n: 1000,
            r: 10,
            alpha: 0.05,
            epsilon: 0.0,
            seed: 0,
            w_source: WSource::Random,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.r == 0 {
            return Err(Error::Parameter("m and r must be positive".into()));
        }
        if self.n < self.r {
            return Err(Error::Parameter(format!(
                "n = {} must be at least r = {}",
                self.n, self.r
            )));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::Parameter(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::Parameter(format!(
                "epsilon must be nonnegative, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance {
    pub x: DataMatrix,
    pub w_true: EndmemberMatrix,
    pub h_true: AbundanceMatrix,
    /// `‖N‖_F`.
    pub noise_norm: f64,
}

/// One draw from `Dirichlet(alpha * e)` in `R^r`, by normalizing
/// independent `Gamma(alpha, 1)` variates.
pub fn dirichlet_column<R: Rng + ?Sized>(alpha: f64, r: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
    }
    if r == 0 {
        return Err(Error::Parameter("r must be positive".into()));
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::Parameter(e.to_string()))?;
    loop {
        let mut col: Vec<f64> = (0..r).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = col.iter().sum();
        // for tiny alpha every variate can underflow to zero; redraw
        if sum > 0.0 && sum.is_finite() {
            col.iter_mut().for_each(|v| *v /= sum);
            return Ok(col);
        }
    }
}

/// Uniform `[0, 1]` `m x r` matrix with condition number at most
/// [`MAX_CONDITION`].
pub fn random_endmembers(m: usize, r: usize, seed: u64) -> Result<DataMatrix> {
    if r > m {
        return Err(Error::Parameter(format!(
            "cannot draw {r} well-conditioned columns in R^{m}"
        )));
    }
    for attempt in 0..1000u64 {
        let mut rng = rng::stream(seed, rng::tag::ENDMEMBERS, attempt);
        let values: Vec<f64> = (0..m * r).map(|_| rng.random::<f64>()).collect();
        let w = DataMatrix::new(m, r, values)?;
        if condition_number(&w) <= MAX_CONDITION {
            return Ok(w);
        }
    }
    Err(Error::Parameter(format!(
        "no {m}x{r} uniform matrix with condition number <= {MAX_CONDITION} in 1000 draws"
    )))
}

/// `H = [I_r, H']` with Dirichlet columns in `H'`.
pub fn planted_abundances(r: usize, n: usize, alpha: f64, seed: u64) -> Result<DataMatrix> {
    if n < r {
        return Err(Error::Parameter(format!("n = {n} must be at least r = {r}")));
    }
    let mut rng = rng::stream(seed, rng::tag::ABUNDANCES, 0);
    let mut values = Vec::with_capacity(r * n);
    for j in 0..r {
        values.extend((0..r).map(|i| if i == j { 1.0 } else { 0.0 }));
    }
    for _ in r..n {
        values.extend(dirichlet_column(alpha, r, &mut rng)?);
    }
    DataMatrix::new(r, n, values)
}

/// Adds Gaussian noise scaled so that `‖N‖_F = epsilon ‖clean‖_F`.
/// Returns the noisy matrix and `‖N‖_F`.
pub fn add_noise(clean: &DataMatrix, epsilon: f64, seed: u64) -> Result<(DataMatrix, f64)> {
    if epsilon == 0.0 {
        return Ok((clean.clone(), 0.0));
    }
    let mut rng = rng::stream(seed, rng::tag::NOISE, 0);
    let noise: Vec<f64> = (0..clean.as_slice().len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let raw = noise.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = epsilon * clean.frobenius_norm() / raw;
    let values = clean
        .as_slice()
        .iter()
        .zip(&noise)
        .map(|(c, e)| c + scale * e)
        .collect();
    let x = DataMatrix::new(clean.rows(), clean.cols(), values)?;
    Ok((x, scale * raw))
}

/// Builds the instance described by `spec`; `W` and `H` come from
/// `spec.seed`, the noise from `noise_seed`.
pub fn generate_with_noise_seed(spec: &SyntheticSpec, noise_seed: u64) -> Result<SyntheticInstance> {
    spec.validate()?;
    let w = match &spec.w_source {
        WSource::Random => random_endmembers(spec.m, spec.r, spec.seed)?,
        WSource::File(path) => {
            let w = io::read_matrix(path)?;
            if w.shape() != (spec.m, spec.r) {
                return Err(Error::Input(format!(
                    "{} holds a {}x{} matrix, expected {}x{}",
                    path.display(),
                    w.rows(),
                    w.cols(),
                    spec.m,
                    spec.r
                )));
            }
            w
        }
    };
    let h = planted_abundances(spec.r, spec.n, spec.alpha, spec.seed)?;
    let clean = w.matmul(&h)?;
    let (x, noise_norm) = add_noise(&clean, spec.epsilon, noise_seed)?;
    Ok(SyntheticInstance {
        x,
        w_true: EndmemberMatrix::new(w),
        h_true: AbundanceMatrix::new(h)?,
        noise_norm,
    })
}

/// Builds the instance described by `spec`.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticInstance> {
    generate_with_noise_seed(spec, spec.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_draws_are_on_the_simplex() {
        let mut rng = rng::stream(3, 0, 0);
        for alpha in [0.01, 0.3, 5.0] {
            for _ in 0..200 {
                let c = dirichlet_column(alpha, 6, &mut rng).unwrap();
                assert!(c.iter().all(|&v| v >= 0.0));
                assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dirichlet_rejects_bad_alpha() {
        let mut rng = rng::stream(3, 0, 0);
        assert!(matches!(
            dirichlet_column(0.0, 3, &mut rng),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            dirichlet_column(-1.0, 3, &mut rng),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn noiseless_instance_is_exact() {
        let spec = SyntheticSpec {
            m: 30,
            n: 100,
            r: 5,
            seed: 4,
            ..Default::default()
        };
        let inst = generate(&spec).unwrap();
        assert_eq!(inst.x, inst.w_true.matmul(&inst.h_true).unwrap());
        assert_eq!(inst.noise_norm, 0.0);
    }

    #[test]
    fn noise_has_prescribed_relative_norm() {
        let spec = SyntheticSpec {
            m: 30,
            n: 100,
            r: 5,
            epsilon: 0.05,
            seed: 9,
            ..Default::default()
        };
        let inst = generate(&spec).unwrap();
        let clean = inst.w_true.matmul(&inst.h_true).unwrap();
        let rel = inst.x.sub(&clean).unwrap().frobenius_norm() / clean.frobenius_norm();
        assert!((rel - 0.05).abs() < 1e-10, "{rel}");
        assert!((inst.noise_norm / clean.frobenius_norm() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn planted_identity_and_stochastic_columns() {
        let h = planted_abundances(4, 50, 0.1, 1).unwrap();
        for j in 0..4 {
            for i in 0..4 {
                assert_eq!(h.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
        for c in h.columns() {
            assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_w_is_well_conditioned_and_reproducible() {
        let a = random_endmembers(40, 6, 12).unwrap();
        let b = random_endmembers(40, 6, 12).unwrap();
        assert_eq!(a, b);
        assert!(condition_number(&a) <= MAX_CONDITION);
    }

    #[test]
    fn n_below_r_is_rejected() {
        let spec = SyntheticSpec {
            m: 10,
            n: 3,
            r: 5,
            ..Default::default()
        };
        assert!(matches!(generate(&spec), Err(Error::Parameter(_))));
    }
}
