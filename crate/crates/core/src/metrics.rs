//! Mean-removed spectral angle with optimal column matching, and purity
//! statistics of abundance matrices.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, DataMatrix};

/// Optimal matching between reference and estimated columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    /// Reference column `i` is matched with estimated column `permutation[i]`.
    pub permutation: Vec<usize>,
    /// Angle of each matched pair, in `[0, 1]`.
    pub per_column_angles: Vec<f64>,
    /// Sum of the per-column angles.
    pub total: f64,
}

impl MatchResult {
    /// `total / r`.
    pub fn mean(&self) -> f64 {
        self.total / self.per_column_angles.len() as f64
    }
}

fn centered(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

fn centered_unit(x: &[f64], which: &str) -> Result<Vec<f64>> {
    let mut c = centered(x);
    let nrm = dot(&c, &c).sqrt();
    if nrm.is_nan() || nrm <= 1e-15 {
        return Err(Error::Degenerate(format!("{which} is constant")));
    }
    c.iter_mut().for_each(|v| *v /= nrm);
    Ok(c)
}

/// `arccos` of the cosine between the mean-removed vectors, divided by π.
pub fn mrsa_pair(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Dimension(format!(
            "vectors of lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    let cx = centered_unit(x, "first vector")?;
    let cy = centered_unit(y, "second vector")?;
    Ok(angle_of_units(&cx, &cy))
}

// arccos(<a, b>) for unit vectors, evaluated as 2 atan2(|a - b|, |a + b|):
// exact for identical inputs and well conditioned near 0 and π, where the
// plain arccos of a rounded cosine loses half the digits.
fn angle_of_units(cx: &[f64], cy: &[f64]) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in cx.iter().zip(cy) {
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    (2.0 * diff.sqrt().atan2(sum.sqrt()) / std::f64::consts::PI).clamp(0.0, 1.0)
}

/// Pairwise angles `cost[i][j] = φ(reference[:, i], estimate[:, j])`.
pub fn mrsa_cost_matrix(reference: &DataMatrix, estimate: &DataMatrix) -> Result<Vec<Vec<f64>>> {
    if reference.shape() != estimate.shape() {
        return Err(Error::Parameter(format!(
            "reference is {:?} but estimate is {:?}",
            reference.shape(),
            estimate.shape()
        )));
    }
    let a: Vec<Vec<f64>> = reference
        .columns()
        .enumerate()
        .map(|(i, c)| centered_unit(c, &format!("reference column {i}")))
        .collect::<Result<_>>()?;
    let b: Vec<Vec<f64>> = estimate
        .columns()
        .enumerate()
        .map(|(j, c)| centered_unit(c, &format!("estimated column {j}")))
        .collect::<Result<_>>()?;
    Ok(a.iter()
        .map(|ai| b.iter().map(|bj| angle_of_units(ai, bj)).collect())
        .collect())
}

/// MRSA between `reference` and `estimate` after reordering the estimated
/// columns to minimize the sum of angles.
pub fn mrsa(reference: &DataMatrix, estimate: &DataMatrix) -> Result<MatchResult> {
    let cost = mrsa_cost_matrix(reference, estimate)?;
    let permutation = min_cost_assignment(&cost);
    let per_column_angles: Vec<f64> = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .collect();
    let total = per_column_angles.iter().sum();
    Ok(MatchResult {
        permutation,
        per_column_angles,
        total,
    })
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with row/column potentials, `O(r³)`). Returns `assignment[row] = col`.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    assert!(cost.iter().all(|row| row.len() == n), "cost matrix must be square");

    // 1-based internally; index 0 is the virtual start column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    assignment
}

/// For each row `i` of `h`, the fraction of columns with `h[i, j] > threshold`.
pub fn purity_fraction(h: &DataMatrix, threshold: f64) -> Result<Vec<f64>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Parameter(format!(
            "threshold {threshold} must lie in (0, 1)"
        )));
    }
    if h.as_slice().iter().any(|&v| v < 0.0) {
        return Err(Error::Input("abundances must be nonnegative".into()));
    }
    let mut counts = vec![0usize; h.rows()];
    for col in h.columns() {
        for (c, &v) in counts.iter_mut().zip(col) {
            if v > threshold {
                *c += 1;
            }
        }
    }
    let n = h.cols() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_examples() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(mrsa_pair(&x, &x).unwrap(), 0.0);
        assert!((mrsa_pair(&x, &[3.0, 2.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        let y: Vec<f64> = x.iter().map(|v| 4.0 + 2.5 * v).collect();
        assert!(mrsa_pair(&x, &y).unwrap().abs() < 1e-12);
    }

    #[test]
    fn constant_vector_is_degenerate() {
        assert!(matches!(
            mrsa_pair(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn shuffled_columns_match_back() {
        let w = DataMatrix::from_columns(&[
            [1.0, 0.0, 2.0, 5.0],
            [0.0, 3.0, 1.0, 1.0],
            [4.0, 1.0, 0.0, 2.0],
        ])
        .unwrap();
        let est = w.select_columns(&[2, 0, 1]).unwrap();
        let res = mrsa(&w, &est).unwrap();
        assert_eq!(res.total, 0.0);
        assert_eq!(res.permutation, vec![1, 2, 0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = DataMatrix::identity(3);
        let b = a.select_columns(&[0, 1]).unwrap();
        assert!(matches!(mrsa(&a, &b), Err(Error::Parameter(_))));
    }

    #[test]
    fn assignment_two_by_two() {
        let cost = vec![vec![0.1, 0.9], vec![0.8, 0.2]];
        assert_eq!(min_cost_assignment(&cost), vec![0, 1]);
        let cost = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        assert_eq!(min_cost_assignment(&cost), vec![1, 0]);
    }

    #[test]
    fn purity_examples() {
        let p = purity_fraction(&DataMatrix::identity(4), 0.95).unwrap();
        assert_eq!(p, vec![0.25; 4]);
        let uniform = DataMatrix::new(3, 5, vec![1.0 / 3.0; 15]).unwrap();
        assert_eq!(purity_fraction(&uniform, 0.95).unwrap(), vec![0.0; 3]);
        assert!(purity_fraction(&uniform, 1.0).is_err());
    }
}
