//! Top-p selection rules and column aggregation.
//!
//! All rules break ties by the smallest column index and return the chosen
//! indices in ascending order.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DataMatrix;

/// Orientation of the direction a selection was taken along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+1")]
    Positive,
    #[serde(rename = "-1")]
    Negative,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

/// How the `p` selected columns are reduced to one endmember.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Mean,
    #[default]
    Median,
}

impl std::fmt::Display for Aggregation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Aggregation::Mean => "mean",
            Aggregation::Median => "median",
        })
    }
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(Aggregation::Mean),
            "median" => Ok(Aggregation::Median),
            other => Err(Error::Parameter(format!("unknown aggregation '{other}'"))),
        }
    }
}

/// Indices chosen by a selection rule together with the chosen orientation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub indices: Vec<usize>,
    pub sign: Sign,
}

fn check_p(n: usize, p: usize) -> Result<()> {
    if p == 0 || p > n {
        return Err(Error::Parameter(format!("p = {p} must lie in [1, {n}]")));
    }
    Ok(())
}

/// The `p` indices that come first under `cmp`, ascending by index.
fn first_p_by<F>(n: usize, p: usize, mut cmp: F) -> Vec<usize>
where
    F: FnMut(usize, usize) -> Ordering,
{
    let mut idx: Vec<usize> = (0..n).collect();
    if p < n {
        idx.select_nth_unstable_by(p - 1, |&a, &b| cmp(a, b));
        idx.truncate(p);
    }
    idx.sort_unstable();
    idx
}

fn largest(u: &[f64], p: usize) -> Vec<usize> {
    first_p_by(u.len(), p, |a, b| {
        u[b].partial_cmp(&u[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    })
}

fn smallest(u: &[f64], p: usize) -> Vec<usize> {
    first_p_by(u.len(), p, |a, b| {
        u[a].partial_cmp(&u[b]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    })
}

/// Median of a non-empty slice; even sizes average the two middle values.
/// Reorders `vals`.
pub(crate) fn median_in_place(vals: &mut [f64]) -> f64 {
    let n = vals.len();
    debug_assert!(n > 0);
    let cmp = |a: &f64, b: &f64| a.partial_cmp(b).unwrap_or(Ordering::Equal);
    let mid = n / 2;
    let (lo, upper, _) = vals.select_nth_unstable_by(mid, cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

fn median_of(u: &[f64], idx: &[usize]) -> f64 {
    let mut vals: Vec<f64> = idx.iter().map(|&j| u[j]).collect();
    median_in_place(&mut vals)
}

/// Picks the `p` largest entries of `u` if the median of those is at least
/// the absolute value of the median of the `p` smallest; otherwise the `p`
/// smallest, with a negative sign.
pub fn top_p_signed_median(u: &[f64], p: usize) -> Result<Selection> {
    check_p(u.len(), p)?;
    let top = largest(u, p);
    let bottom = smallest(u, p);
    if median_of(u, &top) >= median_of(u, &bottom).abs() {
        Ok(Selection {
            indices: top,
            sign: Sign::Positive,
        })
    } else {
        Ok(Selection {
            indices: bottom,
            sign: Sign::Negative,
        })
    }
}

/// Picks the `p` maximizers of `u` if `max u >= -min u`, else the `p`
/// minimizers.
pub fn top_p_signed_extreme(u: &[f64], p: usize) -> Result<Selection> {
    check_p(u.len(), p)?;
    let (lo, hi) = u
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi >= -lo {
        Ok(Selection {
            indices: largest(u, p),
            sign: Sign::Positive,
        })
    } else {
        Ok(Selection {
            indices: smallest(u, p),
            sign: Sign::Negative,
        })
    }
}

/// Indices of the `p` entries of largest magnitude.
pub fn top_p_abs(u: &[f64], p: usize) -> Result<Vec<usize>> {
    check_p(u.len(), p)?;
    Ok(first_p_by(u.len(), p, |a, b| {
        u[b].abs()
            .partial_cmp(&u[a].abs())
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    }))
}

/// Coordinate-wise mean or median of the columns `x[:, indices]`.
pub fn aggregate(x: &DataMatrix, indices: &[usize], method: Aggregation) -> Result<Vec<f64>> {
    if indices.is_empty() {
        return Err(Error::Parameter("cannot aggregate an empty index set".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&j| j >= x.cols()) {
        return Err(Error::Dimension(format!(
            "column index {bad} out of range for {} columns",
            x.cols()
        )));
    }
    let m = x.rows();
    if indices.len() == 1 {
        return Ok(x.col(indices[0]).to_vec());
    }
    match method {
        Aggregation::Mean => {
            let mut out = vec![0.0; m];
            for &j in indices {
                for (o, v) in out.iter_mut().zip(x.col(j)) {
                    *o += v;
                }
            }
            let inv = indices.len() as f64;
            out.iter_mut().for_each(|o| *o /= inv);
            Ok(out)
        }
        Aggregation::Median => {
            let mut buf = vec![0.0; indices.len()];
            Ok((0..m)
                .map(|i| {
                    for (b, &j) in buf.iter_mut().zip(indices) {
                        *b = x.get(i, j);
                    }
                    median_in_place(&mut buf)
                })
                .collect())
        }
    }
}
