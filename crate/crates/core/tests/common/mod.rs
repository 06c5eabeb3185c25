//! Brute-force reference implementations used as test oracles. None of
//! these call into the code paths they are used to check.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ssnmf_core::DataMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DataMatrix {
    DataMatrix::new(m, n, gaussian_vec(rng, m * n)).unwrap()
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DataMatrix {
    DataMatrix::new(m, n, (0..m * n).map(|_| rng.random::<f64>()).collect()).unwrap()
}

/// Indices sorted by `key` descending, stable (ties keep index order).
fn sorted_desc_by(u: &[f64], key: impl Fn(f64) -> f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..u.len()).collect();
    idx.sort_by(|&a, &b| key(u[b]).partial_cmp(&key(u[a])).unwrap());
    idx
}

fn sorted_asc(u: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..u.len()).collect();
    idx.sort_by(|&a, &b| u[a].partial_cmp(&u[b]).unwrap());
    idx
}

fn literal_median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn sorted_prefix(order: &[usize], p: usize) -> Vec<usize> {
    let mut s = order[..p].to_vec();
    s.sort();
    s
}

pub fn oracle_top_p_abs(u: &[f64], p: usize) -> Vec<usize> {
    sorted_prefix(&sorted_desc_by(u, f64::abs), p)
}

/// Returns `(indices, +1 | -1)`.
pub fn oracle_signed_median(u: &[f64], p: usize) -> (Vec<usize>, i32) {
    let desc = sorted_desc_by(u, |v| v);
    let asc = sorted_asc(u);
    let med_a = literal_median(desc[..p].iter().map(|&j| u[j]).collect());
    let med_b = literal_median(asc[..p].iter().map(|&j| u[j]).collect());
    if med_a >= med_b.abs() {
        (sorted_prefix(&desc, p), 1)
    } else {
        (sorted_prefix(&asc, p), -1)
    }
}

pub fn oracle_signed_extreme(u: &[f64], p: usize) -> (Vec<usize>, i32) {
    let desc = sorted_desc_by(u, |v| v);
    let asc = sorted_asc(u);
    if u[desc[0]] >= -u[asc[0]] {
        (sorted_prefix(&desc, p), 1)
    } else {
        (sorted_prefix(&asc, p), -1)
    }
}

/// Minimum over all permutations of `sum_i cost[i][perm[i]]`.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..cost.len() {
            if !used[j] {
                used[j] = true;
                rec(cost, row + 1, used, acc + cost[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
    best
}

/// Solves `a x = b` (`a` row-major `k x k`) by Gaussian elimination with
/// partial pivoting. `None` if singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..k {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (dst, src) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * src;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let s: f64 = (row + 1..k).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Exact NNLS for one column by enumerating every support set and keeping
/// the best feasible unconstrained least-squares solution on it. Returns
/// `(h, ‖x - W h‖_2)`.
pub fn nnls_active_set_oracle(w: &DataMatrix, x: &[f64]) -> (Vec<f64>, f64) {
    let (m, r) = w.shape();
    let resid = |h: &[f64]| -> f64 {
        (0..m)
            .map(|i| {
                let wh: f64 = (0..r).map(|k| w.get(i, k) * h[k]).sum();
                (x[i] - wh).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    };
    let mut best_h = vec![0.0; r];
    let mut best = resid(&best_h);
    for mask in 1u32..(1 << r) {
        let support: Vec<usize> = (0..r).filter(|k| mask & (1 << k) != 0).collect();
        let gram: Vec<Vec<f64>> = support
            .iter()
            .map(|&a| {
                support
                    .iter()
                    .map(|&b| (0..m).map(|i| w.get(i, a) * w.get(i, b)).sum())
                    .collect()
            })
            .collect();
        let rhs: Vec<f64> = support
            .iter()
            .map(|&a| (0..m).map(|i| w.get(i, a) * x[i]).sum())
            .collect();
        let Some(sol) = solve_dense(gram, rhs) else {
            continue;
        };
        if sol.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut h = vec![0.0; r];
        for (&k, &v) in support.iter().zip(&sol) {
            h[k] = v;
        }
        let f = resid(&h);
        if f < best {
            best = f;
            best_h = h;
        }
    }
    (best_h, best)
}

/// Singular values (descending) by one-sided Jacobi on the columns of `a`.
pub fn jacobi_singular_values(a: &DataMatrix) -> Vec<f64> {
    // rotate the shorter dimension's vectors
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<f64>> = if n <= m {
        (0..n).map(|j| a.col(j).to_vec()).collect()
    } else {
        (0..m).map(|i| a.row(i)).collect()
    };
    let k = cols.len();
    for _ in 0..200 {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let alpha: f64 = cols[p].iter().map(|v| v * v).sum();
                let beta: f64 = cols[q].iter().map(|v| v * v).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(a, b)| a * b).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..cols[p].len() {
                    let vp = cols[p][i];
                    let vq = cols[q][i];
                    cols[p][i] = c * vp - s * vq;
                    cols[q][i] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// `‖x - V V^T x‖²` with `V` given as a list of orthonormal vectors,
/// recomputed with classical Gram-Schmidt coefficients.
pub fn residual_sq_from_scratch(basis: &[Vec<f64>], x: &[f64]) -> f64 {
    let mut r = x.to_vec();
    for v in basis {
        let c: f64 = v.iter().zip(x).map(|(a, b)| a * b).sum();
        for (ri, vi) in r.iter_mut().zip(v) {
            *ri -= c * vi;
        }
    }
    r.iter().map(|v| v * v).sum()
}

/// Noiseless separable matrix `W [I_r, H']` with random `W` (uniform
/// entries) and Dirichlet-like columns capped below `max_entry`.
pub fn separable_instance(
    rng: &mut ChaCha8Rng,
    m: usize,
    n: usize,
    r: usize,
    max_entry: f64,
) -> (DataMatrix, DataMatrix) {
    let w = uniform_matrix(rng, m, r);
    let mut hv = Vec::with_capacity(r * n);
    for j in 0..r {
        hv.extend((0..r).map(|i| if i == j { 1.0 } else { 0.0 }));
    }
    while hv.len() < r * n {
        let raw: Vec<f64> = (0..r).map(|_| rng.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        let col: Vec<f64> = raw.iter().map(|v| v / s).collect();
        if col.iter().all(|&v| v <= max_entry) {
            hv.extend(col);
        }
    }
    let h = DataMatrix::new(r, n, hv).unwrap();
    (w.matmul(&h).unwrap(), w)
}
