//! Brute-force reference implementations shared by the integration tests.
//! These follow the defining sums directly and share no code with the crate.

#![allow(clippy::needless_range_loop)]

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn popcount(m: usize) -> i32 {
    m.count_ones() as i32
}

/// `g(S) = sum_{T ⊆ S} f(T)` by the O(4ⁿ) double loop.
pub fn naive_zeta(f: &[f64]) -> Vec<f64> {
    (0..f.len())
        .map(|s| (0..f.len()).filter(|t| t & s == *t).map(|t| f[t]).sum())
        .collect()
}

/// `f(S) = sum_{T ⊆ S} (-1)^{|S|-|T|} g(T)` by the O(4ⁿ) double loop.
pub fn naive_mobius(g: &[f64]) -> Vec<f64> {
    (0..g.len())
        .map(|s| {
            (0..g.len())
                .filter(|t| t & s == *t)
                .map(|t| if (popcount(s) - popcount(t)) % 2 == 0 { g[t] } else { -g[t] })
                .sum()
        })
        .collect()
}

/// `I_and(S)` for `S != ∅` straight from the alternating sum; `I(∅) = 0`.
pub fn naive_and(v_and: &[f64]) -> Vec<f64> {
    let mut i = naive_mobius(v_and);
    i[0] = 0.0;
    i
}

/// `I_or(S) = -sum_{T ⊆ S} (-1)^{|S|-|T|} v_or(x_{N \ T})`, `I(∅) = 0`.
pub fn naive_or(v_or: &[f64]) -> Vec<f64> {
    let full = v_or.len() - 1;
    let mut out = vec![0.0; v_or.len()];
    for s in 1..v_or.len() {
        let mut acc = 0.0;
        for t in 0..v_or.len() {
            if t & s == t {
                let sign = if (popcount(s) - popcount(t)) % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * v_or[full & !t];
            }
        }
        out[s] = -acc;
    }
    out
}

pub fn random_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Dense Gauss-Jordan inverse with partial pivoting, for small oracle checks.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| (i == j) as u8 as f64));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        for x in m[col].iter_mut() {
            *x /= p;
        }
        for r in 0..n {
            if r != col {
                let factor = m[r][col];
                if factor != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= factor * m[col][c];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// `M̂ = (JᵀJ + 2ⁿ diag(c))⁻¹ JᵀJ` built from an explicit J and a
/// Gauss-Jordan inverse.
pub fn oracle_solution_matrix(n: usize, sigma2: f64) -> Vec<Vec<f64>> {
    let size = 1usize << n;
    let j = |s: usize, t: usize| if t & s == t { 1.0 } else { 0.0 };
    let gram: Vec<Vec<f64>> = (0..size)
        .map(|a| (0..size).map(|b| (0..size).map(|s| j(s, a) * j(s, b)).sum()).collect())
        .collect();
    let mut sys = gram.clone();
    for t in 0..size {
        sys[t][t] += size as f64 * 2f64.powi(popcount(t)) * sigma2;
    }
    let inv = gauss_jordan_inverse(&sys);
    (0..size)
        .map(|r| (0..size).map(|c| (0..size).map(|k| inv[r][k] * gram[k][c]).sum()).collect())
        .collect()
}

/// Solves `a x = b` by Gaussian elimination; `None` when `a` is singular.
pub fn solve_linear(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &y)| {
            let mut r = row.clone();
            r.push(y);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][n] - tail) / m[r][r];
    }
    Some(x)
}

/// Affine map `γ ↦ (I_and, I_or)` over `S != ∅` for the split with `δ = 0`,
/// with `γ_∅` pinned to zero (a constant shift of `γ` only moves `I(∅)`).
/// Returns `(rows, offset)` so that the effects are `rows · γ[1..] + offset`.
pub fn split_effect_map(v: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let len = v.len();
    let half: Vec<f64> = v.iter().map(|x| 0.5 * x).collect();
    let mut offset = naive_and(&half)[1..].to_vec();
    offset.extend_from_slice(&naive_or(&half)[1..]);
    let mut columns = Vec::new();
    for t in 1..len {
        let mut e = vec![0.0; len];
        e[t] = 1.0;
        let mut col = naive_and(&e)[1..].to_vec();
        e[t] = -1.0;
        col.extend_from_slice(&naive_or(&e)[1..]);
        columns.push(col);
    }
    let rows = (0..offset.len())
        .map(|r| columns.iter().map(|c| c[r]).collect())
        .collect();
    (rows, offset)
}

fn l1_at(rows: &[Vec<f64>], offset: &[f64], g: &[f64]) -> f64 {
    rows.iter()
        .zip(offset)
        .map(|(row, b)| (row.iter().zip(g).map(|(a, x)| a * x).sum::<f64>() + b).abs())
        .sum()
}

/// Minimum of the `δ = 0` sparsity loss over a grid of `γ` with step
/// `0.01 · range(v)` on `[-range, range]` in every free coordinate.
pub fn grid_search_split(v: &[f64]) -> f64 {
    let (rows, offset) = split_effect_map(v);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range == 0.0 {
        return l1_at(&rows, &offset, &vec![0.0; rows[0].len()]);
    }
    let axis: Vec<f64> = (-100..=100).map(|i| i as f64 * 0.01 * range).collect();
    let dims = rows[0].len();
    let mut idx = vec![0usize; dims];
    let mut g = vec![axis[0]; dims];
    let mut best = f64::INFINITY;
    loop {
        best = best.min(l1_at(&rows, &offset, &g));
        let mut d = 0;
        loop {
            if d == dims {
                return best;
            }
            idx[d] += 1;
            if idx[d] < axis.len() {
                g[d] = axis[idx[d]];
                break;
            }
            idx[d] = 0;
            g[d] = axis[0];
            d += 1;
        }
    }
}

/// Exact minimum of the `δ = 0` sparsity loss. An L1 objective over an
/// affine map of full column rank attains its minimum at a point where as
/// many residuals vanish as there are free coordinates, so every such
/// vertex is enumerated.
pub fn vertex_search_split(v: &[f64]) -> f64 {
    let (rows, offset) = split_effect_map(v);
    let dims = rows[0].len();
    let mut best = l1_at(&rows, &offset, &vec![0.0; dims]);
    let mut pick: Vec<usize> = (0..dims).collect();
    loop {
        let a: Vec<Vec<f64>> = pick.iter().map(|&r| rows[r].clone()).collect();
        let b: Vec<f64> = pick.iter().map(|&r| -offset[r]).collect();
        if let Some(g) = solve_linear(&a, &b) {
            best = best.min(l1_at(&rows, &offset, &g));
        }
        // next combination of `dims` rows out of `rows.len()`
        let total = rows.len();
        let mut i = dims;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < total - dims + i {
                break;
            }
        }
        pick[i] += 1;
        for j in i + 1..dims {
            pick[j] = pick[j - 1] + 1;
        }
    }
}
