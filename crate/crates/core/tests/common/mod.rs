//! Helpers and independent oracles shared by the integration tests.
#![allow(dead_code)]

use nncp::{DenseTensor, Matrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn uniform_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> DenseTensor {
    let len = dims.iter().product();
    DenseTensor::new(dims.to_vec(), (0..len).map(|_| rng.gen::<f64>()).collect()).unwrap()
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi))
}

pub fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    let num: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.as_slice().iter().map(|y| y * y).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Random symmetric positive definite `r x r` matrix `B^T B`.
pub fn random_spd(rng: &mut ChaCha8Rng, r: usize) -> Matrix {
    let b = uniform_matrix(rng, r + 3, r, -1.0, 1.0);
    b.transpose().matmul(&b).unwrap()
}

/// Dense solve by Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, &v)| {
        let mut r = row.clone();
        r.push(v);
        r
    }).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    Some(x)
}

/// Solves one row of `min_{h >= 0} 1/2 h^T S h - m^T h` by trying every
/// passive set and returning the one satisfying the KKT conditions with the
/// smallest violation.
pub fn nnls_enumerate(s: &Matrix, m: &[f64]) -> Vec<f64> {
    let r = m.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << r) {
        let passive: Vec<usize> = (0..r).filter(|&i| mask >> i & 1 == 1).collect();
        let mut h = vec![0.0; r];
        if !passive.is_empty() {
            let a: Vec<Vec<f64>> =
                passive.iter().map(|&i| passive.iter().map(|&j| s.get(i, j)).collect()).collect();
            let b: Vec<f64> = passive.iter().map(|&i| m[i]).collect();
            let Some(x) = gauss_solve(&a, &b) else { continue };
            for (&i, v) in passive.iter().zip(x) {
                h[i] = v;
            }
        }
        let violation = kkt_violation(s, m, &h);
        if best.as_ref().map_or(true, |(v, _)| violation < *v) {
            best = Some((violation, h));
        }
    }
    best.expect("the empty passive set is always tried").1
}

/// Largest KKT violation: negative entries, negative gradient and
/// complementarity `|h_i g_i|`, with `g = S h - m`.
pub fn kkt_violation(s: &Matrix, m: &[f64], h: &[f64]) -> f64 {
    let r = m.len();
    let mut worst: f64 = 0.0;
    for i in 0..r {
        let g: f64 = (0..r).map(|j| s.get(i, j) * h[j]).sum::<f64>() - m[i];
        worst = worst.max(-h[i]).max(-g).max((h[i] * g).abs());
    }
    worst
}

/// All ordered `parts`-tuples of positive integers with product `p`, by
/// scanning `1..=p` per position and filtering.
pub fn brute_factorizations(p: usize, parts: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![1usize; parts];
    loop {
        if cur.iter().product::<usize>() == p {
            out.push(cur.clone());
        }
        let mut k = parts;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if cur[k] < p {
                cur[k] += 1;
                break;
            }
            cur[k] = 1;
        }
    }
}
