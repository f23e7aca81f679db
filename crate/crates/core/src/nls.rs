//! Row-wise nonnegative least squares for the per-mode subproblem.
//!
//! Given the `R x R` matrix `S` (Hadamard product of the other modes' Grams)
//! and the MTTKRP block `M` (`k x R`), each row `h` of the update minimizes
//! the normal-equations quadratic `1/2 h S h^T - m h^T` over `h >= 0`. Its KKT
//! conditions are `h >= 0`, `g = S h - m >= 0` and `h_i g_i = 0`.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Value written into a factor column that an update left identically zero.
pub const ZERO_COLUMN_GUARD: f64 = 1e-16;

/// Absolute tolerance below which a primal or dual value counts as zero.
pub const KKT_ZERO_TOL: f64 = 1e-12;

const MAX_BPP_ITERATIONS: usize = 5000;

/// Result of [`nnls_bpp_detailed`].
#[derive(Debug, Clone)]
pub struct BppSolution {
    pub h: Matrix,
    /// Rows where a passive-set system was singular and a minimum-norm
    /// solve was substituted.
    pub flagged_rows: Vec<usize>,
    pub iterations: Vec<usize>,
}

fn check_problem(s: &Matrix, m: &Matrix) -> Result<usize> {
    let r = s.rows();
    if s.cols() != r {
        return Err(Error::DimensionMismatch(format!(
            "S must be square, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    if m.cols() != r {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has {} columns, S is {}x{}",
            m.cols(),
            r,
            r
        )));
    }
    Ok(r)
}

/// Objective `sum_rows 1/2 h S h^T - m h^T` of a candidate update.
pub fn subproblem_objective(s: &Matrix, m: &Matrix, h: &Matrix) -> f64 {
    let r = s.rows();
    let mut total = 0.0;
    for i in 0..h.rows() {
        for a in 0..r {
            let ha = h.get(i, a);
            let sh: f64 = (0..r).map(|b| s.get(a, b) * h.get(i, b)).sum();
            total += 0.5 * ha * sh - m.get(i, a) * ha;
        }
    }
    total
}

/// In-place Cholesky of a small dense SPD matrix stored row-major in `a`
/// (`n x n`). Returns `false` if a pivot is not safely positive.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    let tiny = scale * 1e-13 + f64::MIN_POSITIVE;
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d.is_nan() || d <= tiny {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / d;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i * n + k] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n {
            v -= l[k * n + i] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations. `a` is row-major
/// `n x n` and is destroyed; returns the eigenvalues and row-major
/// eigenvectors (column `j` pairs with eigenvalue `j`).
fn jacobi_eigen(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Minimum-norm least squares solution of the symmetric system `A x = b`.
fn pseudo_solve(a: &mut [f64], n: usize, b: &[f64]) -> Vec<f64> {
    let (vals, vecs) = jacobi_eigen(a, n);
    let top = vals.iter().copied().fold(0.0, |m: f64, v| m.max(v.abs()));
    let cut = top * 1e-12 * n as f64;
    let mut x = vec![0.0; n];
    for j in 0..n {
        if vals[j].abs() <= cut {
            continue;
        }
        let coef: f64 = (0..n).map(|i| vecs[i * n + j] * b[i]).sum::<f64>() / vals[j];
        for i in 0..n {
            x[i] += coef * vecs[i * n + j];
        }
    }
    x
}

/// Solves `S_FF x_F = m_F`, returning `(x_F, singular)`.
fn solve_passive(s: &Matrix, m: &[f64], passive: &[usize]) -> (Vec<f64>, bool) {
    let n = passive.len();
    let mut a = vec![0.0; n * n];
    for (i, &p) in passive.iter().enumerate() {
        for (j, &q) in passive.iter().enumerate() {
            a[i * n + j] = s.get(p, q);
        }
    }
    let b: Vec<f64> = passive.iter().map(|&p| m[p]).collect();
    let mut l = a.clone();
    if cholesky(&mut l, n) {
        let mut x = b;
        cholesky_solve(&l, n, &mut x);
        (x, false)
    } else {
        (pseudo_solve(&mut a, n, &b), true)
    }
}

struct RowOutcome {
    h: Vec<f64>,
    singular: bool,
    iterations: usize,
}

fn bpp_row(s: &Matrix, m: &[f64], row: usize) -> Result<RowOutcome> {
    let r = s.rows();
    let mut passive = vec![false; r];
    let mut x = vec![0.0; r];
    // y = S x - m with x = 0
    let mut y: Vec<f64> = m.iter().map(|v| -v).collect();
    let mut best = r + 1;
    let mut budget = r;
    let mut singular = false;
    let mut iterations = 0;
    loop {
        let infeasible: Vec<usize> = (0..r)
            .filter(|&i| {
                if passive[i] {
                    x[i] < -KKT_ZERO_TOL
                } else {
                    y[i] < -KKT_ZERO_TOL
                }
            })
            .collect();
        if infeasible.is_empty() {
            break;
        }
        if iterations >= MAX_BPP_ITERATIONS {
            return Err(Error::NotConverged {
                row,
                iterations,
                infeasible: infeasible.len(),
            });
        }
        iterations += 1;
        let count = if infeasible.len() < best {
            best = infeasible.len();
            budget = infeasible.len();
            infeasible.len()
        } else {
            budget = (budget / 2).max(1);
            budget.min(infeasible.len())
        };
        for &i in &infeasible[..count] {
            passive[i] = !passive[i];
        }
        let free: Vec<usize> = (0..r).filter(|&i| passive[i]).collect();
        let (xf, sing) = solve_passive(s, m, &free);
        singular |= sing;
        x.fill(0.0);
        for (&i, &v) in free.iter().zip(&xf) {
            x[i] = v;
        }
        for i in 0..r {
            y[i] = if passive[i] {
                0.0
            } else {
                free.iter().map(|&j| s.get(i, j) * x[j]).sum::<f64>() - m[i]
            };
        }
    }
    for v in &mut x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(RowOutcome {
        h: x,
        singular,
        iterations,
    })
}

/// Exact row-wise NNLS by block principal pivoting.
///
/// Full exchange of all infeasible variables while the infeasible count
/// keeps dropping; otherwise the exchange set is halved (lowest indices
/// kept) down to a single lowest-index exchange.
pub fn nnls_bpp(s: &Matrix, m: &Matrix) -> Result<Matrix> {
    Ok(nnls_bpp_detailed(s, m)?.h)
}

pub fn nnls_bpp_detailed(s: &Matrix, m: &Matrix) -> Result<BppSolution> {
    let r = check_problem(s, m)?;
    let k = m.rows();
    let mut h = Matrix::zeros(k, r);
    let mut flagged_rows = Vec::new();
    let mut iterations = Vec::with_capacity(k);
    let mut rhs = vec![0.0; r];
    for i in 0..k {
        for (a, v) in rhs.iter_mut().enumerate() {
            *v = m.get(i, a);
        }
        let out = bpp_row(s, &rhs, i)?;
        for (a, &v) in out.h.iter().enumerate() {
            h.set(i, a, v);
        }
        if out.singular {
            flagged_rows.push(i);
        }
        iterations.push(out.iterations);
    }
    Ok(BppSolution {
        h,
        flagged_rows,
        iterations,
    })
}

/// One HALS cycle over columns `1..R`, without the zero-column guard.
///
/// Rows are updated independently, so the result for a row block does not
/// depend on how rows are partitioned. The rule omits a `1/S(r,r)` divisor
/// and is an exact coordinate minimization only when `diag(S) = 1`, i.e. when
/// the other factors have unit-norm columns.
pub fn hals_update_rows(h: &mut Matrix, m: &Matrix, s: &Matrix) -> Result<()> {
    let r = check_problem(s, m)?;
    if h.rows() != m.rows() || h.cols() != r {
        return Err(Error::DimensionMismatch(format!(
            "H is {}x{}, M is {}x{}",
            h.rows(),
            h.cols(),
            m.rows(),
            m.cols()
        )));
    }
    let k = h.rows();
    let mut hs = vec![0.0; k];
    for c in 0..r {
        hs.fill(0.0);
        for q in 0..r {
            let sqc = s.get(q, c);
            for (acc, &v) in hs.iter_mut().zip(h.column(q)) {
                *acc += v * sqc;
            }
        }
        let mcol = m.column(c);
        for (i, v) in h.column_mut(c).iter_mut().enumerate() {
            *v = (*v + mcol[i] - hs[i]).max(0.0);
        }
    }
    Ok(())
}

/// One HALS cycle followed by the zero-column guard.
pub fn hals_update(h: &mut Matrix, m: &Matrix, s: &Matrix) -> Result<()> {
    hals_update_rows(h, m, s)?;
    apply_zero_column_guard(h);
    Ok(())
}

/// Replaces every identically-zero column by [`ZERO_COLUMN_GUARD`]; returns
/// the indices of the replaced columns.
pub fn apply_zero_column_guard(h: &mut Matrix) -> Vec<usize> {
    let mut fixed = Vec::new();
    for c in 0..h.cols() {
        let col = h.column_mut(c);
        if col.iter().all(|&v| v == 0.0) {
            col.fill(ZERO_COLUMN_GUARD);
            fixed.push(c);
        }
    }
    fixed
}

/// Unconstrained `H = M S^{-1}`.
pub fn ls_unconstrained(s: &Matrix, m: &Matrix) -> Result<Matrix> {
    let r = check_problem(s, m)?;
    let mut l: Vec<f64> = (0..r * r).map(|idx| s.get(idx / r, idx % r)).collect();
    if !cholesky(&mut l, r) {
        return Err(Error::Singular(format!("{r}x{r} Gram product is not positive definite")));
    }
    let mut h = Matrix::zeros(m.rows(), r);
    let mut row = vec![0.0; r];
    for i in 0..m.rows() {
        for (a, v) in row.iter_mut().enumerate() {
            *v = m.get(i, a);
        }
        cholesky_solve(&l, r, &mut row);
        for (a, &v) in row.iter().enumerate() {
            h.set(i, a, v);
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn bpp_identity_projects() {
        let h = nnls_bpp(&Matrix::identity(2), &mat(&[&[3.0, -1.0]])).unwrap();
        assert!(close(&h.row(0), &[3.0, 0.0], 1e-15));
    }

    #[test]
    fn bpp_interior_solution() {
        let s = mat(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let h = nnls_bpp(&s, &mat(&[&[10.0, 9.0]])).unwrap();
        assert!(close(&h.row(0), &[1.5, 2.0], 1e-14));
    }

    #[test]
    fn bpp_active_constraint() {
        let s = mat(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let h = nnls_bpp(&s, &mat(&[&[2.0, 5.0]])).unwrap();
        assert!(close(&h.row(0), &[0.0, 5.0 / 3.0], 1e-14));
        let g1 = 2.0 * h.get(0, 1) - 2.0;
        assert!((g1 - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn bpp_multiple_rows_and_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = 5;
        let b = Matrix::from_fn(8, r, |_, _| rng.gen::<f64>());
        let s = crate::matrix::gram(&b);
        let m = Matrix::from_fn(6, r, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let h = nnls_bpp(&s, &m).unwrap();
        for i in 0..6 {
            for a in 0..r {
                let g: f64 = (0..r).map(|c| s.get(a, c) * h.get(i, c)).sum::<f64>() - m.get(i, a);
                let x = h.get(i, a);
                assert!(x >= 0.0);
                if x > 0.0 {
                    assert!(g.abs() < 1e-8);
                } else {
                    assert!(g > -1e-8);
                }
            }
        }
    }

    #[test]
    fn bpp_singular_system_is_flagged() {
        // rank-one S: the two-variable passive set is singular
        let s = mat(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let out = nnls_bpp_detailed(&s, &mat(&[&[1.0, 1.0]])).unwrap();
        assert_eq!(out.flagged_rows, vec![0]);
        let h = out.h.row(0);
        assert!(h.iter().all(|&v| v >= 0.0));
        assert!((h[0] + h[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bpp_rejects_bad_shapes() {
        assert!(nnls_bpp(&Matrix::zeros(2, 3), &Matrix::zeros(1, 2)).is_err());
        assert!(nnls_bpp(&Matrix::identity(2), &Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn hals_scalar_rank_is_projection() {
        let mut h = Matrix::from_rows(&[[1.0], [1.0], [4.0]]).unwrap();
        let m = Matrix::from_rows(&[[0.5], [2.0], [-3.0]]).unwrap();
        hals_update_rows(&mut h, &m, &Matrix::identity(1)).unwrap();
        assert_eq!(h.as_slice(), &[0.5, 2.0, 0.0]);
    }

    #[test]
    fn hals_example_update() {
        let mut h = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let m = Matrix::from_rows(&[[0.5], [2.0]]).unwrap();
        hals_update(&mut h, &m, &Matrix::identity(1)).unwrap();
        assert_eq!(h.as_slice(), &[0.5, 2.0]);
    }

    #[test]
    fn hals_zero_column_guard() {
        let mut h = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let m = Matrix::from_rows(&[[-1.0, 2.0], [-5.0, 1.0]]).unwrap();
        hals_update(&mut h, &m, &Matrix::identity(2)).unwrap();
        assert_eq!(h.column(0), &[ZERO_COLUMN_GUARD, ZERO_COLUMN_GUARD]);
        assert_eq!(h.column(1), &[2.0, 1.0]);
    }

    #[test]
    fn hals_never_increases_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let r = rng.gen_range(1..6);
            let k = rng.gen_range(1..8);
            let mut b = Matrix::from_fn(10, r, |_, _| rng.gen::<f64>());
            for c in 0..r {
                let n = b.column(c).iter().map(|v| v * v).sum::<f64>().sqrt();
                b.column_mut(c).iter_mut().for_each(|v| *v /= n);
            }
            let s = crate::matrix::gram(&b);
            let m = Matrix::from_fn(k, r, |_, _| rng.gen::<f64>() * 2.0 - 0.5);
            let mut h = Matrix::from_fn(k, r, |_, _| rng.gen::<f64>());
            let before = subproblem_objective(&s, &m, &h);
            hals_update_rows(&mut h, &m, &s).unwrap();
            let after = subproblem_objective(&s, &m, &h);
            assert!(after <= before + 1e-12 * before.abs().max(1.0));
            assert!(h.min_entry() >= 0.0);
        }
    }

    #[test]
    fn unconstrained_examples() {
        let m = mat(&[&[1.0, -2.0], &[3.0, 4.0]]);
        assert_eq!(ls_unconstrained(&Matrix::identity(2), &m).unwrap(), m);
        let s = mat(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let h = ls_unconstrained(&s, &mat(&[&[10.0, 9.0]])).unwrap();
        assert!(close(&h.row(0), &[1.5, 2.0], 1e-14));
        let two = mat(&[&[2.0, 0.0], &[0.0, 2.0]]);
        let h = ls_unconstrained(&two, &m).unwrap();
        assert!(close(h.as_slice(), &[0.5, 1.5, -1.0, 2.0], 1e-14));
        assert!(ls_unconstrained(&mat(&[&[1.0, 1.0], &[1.0, 1.0]]), &m).is_err());
    }

    #[test]
    fn pseudo_solve_gives_min_norm() {
        let mut a = vec![2.0, 2.0, 2.0, 2.0];
        let x = pseudo_solve(&mut a, 2, &[2.0, 2.0]);
        assert!(close(&x, &[0.5, 0.5], 1e-12));
    }
}
