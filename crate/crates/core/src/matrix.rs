//! Column-major dense matrices and the small kernels the factorization needs:
//! Khatri-Rao products, Gram matrices, Hadamard products and two
//! matrix-matrix multiply shapes over raw column-major storage.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// An `I_n x R` factor matrix.
pub type FactorMatrix = Matrix;

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidShape(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices; all rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != ncols {
                return Err(Error::InvalidShape(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    ncols
                )));
            }
            for (j, &x) in row.iter().enumerate() {
                m.set(i, j, x);
            }
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i + self.rows * j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i + self.rows * j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Rows `start..end` as a new matrix.
    pub fn row_block(&self, start: usize, end: usize) -> Matrix {
        Matrix::from_fn(end - start, self.cols, |i, j| self.get(start + i, j))
    }

    /// Copies `block` into rows starting at `start`.
    pub fn set_row_block(&mut self, start: usize, block: &Matrix) {
        assert_eq!(block.cols, self.cols);
        for j in 0..self.cols {
            self.column_mut(j)[start..start + block.rows].copy_from_slice(block.column(j));
        }
    }

    /// Plain triple-loop product, reference use only.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm_nn(
            self.rows,
            self.cols,
            other.cols,
            &self.data,
            &other.data,
            &mut out.data,
        );
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `sum_ij A_ij B_ij`, summed in storage order.
    pub fn inner_product(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionMismatch(format!(
                "hadamard of {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Khatri-Rao product of `matrices`, folded left.
///
/// For two inputs `A` (`I_A x R`) and `B` (`I_B x R`), row `i + I_A * j` of
/// the result (0-indexed) is `A(i,:) .* B(j,:)`: the first argument varies
/// fastest. Passing factors in ascending mode order therefore yields rows
/// ordered like the columns of a generalized column-major unfolding.
pub fn khatri_rao(matrices: &[&Matrix]) -> Result<Matrix> {
    let (first, rest) = matrices
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("khatri_rao needs at least one matrix".into()))?;
    let r = first.cols;
    if let Some(m) = rest.iter().find(|m| m.cols != r) {
        return Err(Error::DimensionMismatch(format!(
            "khatri_rao column counts {} and {}",
            r, m.cols
        )));
    }
    let mut acc = (*first).clone();
    for b in rest {
        acc = khatri_rao_pair(&acc, b);
    }
    Ok(acc)
}

fn khatri_rao_pair(a: &Matrix, b: &Matrix) -> Matrix {
    let (ia, ib, r) = (a.rows, b.rows, a.cols);
    let mut out = Matrix::zeros(ia * ib, r);
    for c in 0..r {
        let acol = a.column(c);
        let bcol = b.column(c);
        let ocol = out.column_mut(c);
        for (j, &bj) in bcol.iter().enumerate() {
            for (o, &ai) in ocol[j * ia..(j + 1) * ia].iter_mut().zip(acol) {
                *o = ai * bj;
            }
        }
    }
    out
}

/// Number of multiplies [`khatri_rao`] performs for the given row counts.
pub fn khatri_rao_flops(rows: &[usize], rank: usize) -> u64 {
    let mut acc = match rows.first() {
        Some(&r) => r as u64,
        None => return 0,
    };
    let mut flops = 0u64;
    for &r in &rows[1..] {
        acc *= r as u64;
        flops += acc * rank as u64;
    }
    flops
}

/// `H^T H`. The upper triangle is computed and mirrored, so the result is
/// exactly symmetric.
pub fn gram(h: &Matrix) -> Matrix {
    let r = h.cols;
    let mut g = Matrix::zeros(r, r);
    for a in 0..r {
        let ca = h.column(a);
        for b in a..r {
            let v: f64 = ca.iter().zip(h.column(b)).map(|(x, y)| x * y).sum();
            g.set(a, b, v);
            g.set(b, a, v);
        }
    }
    g
}

/// Elementwise product of every Gram matrix except the one for mode `n`
/// (1-indexed).
pub fn hadamard_all_but(grams: &[Matrix], n: usize) -> Result<Matrix> {
    if grams.len() < 2 {
        return Err(Error::InvalidArgument(
            "hadamard_all_but needs at least two Gram matrices".into(),
        ));
    }
    if n == 0 || n > grams.len() {
        return Err(Error::InvalidMode {
            mode: n,
            order: grams.len(),
        });
    }
    let r = grams[0].rows;
    let mut acc = Matrix::filled(r, r, 1.0);
    for (m, g) in grams.iter().enumerate() {
        if m + 1 == n {
            continue;
        }
        acc = acc.hadamard(g)?;
    }
    Ok(acc)
}

/// `C += A * B` with `A` `m x k`, `B` `k x n`, all column-major.
///
/// Loops run in a fixed order, so results are independent of any caller-side
/// partitioning of the output columns.
pub fn gemm_nn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    const KB: usize = 256;
    for k0 in (0..k).step_by(KB) {
        let k1 = (k0 + KB).min(k);
        for j in 0..n {
            let ccol = &mut c[j * m..(j + 1) * m];
            for p in k0..k1 {
                let s = b[p + k * j];
                if s == 0.0 {
                    continue;
                }
                let acol = &a[p * m..(p + 1) * m];
                for (ci, &ai) in ccol.iter_mut().zip(acol) {
                    *ci += s * ai;
                }
            }
        }
    }
}

/// `C = A^T * B` with `A` `k x m`, `B` `k x n`, all column-major.
pub fn gemm_tn(k: usize, m: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let acol = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let bcol = &b[j * k..(j + 1) * k];
            c[i + m * j] = dot(acol, bcol);
        }
    }
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    // Four fixed accumulators; the order never depends on the caller.
    let mut acc = [0.0f64; 4];
    let chunks = x.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += x[i] * y[i];
        acc[1] += x[i + 1] * y[i + 1];
        acc[2] += x[i + 2] * y[i + 2];
        acc[3] += x[i + 3] * y[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..x.len() {
        tail += x[i] * y[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn khatri_rao_two_inputs() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[[5.0, 6.0], [7.0, 8.0]]).unwrap();
        let k = khatri_rao(&[&a, &b]).unwrap();
        let expected =
            Matrix::from_rows(&[[5.0, 12.0], [15.0, 24.0], [7.0, 16.0], [21.0, 32.0]]).unwrap();
        assert_eq!(k, expected);
    }

    #[test]
    fn khatri_rao_single_and_ones() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(khatri_rao(&[&a]).unwrap(), a);
        let k = khatri_rao(&[&Matrix::filled(2, 3, 1.0), &Matrix::filled(3, 3, 1.0)]).unwrap();
        assert_eq!(k, Matrix::filled(6, 3, 1.0));
    }

    #[test]
    fn khatri_rao_errors() {
        assert!(khatri_rao(&[]).is_err());
        assert!(khatri_rao(&[&Matrix::zeros(2, 2), &Matrix::zeros(2, 3)]).is_err());
    }

    #[test]
    fn khatri_rao_flop_count() {
        assert_eq!(khatri_rao_flops(&[3], 2), 0);
        assert_eq!(khatri_rao_flops(&[3, 4, 5], 2), (12 + 60) * 2);
    }

    fn kron(x: &[f64], y: &[f64]) -> Vec<f64> {
        // Standard Kronecker product: second argument varies fastest.
        x.iter().flat_map(|&a| y.iter().map(move |&b| a * b)).collect()
    }

    proptest! {
        #[test]
        fn khatri_rao_is_columnwise_kronecker(
            ia in 1usize..5, ib in 1usize..5, ic in 1usize..4, r in 1usize..4, seed in any::<u64>()
        ) {
            let mut s = seed;
            let mut next = move || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); ((s >> 11) as f64) / (1u64 << 53) as f64 };
            let a = Matrix::from_fn(ia, r, |_, _| next());
            let b = Matrix::from_fn(ib, r, |_, _| next());
            let c = Matrix::from_fn(ic, r, |_, _| next());
            let k = khatri_rao(&[&a, &b, &c]).unwrap();
            for col in 0..r {
                // first argument fastest == kron(C, kron(B, A)) in standard notation
                let expect = kron(c.column(col), &kron(b.column(col), a.column(col)));
                prop_assert_eq!(k.column(col), &expect[..]);
            }
        }

        #[test]
        fn gram_is_exactly_symmetric(rows in 1usize..8, r in 1usize..6, seed in any::<u64>()) {
            let mut s = seed | 1;
            let mut next = move || { s ^= s << 13; s ^= s >> 7; s ^= s << 17; (s as f64) / u64::MAX as f64 - 0.5 };
            let h = Matrix::from_fn(rows, r, |_, _| next());
            let g = gram(&h);
            prop_assert_eq!(&g, &g.transpose());
            let reference = h.transpose().matmul(&h).unwrap();
            for (x, y) in g.as_slice().iter().zip(reference.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn gram_examples() {
        assert_eq!(gram(&Matrix::identity(2)), Matrix::identity(2));
        let h = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(
            gram(&h),
            Matrix::from_rows(&[[10.0, 14.0], [14.0, 20.0]]).unwrap()
        );
        assert_eq!(gram(&Matrix::filled(5, 3, 1.0)), Matrix::filled(3, 3, 5.0));
    }

    #[test]
    fn hadamard_all_but_examples() {
        let g1 = Matrix::from_rows(&[[9.0, 9.0], [9.0, 9.0]]).unwrap();
        let g2 = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let g3 = Matrix::from_rows(&[[2.0, 0.0], [1.0, 3.0]]).unwrap();
        assert_eq!(hadamard_all_but(&[g1.clone(), g2.clone()], 1).unwrap(), g2);
        assert_eq!(
            hadamard_all_but(&[g1.clone(), g2.clone(), g3.clone()], 1).unwrap(),
            Matrix::from_rows(&[[2.0, 0.0], [3.0, 12.0]]).unwrap()
        );
        let eye = vec![Matrix::identity(3); 4];
        assert_eq!(hadamard_all_but(&eye, 2).unwrap(), Matrix::identity(3));
        assert!(hadamard_all_but(&[g1.clone(), g2.clone()], 3).is_err());
        assert!(hadamard_all_but(&[g1.clone(), g2], 0).is_err());
        assert!(hadamard_all_but(&[g1], 1).is_err());
    }

    #[test]
    fn gemm_shapes_agree_with_reference() {
        let a = Matrix::from_fn(7, 300, |i, j| ((i * 31 + j * 7) % 11) as f64 - 5.0);
        let b = Matrix::from_fn(300, 3, |i, j| ((i * 3 + j) % 5) as f64);
        let mut c = vec![0.0; 21];
        gemm_nn(7, 300, 3, a.as_slice(), b.as_slice(), &mut c);
        for i in 0..7 {
            for j in 0..3 {
                let v: f64 = (0..300).map(|p| a.get(i, p) * b.get(p, j)).sum();
                assert_eq!(c[i + 7 * j], v);
            }
        }
        let at = a.transpose();
        let mut d = vec![0.0; 21];
        gemm_tn(300, 7, 3, at.as_slice(), b.as_slice(), &mut d);
        assert_eq!(c, d);
    }
}
