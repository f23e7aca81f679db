//! Dense N-way tensors in generalized column-major layout.
//!
//! Entry `(i_1, ..., i_N)` (1-indexed) lives at flat offset
//! `sum_n (i_n - 1) * prod_{m<n} I_m`, so mode 1 varies fastest. Any split of
//! the modes into a leading block `1..=s` and a trailing block `s+1..=N` is
//! therefore an ordinary column-major matrix over the same storage.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

fn validate_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::InvalidShape("a tensor needs at least one mode".into()));
    }
    if let Some(n) = dims.iter().position(|&d| d == 0) {
        return Err(Error::InvalidShape(format!(
            "mode {} has zero extent in {:?}",
            n + 1,
            dims
        )));
    }
    dims.iter().try_fold(1usize, |acc, &d| {
        acc.checked_mul(d)
            .ok_or_else(|| Error::InvalidShape(format!("{dims:?} overflows usize")))
    })
}

/// Flat storage offset of a 1-indexed multi-index.
pub fn entry_offset(dims: &[usize], index: &[usize]) -> Result<usize> {
    if index.len() != dims.len()
        || index.iter().zip(dims).any(|(&i, &d)| i == 0 || i > d)
    {
        return Err(Error::IndexOutOfRange {
            dims: dims.to_vec(),
            index: index.to_vec(),
        });
    }
    let mut offset = 0;
    let mut stride = 1;
    for (&i, &d) in index.iter().zip(dims) {
        offset += (i - 1) * stride;
        stride *= d;
    }
    Ok(offset)
}

/// Inverse of [`entry_offset`]: the 1-indexed multi-index stored at `offset`.
pub fn decode_offset(dims: &[usize], offset: usize) -> Result<Vec<usize>> {
    let total: usize = dims.iter().product();
    if offset >= total {
        return Err(Error::IndexOutOfRange {
            dims: dims.to_vec(),
            index: vec![offset],
        });
    }
    let mut rest = offset;
    Ok(dims
        .iter()
        .map(|&d| {
            let i = rest % d;
            rest /= d;
            i + 1
        })
        .collect())
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = validate_dims(&dims)?;
        if data.len() != len {
            return Err(Error::InvalidShape(format!(
                "dims {:?} need {} entries, got {}",
                dims,
                len,
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let len = validate_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        })
    }

    /// Builds a tensor by evaluating `f` at every 1-indexed multi-index, in
    /// storage order.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = validate_dims(dims)?;
        let mut index = vec![1usize; dims.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&index));
            for (i, &d) in index.iter_mut().zip(dims) {
                if *i < d {
                    *i += 1;
                    break;
                }
                *i = 1;
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[entry_offset(&self.dims, index)?])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let off = entry_offset(&self.dims, index)?;
        self.data[off] = value;
        Ok(())
    }

    pub fn norm_squared(&self) -> f64 {
        norm_squared(self)
    }

    /// Zero-copy view of the matricization with modes `1..=split` as rows and
    /// `split+1..=N` as columns.
    pub fn split_matricization(&self, split: usize) -> Result<SplitMatricization<'_>> {
        if split == 0 || split >= self.order() {
            return Err(Error::InvalidMode {
                mode: split,
                order: self.order(),
            });
        }
        let rows = self.dims[..split].iter().product();
        let cols = self.dims[split..].iter().product();
        Ok(SplitMatricization {
            tensor: self,
            split,
            rows,
            cols,
        })
    }
}

/// Sum of squared entries.
pub fn norm_squared(tensor: &DenseTensor) -> f64 {
    tensor.data.iter().map(|x| x * x).sum()
}

/// Contiguous matricization aliasing the tensor storage.
#[derive(Debug, Clone, Copy)]
pub struct SplitMatricization<'a> {
    tensor: &'a DenseTensor,
    split: usize,
    rows: usize,
    cols: usize,
}

impl<'a> SplitMatricization<'a> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn split(&self) -> usize {
        self.split
    }

    /// Column-major storage, leading dimension `rows()`.
    pub fn as_slice(&self) -> &'a [f64] {
        &self.tensor.data
    }

    pub fn column(&self, c: usize) -> &'a [f64] {
        &self.tensor.data[c * self.rows..(c + 1) * self.rows]
    }

    /// Entry at 0-indexed row `r`, column `c`.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        assert!(r < self.rows && c < self.cols, "({r}, {c}) outside view");
        self.tensor.data[r + self.rows * c]
    }
}

/// Dense copy of the mode-`n` unfolding (1-indexed `n`).
///
/// Columns are the mode-`n` fibers, ordered column-major over the remaining
/// modes in increasing order. Reference path only; the MTTKRP kernels work on
/// [`SplitMatricization`] views instead.
pub fn mode_n_matricize(tensor: &DenseTensor, n: usize) -> Result<Matrix> {
    let order = tensor.order();
    if n == 0 || n > order {
        return Err(Error::InvalidMode { mode: n, order });
    }
    let dims = tensor.dims();
    let rows = dims[n - 1];
    let inner: usize = dims[..n - 1].iter().product();
    let cols = tensor.len() / rows;
    let mut out = Matrix::zeros(rows, cols);
    // offset = lo + inner * (i_n + rows * hi); column = lo + inner * hi
    for (off, &x) in tensor.data().iter().enumerate() {
        let lo = off % inner;
        let rest = off / inner;
        let i = rest % rows;
        let hi = rest / rows;
        out.set(i, lo + inner * hi, x);
    }
    Ok(out)
}
