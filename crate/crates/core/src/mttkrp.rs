//! MTTKRP kernels: the naive reference, the partial MTTKRP that contracts a
//! contiguous block of modes with one matrix-matrix product, and the multi-TTV
//! that finishes the contraction slice by slice.
//!
//! Temporaries keep their modes in ascending order with the rank mode last,
//! so rank slice `r` of a temporary is one contiguous block.

use crate::error::{Error, Result};
use crate::matrix::{dot, gemm_nn, gemm_tn, khatri_rao, khatri_rao_flops, Matrix};
use crate::tensor::DenseTensor;

/// Monotone flop counters. Each multiply-add counts as two flops.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlopLedger {
    pub partial_mttkrp: u64,
    pub multi_ttv: u64,
    pub krp: u64,
    /// Matrix-multiply flops of the naive (unfolded) MTTKRP.
    pub naive: u64,
}

impl FlopLedger {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    /// MTTKRP arithmetic excluding Khatri-Rao formation.
    pub fn mttkrp_total(&self) -> u64 {
        self.partial_mttkrp + self.multi_ttv + self.naive
    }

    pub fn since(&self, earlier: &FlopLedger) -> FlopLedger {
        FlopLedger {
            partial_mttkrp: self.partial_mttkrp - earlier.partial_mttkrp,
            multi_ttv: self.multi_ttv - earlier.multi_ttv,
            krp: self.krp - earlier.krp,
            naive: self.naive - earlier.naive,
        }
    }
}

/// Inclusive, 1-indexed range of consecutive modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeRange {
    pub first: usize,
    pub last: usize,
}

impl ModeRange {
    pub fn new(first: usize, last: usize) -> Self {
        assert!(first >= 1 && first <= last, "empty mode range {first}..={last}");
        Self { first, last }
    }

    pub fn single(n: usize) -> Self {
        Self::new(n, n)
    }

    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: usize) -> bool {
        self.first <= n && n <= self.last
    }

    pub fn is_leaf(&self) -> bool {
        self.first == self.last
    }

    pub fn modes(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }

    fn extent(&self, dims: &[usize]) -> usize {
        dims[self.first - 1..self.last].iter().product()
    }
}

impl std::fmt::Display for ModeRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let modes: Vec<String> = self.modes().map(|m| m.to_string()).collect();
        write!(f, "{{{}}}", modes.join(","))
    }
}

fn check_factors(dims: &[usize], factors: &[Matrix], skip: &dyn Fn(usize) -> bool) -> Result<usize> {
    if factors.len() != dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} factors for a {}-way tensor",
            factors.len(),
            dims.len()
        )));
    }
    let mut rank = None;
    for (m, f) in factors.iter().enumerate() {
        if skip(m + 1) {
            continue;
        }
        if f.rows() != dims[m] {
            return Err(Error::DimensionMismatch(format!(
                "factor {} has {} rows, mode extent is {}",
                m + 1,
                f.rows(),
                dims[m]
            )));
        }
        match rank {
            None => rank = Some(f.cols()),
            Some(r) if r != f.cols() => {
                return Err(Error::DimensionMismatch(format!(
                    "factor {} has {} columns, expected {}",
                    m + 1,
                    f.cols(),
                    r
                )))
            }
            _ => {}
        }
    }
    rank.ok_or_else(|| Error::InvalidArgument("no factors to contract".into()))
}

/// Khatri-Rao product of the factors for `modes`, lowest mode varying
/// fastest, as required by the column ordering of a column-major unfolding.
pub fn krp_of_modes<'a>(
    factors: &'a [Matrix],
    modes: impl Iterator<Item = usize>,
    ledger: &mut FlopLedger,
) -> Result<Matrix> {
    let mats: Vec<&'a Matrix> = modes.map(|m| &factors[m - 1]).collect();
    let rows: Vec<usize> = mats.iter().map(|m| m.rows()).collect();
    let k = khatri_rao(&mats)?;
    ledger.krp += khatri_rao_flops(&rows, k.cols());
    Ok(k)
}

/// Reference `M^(n) = A_(n) (H^(N) (.) ... (.) H^(n+1) (.) H^(n-1) (.) ... (.) H^(1))`
/// with the Khatri-Rao product materialized. `factors[n-1]` is ignored.
pub fn mttkrp_naive(tensor: &DenseTensor, factors: &[Matrix], n: usize) -> Result<Matrix> {
    mttkrp_naive_counted(tensor, factors, n, &mut FlopLedger::default())
}

pub fn mttkrp_naive_counted(
    tensor: &DenseTensor,
    factors: &[Matrix],
    n: usize,
    ledger: &mut FlopLedger,
) -> Result<Matrix> {
    let dims = tensor.dims();
    let order = dims.len();
    if n == 0 || n > order {
        return Err(Error::InvalidMode { mode: n, order });
    }
    if order == 1 {
        return Err(Error::InvalidArgument("MTTKRP needs at least two modes".into()));
    }
    let rank = check_factors(dims, factors, &|m| m == n)?;
    let k = krp_of_modes(factors, (1..=order).filter(|&m| m != n), ledger)?;
    let rows = dims[n - 1];
    let inner: usize = dims[..n - 1].iter().product();
    let outer: usize = dims[n..].iter().product();
    let data = tensor.data();
    let mut out = Matrix::zeros(rows, rank);
    if inner == 1 {
        // A_(1) is the tensor storage itself.
        gemm_nn(rows, outer, rank, data, k.as_slice(), out.as_mut_slice());
    } else {
        // Column j = lo + inner * hi of A_(n) pairs row block hi of K with the
        // contiguous run data[inner * (i + rows * hi) ..][..inner].
        let krows = k.rows();
        for r in 0..rank {
            let kcol = &k.as_slice()[r * krows..(r + 1) * krows];
            for hi in 0..outer {
                let kblock = &kcol[inner * hi..inner * (hi + 1)];
                for i in 0..rows {
                    let start = inner * (i + rows * hi);
                    let v = dot(&data[start..start + inner], kblock);
                    let cur = out.get(i, r);
                    out.set(i, r, cur + v);
                }
            }
        }
    }
    ledger.naive += 2 * (tensor.len() as u64) * rank as u64;
    Ok(out)
}

fn check_keep_side(order: usize, keep: ModeRange) -> Result<()> {
    if keep.last > order {
        return Err(Error::InvalidMode {
            mode: keep.last,
            order,
        });
    }
    let prefix = keep.first == 1 && keep.last < order;
    let suffix = keep.last == order && keep.first > 1;
    if !(prefix || suffix) {
        return Err(Error::InvalidArgument(format!(
            "partial MTTKRP keep side {keep} must be a proper prefix or suffix of 1..={order}"
        )));
    }
    Ok(())
}

/// Contracts the tensor with the Khatri-Rao product of the complementary
/// contiguous block of modes, producing the `keep`-modes-by-`R` temporary.
///
/// `krp` must have one row per entry of the complementary block (lowest mode
/// fastest). The product runs directly on the split unfolding; no tensor
/// entry is moved.
pub fn partial_mttkrp(
    tensor: &DenseTensor,
    krp: &Matrix,
    keep: ModeRange,
    ledger: &mut FlopLedger,
) -> Result<DenseTensor> {
    let dims = tensor.dims();
    check_keep_side(dims.len(), keep)?;
    let mut out_dims: Vec<usize> = dims[keep.first - 1..keep.last].to_vec();
    out_dims.push(krp.cols());
    let mut out = vec![0.0; out_dims.iter().product()];
    partial_mttkrp_into(tensor, krp, keep, ledger, &mut out)?;
    DenseTensor::new(out_dims, out)
}

pub(crate) fn partial_mttkrp_into(
    tensor: &DenseTensor,
    krp: &Matrix,
    keep: ModeRange,
    ledger: &mut FlopLedger,
    out: &mut [f64],
) -> Result<()> {
    let dims = tensor.dims();
    let order = dims.len();
    check_keep_side(order, keep)?;
    let rank = krp.cols();
    let kept = keep.extent(dims);
    let other = tensor.len() / kept;
    if krp.rows() != other {
        return Err(Error::DimensionMismatch(format!(
            "Khatri-Rao operand has {} rows, complementary modes have {} entries",
            krp.rows(),
            other
        )));
    }
    if out.len() != kept * rank {
        return Err(Error::DimensionMismatch("temporary buffer size".into()));
    }
    if keep.first == 1 {
        // X_(1:s) is kept x other, column-major: T = X_(1:s) * K.
        let view = tensor.split_matricization(keep.last)?;
        out.fill(0.0);
        gemm_nn(kept, other, rank, view.as_slice(), krp.as_slice(), out);
    } else {
        // X_(1:s) is other x kept: T = X_(1:s)^T * K.
        let view = tensor.split_matricization(keep.first - 1)?;
        gemm_tn(other, kept, rank, view.as_slice(), krp.as_slice(), out);
    }
    ledger.partial_mttkrp += 2 * tensor.len() as u64 * rank as u64;
    Ok(())
}

/// Multi-TTV: contracts every mode of `temp` outside `target` with the
/// matching column of `krp`, one rank slice at a time.
///
/// `temp` has dims `I_first x ... x I_last x R` for `temp_modes`; `target`
/// must be a contiguous prefix or suffix of `temp_modes`. `krp` rows run over
/// the contracted modes, lowest mode fastest. The result has dims
/// `target extents x R`.
pub fn multi_ttv(
    temp: &DenseTensor,
    temp_modes: ModeRange,
    krp: &Matrix,
    target: ModeRange,
    ledger: &mut FlopLedger,
) -> Result<DenseTensor> {
    let tdims = temp.dims();
    if tdims.len() != temp_modes.len() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "temporary has {} modes, expected {} plus the rank mode",
            tdims.len(),
            temp_modes.len()
        )));
    }
    if target.first < temp_modes.first || target.last > temp_modes.last {
        return Err(Error::InvalidArgument(format!(
            "multi-TTV target {target} lies outside {temp_modes}"
        )));
    }
    let rank = tdims[tdims.len() - 1];
    let mut out_dims: Vec<usize> = target
        .modes()
        .map(|m| tdims[m - temp_modes.first])
        .collect();
    out_dims.push(rank);
    let mut out = vec![0.0; out_dims.iter().product()];
    multi_ttv_into(temp, temp_modes, krp, target, ledger, &mut out)?;
    DenseTensor::new(out_dims, out)
}

pub(crate) fn multi_ttv_into(
    temp: &DenseTensor,
    temp_modes: ModeRange,
    krp: &Matrix,
    target: ModeRange,
    ledger: &mut FlopLedger,
    out: &mut [f64],
) -> Result<()> {
    let tdims = temp.dims();
    let rank = tdims[tdims.len() - 1];
    let inside = target.first >= temp_modes.first && target.last <= temp_modes.last;
    let prefix = target.first == temp_modes.first && target.last < temp_modes.last;
    let suffix = target.last == temp_modes.last && target.first > temp_modes.first;
    if !inside || !(prefix || suffix) {
        return Err(Error::InvalidArgument(format!(
            "multi-TTV target {target} must be a proper prefix or suffix of {temp_modes}"
        )));
    }
    if krp.cols() != rank {
        return Err(Error::DimensionMismatch(format!(
            "Khatri-Rao operand has {} columns, temporary rank is {}",
            krp.cols(),
            rank
        )));
    }
    let local = |m: usize| tdims[m - temp_modes.first];
    let kept: usize = target.modes().map(local).product();
    let slice = temp.len() / rank;
    let contracted = slice / kept;
    if krp.rows() != contracted {
        return Err(Error::DimensionMismatch(format!(
            "Khatri-Rao operand has {} rows, contracted modes have {} entries",
            krp.rows(),
            contracted
        )));
    }
    if out.len() != kept * rank {
        return Err(Error::DimensionMismatch("multi-TTV output buffer size".into()));
    }
    let data = temp.data();
    for r in 0..rank {
        let block = &data[r * slice..(r + 1) * slice];
        let v = krp.column(r);
        let dst = &mut out[r * kept..(r + 1) * kept];
        if prefix {
            // block is kept x contracted: dst = block * v
            dst.fill(0.0);
            for (c, &vc) in v.iter().enumerate() {
                let col = &block[c * kept..(c + 1) * kept];
                for (d, &x) in dst.iter_mut().zip(col) {
                    *d += vc * x;
                }
            }
        } else {
            // block is contracted x kept: dst = block^T * v
            for (k, d) in dst.iter_mut().enumerate() {
                *d = dot(&block[k * contracted..(k + 1) * contracted], v);
            }
        }
    }
    ledger.multi_ttv += 2 * temp.len() as u64;
    Ok(())
}
