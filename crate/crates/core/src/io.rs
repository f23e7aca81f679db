//! Binary tensor and model files.
//!
//! Tensor files: magic `DTEN0001`, `u64` order `N`, `N` `u64` extents, then
//! all entries as little-endian `f64` in generalized column-major order.
//!
//! Model files: magic `DMOD0001`, `u64` order `N`, `u64` rank `R`, then for
//! each mode a `u64` row count followed by the factor in column-major order,
//! then the `R` weights. No padding anywhere.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kruskal::KruskalModel;
use crate::matrix::Matrix;
use crate::tensor::DenseTensor;

pub const TENSOR_MAGIC: &[u8; 8] = b"DTEN0001";
pub const MODEL_MAGIC: &[u8; 8] = b"DMOD0001";

fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64s(w: &mut impl Write, xs: &[f64]) -> Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

fn read_usize(r: &mut impl Read, what: &str) -> Result<usize> {
    usize::try_from(read_u64(r)?).map_err(|_| Error::Format(format!("{what} exceeds usize")))
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)
            .map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

fn expect_magic(r: &mut impl Read, magic: &[u8; 8]) -> Result<()> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("missing magic: {e}")))?;
    if &b != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&b),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

fn expect_eof(r: &mut impl Read) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after payload".into())),
    }
}

pub fn write_tensor_to(w: &mut impl Write, tensor: &DenseTensor) -> Result<()> {
    w.write_all(TENSOR_MAGIC)?;
    write_u64(w, tensor.order() as u64)?;
    for &d in tensor.dims() {
        write_u64(w, d as u64)?;
    }
    write_f64s(w, tensor.data())
}

pub fn read_tensor_from(r: &mut impl Read) -> Result<DenseTensor> {
    expect_magic(r, TENSOR_MAGIC)?;
    let order = read_usize(r, "order")?;
    if order == 0 || order > 64 {
        return Err(Error::Format(format!("implausible tensor order {order}")));
    }
    let dims = (0..order)
        .map(|_| read_usize(r, "extent"))
        .collect::<Result<Vec<_>>>()?;
    let len = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
    let data = read_f64s(r, len)?;
    expect_eof(r)?;
    DenseTensor::new(dims, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_model_to(w: &mut impl Write, model: &KruskalModel) -> Result<()> {
    w.write_all(MODEL_MAGIC)?;
    write_u64(w, model.order() as u64)?;
    write_u64(w, model.rank() as u64)?;
    for f in &model.factors {
        write_u64(w, f.rows() as u64)?;
        write_f64s(w, f.as_slice())?;
    }
    write_f64s(w, &model.lambda)
}

pub fn read_model_from(r: &mut impl Read) -> Result<KruskalModel> {
    expect_magic(r, MODEL_MAGIC)?;
    let order = read_usize(r, "order")?;
    let rank = read_usize(r, "rank")?;
    if order == 0 || order > 64 {
        return Err(Error::Format(format!("implausible model order {order}")));
    }
    let mut factors = Vec::with_capacity(order);
    for _ in 0..order {
        let rows = read_usize(r, "row count")?;
        let len = rows
            .checked_mul(rank)
            .ok_or_else(|| Error::Format("factor size overflows".into()))?;
        factors.push(Matrix::from_col_major(rows, rank, read_f64s(r, len)?)?);
    }
    let lambda = read_f64s(r, rank)?;
    expect_eof(r)?;
    KruskalModel::new(factors, lambda)
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &DenseTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor_to(&mut w, tensor)?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    read_tensor_from(&mut BufReader::new(File::open(path)?))
}

pub fn write_model(path: impl AsRef<Path>, model: &KruskalModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model_to(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<KruskalModel> {
    read_model_from(&mut BufReader::new(File::open(path)?))
}
