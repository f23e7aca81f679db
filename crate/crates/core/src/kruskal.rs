use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::DenseTensor;

/// Weighted CP model `[[lambda; H_1, ..., H_N]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KruskalModel {
    pub factors: Vec<Matrix>,
    pub lambda: Vec<f64>,
}

impl KruskalModel {
    pub fn new(factors: Vec<Matrix>, lambda: Vec<f64>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidShape("a model needs at least one factor".into()));
        }
        let r = lambda.len();
        if let Some(n) = factors.iter().position(|f| f.cols() != r) {
            return Err(Error::DimensionMismatch(format!(
                "factor {} has {} columns, lambda has {}",
                n + 1,
                factors[n].cols(),
                r
            )));
        }
        Ok(Self { factors, lambda })
    }

    /// Unit weights.
    pub fn from_factors(factors: Vec<Matrix>) -> Result<Self> {
        let r = factors.first().map_or(0, Matrix::cols);
        Self::new(factors, vec![1.0; r])
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Matrix::rows).collect()
    }

    /// Materializes `sum_r lambda_r h^1_r o ... o h^N_r`.
    pub fn full(&self) -> Result<DenseTensor> {
        let dims = self.dims();
        let r = self.rank();
        let mut out = DenseTensor::zeros(&dims)?;
        let mut index = vec![0usize; dims.len()];
        for x in out.data_mut() {
            let mut acc = 0.0;
            for c in 0..r {
                let mut term = self.lambda[c];
                for (f, &i) in self.factors.iter().zip(&index) {
                    term *= f.get(i, c);
                }
                acc += term;
            }
            *x = acc;
            for (i, &d) in index.iter_mut().zip(&dims) {
                *i += 1;
                if *i < d {
                    break;
                }
                *i = 0;
            }
        }
        Ok(out)
    }

    /// `||A - model|| / ||A||` by explicit reconstruction.
    pub fn relative_error_to(&self, tensor: &DenseTensor) -> Result<f64> {
        let full = self.full()?;
        if full.dims() != tensor.dims() {
            return Err(Error::DimensionMismatch(format!(
                "model dims {:?} vs tensor dims {:?}",
                full.dims(),
                tensor.dims()
            )));
        }
        let a2 = tensor.norm_squared();
        if a2 == 0.0 {
            return Err(Error::ZeroTensor);
        }
        let diff: f64 = full
            .data()
            .iter()
            .zip(tensor.data())
            .map(|(m, a)| (a - m) * (a - m))
            .sum();
        Ok((diff / a2).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_outer_product() {
        let x = Matrix::from_col_major(2, 1, vec![1.0, 2.0]).unwrap();
        let y = Matrix::from_col_major(3, 1, vec![1.0, 0.0, -1.0]).unwrap();
        let z = Matrix::from_col_major(2, 1, vec![3.0, 4.0]).unwrap();
        let m = KruskalModel::new(vec![x, y, z], vec![2.0]).unwrap();
        let t = m.full().unwrap();
        assert_eq!(t.dims(), &[2, 3, 2]);
        assert_eq!(t.get(&[2, 1, 2]).unwrap(), 2.0 * 2.0 * 1.0 * 4.0);
        assert_eq!(t.get(&[1, 3, 1]).unwrap(), 2.0 * 1.0 * -1.0 * 3.0);
        assert_eq!(m.relative_error_to(&t).unwrap(), 0.0);
    }

    #[test]
    fn rejects_mismatched_rank() {
        assert!(KruskalModel::new(vec![Matrix::zeros(2, 2)], vec![1.0]).is_err());
        assert!(KruskalModel::new(vec![], vec![]).is_err());
    }
}
