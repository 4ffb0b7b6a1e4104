//! Kernel functions and dense Gram matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Polynomial { degree: u32, offset: f64 },
    /// `exp(-||x1 - x2||^2 / sigma^2)`.
    Gaussian { sigma: f64 },
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("gaussian width must be positive, got {sigma}")));
        }
        Ok(Self::Gaussian { sigma })
    }

    pub fn polynomial(degree: u32, offset: f64) -> Result<Self> {
        if degree < 1 || !(offset >= 0.0) {
            return Err(Error::Domain(format!("bad polynomial kernel (degree {degree}, offset {offset})")));
        }
        Ok(Self::Polynomial { degree, offset })
    }

    pub fn eval(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        kernel_eval(self, x1, x2)
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x1: &[f64], x2: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x1, x2),
            KernelSpec::Polynomial { degree, offset } => (dot(x1, x2) + offset).powi(degree as i32),
            KernelSpec::Gaussian { sigma } => {
                let d2: f64 = x1.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (sigma * sigma)).exp()
            }
        }
    }
}

impl std::str::FromStr for KernelSpec {
    type Err = Error;

    /// `linear`, `poly:<degree>:<offset>` or `rbf:<sigma>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |v: &str| v.parse::<f64>().map_err(|e| Error::Domain(format!("bad number '{v}': {e}")));
        match parts.as_slice() {
            ["linear"] => Ok(Self::Linear),
            ["rbf", sigma] => Self::gaussian(num(sigma)?),
            ["poly", deg, off] => {
                let degree = deg
                    .parse::<u32>()
                    .map_err(|e| Error::Domain(format!("bad degree '{deg}': {e}")))?;
                Self::polynomial(degree, num(off)?)
            }
            _ => Err(Error::Domain(format!("unknown kernel '{s}'"))),
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn kernel_eval(spec: &KernelSpec, x1: &[f64], x2: &[f64]) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::DimensionMismatch { expected: x1.len(), got: x2.len() });
    }
    Ok(spec.eval_unchecked(x1, x2))
}

/// Symmetric Gram matrix `K[i][j] = k(x_i, x_j)`. The upper triangle is
/// mirrored, so the result equals its transpose exactly.
pub fn gram_matrix<X: AsRef<[f64]>>(spec: &KernelSpec, xs: &[X]) -> Result<DMatrix<f64>> {
    let n = xs.len();
    if let Some(first) = xs.first() {
        let d = first.as_ref().len();
        if let Some(bad) = xs.iter().find(|x| x.as_ref().len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.as_ref().len() });
        }
    }
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = spec.eval_unchecked(xs[i].as_ref(), xs[j].as_ref());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite Gram entry".into()));
    }
    Ok(k)
}

/// `alpha' K alpha`, with round-off negatives down to -1e-12 reported as 0.
pub fn rkhs_norm_sq(alpha: &[f64], gram: &DMatrix<f64>) -> Result<f64> {
    let n = alpha.len();
    if gram.nrows() != n || gram.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: gram.nrows() });
    }
    let a = DVector::from_column_slice(alpha);
    let v = a.dot(&(gram * &a));
    Ok(if v < 0.0 && v >= -1e-12 { 0.0 } else { v })
}
