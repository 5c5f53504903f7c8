//! Dense order-N tensors over the box index set, unfoldings, and the
//! multi-index combinatorics shared by every other module.
//!
//! Storage is a flat row-major array (last index fastest), so the k-th
//! unfolding is a pure reshape of the flat buffer.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense tensors are only permitted below this entry count; larger requests
/// error out. Dense paths exist solely as small-N oracles.
pub const DEFAULT_DENSE_CAP: usize = 10_000_000;

/// Multi-index α ∈ N₀^N with total degree |α| = Σ αᵢ.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn zeros(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total degree |α|.
    pub fn degree(&self) -> usize {
        self.0.iter().sum()
    }

    /// α! = Π αᵢ!
    pub fn factorial(&self) -> Result<u64> {
        let mut acc: u64 = 1;
        for &a in &self.0 {
            for k in 2..=a as u64 {
                acc = acc
                    .checked_mul(k)
                    .ok_or_else(|| Error::IntegerOverflow(format!("{:?}!", self.0)))?;
            }
        }
        Ok(acc)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Binomial coefficient C(n, k) with checked 64-bit arithmetic.
pub fn binomial(n: u64, k: u64) -> Result<u64> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        // Multiply first, divide after: acc * (n-i) is always divisible by (i+1)
        // along this recurrence.
        acc = acc
            .checked_mul(n - i)
            .ok_or_else(|| Error::IntegerOverflow(format!("C({n},{k})")))?
            / (i + 1);
    }
    Ok(acc)
}

/// All α with αᵢ ∈ {0..p} and |α| ≤ p, in lexicographic order.
/// The count is C(N+p, p).
pub fn simplex_indices(n: usize, p: usize) -> Vec<MultiIndex> {
    assert!(n >= 1, "order must be at least 1");
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    fill_simplex(&mut out, &mut cur, 0, p);
    out
}

fn fill_simplex(out: &mut Vec<MultiIndex>, cur: &mut Vec<usize>, pos: usize, budget: usize) {
    if pos == cur.len() {
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for a in 0..=budget {
        cur[pos] = a;
        fill_simplex(out, cur, pos + 1, budget - a);
    }
    cur[pos] = 0;
}

/// Number of α ∈ N₀^N with |α| = m exactly, i.e. C(N+m−1, m).
pub fn count_degree_exactly(n: usize, m: usize) -> Result<u64> {
    binomial((n + m - 1) as u64, m as u64)
}

/// Dense order-N tensor with every mode of size p+1, flat row-major storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::validate_shape(&shape, DEFAULT_DENSE_CAP)?;
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "data length {} does not match shape {:?} (expected {})",
                data.len(),
                shape,
                len
            )));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        Self::zeros_with_cap(shape, DEFAULT_DENSE_CAP)
    }

    pub fn zeros_with_cap(shape: Vec<usize>, cap: usize) -> Result<Self> {
        Self::validate_shape(&shape, cap)?;
        let len: usize = shape.iter().product();
        Ok(DenseTensor {
            shape,
            data: vec![0.0; len],
        })
    }

    fn validate_shape(shape: &[usize], cap: usize) -> Result<()> {
        if shape.is_empty() {
            return Err(Error::ShapeMismatch("tensor order must be >= 1".into()));
        }
        if shape.iter().any(|&m| m == 0) {
            return Err(Error::ShapeMismatch("every mode size must be >= 1".into()));
        }
        let mut len: usize = 1;
        for &m in shape {
            len = len
                .checked_mul(m)
                .ok_or_else(|| Error::IntegerOverflow("tensor size".into()))?;
        }
        if len > cap {
            return Err(Error::DenseCapExceeded {
                requested: len,
                cap,
            });
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    /// Row-major linear index, last coordinate fastest.
    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut lin = 0usize;
        for (i, &a) in idx.iter().enumerate() {
            debug_assert!(a < self.shape[i]);
            lin = lin * self.shape[i] + a;
        }
        lin
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let lin = self.linear_index(idx);
        self.data[lin] = value;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Frobenius inner product ⟨A, B⟩ = Σ_α A[α] B[α].
    pub fn inner_product(&self, other: &DenseTensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "inner product between shapes {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }

    /// ‖A − B‖_F.
    pub fn distance(&self, other: &DenseTensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "distance between shapes {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// k-th unfolding: rows index the first k coordinates, columns the last
    /// N−k, both row-major. Requires 1 ≤ k ≤ N−1. Since storage is row-major
    /// this is a pure reshape of the flat buffer.
    pub fn unfold(&self, k: usize) -> Result<DMatrix<f64>> {
        let n = self.order();
        if k < 1 || k > n - 1 {
            return Err(Error::IndexOutOfRange(format!(
                "unfold split {} for order-{} tensor",
                k, n
            )));
        }
        let rows: usize = self.shape[..k].iter().product();
        let cols: usize = self.shape[k..].iter().product();
        Ok(DMatrix::from_row_slice(rows, cols, &self.data))
    }

    /// Rebuild a tensor of the given shape from its k-th unfolding.
    pub fn refold(matrix: &DMatrix<f64>, shape: Vec<usize>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if matrix.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "refold of {}x{} matrix into shape {:?}",
                matrix.nrows(),
                matrix.ncols(),
                shape
            )));
        }
        let mut data = Vec::with_capacity(len);
        for r in 0..matrix.nrows() {
            for c in 0..matrix.ncols() {
                data.push(matrix[(r, c)]);
            }
        }
        DenseTensor::new(shape, data)
    }
}
