//! Dense row-major real matrices and the seeded random source.
//!
//! Every operation checks its result for NaN/Inf and reports
//! [`Error::NonFinite`] rather than letting a poisoned value flow into a
//! protocol. Vectors are represented as `n x 1` (column) or `1 x n` (row)
//! matrices; one-dimensional tensors are accepted wherever the operation is
//! shape-agnostic.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

fn all_finite(data: &[f64]) -> bool {
    data.iter().all(|v| v.is_finite())
}

impl Tensor {
    /// Builds a tensor, validating the element count and finiteness.
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "dims {dims:?} need {expected} entries, got {}",
                data.len()
            )));
        }
        if !all_finite(&data) {
            return Err(Error::NonFinite("Tensor::new"));
        }
        Ok(Tensor { dims, data })
    }

    fn checked(dims: Vec<usize>, data: Vec<f64>, op: &'static str) -> Result<Self> {
        if !all_finite(&data) {
            return Err(Error::NonFinite(op));
        }
        Ok(Tensor { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Tensor {
            dims: dims.to_vec(),
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn filled(dims: &[usize], value: f64) -> Result<Self> {
        Tensor::new(dims.to_vec(), vec![value; dims.iter().product()])
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Tensor::new(vec![1, 1], vec![value])
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// `n x 1` column vector.
    pub fn column(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Tensor::new(vec![n, 1], values)
    }

    /// `1 x n` row vector.
    pub fn row(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Tensor::new(vec![1, n], values)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Tensor::new(vec![m, n], rows.concat())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Rows and columns of a 2-D tensor; a 1-D tensor reads as a column.
    pub fn shape2(&self) -> Result<(usize, usize)> {
        match self.dims.as_slice() {
            [n] => Ok((*n, 1)),
            [m, n] => Ok((*m, *n)),
            d => Err(Error::Shape(format!("expected a matrix, got dims {d:?}"))),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (_, n) = self.shape2().expect("matrix");
        self.data[row * n + col]
    }

    pub fn reshape(&self, dims: &[usize]) -> Result<Self> {
        if dims.iter().product::<usize>() != self.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {dims:?}",
                self.dims
            )));
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data: self.data.clone(),
        })
    }

    fn same_dims(&self, other: &Tensor, op: &str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!(
                "{op}: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_dims(other, op)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Tensor::checked(self.dims.clone(), data, op)
    }

    pub fn add(&self, other: &Tensor) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, other: &Tensor) -> Result<Self> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Result<Self> {
        self.map(|v| v * factor)
    }

    pub fn add_scalar(&self, value: f64) -> Result<Self> {
        self.map(|v| v + value)
    }

    pub fn neg(&self) -> Self {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|v| -v).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let data = self.data.iter().map(|&v| f(v)).collect();
        Tensor::checked(self.dims.clone(), data, "map")
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Self> {
        let (m, k) = self.shape2()?;
        let (k2, n) = other.shape2()?;
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul inner dimensions {:?} x {:?}",
                self.dims, other.dims
            )));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                let b = &other.data[p * n..(p + 1) * n];
                for (o, &bv) in row.iter_mut().zip(b) {
                    *o += a * bv;
                }
            }
        }
        Tensor::checked(vec![m, n], out, "matmul")
    }

    /// Full linear convolution of two sequences (length `a + b - 1`).
    pub fn convolve(&self, other: &Tensor) -> Result<Self> {
        let (a, b) = (&self.data, &other.data);
        if a.is_empty() || b.is_empty() {
            return Err(Error::Shape("convolution of an empty sequence".into()));
        }
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        let n = out.len();
        Tensor::checked(vec![n], out, "convolve")
    }

    pub fn transpose(&self) -> Result<Self> {
        let (m, n) = self.shape2()?;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Tensor {
            dims: vec![n, m],
            data: out,
        })
    }

    /// Gathers the listed rows into a new `len(indices) x n` matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let (m, n) = self.shape2()?;
        let mut out = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            if i >= m {
                return Err(Error::Shape(format!("row {i} out of range for {m} rows")));
            }
            out.extend_from_slice(&self.data[i * n..(i + 1) * n]);
        }
        Ok(Tensor {
            dims: vec![indices.len(), n],
            data: out,
        })
    }

    /// Stacks `other` below `self`.
    pub fn stack_rows(&self, other: &Tensor) -> Result<Self> {
        let (m1, n1) = self.shape2()?;
        let (m2, n2) = other.shape2()?;
        if n1 != n2 {
            return Err(Error::Shape(format!("stack_rows {:?} over {:?}", self.dims, other.dims)));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Tensor {
            dims: vec![m1 + m2, n1],
            data,
        })
    }

    /// Rows `from..to` as a new matrix.
    pub fn row_range(&self, from: usize, to: usize) -> Result<Self> {
        let (m, n) = self.shape2()?;
        if from > to || to > m {
            return Err(Error::Shape(format!("rows {from}..{to} out of range for {m} rows")));
        }
        Ok(Tensor {
            dims: vec![to - from, n],
            data: self.data[from * n..to * n].to_vec(),
        })
    }

    /// Columns `from..to` as a new matrix.
    pub fn col_range(&self, from: usize, to: usize) -> Result<Self> {
        let (m, n) = self.shape2()?;
        if from > to || to > n {
            return Err(Error::Shape(format!("columns {from}..{to} out of range for {n} columns")));
        }
        let mut data = Vec::with_capacity(m * (to - from));
        for i in 0..m {
            data.extend_from_slice(&self.data[i * n + from..i * n + to]);
        }
        Ok(Tensor {
            dims: vec![m, to - from],
            data,
        })
    }

    /// Column sums as a `1 x n` row.
    pub fn sum_rows(&self) -> Result<Self> {
        let (m, n) = self.shape2()?;
        let mut out = vec![0.0; n];
        for i in 0..m {
            for (o, v) in out.iter_mut().zip(&self.data[i * n..(i + 1) * n]) {
                *o += v;
            }
        }
        Tensor::checked(vec![1, n], out, "sum_rows")
    }

    /// Row sums as an `m x 1` column.
    pub fn sum_cols(&self) -> Result<Self> {
        let (m, n) = self.shape2()?;
        let out = (0..m)
            .map(|i| self.data[i * n..(i + 1) * n].iter().sum())
            .collect();
        Tensor::checked(vec![m, 1], out, "sum_cols")
    }

    /// Repeats a `1 x n` row `m` times.
    pub fn repeat_rows(&self, m: usize) -> Result<Self> {
        let (r, n) = self.shape2()?;
        if r != 1 {
            return Err(Error::Shape(format!("repeat_rows needs a row, got {:?}", self.dims)));
        }
        Ok(Tensor {
            dims: vec![m, n],
            data: self.data.repeat(m),
        })
    }

    /// Repeats an `m x 1` column `n` times.
    pub fn repeat_cols(&self, n: usize) -> Result<Self> {
        let (m, c) = self.shape2()?;
        if c != 1 {
            return Err(Error::Shape(format!("repeat_cols needs a column, got {:?}", self.dims)));
        }
        let data = self
            .data
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, n))
            .collect();
        Ok(Tensor {
            dims: vec![m, n],
            data,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Orthonormalizes the columns of an `m x n` matrix (`m >= n`) by modified
    /// Gram-Schmidt with one reorthogonalization pass.
    pub fn orthonormalize_columns(&self) -> Result<Self> {
        let (m, n) = self.shape2()?;
        if n > m {
            return Err(Error::Shape(format!("cannot orthonormalize {n} columns in R^{m}")));
        }
        let mut cols: Vec<Vec<f64>> = (0..n)
            .map(|j| (0..m).map(|i| self.data[i * n + j]).collect())
            .collect();
        for j in 0..n {
            for _pass in 0..2 {
                for p in 0..j {
                    let (done, rest) = cols.split_at_mut(j);
                    let q = &done[p];
                    let v = &mut rest[0];
                    let dot: f64 = q.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= dot * qi;
                    }
                }
            }
            let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::NumericFailure {
                    message: "rank-deficient matrix".into(),
                    residual: 0.0,
                });
            }
            cols[j].iter_mut().for_each(|v| *v /= norm);
        }
        let mut out = vec![0.0; m * n];
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                out[i * n + j] = *v;
            }
        }
        Tensor::checked(vec![m, n], out, "orthonormalize_columns")
    }
}

/// Deterministic random stream: ChaCha20 keyed by `seed`, on stream `stream`.
///
/// ChaCha20 output is specified bit-for-bit, so equal `(seed, stream)` pairs
/// replay identical draws on every platform.
#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

impl RandomSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RandomSource { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh source on another stream of the same seed.
    pub fn substream(&self, stream: u64) -> Self {
        RandomSource::new(self.seed, stream)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` from 53 random mantissa bits.
    pub fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * TWO_POW_NEG_53
    }

    /// Uniform on `[-half_width, half_width]`.
    pub fn symmetric(&mut self, half_width: f64) -> f64 {
        (self.unit() * 2.0 - 1.0) * half_width
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Fisher-Yates permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i + 1);
            p.swap(i, j);
        }
        p
    }

    pub fn normal_tensor(&mut self, dims: &[usize]) -> Tensor {
        let n = dims.iter().product();
        Tensor {
            dims: dims.to_vec(),
            data: (0..n).map(|_| self.standard_normal()).collect(),
        }
    }
}

/// I.i.d. uniform entries on `[-half_width, half_width]`.
pub fn uniform(dims: &[usize], half_width: f64, rng: &mut RandomSource) -> Result<Tensor> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "uniform half-width must be positive, got {half_width}"
        )));
    }
    let n = dims.iter().product();
    Ok(Tensor {
        dims: dims.to_vec(),
        data: (0..n).map(|_| rng.symmetric(half_width)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schoolbook(a: &Tensor, b: &Tensor) -> Vec<f64> {
        let (m, k) = a.shape2().unwrap();
        let (_, n) = b.shape2().unwrap();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..k {
                    s += a.get(i, p) * b.get(p, j);
                }
                out[i * n + j] = s;
            }
        }
        out
    }

    #[test]
    fn uniform_stays_in_range() {
        let mut rng = RandomSource::new(7, 0);
        let t = uniform(&[2, 2], 1e5, &mut rng).unwrap();
        assert!(t.data().iter().all(|v| v.abs() <= 1e5));
        let t = uniform(&[10_000], 0.5, &mut rng).unwrap();
        assert!(t.max_abs() <= 0.5);
    }

    #[test]
    fn uniform_is_deterministic() {
        let a = uniform(&[3, 4], 2.0, &mut RandomSource::new(42, 0)).unwrap();
        let b = uniform(&[3, 4], 2.0, &mut RandomSource::new(42, 0)).unwrap();
        assert_eq!(a.data(), b.data());
        let c = uniform(&[3, 4], 2.0, &mut RandomSource::new(42, 1)).unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn uniform_mean_is_centered() {
        let t = uniform(&[1_000_000], 1.0, &mut RandomSource::new(3, 0)).unwrap();
        let mean = t.sum() / t.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn uniform_rejects_nonpositive_width() {
        let mut rng = RandomSource::new(1, 0);
        assert!(matches!(uniform(&[2], 0.0, &mut rng), Err(Error::InvalidArgument(_))));
        assert!(matches!(uniform(&[2], -1.0, &mut rng), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn matmul_basics() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(Tensor::identity(2).matmul(&a).unwrap(), a);
        assert_eq!(a.matmul(&Tensor::identity(2)).unwrap(), a);
        let six = Tensor::scalar(2.0).unwrap().matmul(&Tensor::scalar(3.0).unwrap()).unwrap();
        assert_eq!(six.data(), &[6.0]);
        let bad = Tensor::zeros(&[3, 1]);
        assert!(matches!(a.matmul(&bad), Err(Error::Shape(_))));
    }

    #[test]
    fn matmul_matches_schoolbook() {
        let mut rng = RandomSource::new(11, 0);
        let a = uniform(&[8, 8], 1.0, &mut rng).unwrap();
        let b = uniform(&[8, 8], 1.0, &mut rng).unwrap();
        let c = a.matmul(&b).unwrap();
        for (x, y) in c.data().iter().zip(schoolbook(&a, &b)) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(Tensor::column(vec![f64::NAN]), Err(Error::NonFinite(_))));
        let big = Tensor::scalar(1e300).unwrap();
        assert!(matches!(big.hadamard(&big), Err(Error::NonFinite(_))));
    }

    #[test]
    fn convolution_small() {
        let a = Tensor::new(vec![2], vec![1.0, 1.0]).unwrap();
        assert_eq!(a.convolve(&a).unwrap().data(), &[1.0, 2.0, 1.0]);
    }

    #[test]
    fn orthonormalization() {
        let g = RandomSource::new(5, 0).normal_tensor(&[64, 9]);
        let q = g.orthonormalize_columns().unwrap();
        let gram = q.transpose().unwrap().matmul(&q).unwrap();
        let id = Tensor::identity(9);
        for (x, y) in gram.data().iter().zip(id.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn broadcasting_helpers() {
        let r = Tensor::row(vec![1.0, 2.0]).unwrap();
        assert_eq!(r.repeat_rows(2).unwrap().data(), &[1.0, 2.0, 1.0, 2.0]);
        let c = Tensor::column(vec![1.0, 2.0]).unwrap();
        assert_eq!(c.repeat_cols(2).unwrap().data(), &[1.0, 1.0, 2.0, 2.0]);
        let m = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.sum_rows().unwrap().data(), &[4.0, 6.0]);
        assert_eq!(m.sum_cols().unwrap().data(), &[3.0, 7.0]);
        assert_eq!(m.select_rows(&[1]).unwrap().data(), &[3.0, 4.0]);
    }
}
