//! Numeric kernels: simplex vectors, column-stochastic matrices, safe logs,
//! softmax, digamma, Dirichlet expectations, Kronecker products and `h(A)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Global probability floor used before taking logarithms.
pub const EPS: f64 = 1e-16;

/// Tolerance on normalisation checks.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MathError {
    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("digamma requires a positive argument, got {0}")]
    NonPositive(f64),
    #[error("entries sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("cannot normalise a vector with zero total mass")]
    ZeroMass,
    #[error("concentration parameters must be positive")]
    NonPositiveConcentration,
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

fn check_nonnegative(values: &[f64]) -> Result<(), MathError> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(MathError::NonFinite(index));
        }
        if value < 0.0 {
            return Err(MathError::NegativeEntry { index, value });
        }
    }
    Ok(())
}

/// Divide by the total mass.
pub fn normalize(values: &[f64]) -> Result<Vec<f64>, MathError> {
    check_nonnegative(values)?;
    let sum: f64 = values.iter().sum();
    if sum <= 0.0 {
        return Err(MathError::ZeroMass);
    }
    Ok(values.iter().map(|v| v / sum).collect())
}

/// A categorical probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(values: Vec<f64>) -> Result<Self, MathError> {
        check_nonnegative(&values)?;
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(MathError::NotNormalized { sum });
        }
        Ok(Self(values))
    }

    pub fn from_unnormalized(values: &[f64]) -> Result<Self, MathError> {
        normalize(values).map(Self)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(index: usize, len: usize) -> Self {
        let mut v = vec![0.0; len];
        v[index] = 1.0;
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A hard assignment, stored 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OneHotVector {
    pub index: usize,
    pub len: usize,
}

impl OneHotVector {
    pub fn new(index: usize, len: usize) -> Result<Self, MathError> {
        if index >= len {
            return Err(MathError::IndexOutOfRange { index, len });
        }
        Ok(Self { index, len })
    }

    pub fn to_simplex(self) -> SimplexVector {
        SimplexVector::one_hot(self.index, self.len)
    }
}

/// Column-stochastic matrix `A[j, i]`: `j` indexes outcomes (rows), `i` conditions (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl StochasticMatrix {
    /// Build from row vectors, checking column normalisation.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MathError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if nrows == 0 || ncols == 0 {
            return Err(MathError::Shape("matrix must be non-empty".into()));
        }
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(MathError::Shape("ragged matrix rows".into()));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(nrows, ncols, data)
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MathError> {
        if data.len() != rows * cols {
            return Err(MathError::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        check_nonnegative(&data)?;
        let m = Self { rows, cols, data };
        for i in 0..cols {
            let sum: f64 = (0..rows).map(|j| m.get(j, i)).sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(MathError::NotNormalized { sum });
            }
        }
        Ok(m)
    }

    /// Normalise each column of a nonnegative matrix.
    pub fn from_unnormalized_columns(rows: usize, cols: usize, mut data: Vec<f64>) -> Result<Self, MathError> {
        if data.len() != rows * cols {
            return Err(MathError::Shape("entry count does not match shape".into()));
        }
        check_nonnegative(&data)?;
        for i in 0..cols {
            let sum: f64 = (0..rows).map(|j| data[j * cols + i]).sum();
            if sum <= 0.0 {
                return Err(MathError::ZeroMass);
            }
            for j in 0..rows {
                data[j * cols + i] /= sum;
            }
        }
        Self::from_row_major(rows, cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.data[j * self.cols + i]
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.rows).map(|j| self.get(j, i)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn row_major(&self) -> &[f64] {
        &self.data
    }

    /// `A v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "mul_vec shape");
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Aᵀ v`.
    pub fn tmul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows, "tmul_vec shape");
        let mut out = vec![0.0; self.cols];
        for (row, &w) in self.data.chunks(self.cols).zip(v) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * w;
            }
        }
        out
    }

    pub fn is_deterministic(&self) -> bool {
        self.data.iter().all(|&a| a == 0.0 || a == 1.0)
    }
}

/// A stack of equally shaped column-stochastic slices `A[j, i, k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticTensor {
    slices: Vec<StochasticMatrix>,
}

impl StochasticTensor {
    pub fn new(slices: Vec<StochasticMatrix>) -> Result<Self, MathError> {
        let first = slices
            .first()
            .ok_or_else(|| MathError::Shape("tensor needs at least one slice".into()))?;
        let shape = (first.rows(), first.cols());
        if slices.iter().any(|s| (s.rows(), s.cols()) != shape) {
            return Err(MathError::Shape("slices differ in shape".into()));
        }
        Ok(Self { slices })
    }

    pub fn slices(&self) -> &[StochasticMatrix] {
        &self.slices
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }
}

/// Dirichlet concentration vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DirichletParams(Vec<f64>);

impl DirichletParams {
    pub fn new(concentration: Vec<f64>) -> Result<Self, MathError> {
        if concentration.is_empty() || concentration.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(MathError::NonPositiveConcentration);
        }
        Ok(Self(concentration))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn mean(&self) -> SimplexVector {
        let total = self.total();
        SimplexVector(self.0.iter().map(|a| a / total).collect())
    }
}

/// Column-wise Dirichlet concentrations for a matrix-valued parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DirichletMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MathError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
            return Err(MathError::Shape("ragged or empty concentration matrix".into()));
        }
        Self::from_row_major(nrows, ncols, rows.iter().flatten().copied().collect())
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MathError> {
        if data.len() != rows * cols {
            return Err(MathError::Shape("entry count does not match shape".into()));
        }
        if data.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(MathError::NonPositiveConcentration);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.data[j * self.cols + i]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn column(&self, i: usize) -> DirichletParams {
        DirichletParams((0..self.rows).map(|j| self.get(j, i)).collect())
    }

    /// Column-normalised mean `Ā`.
    pub fn mean(&self) -> StochasticMatrix {
        let mut data = self.data.clone();
        for i in 0..self.cols {
            let total: f64 = (0..self.rows).map(|j| self.get(j, i)).sum();
            for j in 0..self.rows {
                data[j * self.cols + i] /= total;
            }
        }
        StochasticMatrix { rows: self.rows, cols: self.cols, data }
    }

    /// Entry-wise `E[log A]` (digamma form, per column), row-major.
    pub fn mean_log(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.cols {
            let col = self.column(i);
            for (j, v) in dirichlet_mean_log(&col).into_iter().enumerate() {
                out[j * self.cols + i] = v;
            }
        }
        out
    }
}

/// Log with the `ε` floor: entries below `ε` map to `log ε`.
#[inline]
pub fn slog(x: f64) -> f64 {
    x.max(EPS).ln()
}

/// Element-wise floored logarithm, rejecting negative input.
pub fn safe_log(values: &[f64]) -> Result<Vec<f64>, MathError> {
    check_nonnegative(values)?;
    Ok(values.iter().map(|&x| slog(x)).collect())
}

/// Numerically stable softmax.
pub fn softmax(values: &[f64]) -> SimplexVector {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    SimplexVector(exps.into_iter().map(|e| e / sum).collect())
}

/// Digamma via upward recurrence to `x ≥ 6` followed by the asymptotic series.
pub fn digamma(x: f64) -> Result<f64, MathError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(MathError::NonPositive(x));
    }
    let mut x = x;
    let mut shift = 0.0;
    while x < 6.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli-number coefficients B_2n / (2n)
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0 - inv2 * 3617.0 / 8160.0)))))));
    Ok(shift + x.ln() - 0.5 * inv - series)
}

fn digamma_pos(x: f64) -> f64 {
    digamma(x).expect("positive concentration")
}

/// `E[log p]` under `Dir(a)`: `ψ(a_i) − ψ(Σ a)`.
pub fn dirichlet_mean_log(a: &DirichletParams) -> Vec<f64> {
    let total = digamma_pos(a.total());
    a.as_slice().iter().map(|&ai| digamma_pos(ai) - total).collect()
}

/// `E[p_i log p_i]` under `Dir(a)`, per entry.
pub fn dirichlet_mean_plogp(a: &DirichletParams) -> Vec<f64> {
    let a0 = a.total();
    let total = digamma_pos(a0 + 1.0);
    a.as_slice()
        .iter()
        .map(|&ai| ai / a0 * (digamma_pos(ai + 1.0) - total))
        .collect()
}

/// Kronecker product of two vectors.
pub fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// Kronecker product of two column-stochastic matrices (again column-stochastic).
pub fn kron_mat(a: &StochasticMatrix, b: &StochasticMatrix) -> StochasticMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut data = vec![0.0; rows * cols];
    for ja in 0..a.rows {
        for ia in 0..a.cols {
            let av = a.get(ja, ia);
            for jb in 0..b.rows {
                for ib in 0..b.cols {
                    data[(ja * b.rows + jb) * cols + ia * b.cols + ib] = av * b.get(jb, ib);
                }
            }
        }
    }
    StochasticMatrix { rows, cols, data }
}

/// Column entropies `h(A) = −diag(Aᵀ log A)` with `0·log 0 = 0`.
pub fn h_of(a: &StochasticMatrix) -> Vec<f64> {
    (0..a.cols)
        .map(|i| entropy(&a.column(i)))
        .collect()
}

/// Shannon entropy with `0·log 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// `Σ p log(p/q)` with `0·log 0 = 0` and the `ε` floor on `q`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a.ln() - slog(b)))
        .sum()
}

/// Element-wise product.
pub fn hadamard(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}
