//! Transition mixture node `f(x, y, z) = ∏_k Cat(x | A_k z)^{y_k}`.
//!
//! Internally slices are held as `Ã[i][j][k] = exp(E[log A_k])[j, i]` with `i`
//! the `z` state, `j` the `x` state and `k` the component, so every message is
//! a contraction of `Ã` with two incoming categoricals.

use thiserror::Error;

use crate::graph::MatrixParam;
use crate::math::{normalize, slog, DirichletParams, MathError, SimplexVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MixtureError {
    #[error("missing incoming message on `{0}`")]
    MissingInput(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Math(#[from] MathError),
}

/// Dense `B[i][j][k]` over (z, x, y), summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTensor {
    pub z_states: usize,
    pub x_states: usize,
    pub components: usize,
    data: Vec<f64>,
}

impl ContingencyTensor {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.x_states + j) * self.components + k]
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Slice `n` as an `x`-by-`z` matrix (engine orientation).
    pub fn slice(&self, n: usize) -> Vec<Vec<f64>> {
        (0..self.x_states).map(|j| (0..self.z_states).map(|i| self.get(i, j, n)).collect()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Convert an `A[j, i]` matrix (rows = outcomes) to `Ã[i][j]`.
pub fn to_appendix_order(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|i| (0..rows).map(|j| a[j][i]).collect()).collect()
}

/// Inverse of [`to_appendix_order`].
pub fn from_appendix_order(t: &[Vec<f64>]) -> Vec<Vec<f64>> {
    to_appendix_order(t)
}

/// Component beliefs plus the incoming messages of one mixture node.
#[derive(Debug, Clone)]
pub struct TmState {
    z_states: usize,
    x_states: usize,
    components: usize,
    /// `Ã[i][j][k]` flattened.
    tilde: Vec<f64>,
    pub pi_x: Option<Vec<f64>>,
    pub pi_y: Option<Vec<f64>>,
    pub pi_z: Option<Vec<f64>>,
}

impl TmState {
    pub fn new(slices: &[MatrixParam]) -> Result<Self, MixtureError> {
        let first = slices.first().ok_or_else(|| MixtureError::Shape("at least one component required".into()))?;
        let (x_states, z_states) = first.shape();
        if slices.iter().any(|s| s.shape() != (x_states, z_states)) {
            return Err(MixtureError::Shape("component slices differ in shape".into()));
        }
        let components = slices.len();
        let mut tilde = vec![0.0; z_states * x_states * components];
        for (k, slice) in slices.iter().enumerate() {
            let t = to_appendix_order(&slice.geometric_mean());
            for (i, row) in t.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    tilde[(i * x_states + j) * components + k] = *v;
                }
            }
        }
        Ok(Self { z_states, x_states, components, tilde, pi_x: None, pi_y: None, pi_z: None })
    }

    pub fn with_messages(mut self, pi_z: Option<&[f64]>, pi_x: Option<&[f64]>, pi_y: Option<&[f64]>) -> Result<Self, MixtureError> {
        let check = |name: &str, v: Option<&[f64]>, n: usize| -> Result<Option<Vec<f64>>, MixtureError> {
            match v {
                None => Ok(None),
                Some(v) if v.len() == n => Ok(Some(normalize(v)?)),
                Some(v) => Err(MixtureError::Shape(format!("{name} has {} entries, expected {n}", v.len()))),
            }
        };
        self.pi_z = check("π_z", pi_z, self.z_states)?;
        self.pi_x = check("π_x", pi_x, self.x_states)?;
        self.pi_y = check("π_y", pi_y, self.components)?;
        Ok(self)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.z_states, self.x_states, self.components)
    }

    #[inline]
    pub fn tilde(&self, i: usize, j: usize, k: usize) -> f64 {
        self.tilde[(i * self.x_states + j) * self.components + k]
    }

    fn need<'a>(v: &'a Option<Vec<f64>>, name: &'static str) -> Result<&'a [f64], MixtureError> {
        v.as_deref().ok_or(MixtureError::MissingInput(name))
    }

    /// `ν(x)_j ∝ Σ_{ik} π_z,i π_y,k Ã_ijk`.
    pub fn msg_x(&self) -> Result<SimplexVector, MixtureError> {
        let pz = Self::need(&self.pi_z, "z")?;
        let py = Self::need(&self.pi_y, "y")?;
        let mut out = vec![0.0; self.x_states];
        for (i, &a) in pz.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                for (k, &b) in py.iter().enumerate() {
                    *o += a * b * self.tilde(i, j, k);
                }
            }
        }
        Ok(SimplexVector::from_unnormalized(&out)?)
    }

    /// `ν(z)_i ∝ Σ_{jk} π_x,j π_y,k Ã_ijk`.
    pub fn msg_z(&self) -> Result<SimplexVector, MixtureError> {
        let px = Self::need(&self.pi_x, "x")?;
        let py = Self::need(&self.pi_y, "y")?;
        let mut out = vec![0.0; self.z_states];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, &a) in px.iter().enumerate() {
                for (k, &b) in py.iter().enumerate() {
                    *o += a * b * self.tilde(i, j, k);
                }
            }
        }
        Ok(SimplexVector::from_unnormalized(&out)?)
    }

    /// `ν(y)_k ∝ Σ_{ij} π_x,j π_z,i Ã_ijk`.
    pub fn msg_y(&self) -> Result<SimplexVector, MixtureError> {
        let px = Self::need(&self.pi_x, "x")?;
        let pz = Self::need(&self.pi_z, "z")?;
        let mut out = vec![0.0; self.components];
        for (i, &a) in pz.iter().enumerate() {
            for (j, &b) in px.iter().enumerate() {
                for (k, o) in out.iter_mut().enumerate() {
                    *o += a * b * self.tilde(i, j, k);
                }
            }
        }
        Ok(SimplexVector::from_unnormalized(&out)?)
    }

    /// `B_ijk ∝ π_x,j π_z,i π_y,k Ã_ijk`.
    pub fn contingency(&self) -> Result<ContingencyTensor, MixtureError> {
        let px = Self::need(&self.pi_x, "x")?;
        let py = Self::need(&self.pi_y, "y")?;
        let pz = Self::need(&self.pi_z, "z")?;
        let mut data = vec![0.0; self.tilde.len()];
        for i in 0..self.z_states {
            for j in 0..self.x_states {
                for k in 0..self.components {
                    data[(i * self.x_states + j) * self.components + k] = pz[i] * px[j] * py[k] * self.tilde(i, j, k);
                }
            }
        }
        let data = normalize(&data)?;
        Ok(ContingencyTensor { z_states: self.z_states, x_states: self.x_states, components: self.components, data })
    }

    /// Concentrations `B_n + 1` of the message towards component `n`, as an `x`-by-`z` matrix.
    pub fn msg_a(&self, b: &ContingencyTensor, n: usize) -> Vec<Vec<f64>> {
        b.slice(n).into_iter().map(|row| row.into_iter().map(|v| v + 1.0).collect()).collect()
    }

    /// Column `i` of the `ν(A_n)` concentration as Dirichlet parameters.
    pub fn msg_a_column(&self, b: &ContingencyTensor, n: usize, i: usize) -> DirichletParams {
        DirichletParams::new((0..self.x_states).map(|j| b.get(i, j, n) + 1.0).collect()).expect("positive")
    }

    /// Average energy `−Σ B log Ã`, skipping cells with `B = 0`.
    pub fn energy(&self, b: &ContingencyTensor) -> f64 {
        let mut total = 0.0;
        let mut floored = false;
        for (bv, t) in b.data.iter().zip(&self.tilde) {
            if *bv > 0.0 {
                if *t == 0.0 {
                    floored = true;
                }
                total -= bv * slog(*t);
            }
        }
        if floored {
            log::warn!("mixture energy: belief mass on a zero-probability transition; log floor applied");
        }
        total
    }
}
