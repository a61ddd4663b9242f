//! The P-substituted observation node: an observation model `Cat(x | A z)`
//! combined with a goal prior `Cat(x | c)` on the P-substituted `x` edge.
//!
//! With `Ā`, `log c̄` and `h̄` the expectations under the current beliefs:
//!
//! ```text
//! ξ(A) = Aᵀ(log c̄ − log(Ā z̄)) − h(A)
//! ρ    = Āᵀ(log c̄ − log(Ā z̄)) − h̄
//! U_x  = −z̄ᵀ ρ
//! ```
//!
//! The outgoing message towards `z` requires the fixed point
//! `z̄ = σ(ρ(z̄) + log d)`, solved here by Newton's method in gauge-fixed
//! logits.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;
use thiserror::Error;

use crate::graph::{MatrixParam, VectorParam};
use crate::math::{
    dirichlet_mean_log, dirichlet_mean_plogp, entropy, h_of, normalize, slog, softmax, DirichletParams,
    SimplexVector, StochasticMatrix,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GfeError {
    #[error("Newton iterate became non-finite at step {step}")]
    NonFiniteIterate { step: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Settings for the `z̄` fixed-point solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonConfig {
    pub steps: usize,
    pub tolerance: f64,
    /// Initial step length in `(0, 1]`; halved on residual increase.
    pub damping: f64,
    /// Finite-difference step for the Jacobian.
    pub fd_step: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { steps: 20, tolerance: 1e-10, damping: 1.0, fd_step: 1e-6 }
    }
}

impl NewtonConfig {
    pub fn with_steps(steps: usize) -> Result<Self, GfeError> {
        let cfg = Self { steps, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), GfeError> {
        if self.steps == 0 {
            return Err(GfeError::InvalidConfig("at least one Newton step is required".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(GfeError::InvalidConfig(format!("damping {} outside (0, 1]", self.damping)));
        }
        if !(self.tolerance > 0.0 && self.fd_step > 0.0) {
            return Err(GfeError::InvalidConfig("tolerance and step must be positive".into()));
        }
        Ok(())
    }
}

/// Beliefs and cached expectations of one composite node, plus its current `z̄`.
#[derive(Debug, Clone)]
pub struct GfeNodeState {
    a_belief: MatrixParam,
    c_belief: VectorParam,
    a_bar: StochasticMatrix,
    log_c: Vec<f64>,
    h_bar: Vec<f64>,
    z_bar: Vec<f64>,
}

impl GfeNodeState {
    pub fn new(a: MatrixParam, c: VectorParam, z_bar: SimplexVector) -> Result<Self, GfeError> {
        let (rows, cols) = a.shape();
        if c.len() != rows {
            return Err(GfeError::Shape(format!("goal prior has {} entries, A has {rows} rows", c.len())));
        }
        if z_bar.len() != cols {
            return Err(GfeError::Shape(format!("z̄ has {} entries, A has {cols} columns", z_bar.len())));
        }
        let log_c = match &c {
            VectorParam::PointMass(w) => normalize(w)
                .map_err(|e| GfeError::Shape(e.to_string()))?
                .into_iter()
                .map(slog)
                .collect(),
            VectorParam::Dirichlet(d) => dirichlet_mean_log(d),
        };
        let (a_bar, h_bar) = match &a {
            MatrixParam::PointMass(m) => (m.clone(), h_of(m)),
            MatrixParam::Dirichlet(m) => {
                let h = (0..cols)
                    .map(|i| -dirichlet_mean_plogp(&m.column(i)).iter().sum::<f64>())
                    .collect();
                (m.mean(), h)
            }
        };
        Ok(Self { a_belief: a, c_belief: c, a_bar, log_c, h_bar, z_bar: z_bar.into_vec() })
    }

    pub fn a_belief(&self) -> &MatrixParam {
        &self.a_belief
    }

    pub fn c_belief(&self) -> &VectorParam {
        &self.c_belief
    }

    pub fn a_bar(&self) -> &StochasticMatrix {
        &self.a_bar
    }

    pub fn log_c(&self) -> &[f64] {
        &self.log_c
    }

    pub fn h_bar(&self) -> &[f64] {
        &self.h_bar
    }

    pub fn z_bar(&self) -> &[f64] {
        &self.z_bar
    }

    pub fn set_z_bar(&mut self, z_bar: SimplexVector) {
        assert_eq!(z_bar.len(), self.z_bar.len(), "z̄ length");
        self.z_bar = z_bar.into_vec();
    }

    /// `log c̄ − log(Ā z̄)` for a given `z̄`.
    fn log_ratio(&self, z: &[f64]) -> Vec<f64> {
        let x = self.a_bar.mul_vec(z);
        self.log_c.iter().zip(&x).map(|(lc, xv)| lc - slog(*xv)).collect()
    }

    /// `ξ(A)` at the current `z̄`.
    pub fn xi(&self, a: &StochasticMatrix) -> Vec<f64> {
        let w = self.log_ratio(&self.z_bar);
        a.tmul_vec(&w).into_iter().zip(h_of(a)).map(|(v, h)| v - h).collect()
    }

    /// `ρ` at an arbitrary `z̄`.
    pub fn rho_at(&self, z: &[f64]) -> Vec<f64> {
        let w = self.log_ratio(z);
        self.a_bar.tmul_vec(&w).into_iter().zip(&self.h_bar).map(|(v, h)| v - h).collect()
    }

    pub fn rho(&self) -> Vec<f64> {
        self.rho_at(&self.z_bar)
    }

    /// Message towards the goal-prior parameter: `Dir(Ā z̄ + 1)`.
    pub fn msg_to_c(&self) -> DirichletParams {
        let conc = self.a_bar.mul_vec(&self.z_bar).into_iter().map(|x| x + 1.0).collect();
        DirichletParams::new(conc).expect("Āz̄ + 1 is positive")
    }

    /// Log-density message towards `A`: `A ↦ z̄ᵀ ξ(A)`.
    pub fn msg_to_a(&self) -> LogDensity {
        LogDensity { weights: self.log_ratio(&self.z_bar), z_bar: self.z_bar.clone() }
    }

    /// Node energy `U_x = −z̄ᵀ ρ`.
    pub fn energy_ux(&self) -> f64 {
        -self.z_bar.iter().zip(self.rho()).map(|(z, r)| z * r).sum::<f64>()
    }

    /// The closed-form (and potentially oscillating) message `Cat(σ(ρ))`; diagnostic only.
    pub fn msg_to_z_closed_form(&self) -> SimplexVector {
        softmax(&self.rho())
    }
}

/// Mutual information between `x` and `z` under `p(x|z) = A`, `p(z) = z̄`.
pub fn mutual_information(a: &StochasticMatrix, z: &[f64]) -> f64 {
    let x = a.mul_vec(z);
    entropy(&x) - h_of(a).iter().zip(z).map(|(h, p)| h * p).sum::<f64>()
}

/// `A ↦ z̄ᵀ(Aᵀ w − h(A))` with `w = log c̄ − log(Ā z̄)` frozen at message time.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDensity {
    weights: Vec<f64>,
    z_bar: Vec<f64>,
}

impl LogDensity {
    pub fn eval(&self, a: &StochasticMatrix) -> f64 {
        let xi = a.tmul_vec(&self.weights).into_iter().zip(h_of(a)).map(|(v, h)| v - h);
        xi.zip(&self.z_bar).map(|(x, z)| x * z).sum()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.weights.len(), self.z_bar.len())
    }

    /// Self-normalised importance-sampling estimate of the mean of the density,
    /// with an independent `Dir(1)` proposal per column.
    pub fn estimate_mean(&self, samples: usize, seed: u64) -> StochasticMatrix {
        let (rows, cols) = self.shape();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draws = Vec::with_capacity(samples);
        let mut logw = Vec::with_capacity(samples);
        for _ in 0..samples.max(1) {
            let mut data = vec![0.0; rows * cols];
            for i in 0..cols {
                let g: Vec<f64> = (0..rows).map(|_| Exp1.sample(&mut rng)).collect();
                let total: f64 = g.iter().sum();
                for j in 0..rows {
                    data[j * cols + i] = g[j] / total;
                }
            }
            let a = StochasticMatrix::from_unnormalized_columns(rows, cols, data).expect("positive draws");
            logw.push(self.eval(&a));
            draws.push(a);
        }
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut mean = vec![0.0; rows * cols];
        for (a, wi) in draws.iter().zip(&w) {
            for (m, v) in mean.iter_mut().zip(a.row_major()) {
                *m += wi / total * v;
            }
        }
        StochasticMatrix::from_unnormalized_columns(rows, cols, mean).expect("convex combination")
    }
}

/// Result of the `z̄` fixed-point solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPoint {
    pub z_bar: SimplexVector,
    /// Gauge-fixed logits (last entry 0) with `z̄ = σ(logits)`.
    pub logits: Vec<f64>,
    /// `‖z̄ − σ(ρ(z̄) + log d)‖∞`.
    pub residual: f64,
    pub steps: usize,
    pub converged: bool,
}

fn gauge(mut v: Vec<f64>) -> Vec<f64> {
    let last = *v.last().expect("non-empty");
    for x in &mut v {
        *x -= last;
    }
    v
}

/// Solve `z̄ = σ(ρ(z̄) + log d)` by Newton's method on the gauge-fixed logits,
/// starting from `σ(log d)`.
pub fn solve_z_fixed_point(state: &GfeNodeState, log_d: &[f64], cfg: &NewtonConfig) -> Result<FixedPoint, GfeError> {
    cfg.validate()?;
    let n = state.z_bar.len();
    if log_d.len() != n {
        return Err(GfeError::Shape(format!("log d has {} entries, expected {n}", log_d.len())));
    }
    let target = |v: &[f64]| -> Vec<f64> {
        let z = softmax(v);
        gauge(state.rho_at(z.as_slice()).iter().zip(log_d).map(|(r, l)| r + l).collect())
    };
    let residual = |v: &[f64]| -> f64 {
        let z = softmax(v);
        let image = softmax(&target(v));
        z.as_slice().iter().zip(image.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());

    let mut v = gauge(log_d.to_vec());
    let mut res = residual(&v);
    let mut steps = 0;
    let m = n - 1;
    while steps < cfg.steps && res >= cfg.tolerance && m > 0 {
        steps += 1;
        let f: Vec<f64> = v.iter().zip(target(&v)).map(|(a, b)| a - b).collect();
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for col in 0..m {
            let mut vp = v.clone();
            vp[col] += cfg.fd_step;
            let tp = target(&vp);
            for row in 0..m {
                let fp = vp[row] - tp[row];
                jac[(row, col)] = (fp - f[row]) / cfg.fd_step;
            }
        }
        let rhs = DVector::from_iterator(m, f[..m].iter().copied());
        let newton = jac.lu().solve(&rhs).filter(|d| d.iter().all(|x| x.is_finite()));

        let mut next = None;
        if let Some(delta) = newton {
            let mut alpha = cfg.damping;
            for _ in 0..30 {
                let mut trial = v.clone();
                for (t, d) in trial.iter_mut().zip(delta.iter()) {
                    *t -= alpha * d;
                }
                let r = residual(&trial);
                if finite(&trial) && r <= res {
                    next = Some((trial, r));
                    break;
                }
                alpha *= 0.5;
            }
        }
        // singular Jacobian or no descent: damped fixed-point step
        let (trial, r) = next.unwrap_or_else(|| {
            let t = target(&v);
            let trial: Vec<f64> = v.iter().zip(&t).map(|(a, b)| a + cfg.damping * (b - a)).collect();
            let r = residual(&trial);
            (trial, r)
        });
        if !finite(&trial) || !r.is_finite() {
            return Err(GfeError::NonFiniteIterate { step: steps });
        }
        log::trace!("newton step {steps}: residual {r:.3e}");
        v = trial;
        res = r;
    }
    Ok(FixedPoint { z_bar: softmax(&v), logits: v, residual: res, steps, converged: res < cfg.tolerance })
}

/// Message towards `z`: `Cat(σ(log z̄* − log d))`, computed from the logits so
/// floored states stay exact.
pub fn msg_to_z(fixed_point: &FixedPoint, log_d: &[f64]) -> SimplexVector {
    let v: Vec<f64> = fixed_point.logits.iter().zip(log_d).map(|(a, b)| a - b).collect();
    softmax(&v)
}

/// Discrete slot free energy
/// `Σ_{x,z} q(x|z) q(z) log[q(x) q(z) / (p̃(x) p(x,z))]` with `q(x) = Σ_z q(x|z) q(z)`.
///
/// `q_x_given_z` and `p_joint` are indexed `[x][z]`; zero-mass terms are skipped.
pub fn slot_free_energy(q_x_given_z: &[Vec<f64>], q_z: &[f64], p_joint: &[Vec<f64>], p_tilde: &[f64]) -> f64 {
    let q_x: Vec<f64> = q_x_given_z.iter().map(|row| row.iter().zip(q_z).map(|(a, b)| a * b).sum()).collect();
    let mut total = 0.0;
    for (x, row) in q_x_given_z.iter().enumerate() {
        for (z, &qxz) in row.iter().enumerate() {
            let w = qxz * q_z[z];
            if w > 0.0 {
                total += w * (q_x[x].ln() + q_z[z].ln() - slog(p_tilde[x]) - slog(p_joint[x][z]));
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{kl_divergence, SimplexVector};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pm(rows: &[Vec<f64>]) -> MatrixParam {
        MatrixParam::PointMass(StochasticMatrix::from_rows(rows).unwrap())
    }

    fn eye2() -> MatrixParam {
        MatrixParam::PointMass(StochasticMatrix::identity(2))
    }

    fn state(a: MatrixParam, c: &[f64], z: &[f64]) -> GfeNodeState {
        GfeNodeState::new(a, VectorParam::PointMass(c.to_vec()), SimplexVector::new(z.to_vec()).unwrap()).unwrap()
    }

    /// EFE slot term `−diag(Aᵀ log A)ᵀ z + xᵀ(log x − log c)` with `x = A z`.
    fn efe_slot(a: &StochasticMatrix, c: &[f64], z: &[f64]) -> f64 {
        let x = a.mul_vec(z);
        let mut ambiguity = 0.0;
        for i in 0..a.cols() {
            for j in 0..a.rows() {
                let p = a.get(j, i);
                if p > 0.0 {
                    ambiguity -= z[i] * p * p.ln();
                }
            }
        }
        let risk: f64 = x.iter().zip(c).filter(|(xv, _)| **xv > 0.0).map(|(xv, cv)| xv * (xv.ln() - cv.max(1e-16).ln())).sum();
        ambiguity + risk
    }

    #[test]
    fn xi_examples() {
        let s = state(eye2(), &[0.5, 0.5], &[0.5, 0.5]);
        assert_eq!(s.xi(&StochasticMatrix::identity(2)), vec![0.0, 0.0]);
        let s = state(eye2(), &[0.75, 0.25], &[1.0, 0.0]);
        let xi = s.xi(&StochasticMatrix::identity(2));
        assert_abs_diff_eq!(xi[0], 0.75f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(xi[0], -0.2877, epsilon = 1e-4);
        let s = state(eye2(), &[0.7, 0.3], &[0.4, 0.6]);
        let flat = StochasticMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let xi = s.xi(&flat);
        assert_abs_diff_eq!(xi[0], xi[1], epsilon = 1e-15);
    }

    #[test]
    fn rho_examples() {
        let a = StochasticMatrix::from_rows(&[vec![0.7, 0.2], vec![0.3, 0.8]]).unwrap();
        let s = state(MatrixParam::PointMass(a.clone()), &[0.6, 0.4], &[0.3, 0.7]);
        assert_eq!(s.rho(), s.xi(&a));
        let s = state(eye2(), &[0.8, 0.2], &[0.5, 0.5]);
        let rho = s.rho();
        assert_abs_diff_eq!(rho[0], 1.6f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(rho[1], 0.4f64.ln(), epsilon = 1e-15);
        let s = state(eye2(), &[0.5, 0.5], &[0.5, 0.5]);
        assert_eq!(s.rho(), vec![0.0, 0.0]);
    }

    #[test]
    fn msg_to_c_examples() {
        assert_eq!(state(eye2(), &[0.5, 0.5], &[0.5, 0.5]).msg_to_c().as_slice(), &[1.5, 1.5]);
        assert_eq!(state(eye2(), &[0.5, 0.5], &[1.0, 0.0]).msg_to_c().as_slice(), &[2.0, 1.0]);
    }

    #[test]
    fn analytic_fixed_point() {
        let s = state(eye2(), &[0.8, 0.2], &[0.5, 0.5]);
        let log_d = [0.5f64.ln(), 0.5f64.ln()];
        let fp = solve_z_fixed_point(&s, &log_d, &NewtonConfig::default()).unwrap();
        assert!(fp.converged, "residual {}", fp.residual);
        assert_abs_diff_eq!(fp.z_bar.as_slice()[0], 2.0 / 3.0, epsilon = 1e-10);
        let msg = msg_to_z(&fp, &log_d);
        assert_abs_diff_eq!(msg.as_slice()[0], 2.0 / 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(msg.as_slice()[1], 1.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn uniform_goal_gives_sqrt_d() {
        let d = [0.1, 0.6, 0.3];
        let s = GfeNodeState::new(
            MatrixParam::PointMass(StochasticMatrix::identity(3)),
            VectorParam::PointMass(vec![1.0; 3]),
            SimplexVector::uniform(3),
        )
        .unwrap();
        let log_d: Vec<f64> = d.iter().map(|x: &f64| x.ln()).collect();
        let fp = solve_z_fixed_point(&s, &log_d, &NewtonConfig::default()).unwrap();
        let expected = normalize(&d.map(f64::sqrt)).unwrap();
        for (a, b) in fp.z_bar.as_slice().iter().zip(&expected) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
        }
    }

    #[test]
    fn one_hot_d_is_a_fixed_point() {
        let s = state(eye2(), &[0.3, 0.7], &[0.5, 0.5]);
        let log_d = [0.0, slog(0.0)];
        let fp = solve_z_fixed_point(&s, &log_d, &NewtonConfig::default()).unwrap();
        // the floor leaves √(c₂ ε / c₁) of mass on the excluded state
        let leak = (0.7 * crate::math::EPS / 0.3f64).sqrt();
        assert_abs_diff_eq!(fp.z_bar.as_slice()[0], 1.0 / (1.0 + leak), epsilon = 1e-12);
        assert_abs_diff_eq!(fp.z_bar.as_slice()[0], 1.0, epsilon = 1e-7);
    }

    #[test]
    fn message_to_z_cancels_prior() {
        let fp = FixedPoint {
            z_bar: SimplexVector::new(vec![0.25, 0.75]).unwrap(),
            logits: vec![(1.0f64 / 3.0).ln(), 0.0],
            residual: 0.0,
            steps: 0,
            converged: true,
        };
        let log_d = [0.25f64.ln(), 0.75f64.ln()];
        let m = msg_to_z(&fp, &log_d);
        assert_abs_diff_eq!(m.as_slice()[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn energy_examples() {
        assert_abs_diff_eq!(state(eye2(), &[0.5, 0.5], &[0.5, 0.5]).energy_ux(), 0.0, epsilon = 1e-15);
        let u = state(eye2(), &[0.75, 0.25], &[1.0, 0.0]).energy_ux();
        assert_abs_diff_eq!(u, -(0.75f64.ln()), epsilon = 1e-15);
        assert_abs_diff_eq!(u, 0.2877, epsilon = 1e-4);
        // arm block of the maze observation model, belief on the rewarded arm
        let arm = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.9, 0.1], vec![0.1, 0.9]];
        let c = softmax(&[0.0, 0.0, 2.0, -2.0]).into_vec();
        let s = state(pm(&arm), &c, &[1.0, 0.0]);
        let a = StochasticMatrix::from_rows(&arm).unwrap();
        let binary = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln());
        let cross = 0.9 * (0.9f64.ln() - c[2].ln()) + 0.1 * (0.1f64.ln() - c[3].ln());
        assert_abs_diff_eq!(s.energy_ux(), binary + cross, epsilon = 1e-12);
        assert_abs_diff_eq!(s.energy_ux(), efe_slot(&a, &c, &[1.0, 0.0]), epsilon = 1e-12);
    }

    #[test]
    fn log_density_examples() {
        let a = StochasticMatrix::from_rows(&[vec![0.7, 0.2], vec![0.3, 0.8]]).unwrap();
        let s = state(MatrixParam::PointMass(a.clone()), &[0.6, 0.4], &[1.0, 0.0]);
        assert_abs_diff_eq!(s.msg_to_a().eval(&a), s.xi(&a)[0], epsilon = 1e-15);
        let s = state(eye2(), &[0.5, 0.5], &[0.5, 0.5]);
        assert_abs_diff_eq!(s.msg_to_a().eval(&StochasticMatrix::identity(2)), 0.0, epsilon = 1e-15);

        // same predicted outcome, different ambiguity: log-density and −U_x agree on the ranking
        let sharp = StochasticMatrix::identity(2);
        let flat = StochasticMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let c = [0.6, 0.4];
        let z = [0.5, 0.5];
        let density = state(MatrixParam::PointMass(sharp.clone()), &c, &z).msg_to_a();
        let u_sharp = state(MatrixParam::PointMass(sharp.clone()), &c, &z).energy_ux();
        let u_flat = state(MatrixParam::PointMass(flat.clone()), &c, &z).energy_ux();
        assert!(density.eval(&sharp) > density.eval(&flat));
        assert!(-u_sharp > -u_flat);
    }

    #[test]
    fn importance_sampling_prefers_informative_columns() {
        let flat = pm(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let s = state(flat, &[0.9, 0.1], &[1.0, 0.0]);
        let m = s.msg_to_a().estimate_mean(4000, 3);
        // mass in column 1 is pulled towards the preferred outcome
        assert!(m.get(0, 0) > 0.5);
        // column 2 carries zero weight in z̄ and stays at the proposal mean
        assert_abs_diff_eq!(m.get(0, 1), 0.5, epsilon = 0.05);
        let again = s.msg_to_a().estimate_mean(4000, 3);
        assert_eq!(m, again);
    }

    #[test]
    fn dirichlet_belief_expectations() {
        use crate::math::DirichletMatrix;
        let conc = DirichletMatrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let s = GfeNodeState::new(
            MatrixParam::Dirichlet(conc),
            VectorParam::Dirichlet(DirichletParams::new(vec![2.0, 1.0]).unwrap()),
            SimplexVector::uniform(2),
        )
        .unwrap();
        assert_abs_diff_eq!(s.a_bar().get(0, 0), 0.75, epsilon = 1e-15);
        // ψ(2) − ψ(3) = −1/2
        assert_abs_diff_eq!(s.log_c()[0], -0.5, epsilon = 1e-12);
        // E[−A log A] for Dir(3, 1): (3/4)(ψ(5) − ψ(4)) + (1/4)(ψ(5) − ψ(2)) = 11/24
        assert_abs_diff_eq!(s.h_bar()[0], 11.0 / 24.0, epsilon = 1e-12);
        // concavity: below the entropy of the mean column
        assert!(s.h_bar()[0] < entropy(&[0.75, 0.25]));
    }

    #[test]
    fn mutual_information_bounds() {
        let z = [0.3, 0.7];
        assert_abs_diff_eq!(mutual_information(&StochasticMatrix::identity(2), &z), entropy(&z), epsilon = 1e-15);
        let flat = StochasticMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_abs_diff_eq!(mutual_information(&flat, &z), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn data_constrained_slot_is_a_vfe() {
        // two-state latent, two outcomes, observed x̂ = 2
        let a = [vec![0.8, 0.3], vec![0.2, 0.7]];
        let prior = [0.4, 0.6];
        let q_z = [0.25, 0.75];
        let x_hat = 1;
        let p_joint: Vec<Vec<f64>> = a.iter().map(|row| row.iter().zip(&prior).map(|(p, z)| p * z).collect()).collect();
        let q_x_given_z = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let g = slot_free_energy(&q_x_given_z, &q_z, &p_joint, &[1.0, 1.0]);
        let vfe: f64 = (0..2).map(|z| q_z[z] * (q_z[z] / (a[x_hat][z] * prior[z])).ln()).sum();
        assert_abs_diff_eq!(g, vfe, epsilon = 1e-12);
    }

    #[test]
    fn p_substituted_slot_is_the_efe() {
        let a = StochasticMatrix::from_rows(&[vec![0.8, 0.3, 0.0], vec![0.2, 0.7, 1.0]]).unwrap();
        let c = [0.3, 0.7];
        let z = [0.2, 0.5, 0.3];
        let rows = a.to_rows();
        let p_joint: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&z).map(|(p, q)| p * q).collect()).collect();
        let g = slot_free_energy(&rows, &z, &p_joint, &c);
        assert_abs_diff_eq!(g, efe_slot(&a, &c, &z), epsilon = 1e-12);
        assert_abs_diff_eq!(g, state(MatrixParam::PointMass(a), &c, &z).energy_ux(), epsilon = 1e-12);
    }

    fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.001f64..1.0, n).prop_map(|v| normalize(&v).unwrap())
    }

    fn stochastic(rows: usize, cols: usize) -> impl Strategy<Value = StochasticMatrix> {
        prop::collection::vec(simplex(rows), cols).prop_map(move |columns| {
            let data = (0..rows).flat_map(|j| columns.iter().map(move |c| c[j])).collect();
            StochasticMatrix::from_unnormalized_columns(rows, cols, data).unwrap()
        })
    }

    proptest! {
        #[test]
        fn energy_equals_efe_slot(
            (a, c, z) in (1usize..6, 1usize..6).prop_flat_map(|(r, n)| (stochastic(r, n), simplex(r), simplex(n)))
        ) {
            let s = GfeNodeState::new(
                MatrixParam::PointMass(a.clone()),
                VectorParam::PointMass(c.clone()),
                SimplexVector::new(z.clone()).unwrap(),
            ).unwrap();
            prop_assert!((s.energy_ux() - efe_slot(&a, &c, &z)).abs() < 1e-10);
        }

        #[test]
        fn message_to_z_is_gauge_invariant(
            (a, c, d) in (2usize..5, 2usize..5).prop_flat_map(|(r, n)| (stochastic(r, n), simplex(r), simplex(n))),
            shift in -20.0f64..20.0,
        ) {
            let s = GfeNodeState::new(
                MatrixParam::PointMass(a),
                VectorParam::PointMass(c),
                SimplexVector::uniform(d.len()),
            ).unwrap();
            let log_d: Vec<f64> = d.iter().map(|x| x.ln()).collect();
            let shifted: Vec<f64> = log_d.iter().map(|x| x + shift).collect();
            let cfg = NewtonConfig::default();
            let m1 = msg_to_z(&solve_z_fixed_point(&s, &log_d, &cfg).unwrap(), &log_d);
            let m2 = msg_to_z(&solve_z_fixed_point(&s, &shifted, &cfg).unwrap(), &shifted);
            prop_assert!(kl_divergence(m1.as_slice(), m2.as_slice()).abs() < 1e-9);
        }
    }
}
