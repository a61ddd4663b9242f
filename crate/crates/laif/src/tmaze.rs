//! The T-maze: model matrices, an episodic environment and the experiment runner.
//!
//! Positions, controls and reward arms are 1-based at this interface; state
//! index `2·(position − 1) + context` with context 0 when the reward is in arm 2.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{Schedule, Step};
use crate::gfe::NewtonConfig;
use crate::graph::CffgGraph;
use crate::math::{kron_mat, kron_vec, softmax, OneHotVector, StochasticMatrix};
use crate::planning::{build_laif_graph, laif_infer_policy, LaifConfig, PlanningError, PomdpModel};

pub const POSITIONS: usize = 4;
pub const STATES: usize = 8;
pub const OUTCOMES: usize = 16;
pub const CONTROLS: usize = 4;
pub const HORIZON: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TmazeError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Planning(#[from] PlanningError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TmazeConfig {
    pub c_utility: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    pub delta_controls: bool,
    pub seed: u64,
    /// Also play the inferred plan in a simulated maze.
    pub closed_loop: bool,
}

impl Default for TmazeConfig {
    fn default() -> Self {
        Self { c_utility: 2.0, alpha: 0.9, iterations: 2, newton_steps: 20, delta_controls: false, seed: 0, closed_loop: false }
    }
}

impl TmazeConfig {
    pub fn validate(&self) -> Result<(), TmazeError> {
        let bad = |m: &str| Err(TmazeError::InvalidConfig(m.into()));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if !self.c_utility.is_finite() {
            return bad("c must be finite");
        }
        if self.iterations == 0 {
            return bad("at least one iteration is required");
        }
        if self.newton_steps == 0 {
            return bad("at least one Newton step is required");
        }
        Ok(())
    }

    pub fn newton(&self) -> NewtonConfig {
        NewtonConfig { steps: self.newton_steps, ..NewtonConfig::default() }
    }
}

/// Position patterns: control 1 returns to the start, controls 2–4 move from
/// the start (or the cue) to positions 2–4; arms 2 and 3 are absorbing into 1.
fn position_pattern(control: usize) -> StochasticMatrix {
    let mut data = vec![0.0; POSITIONS * POSITIONS];
    for from in 0..POSITIONS {
        data[next_position(from, control) * POSITIONS + from] = 1.0;
    }
    StochasticMatrix::from_row_major(POSITIONS, POSITIONS, data).expect("one-hot columns")
}

/// 0-based position reached from `from` under 0-based `control`.
fn next_position(from: usize, control: usize) -> usize {
    match (control, from) {
        (0, _) => 0,
        (_, 1 | 2) => 0,
        (c, _) => c,
    }
}

pub fn transition_matrices() -> Vec<StochasticMatrix> {
    (0..CONTROLS).map(|u| kron_mat(&position_pattern(u), &StochasticMatrix::identity(2))).collect()
}

/// Block-diagonal observation matrix, one 4×2 block per position.
pub fn observation_matrix(alpha: f64) -> StochasticMatrix {
    let blocks: [[[f64; 2]; 4]; POSITIONS] = [
        [[0.5, 0.5], [0.5, 0.5], [0.0, 0.0], [0.0, 0.0]],
        [[0.0, 0.0], [0.0, 0.0], [alpha, 1.0 - alpha], [1.0 - alpha, alpha]],
        [[0.0, 0.0], [0.0, 0.0], [1.0 - alpha, alpha], [alpha, 1.0 - alpha]],
        [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]],
    ];
    let mut data = vec![0.0; OUTCOMES * STATES];
    for (p, block) in blocks.iter().enumerate() {
        for (o, row) in block.iter().enumerate() {
            for (ctx, &v) in row.iter().enumerate() {
                data[(4 * p + o) * STATES + 2 * p + ctx] = v;
            }
        }
    }
    StochasticMatrix::from_row_major(OUTCOMES, STATES, data).expect("column-stochastic blocks")
}

/// Goal prior: within every position, reward outcome preferred by `c`, no-reward by `−c`.
pub fn goal_prior(c: f64) -> Vec<f64> {
    softmax(&kron_vec(&[1.0; POSITIONS], &[0.0, 0.0, c, -c])).into_vec()
}

pub fn tmaze_pomdp(cfg: &TmazeConfig) -> Result<PomdpModel, TmazeError> {
    cfg.validate()?;
    Ok(PomdpModel {
        d: kron_vec(&[1.0, 0.0, 0.0, 0.0], &[0.5, 0.5]),
        a: observation_matrix(cfg.alpha),
        b: transition_matrices(),
        e: vec![1.0 / CONTROLS as f64; CONTROLS],
        goals: vec![goal_prior(cfg.c_utility); HORIZON],
    })
}

/// The T-maze graph with its LAIF schedule repeated `cfg.iterations` times.
pub fn build_tmaze_model(cfg: &TmazeConfig) -> Result<(CffgGraph, Schedule), TmazeError> {
    let (graph, schedule) = build_laif_graph(&tmaze_pomdp(cfg)?, cfg.delta_controls)?;
    let steps = schedule
        .steps
        .into_iter()
        .map(|s| match s {
            Step::Iterate { steps, .. } => Step::Iterate { count: cfg.iterations, steps },
            other => other,
        })
        .collect();
    Ok((graph, Schedule::new(steps)))
}

/// Simulated maze with a hidden reward arm.
#[derive(Debug, Clone)]
pub struct TmazeEnv {
    reward_arm: usize,
    position: usize,
    alpha: f64,
    rng: ChaCha8Rng,
}

impl TmazeEnv {
    /// `reward_arm` ∈ {2, 3}; the agent starts at position 1.
    pub fn new(reward_arm: usize, alpha: f64, seed: u64) -> Self {
        assert!(matches!(reward_arm, 2 | 3), "reward arm must be 2 or 3");
        Self { reward_arm, position: 1, alpha, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Reward arm drawn from the seed.
    pub fn random(alpha: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arm = if rng.random_bool(0.5) { 2 } else { 3 };
        Self { reward_arm: arm, position: 1, alpha, rng }
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn reward_arm(&self) -> usize {
        self.reward_arm
    }

    pub fn state(&self) -> usize {
        2 * (self.position - 1) + usize::from(self.reward_arm == 3)
    }
}

/// Move with 1-based `control` and sample an observation from the new state.
pub fn env_step(env: &mut TmazeEnv, control: usize) -> OneHotVector {
    assert!((1..=CONTROLS).contains(&control), "control must be in 1..=4");
    env.position = next_position(env.position - 1, control - 1) + 1;
    let column = observation_matrix(env.alpha).column(env.state());
    let dist = WeightedIndex::new(&column).expect("observation column has mass");
    OneHotVector::new(dist.sample(&mut env.rng), OUTCOMES).expect("outcome in range")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeStep {
    pub control: usize,
    pub position: usize,
    pub observation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Episode {
    pub reward_arm: usize,
    pub steps: Vec<EpisodeStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub states: usize,
    pub outcomes: usize,
    pub controls: usize,
    pub horizon: usize,
    pub initialisation: &'static str,
    pub tie_rule: &'static str,
    /// Control posteriors after every iteration.
    pub iteration_posteriors: Vec<Vec<Vec<f64>>>,
    /// Newton residuals per iteration and slot.
    pub newton_residuals: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub config: TmazeConfig,
    /// Final `q(u_k)` per slot.
    pub control_posteriors: Vec<Vec<f64>>,
    /// `U_x` per iteration and slot.
    pub slot_energies: Vec<Vec<f64>>,
    /// Free energy of the graph after each iteration.
    pub iteration_energies: Vec<f64>,
    pub metadata: Metadata,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episode: Option<Episode>,
}

pub fn run_experiment(cfg: &TmazeConfig) -> Result<ExperimentResult, TmazeError> {
    let model = tmaze_pomdp(cfg)?;
    let laif = LaifConfig { newton: cfg.newton(), delta_controls: cfg.delta_controls, seed: cfg.seed };
    let result = laif_infer_policy(&model, cfg.iterations, &laif)?;
    let posterior = result.posterior().clone();
    let episode = cfg.closed_loop.then(|| {
        let mut env = TmazeEnv::random(cfg.alpha, cfg.seed);
        let steps = posterior
            .modes()
            .controls
            .iter()
            .map(|&u| {
                let obs = env_step(&mut env, u + 1);
                EpisodeStep { control: u + 1, position: env.position(), observation: obs.index + 1 }
            })
            .collect();
        Episode { reward_arm: env.reward_arm(), steps }
    });
    Ok(ExperimentResult {
        config: *cfg,
        control_posteriors: posterior.steps,
        slot_energies: result.iterations.iter().map(|it| it.slot_energies.clone()).collect(),
        iteration_energies: result.iterations.iter().map(|it| it.free_energy).collect(),
        metadata: Metadata {
            states: STATES,
            outcomes: OUTCOMES,
            controls: CONTROLS,
            horizon: HORIZON,
            initialisation: "uniform messages",
            tie_rule: "lowest index",
            iteration_posteriors: result.iterations.iter().map(|it| it.control_posteriors.steps.clone()).collect(),
            newton_residuals: result.iterations.iter().map(|it| it.residuals.clone()).collect(),
        },
        episode,
    })
}
