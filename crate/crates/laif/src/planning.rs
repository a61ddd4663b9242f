//! Planning procedures on discrete POMDPs: classical EFE enumeration, the
//! original GFE forward/backward schedule, and direct LAIF policy inference.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{compute_bfe, Engine, EngineConfig, EngineError, Schedule, Step, StepError};
use crate::gfe::{GfeNodeState, NewtonConfig};
use crate::graph::{
    build_graph, CffgGraph, ConstraintSpec, EdgeSpec, FormSpec, GraphError, MatrixParam, NodeKind, NodeParams,
    NodeSpec, VectorParam,
};
use crate::math::{normalize, slog, SimplexVector, StochasticMatrix};

/// Largest policy table `enumerate_policies` will build.
pub const POLICY_LIMIT: usize = 1_000_000;

/// Totals closer than this are treated as tied during selection.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanningError {
    #[error("{count} policies exceed the limit of {POLICY_LIMIT}")]
    Overflow { count: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no policies to select from")]
    Empty,
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A fixed control sequence, stored 0-based and displayed 1-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Policy {
    pub controls: Vec<usize>,
}

impl Policy {
    pub fn new(controls: Vec<usize>) -> Self {
        Self { controls }
    }

    /// 1-based control labels.
    pub fn labels(&self) -> Vec<usize> {
        self.controls.iter().map(|c| c + 1).collect()
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.labels().iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// All `n_controls^horizon` sequences in lexicographic order.
pub fn enumerate_policies(horizon: usize, n_controls: usize) -> Result<Vec<Policy>, PlanningError> {
    if horizon == 0 || n_controls == 0 {
        return Err(PlanningError::InvalidPolicy("horizon and control count must be positive".into()));
    }
    let count = (0..horizon).try_fold(1usize, |acc, _| acc.checked_mul(n_controls).filter(|&c| c <= POLICY_LIMIT));
    let Some(count) = count else {
        return Err(PlanningError::Overflow { count: format!("{n_controls}^{horizon}") });
    };
    Ok((0..count)
        .map(|mut flat| {
            let mut controls = vec![0; horizon];
            for slot in (0..horizon).rev() {
                controls[slot] = flat % n_controls;
                flat /= n_controls;
            }
            Policy { controls }
        })
        .collect())
}

/// Discrete POMDP: initial state `d`, observation matrix `A`, one transition
/// matrix per control, control prior `e` and one goal prior per future slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PomdpModel {
    pub d: Vec<f64>,
    pub a: StochasticMatrix,
    pub b: Vec<StochasticMatrix>,
    pub e: Vec<f64>,
    pub goals: Vec<Vec<f64>>,
}

impl PomdpModel {
    pub fn horizon(&self) -> usize {
        self.goals.len()
    }

    pub fn n_states(&self) -> usize {
        self.d.len()
    }

    pub fn n_controls(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<(), PlanningError> {
        let n = self.n_states();
        let shape = |m: String| Err(PlanningError::Shape(m));
        if self.a.cols() != n {
            return shape(format!("A has {} columns for {n} states", self.a.cols()));
        }
        if self.b.is_empty() || self.b.iter().any(|b| b.rows() != n || b.cols() != n) {
            return shape(format!("every B must be {n}x{n}"));
        }
        if self.e.len() != self.b.len() {
            return shape(format!("{} control prior entries for {} controls", self.e.len(), self.b.len()));
        }
        if self.goals.is_empty() || self.goals.iter().any(|c| c.len() != self.a.rows()) {
            return shape(format!("goal priors must have {} entries", self.a.rows()));
        }
        Ok(())
    }

    fn check_policy(&self, policy: &Policy) -> Result<(), PlanningError> {
        if policy.controls.len() != self.horizon() {
            return Err(PlanningError::InvalidPolicy(format!(
                "policy {policy} has {} steps for horizon {}",
                policy.controls.len(),
                self.horizon()
            )));
        }
        if let Some(&c) = policy.controls.iter().find(|&&c| c >= self.n_controls()) {
            return Err(PlanningError::InvalidPolicy(format!("control {} out of range", c + 1)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyEvaluation {
    pub policy: Policy,
    pub slot_energies: Vec<f64>,
    pub total: f64,
}

/// Expected free energy of one slot: `−diag(Aᵀ log A)ᵀ z + xᵀ(log x − log c)` with `x = A z`.
pub fn efe_slot(a: &StochasticMatrix, c: &[f64], z: &[f64]) -> f64 {
    let c = normalize(c).unwrap_or_else(|_| vec![1.0 / c.len() as f64; c.len()]);
    let x = a.mul_vec(z);
    let mut ambiguity = 0.0;
    for (i, &zi) in z.iter().enumerate() {
        let h: f64 = a.column(i).iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
        ambiguity += h * zi;
    }
    let risk: f64 = x.iter().zip(&c).filter(|(&xi, _)| xi > 0.0).map(|(&xi, &ci)| xi * (xi.ln() - slog(ci))).sum();
    ambiguity + risk
}

/// Forward rollout `z_k = B_{u_k} z_{k−1}` and slot-wise expected free energy.
pub fn classical_efe(model: &PomdpModel, policy: &Policy) -> Result<PolicyEvaluation, PlanningError> {
    model.validate()?;
    model.check_policy(policy)?;
    let mut z = model.d.clone();
    let mut slot_energies = Vec::with_capacity(policy.controls.len());
    for (k, &u) in policy.controls.iter().enumerate() {
        z = model.b[u].mul_vec(&z);
        slot_energies.push(efe_slot(&model.a, &model.goals[k], &z));
    }
    let total = slot_energies.iter().sum();
    Ok(PolicyEvaluation { policy: policy.clone(), slot_energies, total })
}

/// Evaluate every policy (in parallel), in lexicographic order.
pub fn classical_table(model: &PomdpModel) -> Result<Vec<PolicyEvaluation>, PlanningError> {
    let policies = enumerate_policies(model.horizon(), model.n_controls())?;
    policies.par_iter().map(|p| classical_efe(model, p)).collect()
}

/// Lowest total wins; totals within [`TIE_TOLERANCE`] go to the lexicographically smaller policy.
pub fn classical_select(evaluations: &[PolicyEvaluation]) -> Result<Policy, PlanningError> {
    let mut best: Option<&PolicyEvaluation> = None;
    for ev in evaluations {
        best = match best {
            None => Some(ev),
            Some(b) if ev.total < b.total - TIE_TOLERANCE => Some(ev),
            Some(b) if (ev.total - b.total).abs() <= TIE_TOLERANCE && ev.policy < b.policy => Some(ev),
            keep => keep,
        };
    }
    best.map(|b| b.policy.clone()).ok_or(PlanningError::Empty)
}

/// Edge and node names of slot `k` (1-based) in the chain graphs.
fn z_in(k: usize) -> String {
    if k == 0 {
        "z0".into()
    } else {
        format!("z{k}b")
    }
}

struct ChainSpec {
    nodes: Vec<NodeSpec>,
    edges: Vec<EdgeSpec>,
    constraints: Vec<ConstraintSpec>,
}

/// The state chain shared by both graph builders: prior on `z0`, a transition
/// factor per slot, an equality node splitting `z_k` towards the next slot
/// (`z_kb`) and the observation slot (`z_kc`).
fn chain(model: &PomdpModel, transition: impl Fn(usize, &mut ChainSpec)) -> ChainSpec {
    let n = model.n_states();
    let mut s = ChainSpec { nodes: Vec::new(), edges: vec![EdgeSpec { name: "z0".into(), states: n }], constraints: Vec::new() };
    s.nodes.push(NodeSpec {
        name: "prior".into(),
        kind: NodeKind::CatPrior,
        edges: vec!["z0".into()],
        params: NodeParams::Vector(VectorParam::PointMass(model.d.clone())),
    });
    for k in 1..=model.horizon() {
        for suffix in ["a", "b", "c"] {
            s.edges.push(EdgeSpec { name: format!("z{k}{suffix}"), states: n });
        }
        transition(k, &mut s);
        s.nodes.push(NodeSpec {
            name: format!("eq{k}"),
            kind: NodeKind::Equality,
            edges: vec![format!("z{k}a"), format!("z{k}b"), format!("z{k}c")],
            params: NodeParams::None,
        });
    }
    s
}

fn observation_slot(s: &mut ChainSpec, model: &PomdpModel, k: usize, observed: Option<usize>) {
    let (x, z, obs) = (format!("x{k}"), format!("z{k}c"), format!("obs{k}"));
    s.edges.push(EdgeSpec { name: x.clone(), states: model.a.rows() });
    s.nodes.push(NodeSpec {
        name: obs.clone(),
        kind: NodeKind::GfeComposite,
        edges: vec![z.clone(), x.clone()],
        params: NodeParams::Matrix(MatrixParam::PointMass(model.a.clone())),
    });
    s.constraints.push(ConstraintSpec::Factorisation { node: obs.clone(), blocks: vec![vec![z], vec![x.clone()]] });
    match observed {
        Some(v) => s.constraints.push(ConstraintSpec::EdgeForm { edge: x, form: FormSpec::Data(v) }),
        None => {
            s.nodes.push(NodeSpec {
                name: format!("goal{k}"),
                kind: NodeKind::GoalCat,
                edges: vec![x.clone()],
                params: NodeParams::Vector(VectorParam::PointMass(model.goals[k - 1].clone())),
            });
            s.constraints.push(ConstraintSpec::Psub { node: obs, edges: vec![x] });
        }
    }
}

fn ids(graph: &CffgGraph, node: &str, edge: &str) -> Step {
    Step::Msg {
        node: graph.node_id(node).unwrap_or_else(|| panic!("builder node {node}")),
        edge: graph.edge_id(edge).unwrap_or_else(|| panic!("builder edge {edge}")),
    }
}

/// One forward sweep (with upward slot messages) followed by one backward sweep.
fn sweep(graph: &CffgGraph, horizon: usize, transition: &dyn Fn(usize) -> String) -> Vec<Step> {
    let mut steps = vec![ids(graph, "prior", "z0")];
    for k in 1..=horizon {
        if graph.node_id(&format!("uprior{k}")).is_some() {
            steps.push(ids(graph, &format!("uprior{k}"), &format!("u{k}")));
        }
        steps.push(ids(graph, &transition(k), &format!("z{k}a")));
        steps.push(ids(graph, &format!("eq{k}"), &format!("z{k}c")));
        steps.push(ids(graph, &format!("obs{k}"), &format!("z{k}c")));
        steps.push(ids(graph, &format!("eq{k}"), &format!("z{k}b")));
    }
    for k in (1..=horizon).rev() {
        steps.push(ids(graph, &format!("eq{k}"), &format!("z{k}a")));
        steps.push(ids(graph, &transition(k), &z_in(k - 1)));
    }
    steps
}

/// Chain graph with a fixed policy: data constraints on the first
/// `observations.len()` slots and P-substituted, goal-directed slots after.
pub fn build_gfe_graph(model: &PomdpModel, policy: &Policy, observations: &[usize]) -> Result<(CffgGraph, Vec<Step>), PlanningError> {
    model.validate()?;
    model.check_policy(policy)?;
    if observations.len() > model.horizon() {
        return Err(PlanningError::InvalidPolicy("more observations than slots".into()));
    }
    let mut s = chain(model, |k, s| {
        s.nodes.push(NodeSpec {
            name: format!("t{k}"),
            kind: NodeKind::Transition,
            edges: vec![z_in(k - 1), format!("z{k}a")],
            params: NodeParams::Matrix(MatrixParam::PointMass(model.b[policy.controls[k - 1]].clone())),
        });
    });
    for k in 1..=model.horizon() {
        observation_slot(&mut s, model, k, observations.get(k - 1).copied());
    }
    let graph = build_graph(s.nodes, s.edges, s.constraints)?;
    let mut body = sweep(&graph, model.horizon(), &|k| format!("t{k}"));
    for k in 1..=model.horizon() {
        body.push(Step::Marginal(graph.edge_id(&format!("z{k}c")).expect("slot edge")));
    }
    Ok((graph, body))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GfeRun {
    /// `q(z_k)` per slot.
    pub marginals: Vec<Vec<f64>>,
    /// Predictive message into each slot from the state chain.
    pub slot_priors: Vec<Vec<f64>>,
    /// VFE for observed slots, `U_x` for planned slots.
    pub slot_energies: Vec<f64>,
    pub total: f64,
}

/// The original GFE procedure for a fixed policy: naive mean field at every
/// node, forward and backward sweeps, then `Σ_k` slot free energies.
pub fn original_gfe_run(
    model: &PomdpModel,
    observations: &[usize],
    policy: &Policy,
    iterations: usize,
    newton: NewtonConfig,
) -> Result<GfeRun, PlanningError> {
    let (graph, body) = build_gfe_graph(model, policy, observations)?;
    let mut engine = Engine::new(&graph, EngineConfig { newton, seed: 0 });
    for _ in 0..iterations {
        engine.run_iteration(&body)?;
    }
    if iterations == 0 {
        let marginal_steps: Vec<Step> = body.iter().filter(|s| matches!(s, Step::Marginal(_))).cloned().collect();
        engine.run_iteration(&marginal_steps)?;
    }
    let mut marginals = Vec::new();
    let mut slot_priors = Vec::new();
    let mut slot_energies = Vec::new();
    for k in 1..=model.horizon() {
        let z_edge = format!("z{k}c");
        let q = engine
            .marginal(graph.edge_id(&z_edge).expect("slot edge"))
            .and_then(|m| m.probabilities())
            .expect("slot marginal");
        let eq = graph.node_id(&format!("eq{k}")).expect("equality node");
        let z = graph.edge_id(&z_edge).expect("slot edge");
        let prior = engine
            .message(z, eq)
            .and_then(|m| m.payload.probabilities())
            .unwrap_or_else(|| vec![1.0 / q.len() as f64; q.len()]);
        let energy = match observations.get(k - 1) {
            Some(&x_hat) => observed_slot_vfe(&model.a, x_hat, &prior, &q),
            None => {
                let state = GfeNodeState::new(
                    MatrixParam::PointMass(model.a.clone()),
                    VectorParam::PointMass(model.goals[k - 1].clone()),
                    SimplexVector::from_unnormalized(&q).map_err(|e| PlanningError::Shape(e.to_string()))?,
                )
                .map_err(|e| PlanningError::Shape(e.to_string()))?;
                state.energy_ux()
            }
        };
        marginals.push(q);
        slot_priors.push(normalize(&prior).expect("prior message has mass"));
        slot_energies.push(energy);
    }
    let total = slot_energies.iter().sum();
    Ok(GfeRun { marginals, slot_priors, slot_energies, total })
}

/// `Σ_z q(z) log[q(z) / (A[x̂, z] p(z))]` for an observed slot.
pub fn observed_slot_vfe(a: &StochasticMatrix, x_hat: usize, prior: &[f64], q: &[f64]) -> f64 {
    q.iter()
        .enumerate()
        .filter(|(_, &qz)| qz > 0.0)
        .map(|(z, &qz)| qz * (qz.ln() - slog(a.get(x_hat, z) * prior[z])))
        .sum()
}

/// Posterior over controls, one distribution per slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlPosterior {
    pub steps: Vec<Vec<f64>>,
}

impl ControlPosterior {
    /// Most probable control per slot (lowest index on ties).
    pub fn modes(&self) -> Policy {
        Policy::new(self.steps.iter().map(|p| crate::math::argmax(p)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaifConfig {
    pub newton: NewtonConfig,
    /// δ-constrain the control marginals.
    pub delta_controls: bool,
    pub seed: u64,
}

/// Per-iteration record of a LAIF run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaifIteration {
    pub control_posteriors: ControlPosterior,
    /// `U_x` of every P-substituted slot at its fixed point.
    pub slot_energies: Vec<f64>,
    /// Newton residual of every slot.
    pub residuals: Vec<f64>,
    /// Free energy of the whole graph after the sweep.
    pub free_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaifResult {
    pub iterations: Vec<LaifIteration>,
}

impl LaifResult {
    pub fn posterior(&self) -> &ControlPosterior {
        &self.iterations.last().expect("at least one iteration").control_posteriors
    }
}

/// Graph for direct policy inference: each slot has a transition-mixture node
/// selecting `B_u` through a control edge `u_k` with prior `e`, and a
/// P-substituted composite observation node with goal prior `c_k`.
pub fn build_laif_graph(model: &PomdpModel, delta_controls: bool) -> Result<(CffgGraph, Schedule), PlanningError> {
    model.validate()?;
    let slices: Vec<MatrixParam> = model.b.iter().cloned().map(MatrixParam::PointMass).collect();
    let mut s = chain(model, |k, s| {
        s.edges.push(EdgeSpec { name: format!("u{k}"), states: model.n_controls() });
        s.nodes.push(NodeSpec {
            name: format!("tm{k}"),
            kind: NodeKind::TransitionMixture,
            edges: vec![z_in(k - 1), format!("z{k}a"), format!("u{k}")],
            params: NodeParams::Mixture(slices.clone()),
        });
        s.nodes.push(NodeSpec {
            name: format!("uprior{k}"),
            kind: NodeKind::CatPrior,
            edges: vec![format!("u{k}")],
            params: NodeParams::Vector(VectorParam::PointMass(model.e.clone())),
        });
        if delta_controls {
            s.constraints.push(ConstraintSpec::EdgeForm { edge: format!("u{k}"), form: FormSpec::Delta });
        }
    });
    for k in 1..=model.horizon() {
        observation_slot(&mut s, model, k, None);
    }
    let graph = build_graph(s.nodes, s.edges, s.constraints)?;
    let mut body = sweep(&graph, model.horizon(), &|k| format!("tm{k}"));
    for k in 1..=model.horizon() {
        body.push(ids(&graph, &format!("tm{k}"), &format!("u{k}")));
    }
    for k in 1..=model.horizon() {
        body.push(Step::Marginal(graph.edge_id(&format!("u{k}")).expect("control edge")));
    }
    Ok((graph, Schedule::new(vec![Step::Iterate { count: 1, steps: body }])))
}

/// The repeated body of a LAIF schedule.
pub fn laif_body(schedule: &Schedule) -> &[Step] {
    match schedule.steps.as_slice() {
        [Step::Iterate { steps, .. }] => steps,
        other => other,
    }
}

/// Infer control posteriors by message passing, recording every iteration.
pub fn laif_infer_policy(model: &PomdpModel, iterations: usize, cfg: &LaifConfig) -> Result<LaifResult, PlanningError> {
    if iterations == 0 {
        return Err(PlanningError::InvalidPolicy("at least one iteration is required".into()));
    }
    cfg.newton.validate().map_err(|e| PlanningError::InvalidPolicy(e.to_string()))?;
    let (graph, schedule) = build_laif_graph(model, cfg.delta_controls)?;
    let body = laif_body(&schedule);
    let mut engine = Engine::new(&graph, EngineConfig { newton: cfg.newton, seed: cfg.seed });
    let mut out = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        engine.run_iteration(body)?;
        let mut steps = Vec::new();
        let mut slot_energies = Vec::new();
        let mut residuals = Vec::new();
        for k in 1..=model.horizon() {
            let u = graph.edge_id(&format!("u{k}")).expect("control edge");
            steps.push(engine.marginal(u).and_then(|m| m.probabilities()).expect("control marginal"));
            let report = &engine.gfe_reports()[&graph.node_id(&format!("obs{k}")).expect("slot node")];
            slot_energies.push(report.energy_ux);
            residuals.push(report.fixed_point.residual);
        }
        let beliefs = engine
            .beliefs()
            .map_err(|source| EngineError::Step { index: 0, step: "beliefs".into(), source })?;
        let free_energy = compute_bfe(&graph, &beliefs)?.total;
        out.push(LaifIteration { control_posteriors: ControlPosterior { steps }, slot_energies, residuals, free_energy });
    }
    Ok(LaifResult { iterations: out })
}

impl From<StepError> for PlanningError {
    fn from(source: StepError) -> Self {
        PlanningError::Engine(EngineError::Step { index: 0, step: String::new(), source })
    }
}
