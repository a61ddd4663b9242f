//! Directed message passing over a [`CffgGraph`] following an explicit schedule.
//!
//! Messages are keyed by `(edge, sending node)` and overwritten on
//! recomputation. Inside an `iterate` block, inputs that have not been
//! computed yet default to uniform categoricals; outside one they are an error.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::gfe::{msg_to_z, solve_z_fixed_point, FixedPoint, GfeError, GfeNodeState, LogDensity, NewtonConfig};
use crate::graph::{CffgGraph, EdgeForm, EdgeId, MatrixParam, NodeId, NodeKind, NodeParams, VectorParam};
use crate::math::{
    argmax, dirichlet_mean_log, entropy, normalize, slog, DirichletParams, MathError, OneHotVector, SimplexVector,
};
use crate::mixture::{MixtureError, TmState};

/// Message payloads.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Categorical(SimplexVector),
    Dirichlet(DirichletParams),
    PointMass(OneHotVector),
    LogDensity(LogDensity),
}

impl Payload {
    /// Probability vector for categorical-like payloads.
    pub fn probabilities(&self) -> Option<Vec<f64>> {
        match self {
            Payload::Categorical(v) => Some(v.as_slice().to_vec()),
            Payload::PointMass(o) => Some(o.to_simplex().into_vec()),
            _ => None,
        }
    }
}

/// A directed message on `edge`, sent by `from` towards the node across the edge (if any).
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub edge: EdgeId,
    pub from: NodeId,
    pub toward: Option<NodeId>,
    pub payload: Payload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalTarget {
    Edge(EdgeId),
    Node(NodeId),
}

/// Dense joint belief over a node's edges (role order, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct JointBelief {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MarginalPayload {
    Categorical(SimplexVector),
    PointMass(OneHotVector),
    Dirichlet(DirichletParams),
    Joint(JointBelief),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub target: MarginalTarget,
    pub payload: MarginalPayload,
}

impl Marginal {
    pub fn probabilities(&self) -> Option<Vec<f64>> {
        match &self.payload {
            MarginalPayload::Categorical(v) => Some(v.as_slice().to_vec()),
            MarginalPayload::PointMass(o) => Some(o.to_simplex().into_vec()),
            _ => None,
        }
    }
}

/// Replace a categorical marginal by a point mass at its mode (lowest index on ties).
pub fn apply_delta_constraint(m: &Marginal) -> Marginal {
    match &m.payload {
        MarginalPayload::Categorical(v) => Marginal {
            target: m.target,
            payload: MarginalPayload::PointMass(OneHotVector { index: v.argmax(), len: v.len() }),
        },
        _ => m.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Msg { node: NodeId, edge: EdgeId },
    Marginal(EdgeId),
    Iterate { count: usize, steps: Vec<Step> },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schedule {
    pub steps: Vec<Step>,
}

impl Schedule {
    pub fn new(steps: Vec<Step>) -> Self {
        Self { steps }
    }

    /// Every referenced node/edge exists and every message targets an incident edge.
    pub fn validate(&self, graph: &CffgGraph) -> Result<(), StepError> {
        fn walk(steps: &[Step], graph: &CffgGraph) -> Result<(), StepError> {
            for s in steps {
                match s {
                    Step::Msg { node, edge } => {
                        if node.0 >= graph.nodes().len() || edge.0 >= graph.edges().len() {
                            return Err(StepError::UnknownReference);
                        }
                        if !graph.node(*node).edges.contains(edge) {
                            return Err(StepError::NotIncident {
                                node: graph.node(*node).name.clone(),
                                edge: graph.edge(*edge).name.clone(),
                            });
                        }
                    }
                    Step::Marginal(edge) => {
                        if edge.0 >= graph.edges().len() {
                            return Err(StepError::UnknownReference);
                        }
                    }
                    Step::Iterate { steps, .. } => walk(steps, graph)?,
                }
            }
            Ok(())
        }
        walk(&self.steps, graph)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("node `{node}` has no incoming message on edge `{edge}`")]
    MissingInput { node: String, edge: String },
    #[error("node `{node}`: product of incoming messages towards `{edge}` has zero mass")]
    AllZeroProduct { node: String, edge: String },
    #[error("node `{node}` of kind {kind} has no message rule")]
    UnsupportedNode { node: String, kind: NodeKind },
    #[error("node `{node}` cannot send towards `{edge}`: {reason}")]
    UnsupportedMessage { node: String, edge: String, reason: String },
    #[error("edge `{edge}` is not incident to node `{node}`")]
    NotIncident { node: String, edge: String },
    #[error("schedule refers to an unknown node or edge")]
    UnknownReference,
    #[error("message on `{edge}` is not categorical")]
    WrongPayload { edge: String },
    #[error(transparent)]
    Gfe(#[from] GfeError),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
    #[error(transparent)]
    Math(#[from] MathError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("step {index} ({step}): {source}")]
    Step { index: usize, step: String, source: StepError },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(StepError),
    #[error("no marginal available for `{0}`")]
    MissingMarginal(String),
    #[error("node `{node}` of kind {kind} has no energy term")]
    UnsupportedEnergy { node: String, kind: NodeKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EngineConfig {
    pub newton: NewtonConfig,
    pub seed: u64,
}

/// Diagnostics recorded whenever a P-substituted composite node emits towards `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct GfeReport {
    pub fixed_point: FixedPoint,
    pub energy_ux: f64,
    pub goal_message: DirichletParams,
}

pub type MessageStore = BTreeMap<(EdgeId, NodeId), Message>;

/// Owned result of a schedule run.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub messages: MessageStore,
    pub marginals: BTreeMap<EdgeId, Marginal>,
    pub gfe_reports: BTreeMap<NodeId, GfeReport>,
}

/// Run a schedule from an empty message store.
pub fn run_schedule(graph: &CffgGraph, schedule: &Schedule, cfg: EngineConfig) -> Result<RunOutput, EngineError> {
    let mut engine = Engine::new(graph, cfg);
    engine.run(schedule)?;
    Ok(engine.into_output())
}

/// Message-passing state for one schedule run.
#[derive(Debug, Clone)]
pub struct Engine<'g> {
    graph: &'g CffgGraph,
    cfg: EngineConfig,
    messages: MessageStore,
    marginals: BTreeMap<EdgeId, Marginal>,
    gfe_reports: BTreeMap<NodeId, GfeReport>,
    executed: usize,
    iterating: usize,
}

impl<'g> Engine<'g> {
    pub fn new(graph: &'g CffgGraph, cfg: EngineConfig) -> Self {
        Self {
            graph,
            cfg,
            messages: BTreeMap::new(),
            marginals: BTreeMap::new(),
            gfe_reports: BTreeMap::new(),
            executed: 0,
            iterating: 0,
        }
    }

    pub fn graph(&self) -> &'g CffgGraph {
        self.graph
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn messages(&self) -> &MessageStore {
        &self.messages
    }

    pub fn marginals(&self) -> &BTreeMap<EdgeId, Marginal> {
        &self.marginals
    }

    pub fn marginal(&self, edge: EdgeId) -> Option<&Marginal> {
        self.marginals.get(&edge)
    }

    pub fn gfe_reports(&self) -> &BTreeMap<NodeId, GfeReport> {
        &self.gfe_reports
    }

    pub fn message(&self, edge: EdgeId, from: NodeId) -> Option<&Message> {
        self.messages.get(&(edge, from))
    }

    pub fn into_output(self) -> RunOutput {
        RunOutput { messages: self.messages, marginals: self.marginals, gfe_reports: self.gfe_reports }
    }

    pub fn run(&mut self, schedule: &Schedule) -> Result<(), EngineError> {
        schedule.validate(self.graph).map_err(EngineError::InvalidSchedule)?;
        self.run_steps(&schedule.steps)
    }

    /// Execute steps as one pass of an iterate block (missing inputs default to uniform).
    pub fn run_iteration(&mut self, steps: &[Step]) -> Result<(), EngineError> {
        self.iterating += 1;
        let out = self.run_steps(steps);
        self.iterating -= 1;
        out
    }

    fn run_steps(&mut self, steps: &[Step]) -> Result<(), EngineError> {
        for step in steps {
            match step {
                Step::Iterate { count, steps } => {
                    for _ in 0..*count {
                        self.run_iteration(steps)?;
                    }
                }
                _ => {
                    let index = self.executed;
                    self.executed += 1;
                    self.execute(step).map_err(|source| EngineError::Step {
                        index,
                        step: self.describe(step),
                        source,
                    })?;
                }
            }
        }
        Ok(())
    }

    fn describe(&self, step: &Step) -> String {
        match step {
            Step::Msg { node, edge } => format!("msg {} -> {}", self.graph.node(*node).name, self.graph.edge(*edge).name),
            Step::Marginal(e) => format!("marginal {}", self.graph.edge(*e).name),
            Step::Iterate { count, .. } => format!("iterate {count}"),
        }
    }

    fn execute(&mut self, step: &Step) -> Result<(), StepError> {
        match step {
            Step::Msg { node, edge } => {
                let payload = self.compute_message(*node, *edge)?;
                let toward = self.graph.edge(*edge).other(*node);
                self.messages.insert((*edge, *node), Message { edge: *edge, from: *node, toward, payload });
            }
            Step::Marginal(edge) => {
                let m = self.compute_marginal(*edge)?;
                self.marginals.insert(*edge, m);
            }
            Step::Iterate { .. } => unreachable!("handled by run_steps"),
        }
        Ok(())
    }

    fn names(&self, node: NodeId, edge: EdgeId) -> (String, String) {
        (self.graph.node(node).name.clone(), self.graph.edge(edge).name.clone())
    }

    /// The message arriving at `node` over `edge`.
    pub fn incoming(&self, node: NodeId, edge: EdgeId) -> Result<Vec<f64>, StepError> {
        let e = self.graph.edge(edge);
        if let EdgeForm::Data(v) = self.graph.edge_form(edge) {
            return Ok(v.to_simplex().into_vec());
        }
        let Some(other) = e.other(node) else {
            return Ok(vec![1.0 / e.states as f64; e.states]);
        };
        match self.messages.get(&(edge, other)) {
            Some(m) => m.payload.probabilities().ok_or(StepError::WrongPayload { edge: e.name.clone() }),
            None if self.iterating > 0 => Ok(vec![1.0 / e.states as f64; e.states]),
            None => {
                let (node, edge) = self.names(node, edge);
                Err(StepError::MissingInput { node, edge })
            }
        }
    }

    fn emit(&self, node: NodeId, edge: EdgeId, values: &[f64]) -> Result<Payload, StepError> {
        match SimplexVector::from_unnormalized(values) {
            Ok(v) => Ok(Payload::Categorical(v)),
            Err(MathError::ZeroMass) => {
                let (node, edge) = self.names(node, edge);
                Err(StepError::AllZeroProduct { node, edge })
            }
            Err(e) => Err(e.into()),
        }
    }

    fn compute_message(&mut self, node_id: NodeId, edge: EdgeId) -> Result<Payload, StepError> {
        let graph = self.graph;
        let node = graph.node(node_id);
        let role = node.edges.iter().position(|&e| e == edge).ok_or_else(|| {
            let (node, edge) = self.names(node_id, edge);
            StepError::NotIncident { node, edge }
        })?;
        match (node.kind, &node.params) {
            (NodeKind::CatPrior | NodeKind::GoalCat, NodeParams::Vector(p)) => self.emit(node_id, edge, &vector_weights(p)),
            (NodeKind::Terminator, _) => {
                let n = graph.edge(edge).states;
                self.emit(node_id, edge, &vec![1.0; n])
            }
            (NodeKind::Equality, _) => {
                let mut acc = vec![1.0; graph.edge(edge).states];
                for &other in node.edges.iter().filter(|&&e| e != edge) {
                    for (a, b) in acc.iter_mut().zip(self.incoming(node_id, other)?) {
                        *a *= b;
                    }
                }
                self.emit(node_id, edge, &acc)
            }
            (NodeKind::Transition, NodeParams::Matrix(a)) => {
                let out = transition_message(a, role, &self.incoming(node_id, node.edges[1 - role])?);
                self.emit(node_id, edge, &out)
            }
            (NodeKind::GfeComposite, NodeParams::Matrix(a)) => {
                let (z_edge, x_edge) = (node.edges[0], node.edges[1]);
                if !graph.is_psub(node_id, x_edge) {
                    let out = transition_message(a, role, &self.incoming(node_id, node.edges[1 - role])?);
                    return self.emit(node_id, edge, &out);
                }
                if edge == x_edge {
                    let (node, edge) = self.names(node_id, edge);
                    return Err(StepError::UnsupportedMessage {
                        node,
                        edge,
                        reason: "the edge is P-substituted".into(),
                    });
                }
                let goal = self.goal_prior(node_id, x_edge);
                let incoming = normalize(&self.incoming(node_id, z_edge)?)?;
                let log_d: Vec<f64> = incoming.iter().map(|&p| slog(p)).collect();
                let init = crate::math::softmax(&log_d);
                let mut state = GfeNodeState::new(a.clone(), goal, init)?;
                let fp = solve_z_fixed_point(&state, &log_d, &self.cfg.newton)?;
                if !fp.converged {
                    log::warn!(
                        "node {}: fixed point residual {:.3e} after {} steps",
                        node.name,
                        fp.residual,
                        fp.steps
                    );
                }
                let msg = msg_to_z(&fp, &log_d);
                state.set_z_bar(fp.z_bar.clone());
                let report = GfeReport { energy_ux: state.energy_ux(), goal_message: state.msg_to_c(), fixed_point: fp };
                self.gfe_reports.insert(node_id, report);
                Ok(Payload::Categorical(msg))
            }
            (NodeKind::TransitionMixture, NodeParams::Mixture(slices)) => {
                let inputs = |k: usize| -> Result<Option<Vec<f64>>, StepError> {
                    if k == role {
                        Ok(None)
                    } else {
                        self.incoming(node_id, node.edges[k]).map(Some)
                    }
                };
                let (pz, px, py) = (inputs(0)?, inputs(1)?, inputs(2)?);
                let tm = TmState::new(slices)?.with_messages(pz.as_deref(), px.as_deref(), py.as_deref())?;
                let out = match role {
                    0 => tm.msg_z(),
                    1 => tm.msg_x(),
                    _ => tm.msg_y(),
                };
                match out {
                    Ok(v) => Ok(Payload::Categorical(v)),
                    Err(MixtureError::Math(MathError::ZeroMass)) => {
                        let (node, edge) = self.names(node_id, edge);
                        Err(StepError::AllZeroProduct { node, edge })
                    }
                    Err(e) => Err(e.into()),
                }
            }
            (kind, _) => Err(StepError::UnsupportedNode { node: node.name.clone(), kind }),
        }
    }

    /// Goal prior found on the far side of a P-substituted edge; flat when absent.
    fn goal_prior(&self, node: NodeId, x_edge: EdgeId) -> VectorParam {
        let e = self.graph.edge(x_edge);
        e.other(node)
            .map(|n| self.graph.node(n))
            .filter(|n| n.kind == NodeKind::GoalCat)
            .and_then(|n| match &n.params {
                NodeParams::Vector(p) => Some(p.clone()),
                _ => None,
            })
            .unwrap_or_else(|| VectorParam::PointMass(vec![1.0; e.states]))
    }

    /// Normalised product of the two directed messages on `edge`.
    pub fn compute_marginal(&self, edge: EdgeId) -> Result<Marginal, StepError> {
        let target = MarginalTarget::Edge(edge);
        if let EdgeForm::Data(v) = self.graph.edge_form(edge) {
            return Ok(Marginal { target, payload: MarginalPayload::PointMass(*v) });
        }
        let e = self.graph.edge(edge);
        let mut acc = vec![1.0; e.states];
        for &n in &e.nodes {
            let msg = match self.messages.get(&(edge, n)) {
                Some(m) => m.payload.probabilities().ok_or(StepError::WrongPayload { edge: e.name.clone() })?,
                None if self.iterating > 0 => vec![1.0; e.states],
                None => {
                    let (node, edge) = self.names(n, edge);
                    return Err(StepError::MissingInput { node, edge });
                }
            };
            for (a, b) in acc.iter_mut().zip(msg) {
                *a *= b;
            }
        }
        let v = SimplexVector::from_unnormalized(&acc).map_err(|_| StepError::AllZeroProduct {
            node: e.nodes.first().map(|&n| self.graph.node(n).name.clone()).unwrap_or_default(),
            edge: e.name.clone(),
        })?;
        let m = Marginal { target, payload: MarginalPayload::Categorical(v) };
        Ok(match self.graph.edge_form(edge) {
            EdgeForm::Delta => apply_delta_constraint(&m),
            _ => m,
        })
    }

    /// Edge and node beliefs implied by the current messages.
    pub fn beliefs(&self) -> Result<Beliefs, StepError> {
        let mut beliefs = Beliefs::default();
        for e in self.graph.edges().iter().filter(|e| !folded_edge(self.graph, e.id)) {
            let m = self.compute_marginal(e.id)?;
            beliefs.edges.insert(e.id, m.probabilities().expect("categorical marginal"));
        }
        for node in self.graph.nodes() {
            if node.kind == NodeKind::Factor
                || is_folded_composite(self.graph, node.id)
                || folded_goal(self.graph, node.id).is_some()
            {
                continue;
            }
            let incoming = node
                .edges
                .iter()
                .map(|&e| self.incoming(node.id, e))
                .collect::<Result<Vec<_>, _>>()?;
            let dims: Vec<usize> = node.edges.iter().map(|&e| self.graph.edge(e).states).collect();
            let mut data = Vec::with_capacity(dims.iter().product());
            for_each_assignment(&dims, |s| {
                let f = factor_value(self.graph, node.id, s);
                data.push(f * s.iter().zip(&incoming).map(|(&k, m)| m[k]).product::<f64>());
            });
            let data = normalize(&data).map_err(|_| StepError::AllZeroProduct {
                node: node.name.clone(),
                edge: String::from("*"),
            })?;
            beliefs.nodes.insert(node.id, JointBelief { dims, data });
        }
        Ok(beliefs)
    }
}

fn vector_weights(p: &VectorParam) -> Vec<f64> {
    match p {
        VectorParam::PointMass(w) => w.clone(),
        VectorParam::Dirichlet(d) => dirichlet_mean_log(d).into_iter().map(f64::exp).collect(),
    }
}

/// Forward (`role` = 1, towards x) or backward (`role` = 0, towards z) transition message.
fn transition_message(a: &MatrixParam, role: usize, input: &[f64]) -> Vec<f64> {
    let m = a.geometric_mean();
    if role == 1 {
        m.iter().map(|row| row.iter().zip(input).map(|(a, p)| a * p).sum()).collect()
    } else {
        let cols = m[0].len();
        (0..cols).map(|i| m.iter().zip(input).map(|(row, p)| row[i] * p).sum()).collect()
    }
}

/// Composite nodes with a P-substituted `x` absorb the goal prior and the `x` edge.
fn is_folded_composite(graph: &CffgGraph, node: NodeId) -> bool {
    let n = graph.node(node);
    n.kind == NodeKind::GfeComposite && graph.is_psub(node, n.edges[1])
}

fn folded_goal(graph: &CffgGraph, node: NodeId) -> Option<NodeId> {
    let n = graph.node(node);
    if n.kind != NodeKind::GoalCat {
        return None;
    }
    let x = n.edges[0];
    graph.edge(x).other(node).filter(|&m| is_folded_composite(graph, m) && graph.node(m).edges[1] == x)
}

fn folded_edge(graph: &CffgGraph, edge: EdgeId) -> bool {
    graph.edge(edge).nodes.iter().any(|&n| is_folded_composite(graph, n) && graph.node(n).edges[1] == edge)
}

/// Row-major enumeration of all joint states.
pub(crate) fn for_each_assignment(dims: &[usize], mut f: impl FnMut(&[usize])) {
    if dims.iter().any(|&d| d == 0) {
        return;
    }
    let mut s = vec![0; dims.len()];
    loop {
        f(&s);
        let mut k = dims.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            s[k] += 1;
            if s[k] < dims[k] {
                break;
            }
            s[k] = 0;
        }
    }
}

/// Node function value at a joint assignment of its edges (role order).
fn factor_value(graph: &CffgGraph, node: NodeId, s: &[usize]) -> f64 {
    let n = graph.node(node);
    match (&n.kind, &n.params) {
        (NodeKind::CatPrior | NodeKind::GoalCat, NodeParams::Vector(p)) => {
            let w = vector_weights(p);
            w[s[0]] / w.iter().sum::<f64>()
        }
        (NodeKind::Transition | NodeKind::GfeComposite, NodeParams::Matrix(a)) => a.geometric_mean()[s[1]][s[0]],
        (NodeKind::TransitionMixture, NodeParams::Mixture(slices)) => slices[s[2]].geometric_mean()[s[1]][s[0]],
        (NodeKind::Equality, _) => f64::from(u8::from(s.iter().all(|&k| k == s[0]))),
        (NodeKind::Terminator, _) => 1.0,
        _ => f64::NAN,
    }
}

/// Edge marginals and dense node beliefs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Beliefs {
    pub edges: BTreeMap<EdgeId, Vec<f64>>,
    pub nodes: BTreeMap<NodeId, JointBelief>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfeReport {
    pub total: f64,
    pub node_terms: BTreeMap<NodeId, f64>,
    pub edge_terms: BTreeMap<EdgeId, f64>,
}

/// Bethe free energy `Σ_a Σ q_a log(q_a / f_a) + Σ_i (d_i − 1) H[q_i]`.
///
/// A composite node with a P-substituted `x` contributes `U_x − H[q(z)]` and
/// absorbs its goal prior and `x` edge.
pub fn compute_bfe(graph: &CffgGraph, beliefs: &Beliefs) -> Result<BfeReport, EngineError> {
    let mut node_terms = BTreeMap::new();
    let mut edge_terms = BTreeMap::new();
    let edge_belief = |e: EdgeId| {
        beliefs.edges.get(&e).ok_or_else(|| EngineError::MissingMarginal(graph.edge(e).name.clone()))
    };
    for node in graph.nodes() {
        if folded_goal(graph, node.id).is_some() {
            continue;
        }
        let term = if is_folded_composite(graph, node.id) {
            let NodeParams::Matrix(a) = &node.params else { unreachable!("validated composite") };
            let goal = node_goal(graph, node.id);
            let qz = edge_belief(node.edges[0])?;
            let state = GfeNodeState::new(a.clone(), goal, SimplexVector::from_unnormalized(qz).expect("marginal"))
                .map_err(|_| EngineError::MissingMarginal(node.name.clone()))?;
            state.energy_ux() - entropy(qz)
        } else {
            if node.kind == NodeKind::Factor {
                return Err(EngineError::UnsupportedEnergy { node: node.name.clone(), kind: node.kind });
            }
            let joint = beliefs.nodes.get(&node.id).ok_or_else(|| EngineError::MissingMarginal(node.name.clone()))?;
            let mut total = 0.0;
            let mut k = 0;
            for_each_assignment(&joint.dims, |s| {
                let q = joint.data[k];
                k += 1;
                if q > 0.0 {
                    total += q * (q.ln() - slog(factor_value(graph, node.id, s)));
                }
            });
            total
        };
        node_terms.insert(node.id, term);
    }
    for e in graph.edges() {
        if folded_edge(graph, e.id) {
            continue;
        }
        let h = match graph.edge_form(e.id) {
            EdgeForm::Data(_) => 0.0,
            _ => entropy(edge_belief(e.id)?),
        };
        edge_terms.insert(e.id, (e.degree() as f64 - 1.0) * h);
    }
    let total = node_terms.values().sum::<f64>() + edge_terms.values().sum::<f64>();
    Ok(BfeReport { total, node_terms, edge_terms })
}

fn node_goal(graph: &CffgGraph, node: NodeId) -> VectorParam {
    let x = graph.node(node).edges[1];
    graph
        .edge(x)
        .other(node)
        .map(|n| graph.node(n))
        .and_then(|n| match (&n.kind, &n.params) {
            (NodeKind::GoalCat, NodeParams::Vector(p)) => Some(p.clone()),
            _ => None,
        })
        .unwrap_or_else(|| VectorParam::PointMass(vec![1.0; graph.edge(x).states]))
}

/// Mode of a categorical vector as a point mass.
pub fn map_estimate(p: &[f64]) -> OneHotVector {
    OneHotVector { index: argmax(p), len: p.len() }
}
