//! Forney-style factor graphs with constraint annotations.
//!
//! Edges are explicit records holding at most two incident nodes, so a
//! degree-1 edge can dangle without a terminator. Constraints (factorisation
//! partitions, edge forms, P-substitution sets) live in a side table so the
//! same model can be paired with different variational families.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::math::{DirichletMatrix, DirichletParams, OneHotVector, StochasticMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    /// `Cat(out | d)`; edges `[out]`.
    CatPrior,
    /// `Cat(x | A z)`; edges `[z, x]`.
    Transition,
    /// Equality constraint over all incident edges.
    Equality,
    /// Goal prior `Cat(x | c)`; edges `[x]`.
    GoalCat,
    /// Observation model `Cat(x | A z)` whose x side may be P-substituted; edges `[z, x]`.
    GfeComposite,
    /// `∏_k Cat(x | A_k z)^{y_k}`; edges `[z, x, y]`.
    TransitionMixture,
    /// Node function 1 on a single edge.
    Terminator,
    /// Opaque factor used for notation only; the engine cannot pass messages through it.
    Factor,
}

impl NodeKind {
    pub const ALL: [NodeKind; 8] = [
        NodeKind::CatPrior,
        NodeKind::Transition,
        NodeKind::Equality,
        NodeKind::GoalCat,
        NodeKind::GfeComposite,
        NodeKind::TransitionMixture,
        NodeKind::Terminator,
        NodeKind::Factor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::CatPrior => "CatPrior",
            NodeKind::Transition => "Transition",
            NodeKind::Equality => "Equality",
            NodeKind::GoalCat => "GoalCat",
            NodeKind::GfeComposite => "GfeComposite",
            NodeKind::TransitionMixture => "TransitionMixture",
            NodeKind::Terminator => "Terminator",
            NodeKind::Factor => "Factor",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Vector-valued node parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorParam {
    /// Known (possibly unnormalised) nonnegative weights.
    PointMass(Vec<f64>),
    Dirichlet(DirichletParams),
}

impl VectorParam {
    pub fn len(&self) -> usize {
        match self {
            VectorParam::PointMass(v) => v.len(),
            VectorParam::Dirichlet(d) => d.as_slice().len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Matrix-valued node parameter, oriented `A[outcome, condition]`.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixParam {
    PointMass(StochasticMatrix),
    Dirichlet(DirichletMatrix),
}

impl MatrixParam {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            MatrixParam::PointMass(m) => (m.rows(), m.cols()),
            MatrixParam::Dirichlet(m) => (m.rows(), m.cols()),
        }
    }

    /// Entry-wise `exp(E[log A])`: `A` itself for point masses, sub-stochastic for Dirichlet beliefs.
    pub fn geometric_mean(&self) -> Vec<Vec<f64>> {
        match self {
            MatrixParam::PointMass(m) => m.to_rows(),
            MatrixParam::Dirichlet(m) => {
                let cols = m.cols();
                m.mean_log()
                    .chunks(cols)
                    .map(|r| r.iter().map(|v| v.exp()).collect())
                    .collect()
            }
        }
    }

    pub fn mean(&self) -> StochasticMatrix {
        match self {
            MatrixParam::PointMass(m) => m.clone(),
            MatrixParam::Dirichlet(m) => m.mean(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeParams {
    None,
    Vector(VectorParam),
    Matrix(MatrixParam),
    Mixture(Vec<MatrixParam>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorNode {
    pub id: NodeId,
    pub name: String,
    pub kind: NodeKind,
    /// Incident edges in role order.
    pub edges: Vec<EdgeId>,
    pub params: NodeParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub name: String,
    /// Number of categorical states carried by the edge.
    pub states: usize,
    /// Incident nodes (one or two).
    pub nodes: Vec<NodeId>,
}

impl Edge {
    pub fn degree(&self) -> usize {
        self.nodes.len()
    }

    /// The neighbour across the edge from `node`, if any.
    pub fn other(&self, node: NodeId) -> Option<NodeId> {
        self.nodes.iter().copied().find(|&n| n != node)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MomentSide {
    Both,
    /// Moment matching enforced on the side of the given node.
    Node(NodeId),
}

/// Form constraint on an edge marginal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EdgeForm {
    Free,
    Data(OneHotVector),
    Delta,
    MomentMatch(MomentSide),
    Family(String),
}

/// Factorisation of a node's joint belief into blocks of incident edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub blocks: Vec<Vec<EdgeId>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraints {
    pub edge_forms: BTreeMap<EdgeId, EdgeForm>,
    pub factorisations: BTreeMap<NodeId, Partition>,
    pub psub: BTreeMap<NodeId, BTreeSet<EdgeId>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("duplicate identifier `{0}`")]
    DuplicateId(String),
    #[error("edge `{edge}` has more than two incident nodes")]
    EdgeDegreeExceeded { edge: String },
    #[error("`{from}` refers to unknown `{name}`")]
    DanglingReference { from: String, name: String },
    #[error("edge `{0}` is not connected to any node")]
    UnusedEdge(String),
    #[error("node `{node}` lists edge `{edge}` more than once")]
    RepeatedIncidence { node: String, edge: String },
    #[error("node `{node}` of kind {kind} expects {expected} edges, got {got}")]
    Arity { node: String, kind: NodeKind, expected: String, got: usize },
    #[error("node `{node}`: {reason}")]
    Params { node: String, reason: String },
    #[error("edge `{0}` must carry at least one state")]
    EmptyEdge(String),
}

/// Edge declaration by name.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub name: String,
    pub states: usize,
}

/// Node declaration with edges referenced by name.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub name: String,
    pub kind: NodeKind,
    pub edges: Vec<String>,
    pub params: NodeParams,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormSpec {
    Free,
    /// 0-based index of the observed state.
    Data(usize),
    Delta,
    /// `None` for both sides, otherwise the name of the matching node.
    MomentMatch(Option<String>),
    Family(String),
}

/// Constraint declaration by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintSpec {
    EdgeForm { edge: String, form: FormSpec },
    Factorisation { node: String, blocks: Vec<Vec<String>> },
    Psub { node: String, edges: Vec<String> },
}

/// A structural problem with a constraint set; reported as data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    RepeatedEdgeInPartition { node: String, edge: String },
    MissingEdgeInPartition { node: String, edge: String },
    ForeignEdgeInPartition { node: String, edge: String },
    PsubNotIncident { node: String, edge: String },
    PsubNotSingleton { node: String, edge: String },
    DataOutOfRange { edge: String, index: usize, states: usize },
    DeltaTerminates { edge: String },
    MomentMatchForeignNode { edge: String, node: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RepeatedEdgeInPartition { node, edge } => {
                write!(f, "node `{node}`: edge `{edge}` appears twice in the factorisation")
            }
            Violation::MissingEdgeInPartition { node, edge } => {
                write!(f, "node `{node}`: edge `{edge}` is missing from the factorisation")
            }
            Violation::ForeignEdgeInPartition { node, edge } => {
                write!(f, "node `{node}`: factorisation mentions non-incident edge `{edge}`")
            }
            Violation::PsubNotIncident { node, edge } => {
                write!(f, "node `{node}`: P-substituted edge `{edge}` is not incident")
            }
            Violation::PsubNotSingleton { node, edge } => {
                write!(f, "node `{node}`: P-substituted edge `{edge}` must form a singleton block")
            }
            Violation::DataOutOfRange { edge, index, states } => {
                write!(f, "edge `{edge}`: data index {} exceeds {states} states", index + 1)
            }
            Violation::DeltaTerminates { edge } => {
                write!(f, "edge `{edge}`: a delta constraint cannot terminate an edge")
            }
            Violation::MomentMatchForeignNode { edge, node } => {
                write!(f, "edge `{edge}`: moment-match side `{node}` is not incident")
            }
        }
    }
}

/// Immutable factor graph plus its constraint side table.
#[derive(Debug, Clone, PartialEq)]
pub struct CffgGraph {
    nodes: Vec<FactorNode>,
    edges: Vec<Edge>,
    node_index: HashMap<String, NodeId>,
    edge_index: HashMap<String, EdgeId>,
    constraints: Constraints,
}

/// Build and structurally check a graph from named declarations.
pub fn build_graph(
    nodes: Vec<NodeSpec>,
    edges: Vec<EdgeSpec>,
    constraints: Vec<ConstraintSpec>,
) -> Result<CffgGraph, GraphError> {
    let mut edge_index = HashMap::new();
    let mut edge_recs = Vec::with_capacity(edges.len());
    for (i, spec) in edges.into_iter().enumerate() {
        if edge_index.insert(spec.name.clone(), EdgeId(i)).is_some() {
            return Err(GraphError::DuplicateId(spec.name));
        }
        if spec.states == 0 {
            return Err(GraphError::EmptyEdge(spec.name));
        }
        edge_recs.push(Edge { id: EdgeId(i), name: spec.name, states: spec.states, nodes: Vec::new() });
    }

    let mut node_index = HashMap::new();
    let mut node_recs = Vec::with_capacity(nodes.len());
    for (i, spec) in nodes.into_iter().enumerate() {
        let id = NodeId(i);
        if node_index.contains_key(&spec.name) || edge_index.contains_key(&spec.name) {
            return Err(GraphError::DuplicateId(spec.name));
        }
        node_index.insert(spec.name.clone(), id);
        let mut incident = Vec::with_capacity(spec.edges.len());
        for edge_name in &spec.edges {
            let eid = *edge_index.get(edge_name).ok_or_else(|| GraphError::DanglingReference {
                from: spec.name.clone(),
                name: edge_name.clone(),
            })?;
            if incident.contains(&eid) {
                return Err(GraphError::RepeatedIncidence { node: spec.name.clone(), edge: edge_name.clone() });
            }
            let rec = &mut edge_recs[eid.0];
            if rec.nodes.len() == 2 {
                return Err(GraphError::EdgeDegreeExceeded { edge: edge_name.clone() });
            }
            rec.nodes.push(id);
            incident.push(eid);
        }
        node_recs.push(FactorNode { id, name: spec.name, kind: spec.kind, edges: incident, params: spec.params });
    }

    if let Some(e) = edge_recs.iter().find(|e| e.nodes.is_empty()) {
        return Err(GraphError::UnusedEdge(e.name.clone()));
    }

    let mut graph = CffgGraph { nodes: node_recs, edges: edge_recs, node_index, edge_index, constraints: Constraints::default() };
    for node in &graph.nodes {
        graph.check_node(node)?;
    }
    graph.constraints = graph.resolve_constraints(constraints)?;
    Ok(graph)
}

impl CffgGraph {
    pub fn nodes(&self) -> &[FactorNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &FactorNode {
        &self.nodes[id.0]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0]
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.node_index.get(name).copied()
    }

    pub fn edge_id(&self, name: &str) -> Option<EdgeId> {
        self.edge_index.get(name).copied()
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    /// Same model, different constraint set.
    pub fn with_constraints(&self, constraints: Vec<ConstraintSpec>) -> Result<CffgGraph, GraphError> {
        let mut g = self.clone();
        g.constraints = self.resolve_constraints(constraints)?;
        Ok(g)
    }

    pub fn edge_form(&self, edge: EdgeId) -> &EdgeForm {
        self.constraints.edge_forms.get(&edge).unwrap_or(&EdgeForm::Free)
    }

    /// Declared factorisation, or the single joint block.
    pub fn partition(&self, node: NodeId) -> Vec<Vec<EdgeId>> {
        match self.constraints.factorisations.get(&node) {
            Some(p) => p.blocks.clone(),
            None => vec![self.node(node).edges.clone()],
        }
    }

    pub fn psub_edges(&self, node: NodeId) -> BTreeSet<EdgeId> {
        self.constraints.psub.get(&node).cloned().unwrap_or_default()
    }

    pub fn is_psub(&self, node: NodeId, edge: EdgeId) -> bool {
        self.constraints.psub.get(&node).is_some_and(|s| s.contains(&edge))
    }

    /// A node is default-factorised when its belief is one joint block, nothing
    /// is P-substituted and no incident edge carries data.
    pub fn is_default_node(&self, node: NodeId) -> bool {
        self.partition(node).len() == 1
            && self.psub_edges(node).is_empty()
            && !self
                .node(node)
                .edges
                .iter()
                .any(|&e| matches!(self.edge_form(e), EdgeForm::Data(_)))
    }

    fn check_node(&self, node: &FactorNode) -> Result<(), GraphError> {
        let arity = |expected: &str, ok: bool| -> Result<(), GraphError> {
            if ok {
                Ok(())
            } else {
                Err(GraphError::Arity {
                    node: node.name.clone(),
                    kind: node.kind,
                    expected: expected.into(),
                    got: node.edges.len(),
                })
            }
        };
        let bad = |reason: String| GraphError::Params { node: node.name.clone(), reason };
        let states = |k: usize| self.edges[node.edges[k].0].states;
        let n = node.edges.len();
        match node.kind {
            NodeKind::CatPrior | NodeKind::GoalCat => {
                arity("1", n == 1)?;
                let NodeParams::Vector(p) = &node.params else {
                    return Err(bad("expects a vector parameter".into()));
                };
                if p.len() != states(0) {
                    return Err(bad(format!("vector length {} does not match {} states", p.len(), states(0))));
                }
                if let VectorParam::PointMass(v) = p {
                    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || v.iter().sum::<f64>() <= 0.0 {
                        return Err(bad("weights must be nonnegative with positive mass".into()));
                    }
                }
            }
            NodeKind::Transition | NodeKind::GfeComposite => {
                arity("2", n == 2)?;
                let NodeParams::Matrix(m) = &node.params else {
                    return Err(bad("expects a matrix parameter".into()));
                };
                if m.shape() != (states(1), states(0)) {
                    return Err(bad(format!(
                        "matrix shape {:?} does not match (x states, z states) = ({}, {})",
                        m.shape(),
                        states(1),
                        states(0)
                    )));
                }
            }
            NodeKind::TransitionMixture => {
                arity("3", n == 3)?;
                let NodeParams::Mixture(slices) = &node.params else {
                    return Err(bad("expects a list of matrix slices".into()));
                };
                if slices.len() != states(2) {
                    return Err(bad(format!("{} slices for a selector with {} states", slices.len(), states(2))));
                }
                if slices.iter().any(|m| m.shape() != (states(1), states(0))) {
                    return Err(bad("slice shape does not match (x states, z states)".into()));
                }
            }
            NodeKind::Equality => {
                arity("at least 2", n >= 2)?;
                if node.edges.iter().any(|e| self.edges[e.0].states != states(0)) {
                    return Err(bad("equality edges must share a state count".into()));
                }
                if node.params != NodeParams::None {
                    return Err(bad("equality nodes take no parameters".into()));
                }
            }
            NodeKind::Terminator => {
                arity("1", n == 1)?;
                if node.params != NodeParams::None {
                    return Err(bad("terminators take no parameters".into()));
                }
            }
            NodeKind::Factor => {
                arity("at least 1", n >= 1)?;
                if node.params != NodeParams::None {
                    return Err(bad("opaque factors take no parameters".into()));
                }
            }
        }
        Ok(())
    }

    fn lookup_edge(&self, from: &str, name: &str) -> Result<EdgeId, GraphError> {
        self.edge_id(name)
            .ok_or_else(|| GraphError::DanglingReference { from: from.into(), name: name.into() })
    }

    fn lookup_node(&self, from: &str, name: &str) -> Result<NodeId, GraphError> {
        self.node_id(name)
            .ok_or_else(|| GraphError::DanglingReference { from: from.into(), name: name.into() })
    }

    fn resolve_constraints(&self, specs: Vec<ConstraintSpec>) -> Result<Constraints, GraphError> {
        let mut c = Constraints::default();
        for spec in specs {
            match spec {
                ConstraintSpec::EdgeForm { edge, form } => {
                    let eid = self.lookup_edge("constraint", &edge)?;
                    let states = self.edge(eid).states;
                    let form = match form {
                        FormSpec::Free => EdgeForm::Free,
                        // out-of-range indices are kept and reported by validation
                        FormSpec::Data(index) => EdgeForm::Data(OneHotVector { index, len: states }),
                        FormSpec::Delta => EdgeForm::Delta,
                        FormSpec::MomentMatch(None) => EdgeForm::MomentMatch(MomentSide::Both),
                        FormSpec::MomentMatch(Some(n)) => {
                            EdgeForm::MomentMatch(MomentSide::Node(self.lookup_node(&edge, &n)?))
                        }
                        FormSpec::Family(tag) => EdgeForm::Family(tag),
                    };
                    if c.edge_forms.insert(eid, form).is_some() {
                        return Err(GraphError::DuplicateId(format!("constraint on edge {edge}")));
                    }
                }
                ConstraintSpec::Factorisation { node, blocks } => {
                    let nid = self.lookup_node("constraint", &node)?;
                    let blocks = blocks
                        .iter()
                        .map(|b| b.iter().map(|e| self.lookup_edge(&node, e)).collect::<Result<Vec<_>, _>>())
                        .collect::<Result<Vec<_>, _>>()?;
                    if c.factorisations.insert(nid, Partition { blocks }).is_some() {
                        return Err(GraphError::DuplicateId(format!("factorisation of {node}")));
                    }
                }
                ConstraintSpec::Psub { node, edges } => {
                    let nid = self.lookup_node("constraint", &node)?;
                    let set = c.psub.entry(nid).or_default();
                    for e in &edges {
                        set.insert(self.lookup_edge(&node, e)?);
                    }
                }
            }
        }
        Ok(c)
    }

    /// Named view of the constraint table, in a canonical order.
    pub fn constraint_specs(&self) -> Vec<ConstraintSpec> {
        let mut out = Vec::new();
        for (&eid, form) in &self.constraints.edge_forms {
            let form = match form {
                EdgeForm::Free => FormSpec::Free,
                EdgeForm::Data(v) => FormSpec::Data(v.index),
                EdgeForm::Delta => FormSpec::Delta,
                EdgeForm::MomentMatch(MomentSide::Both) => FormSpec::MomentMatch(None),
                EdgeForm::MomentMatch(MomentSide::Node(n)) => FormSpec::MomentMatch(Some(self.node(*n).name.clone())),
                EdgeForm::Family(t) => FormSpec::Family(t.clone()),
            };
            out.push(ConstraintSpec::EdgeForm { edge: self.edge(eid).name.clone(), form });
        }
        for (&nid, p) in &self.constraints.factorisations {
            out.push(ConstraintSpec::Factorisation {
                node: self.node(nid).name.clone(),
                blocks: p.blocks.iter().map(|b| b.iter().map(|&e| self.edge(e).name.clone()).collect()).collect(),
            });
        }
        for (&nid, set) in &self.constraints.psub {
            out.push(ConstraintSpec::Psub {
                node: self.node(nid).name.clone(),
                edges: set.iter().map(|&e| self.edge(e).name.clone()).collect(),
            });
        }
        out
    }

    /// Name-preserving structural equality: same node kinds, parameters,
    /// adjacency (role order) and constraints, regardless of declaration order.
    pub fn isomorphic(&self, other: &CffgGraph) -> bool {
        if self.nodes.len() != other.nodes.len() || self.edges.len() != other.edges.len() {
            return false;
        }
        let edge_names = |g: &CffgGraph, ids: &[EdgeId]| -> Vec<String> { ids.iter().map(|&e| g.edge(e).name.clone()).collect() };
        for e in &self.edges {
            let Some(oe) = other.edge_id(&e.name).map(|id| other.edge(id)) else { return false };
            if e.states != oe.states {
                return false;
            }
            let mut a: Vec<&str> = e.nodes.iter().map(|&n| self.node(n).name.as_str()).collect();
            let mut b: Vec<&str> = oe.nodes.iter().map(|&n| other.node(n).name.as_str()).collect();
            a.sort_unstable();
            b.sort_unstable();
            if a != b {
                return false;
            }
        }
        for n in &self.nodes {
            let Some(on) = other.node_id(&n.name).map(|id| other.node(id)) else { return false };
            if n.kind != on.kind || n.params != on.params || edge_names(self, &n.edges) != edge_names(other, &on.edges) {
                return false;
            }
        }
        let canon = |g: &CffgGraph| -> BTreeSet<String> {
            g.constraint_specs()
                .into_iter()
                .map(|c| match c {
                    ConstraintSpec::Factorisation { node, blocks } => {
                        let set: BTreeSet<BTreeSet<String>> = blocks.into_iter().map(|b| b.into_iter().collect()).collect();
                        format!("F {node} {set:?}")
                    }
                    other => format!("{other:?}"),
                })
                .collect()
        };
        canon(self) == canon(other)
    }
}

/// Structural legality of the constraint set.
pub fn validate_constraints(graph: &CffgGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let ename = |e: EdgeId| graph.edge(e).name.clone();
    for (&nid, partition) in &graph.constraints.factorisations {
        let node = graph.node(nid);
        let mut seen = BTreeSet::new();
        for &e in partition.blocks.iter().flatten() {
            if !node.edges.contains(&e) {
                out.push(Violation::ForeignEdgeInPartition { node: node.name.clone(), edge: ename(e) });
            } else if !seen.insert(e) {
                out.push(Violation::RepeatedEdgeInPartition { node: node.name.clone(), edge: ename(e) });
            }
        }
        for &e in &node.edges {
            if !seen.contains(&e) {
                out.push(Violation::MissingEdgeInPartition { node: node.name.clone(), edge: ename(e) });
            }
        }
    }
    for (&nid, set) in &graph.constraints.psub {
        let node = graph.node(nid);
        let blocks = graph.partition(nid);
        for &e in set {
            if !node.edges.contains(&e) {
                out.push(Violation::PsubNotIncident { node: node.name.clone(), edge: ename(e) });
            } else if !blocks.iter().any(|b| b.as_slice() == [e]) {
                out.push(Violation::PsubNotSingleton { node: node.name.clone(), edge: ename(e) });
            }
        }
    }
    for (&eid, form) in &graph.constraints.edge_forms {
        let edge = graph.edge(eid);
        match form {
            EdgeForm::Data(v) if v.index >= edge.states => {
                out.push(Violation::DataOutOfRange { edge: edge.name.clone(), index: v.index, states: edge.states })
            }
            EdgeForm::Delta if edge.degree() < 2 => out.push(Violation::DeltaTerminates { edge: edge.name.clone() }),
            EdgeForm::MomentMatch(MomentSide::Node(n)) if !edge.nodes.contains(n) => {
                out.push(Violation::MomentMatchForeignNode { edge: edge.name.clone(), node: graph.node(*n).name.clone() })
            }
            _ => {}
        }
    }
    out
}
