//! Seeded random graphs covering every node kind and constraint type, for
//! round-trip and rendering tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{
    build_graph, validate_constraints, CffgGraph, ConstraintSpec, EdgeSpec, FormSpec, MatrixParam, NodeKind,
    NodeParams, NodeSpec, VectorParam,
};
use crate::math::{DirichletMatrix, DirichletParams, StochasticMatrix};

fn random_stochastic(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let colsv: Vec<Vec<f64>> = (0..cols)
        .map(|_| {
            let w: Vec<f64> = (0..rows).map(|_| rng.random_range(0.01..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
        .collect();
    (0..rows).map(|j| (0..cols).map(|i| colsv[i][j]).collect()).collect()
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> MatrixParam {
    if rng.random_bool(0.2) {
        let data: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| rng.random_range(0.1..5.0)).collect()).collect();
        MatrixParam::Dirichlet(DirichletMatrix::from_rows(&data).unwrap())
    } else {
        MatrixParam::PointMass(StochasticMatrix::from_rows(&random_stochastic(rng, rows, cols)).unwrap())
    }
}

/// A random valid graph with at most `max_nodes` nodes covering every node kind and constraint type.
pub fn random_graph(seed: u64, max_nodes: usize) -> CffgGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<EdgeSpec> = Vec::new();
    let mut nodes: Vec<NodeSpec> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    let n_nodes = rng.random_range(1..=max_nodes);
    for k in 0..n_nodes {
        let kind = NodeKind::ALL[rng.random_range(0..NodeKind::ALL.len())];
        let arity = match kind {
            NodeKind::CatPrior | NodeKind::GoalCat | NodeKind::Terminator => 1,
            NodeKind::Transition | NodeKind::GfeComposite => 2,
            NodeKind::TransitionMixture => 3,
            NodeKind::Equality => rng.random_range(2..=3),
            NodeKind::Factor => rng.random_range(1..=3),
        };
        let shared_states = rng.random_range(2..=3);
        let mut incident = Vec::new();
        for role in 0..arity {
            let states_needed = match kind {
                NodeKind::Equality => Some(shared_states),
                _ => None,
            };
            let reuse = open
                .iter()
                .position(|&e| !incident.contains(&e) && states_needed.is_none_or(|s| edges[e].states == s))
                .filter(|_| rng.random_bool(0.5));
            let e = match reuse {
                Some(pos) => open.remove(pos),
                None => {
                    let states = states_needed.unwrap_or_else(|| rng.random_range(2..=3));
                    edges.push(EdgeSpec { name: format!("e{}", edges.len()), states });
                    open.push(edges.len() - 1);
                    edges.len() - 1
                }
            };
            let _ = role;
            incident.push(e);
        }
        let st = |i: usize| edges[incident[i]].states;
        let params = match kind {
            NodeKind::CatPrior | NodeKind::GoalCat => {
                let w: Vec<f64> = (0..st(0)).map(|_| rng.random_range(0.0..2.0)).collect();
                if rng.random_bool(0.2) {
                    NodeParams::Vector(VectorParam::Dirichlet(
                        DirichletParams::new(w.iter().map(|x| x + 0.5).collect()).unwrap(),
                    ))
                } else {
                    NodeParams::Vector(VectorParam::PointMass(w.iter().map(|x| x + 0.01).collect()))
                }
            }
            NodeKind::Transition | NodeKind::GfeComposite => NodeParams::Matrix(random_matrix(&mut rng, st(1), st(0))),
            NodeKind::TransitionMixture => {
                NodeParams::Mixture((0..st(2)).map(|_| random_matrix(&mut rng, st(1), st(0))).collect())
            }
            _ => NodeParams::None,
        };
        nodes.push(NodeSpec {
            name: format!("n{k}"),
            kind,
            edges: incident.iter().map(|&e| edges[e].name.clone()).collect(),
            params,
        });
    }
    let graph = build_graph(nodes.clone(), edges.clone(), vec![]).unwrap();
    let mut constraints = Vec::new();
    for e in graph.edges() {
        let form = match rng.random_range(0..8) {
            0 => Some(FormSpec::Data(rng.random_range(0..e.states))),
            1 if e.degree() == 2 => Some(FormSpec::Delta),
            2 => Some(FormSpec::Family(["Gaussian", "Wishart", "Beta"][rng.random_range(0..3)].into())),
            3 if rng.random_bool(0.5) => Some(FormSpec::MomentMatch(None)),
            3 => Some(FormSpec::MomentMatch(Some(graph.node(e.nodes[0]).name.clone()))),
            _ => None,
        };
        if let Some(form) = form {
            constraints.push(ConstraintSpec::EdgeForm { edge: e.name.clone(), form });
        }
    }
    for n in graph.nodes() {
        if n.edges.len() < 2 || !rng.random_bool(0.4) {
            continue;
        }
        let names: Vec<String> = n.edges.iter().map(|&e| graph.edge(e).name.clone()).collect();
        let split = rng.random_range(1..names.len());
        let blocks = if rng.random_bool(0.5) {
            names.iter().map(|s| vec![s.clone()]).collect()
        } else {
            vec![names[..split].to_vec(), names[split..].to_vec()]
        };
        let singles: Vec<String> =
            blocks.iter().filter(|b: &&Vec<String>| b.len() == 1).map(|b| b[0].clone()).collect();
        constraints.push(ConstraintSpec::Factorisation { node: n.name.clone(), blocks });
        if !singles.is_empty() && rng.random_bool(0.5) {
            constraints.push(ConstraintSpec::Psub { node: n.name.clone(), edges: vec![singles[0].clone()] });
        }
    }
    let graph = graph.with_constraints(constraints).unwrap();
    assert!(validate_constraints(&graph).is_empty());
    graph
}
