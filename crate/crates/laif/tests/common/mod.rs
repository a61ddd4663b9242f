//! Shared fixtures: random tree graphs with a brute-force oracle.
#![allow(dead_code)]

use laif::engine::{Schedule, Step};
use laif::graph::{build_graph, CffgGraph, EdgeSpec, MatrixParam, NodeKind, NodeParams, NodeSpec, VectorParam};
use laif::math::StochasticMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// A random tree-shaped FFG with CatPrior, Transition and Equality nodes.
pub fn random_tree(seed: u64, max_edges: usize) -> CffgGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<EdgeSpec> = Vec::new();
    let mut nodes: Vec<NodeSpec> = Vec::new();
    let new_edge = |edges: &mut Vec<EdgeSpec>, states: usize| {
        let name = format!("e{}", edges.len());
        edges.push(EdgeSpec { name: name.clone(), states });
        name
    };
    let root_states = rng.random_range(2..=4);
    let root = new_edge(&mut edges, root_states);
    nodes.push(NodeSpec {
        name: "f0".into(),
        kind: NodeKind::CatPrior,
        edges: vec![root.clone()],
        params: NodeParams::Vector(VectorParam::PointMass(random_simplex(&mut rng, root_states))),
    });
    let mut open = vec![(root, root_states)];
    while !open.is_empty() {
        let (edge, states) = open.swap_remove(rng.random_range(0..open.len()));
        let name = format!("f{}", nodes.len());
        let room = max_edges - edges.len();
        let choice = rng.random_range(0..4);
        if choice == 0 && room >= 2 {
            let a = new_edge(&mut edges, states);
            let b = new_edge(&mut edges, states);
            nodes.push(NodeSpec {
                name,
                kind: NodeKind::Equality,
                edges: vec![edge, a.clone(), b.clone()],
                params: NodeParams::None,
            });
            open.push((a, states));
            open.push((b, states));
        } else if choice == 1 && room >= 1 {
            let to = rng.random_range(2..=4);
            let x = new_edge(&mut edges, to);
            let rows: Vec<Vec<f64>> = {
                let cols: Vec<Vec<f64>> = (0..states).map(|_| random_simplex(&mut rng, to)).collect();
                (0..to).map(|j| (0..states).map(|i| cols[i][j]).collect()).collect()
            };
            nodes.push(NodeSpec {
                name,
                kind: NodeKind::Transition,
                edges: vec![edge, x.clone()],
                params: NodeParams::Matrix(MatrixParam::PointMass(StochasticMatrix::from_rows(&rows).unwrap())),
            });
            open.push((x, to));
        } else if choice == 2 {
            nodes.push(NodeSpec {
                name,
                kind: NodeKind::CatPrior,
                edges: vec![edge],
                params: NodeParams::Vector(VectorParam::PointMass(random_simplex(&mut rng, states))),
            });
        }
        // choice 3 (or no room): leave the edge dangling
    }
    build_graph(nodes, edges, vec![]).unwrap()
}

/// Every directed message once, ordered so inputs are always available, followed by all marginals.
pub fn two_pass_schedule(graph: &CffgGraph) -> Schedule {
    let mut pending: Vec<(usize, usize)> = graph
        .nodes()
        .iter()
        .flat_map(|n| n.edges.iter().map(move |e| (n.id.0, e.0)))
        .collect();
    let mut done = std::collections::BTreeSet::new();
    let mut steps = Vec::new();
    while !pending.is_empty() {
        let pos = pending
            .iter()
            .position(|&(n, e)| {
                graph.node(laif::graph::NodeId(n)).edges.iter().filter(|o| o.0 != e).all(|o| {
                    match graph.edge(*o).other(laif::graph::NodeId(n)) {
                        None => true,
                        Some(m) => done.contains(&(m.0, o.0)),
                    }
                })
            })
            .expect("tree schedules always make progress");
        let (n, e) = pending.remove(pos);
        done.insert((n, e));
        steps.push(Step::Msg { node: laif::graph::NodeId(n), edge: laif::graph::EdgeId(e) });
    }
    steps.extend(graph.edges().iter().map(|e| Step::Marginal(e.id)));
    Schedule::new(steps)
}

/// Exhaustive edge marginals and partition function.
pub fn enumerate(graph: &CffgGraph) -> (Vec<Vec<f64>>, f64) {
    let dims: Vec<usize> = graph.edges().iter().map(|e| e.states).collect();
    let mut marginals: Vec<Vec<f64>> = dims.iter().map(|&d| vec![0.0; d]).collect();
    let mut z = 0.0;
    let total: usize = dims.iter().product();
    for flat in 0..total {
        let mut s = vec![0; dims.len()];
        let mut r = flat;
        for k in (0..dims.len()).rev() {
            s[k] = r % dims[k];
            r /= dims[k];
        }
        let mut w = 1.0;
        for node in graph.nodes() {
            let at = |k: usize| s[node.edges[k].0];
            w *= match (&node.kind, &node.params) {
                (NodeKind::CatPrior, NodeParams::Vector(VectorParam::PointMass(d))) => d[at(0)],
                (NodeKind::Transition, NodeParams::Matrix(MatrixParam::PointMass(a))) => a.get(at(1), at(0)),
                (NodeKind::Equality, _) => {
                    if (1..node.edges.len()).all(|k| at(k) == at(0)) {
                        1.0
                    } else {
                        0.0
                    }
                }
                other => panic!("unexpected node {other:?}"),
            };
        }
        z += w;
        for (k, &v) in s.iter().enumerate() {
            marginals[k][v] += w;
        }
    }
    for m in &mut marginals {
        for v in m.iter_mut() {
            *v /= z;
        }
    }
    (marginals, z)
}
