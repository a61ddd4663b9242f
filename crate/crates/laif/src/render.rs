//! Bead-level view of a constrained graph, its compression and DOT export.
//!
//! Every edge marginal that enters the free energy (degree-2 edges, plus
//! degree-1 edges carrying a form constraint) gets a bead, and every block of
//! a node's factorisation gets a bead inside the node. Direct links join a
//! block bead to the edge beads of its block.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::graph::{CffgGraph, EdgeForm, EdgeId, MomentSide, NodeId, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum BeadShape {
    Empty,
    Symbol(String),
    Filled,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BeadSite {
    Edge(EdgeId),
    Block { node: NodeId, block: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bead {
    pub id: usize,
    pub site: BeadSite,
    pub shape: BeadShape,
    /// Interior beads are pushed to the node border by compression.
    pub on_border: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LinkKind {
    /// A marginalisation constraint between a block and one of its edges.
    Direct,
    /// Stands in for a chain of removed empty beads.
    Summarised,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeadLink {
    pub a: usize,
    pub b: usize,
    pub kind: LinkKind,
    /// Drawn dashed (moment matching).
    pub dashed: bool,
    /// Nodes whose interior the link crosses.
    pub via: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderNode {
    pub id: NodeId,
    pub name: String,
    pub kind: NodeKind,
    pub default: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderEdge {
    pub id: EdgeId,
    pub name: String,
    pub nodes: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RenderGraph {
    pub nodes: Vec<RenderNode>,
    pub edges: Vec<RenderEdge>,
    pub beads: Vec<Bead>,
    pub links: Vec<BeadLink>,
}

impl RenderGraph {
    pub fn bead(&self, id: usize) -> Option<&Bead> {
        self.beads.iter().find(|b| b.id == id)
    }

    /// Beads inside each node, by node.
    pub fn node_shells(&self) -> BTreeMap<NodeId, Vec<usize>> {
        let mut out: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for b in &self.beads {
            if let BeadSite::Block { node, .. } = b.site {
                out.entry(node).or_default().push(b.id);
            }
        }
        out
    }

    pub fn edge_bead(&self, edge: EdgeId) -> Option<&Bead> {
        self.beads.iter().find(|b| b.site == BeadSite::Edge(edge))
    }

    pub fn count_shape(&self, shape: &BeadShape) -> usize {
        self.beads.iter().filter(|b| &b.shape == shape).count()
    }

    fn is_default(&self, node: NodeId) -> bool {
        self.nodes.iter().any(|n| n.id == node && n.default)
    }

    fn remove_beads(&mut self, gone: &BTreeSet<usize>) {
        self.beads.retain(|b| !gone.contains(&b.id));
        self.links.retain(|l| !gone.contains(&l.a) && !gone.contains(&l.b));
    }

    fn add_link(&mut self, a: usize, b: usize, via: BTreeSet<NodeId>, dashed: bool) {
        let (a, b) = (a.min(b), a.max(b));
        if let Some(l) = self.links.iter_mut().find(|l| (l.a, l.b) == (a, b)) {
            l.via.extend(via);
            l.dashed |= dashed;
        } else {
            self.links.push(BeadLink { a, b, kind: LinkKind::Summarised, dashed, via });
        }
    }
}

fn edge_shape(form: &EdgeForm) -> BeadShape {
    match form {
        EdgeForm::Free => BeadShape::Empty,
        EdgeForm::Data(_) => BeadShape::Filled,
        EdgeForm::Delta => BeadShape::Symbol("δ".into()),
        EdgeForm::MomentMatch(_) => BeadShape::Symbol("E".into()),
        EdgeForm::Family(tag) => BeadShape::Symbol(tag.clone()),
    }
}

/// Expand a graph into its bead-level form.
pub fn to_render_graph(graph: &CffgGraph) -> RenderGraph {
    let mut r = RenderGraph {
        nodes: graph
            .nodes()
            .iter()
            .map(|n| RenderNode { id: n.id, name: n.name.clone(), kind: n.kind, default: graph.is_default_node(n.id) })
            .collect(),
        edges: graph.edges().iter().map(|e| RenderEdge { id: e.id, name: e.name.clone(), nodes: e.nodes.clone() }).collect(),
        ..RenderGraph::default()
    };
    let mut edge_beads = BTreeMap::new();
    for e in graph.edges() {
        let form = graph.edge_form(e.id);
        if e.degree() == 2 || *form != EdgeForm::Free {
            let id = r.beads.len();
            r.beads.push(Bead { id, site: BeadSite::Edge(e.id), shape: edge_shape(form), on_border: false });
            edge_beads.insert(e.id, id);
        }
    }
    for n in graph.nodes() {
        let psub = graph.psub_edges(n.id);
        for (k, block) in graph.partition(n.id).into_iter().enumerate() {
            // clamped edges are not part of q; their filled edge bead stands in
            if block.iter().all(|&e| matches!(graph.edge_form(e), EdgeForm::Data(_))) {
                continue;
            }
            let square = block.len() == 1 && psub.contains(&block[0]);
            let id = r.beads.len();
            r.beads.push(Bead {
                id,
                site: BeadSite::Block { node: n.id, block: k },
                shape: if square { BeadShape::Square } else { BeadShape::Empty },
                on_border: false,
            });
            for e in block {
                if let Some(&eb) = edge_beads.get(&e) {
                    let dashed = match graph.edge_form(e) {
                        EdgeForm::MomentMatch(MomentSide::Both) => true,
                        EdgeForm::MomentMatch(MomentSide::Node(m)) => *m == n.id,
                        _ => false,
                    };
                    r.links.push(BeadLink {
                        a: eb.min(id),
                        b: eb.max(id),
                        kind: LinkKind::Direct,
                        dashed,
                        via: BTreeSet::from([n.id]),
                    });
                }
            }
        }
    }
    r
}

/// Compress a render graph:
/// 1. summarise chains of empty beads by their terminating beads;
/// 2. drop empty interior beads of default-factorised nodes;
/// 3. drop links running through default-factorised nodes;
/// 4. push the remaining interior beads to the node borders.
pub fn compress(r: &RenderGraph) -> RenderGraph {
    let mut out = r.clone();
    summarise_chains(&mut out);

    let gone: BTreeSet<usize> = out
        .beads
        .iter()
        .filter(|b| b.shape == BeadShape::Empty)
        .filter(|b| matches!(b.site, BeadSite::Block { node, .. } if out.is_default(node)))
        .map(|b| b.id)
        .collect();
    out.remove_beads(&gone);

    let defaults: BTreeSet<NodeId> = out.nodes.iter().filter(|n| n.default).map(|n| n.id).collect();
    out.links.retain(|l| l.via.is_disjoint(&defaults));

    for b in &mut out.beads {
        if matches!(b.site, BeadSite::Block { .. }) {
            b.on_border = true;
        }
    }
    out.links.sort_by_key(|l| (l.a, l.b));
    out
}

/// An empty bead with at least two direct links sits inside a chain; each
/// connected group of such beads is replaced by links between the beads
/// bounding it.
fn summarise_chains(r: &mut RenderGraph) {
    let mut direct_degree: BTreeMap<usize, usize> = BTreeMap::new();
    for l in r.links.iter().filter(|l| l.kind == LinkKind::Direct) {
        *direct_degree.entry(l.a).or_default() += 1;
        *direct_degree.entry(l.b).or_default() += 1;
    }
    let interior: BTreeSet<usize> = r
        .beads
        .iter()
        .filter(|b| b.shape == BeadShape::Empty && direct_degree.get(&b.id).copied().unwrap_or(0) >= 2)
        .map(|b| b.id)
        .collect();
    if interior.is_empty() {
        return;
    }
    let mut seen = BTreeSet::new();
    let mut new_links = Vec::new();
    for &start in &interior {
        if !seen.insert(start) {
            continue;
        }
        let mut stack = vec![start];
        let mut boundary = BTreeSet::new();
        let mut via = BTreeSet::new();
        let mut dashed = false;
        while let Some(b) = stack.pop() {
            for l in r.links.iter().filter(|l| l.a == b || l.b == b) {
                let other = if l.a == b { l.b } else { l.a };
                via.extend(l.via.iter().copied());
                dashed |= l.dashed;
                if interior.contains(&other) {
                    if seen.insert(other) {
                        stack.push(other);
                    }
                } else {
                    boundary.insert(other);
                }
            }
        }
        let boundary: Vec<usize> = boundary.into_iter().collect();
        for (i, &a) in boundary.iter().enumerate() {
            for &b in &boundary[i + 1..] {
                new_links.push((a, b, via.clone(), dashed));
            }
        }
    }
    r.remove_beads(&interior);
    for (a, b, via, dashed) in new_links {
        r.add_link(a, b, via, dashed);
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Undirected DOT text; factor nodes are squares, beads use circle,
/// doublecircle (symbol), point (data) and box (P-substitution).
pub fn export_dot(r: &RenderGraph) -> String {
    let mut out = format!("// cffg render graph: {} nodes, {} beads\n", r.nodes.len(), r.beads.len());
    if r.nodes.is_empty() && r.beads.is_empty() {
        out.push_str("graph cffg {}\n");
        return out;
    }
    out.push_str("graph cffg {\n");
    let node_name = |id: NodeId| r.nodes.iter().find(|n| n.id == id).map(|n| n.name.clone()).unwrap_or_default();
    for n in &r.nodes {
        let label = if n.kind == NodeKind::Equality { "=".to_string() } else { n.name.clone() };
        let _ = writeln!(out, "  {} [shape=square, label={}];", quote(&format!("f:{}", n.name)), quote(&label));
    }
    for b in &r.beads {
        let (shape, label) = match &b.shape {
            BeadShape::Empty => ("circle", String::new()),
            BeadShape::Symbol(s) => ("doublecircle", s.clone()),
            BeadShape::Filled => ("point", String::new()),
            BeadShape::Square => ("box", String::new()),
        };
        let _ = writeln!(out, "  {} [shape={shape}, width=0.2, label={}];", quote(&format!("b{}", b.id)), quote(&label));
    }
    for e in &r.edges {
        let ends: Vec<String> = e.nodes.iter().map(|&n| quote(&format!("f:{}", node_name(n)))).collect();
        let mut path = ends.clone();
        if let Some(b) = r.edge_bead(e.id) {
            path.insert(1.min(path.len()), quote(&format!("b{}", b.id)));
        }
        if e.nodes.len() == 1 {
            let t = quote(&format!("t:{}", e.name));
            let _ = writeln!(out, "  {t} [shape=none, label=\"\"];");
            path.push(t);
        }
        let _ = writeln!(out, "  {} [label={}];", path.join(" -- "), quote(&e.name));
    }
    for b in &r.beads {
        if let BeadSite::Block { node, .. } = b.site {
            let _ = writeln!(out, "  {} -- {} [style=dotted];", quote(&format!("f:{}", node_name(node))), quote(&format!("b{}", b.id)));
        }
    }
    for l in &r.links {
        let style = if l.dashed { "dashed" } else { "solid" };
        let _ = writeln!(out, "  {} -- {} [style={style}, color=gray];", quote(&format!("b{}", l.a)), quote(&format!("b{}", l.b)));
    }
    out.push_str("}\n");
    out
}
