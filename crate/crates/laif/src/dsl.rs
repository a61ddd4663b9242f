//! The `.cffg` text format: model declarations, constraints and an optional schedule.
//!
//! ```text
//! MODEL
//! var z: cat(2)
//! var x: cat(2)
//! node p: CatPrior(z; d=[0.5, 0.5])
//! node t: Transition(z, x; A=[[0.9, 0.2], [0.1, 0.8]])
//! CONSTRAINTS
//! edge x: data(1)
//! SCHEDULE
//! msg p -> z
//! marginal z
//! ```
//!
//! Statements end at a newline or `;`; newlines inside `(...)`/`[...]` are
//! ignored. `#` starts a comment. Data indices are 1-based in the text.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::engine::{Schedule, Step};
use crate::graph::{
    build_graph, validate_constraints, CffgGraph, ConstraintSpec, EdgeSpec, FormSpec, GraphError, MatrixParam,
    NodeKind, NodeParams, NodeSpec, VectorParam, Violation,
};
use crate::math::{DirichletMatrix, DirichletParams, StochasticMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("{line}:{col}: expected {expected}")]
    Syntax { line: usize, col: usize, expected: String },
    #[error("{line}:{col}: unknown node kind `{kind}`")]
    UnknownNodeKind { line: usize, col: usize, kind: String },
    #[error("{line}:{col}: constraint on unknown edge `{edge}`")]
    ConstraintOnUnknownEdge { line: usize, col: usize, edge: String },
    #[error("{line}:{col}: unknown node `{name}`")]
    UnknownNode { line: usize, col: usize, name: String },
    #[error("{line}:{col}: {reason}")]
    Params { line: usize, col: usize, reason: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid constraints: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Violation>),
}

impl DslError {
    /// Whether the text itself is malformed (as opposed to describing an invalid graph).
    pub fn is_syntax(&self) -> bool {
        matches!(self, DslError::Syntax { .. } | DslError::UnknownNodeKind { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Punct(char),
    Arrow,
    Semi,
    Newline,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, DslError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let mut depth = 0usize;
    while i < chars.len() {
        let c = chars[i];
        let (l, cl) = (line, col);
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: l, col: cl });
        if c == '\n' {
            if depth == 0 {
                push(&mut out, Tok::Newline);
            }
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'>') {
            push(&mut out, Tok::Arrow);
            i += 2;
            col += 2;
            continue;
        }
        let starts_number = c.is_ascii_digit()
            || ((c == '-' || c == '.') && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit() || *n == '.'));
        if starts_number {
            let start = i;
            i += 1;
            while i < chars.len() {
                let n = chars[i];
                let exp_sign = (n == '-' || n == '+') && matches!(chars[i - 1], 'e' | 'E');
                if n.is_ascii_digit() || n == '.' || n == 'e' || n == 'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| DslError::Syntax { line: l, col: cl, expected: "a number".into() })?;
            col += i - start;
            push(&mut out, Tok::Num(v));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
            continue;
        }
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth = depth.saturating_sub(1),
            _ => {}
        }
        match c {
            ';' if depth == 0 => push(&mut out, Tok::Newline),
            ';' => push(&mut out, Tok::Semi),
            '(' | ')' | '[' | ']' | '{' | '}' | ',' | ':' | '=' => push(&mut out, Tok::Punct(c)),
            _ => return Err(DslError::Syntax { line: l, col: cl, expected: "a token".into() }),
        }
        i += 1;
        col += 1;
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

#[derive(Debug, Clone)]
enum Value {
    Num(f64),
    List(Vec<Value>),
    Dir(Box<Value>),
}

#[derive(Debug, Clone)]
struct Named {
    name: String,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
enum ScheduleAst {
    Msg { node: Named, edge: Named },
    Marginal(Named),
    Iterate { count: usize, body: Vec<ScheduleAst> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Model,
    Constraints,
    Schedule,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, expected: &str) -> Result<T, DslError> {
        let t = self.peek();
        Err(DslError::Syntax { line: t.line, col: t.col, expected: expected.into() })
    }

    fn punct(&mut self, c: char) -> Result<(), DslError> {
        if self.peek().tok == Tok::Punct(c) {
            self.next();
            Ok(())
        } else {
            self.err(&format!("`{c}`"))
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.peek().tok == Tok::Punct(c) {
            self.next();
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> Result<Named, DslError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Ident(name) => {
                self.next();
                Ok(Named { name, line: t.line, col: t.col })
            }
            _ => self.err(what),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), DslError> {
        match &self.peek().tok {
            Tok::Ident(s) if s == kw => {
                self.next();
                Ok(())
            }
            _ => self.err(&format!("`{kw}`")),
        }
    }

    fn count(&mut self, what: &str) -> Result<usize, DslError> {
        match self.peek().tok {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 => {
                self.next();
                Ok(v as usize)
            }
            _ => self.err(what),
        }
    }

    fn end_of_statement(&mut self) -> Result<(), DslError> {
        match self.peek().tok {
            Tok::Newline => {
                self.next();
                Ok(())
            }
            Tok::Eof | Tok::Punct('}') => Ok(()),
            _ => self.err("end of statement"),
        }
    }

    fn skip_newlines(&mut self) {
        while self.peek().tok == Tok::Newline {
            self.next();
        }
    }

    fn value(&mut self) -> Result<Value, DslError> {
        match self.peek().tok.clone() {
            Tok::Num(v) => {
                self.next();
                Ok(Value::Num(v))
            }
            Tok::Ident(s) if s == "dir" => {
                self.next();
                Ok(Value::Dir(Box::new(self.list()?)))
            }
            Tok::Punct('[') => self.list(),
            _ => self.err("a number or `[`"),
        }
    }

    fn list(&mut self) -> Result<Value, DslError> {
        self.punct('[')?;
        let mut items = Vec::new();
        if !self.eat_punct(']') {
            loop {
                items.push(self.value()?);
                if self.eat_punct(']') {
                    break;
                }
                self.punct(',')?;
                if self.eat_punct(']') {
                    break;
                }
            }
        }
        Ok(Value::List(items))
    }

    fn schedule_block(&mut self, nested: bool) -> Result<Vec<ScheduleAst>, DslError> {
        let mut out = Vec::new();
        loop {
            self.skip_newlines();
            match &self.peek().tok {
                Tok::Eof if !nested => return Ok(out),
                Tok::Punct('}') if nested => {
                    self.next();
                    return Ok(out);
                }
                Tok::Ident(s) if !nested && section_name(s).is_some() => return Ok(out),
                _ => {}
            }
            let kw = self.ident("`msg`, `marginal` or `iterate`")?;
            match kw.name.as_str() {
                "msg" => {
                    let node = self.ident("a node name")?;
                    if self.peek().tok != Tok::Arrow {
                        return self.err("`->`");
                    }
                    self.next();
                    let edge = self.ident("an edge name")?;
                    out.push(ScheduleAst::Msg { node, edge });
                }
                "marginal" => out.push(ScheduleAst::Marginal(self.ident("an edge name")?)),
                "iterate" => {
                    let count = self.count("an iteration count")?;
                    self.punct('{')?;
                    let body = self.schedule_block(true)?;
                    out.push(ScheduleAst::Iterate { count, body });
                }
                _ => {
                    return Err(DslError::Syntax {
                        line: kw.line,
                        col: kw.col,
                        expected: "`msg`, `marginal` or `iterate`".into(),
                    })
                }
            }
            self.end_of_statement()?;
        }
    }
}

fn section_name(s: &str) -> Option<Section> {
    match s {
        "MODEL" => Some(Section::Model),
        "CONSTRAINTS" => Some(Section::Constraints),
        "SCHEDULE" => Some(Section::Schedule),
        _ => None,
    }
}

struct RawNode {
    name: Named,
    kind: NodeKind,
    edges: Vec<Named>,
    param: Option<(Named, Value)>,
}

enum RawConstraint {
    Form { edge: Named, form: FormSpec, side: Option<Named> },
    Factor { node: Named, blocks: Vec<Vec<Named>> },
    Psub { node: Named, edges: Vec<Named> },
}

/// Parse `.cffg` text into a validated graph and optional schedule.
pub fn parse(text: &str) -> Result<(CffgGraph, Option<Schedule>), DslError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let mut vars: Vec<(Named, usize)> = Vec::new();
    let mut nodes: Vec<RawNode> = Vec::new();
    let mut constraints: Vec<RawConstraint> = Vec::new();
    let mut schedule: Option<Vec<ScheduleAst>> = None;
    let mut seen = BTreeMap::new();
    let mut section = Section::Model;
    loop {
        p.skip_newlines();
        let tok = p.peek().clone();
        let Tok::Ident(word) = &tok.tok else {
            if tok.tok == Tok::Eof {
                break;
            }
            return p.err("a statement");
        };
        if let Some(s) = section_name(word) {
            p.next();
            if seen.insert(s, ()).is_some() {
                return Err(DslError::Syntax { line: tok.line, col: tok.col, expected: "each section at most once".into() });
            }
            section = s;
            p.end_of_statement()?;
            if s == Section::Schedule {
                schedule = Some(p.schedule_block(false)?);
            }
            continue;
        }
        match (section, word.as_str()) {
            (Section::Model, "var") => {
                p.next();
                let name = p.ident("a variable name")?;
                p.punct(':')?;
                p.keyword("cat")?;
                p.punct('(')?;
                let n = p.count("a state count")?;
                p.punct(')')?;
                vars.push((name, n));
            }
            (Section::Model, "node") => {
                p.next();
                let name = p.ident("a node name")?;
                p.punct(':')?;
                let kind_tok = p.ident("a node kind")?;
                let kind = NodeKind::from_name(&kind_tok.name).ok_or_else(|| DslError::UnknownNodeKind {
                    line: kind_tok.line,
                    col: kind_tok.col,
                    kind: kind_tok.name.clone(),
                })?;
                p.punct('(')?;
                let mut edges = vec![p.ident("an edge name")?];
                while p.eat_punct(',') {
                    edges.push(p.ident("an edge name")?);
                }
                let mut param = None;
                if p.peek().tok == Tok::Semi {
                    p.next();
                    let key = p.ident("a parameter name")?;
                    p.punct('=')?;
                    param = Some((key, p.value()?));
                }
                p.punct(')')?;
                nodes.push(RawNode { name, kind, edges, param });
            }
            (Section::Constraints, "edge") => {
                p.next();
                let edge = p.ident("an edge name")?;
                p.punct(':')?;
                let form_tok = p.ident("a form constraint")?;
                let mut side = None;
                let form = match form_tok.name.as_str() {
                    "free" => FormSpec::Free,
                    "delta" => FormSpec::Delta,
                    "data" => {
                        p.punct('(')?;
                        let k = p.count("a 1-based state index")?;
                        p.punct(')')?;
                        if k == 0 {
                            return Err(DslError::Syntax { line: form_tok.line, col: form_tok.col, expected: "a 1-based state index".into() });
                        }
                        FormSpec::Data(k - 1)
                    }
                    "family" => {
                        p.punct('(')?;
                        let tag = p.ident("a family tag")?;
                        p.punct(')')?;
                        FormSpec::Family(tag.name)
                    }
                    "moment" => {
                        p.punct('(')?;
                        let s = p.ident("`both` or a node name")?;
                        p.punct(')')?;
                        if s.name == "both" {
                            FormSpec::MomentMatch(None)
                        } else {
                            let name = s.name.clone();
                            side = Some(s);
                            FormSpec::MomentMatch(Some(name))
                        }
                    }
                    _ => {
                        return Err(DslError::Syntax {
                            line: form_tok.line,
                            col: form_tok.col,
                            expected: "`free`, `delta`, `data(k)`, `family(T)` or `moment(..)`".into(),
                        })
                    }
                };
                constraints.push(RawConstraint::Form { edge, form, side });
            }
            (Section::Constraints, "node") => {
                p.next();
                let node = p.ident("a node name")?;
                p.punct(':')?;
                let what = p.ident("`factor` or `psub`")?;
                match what.name.as_str() {
                    "factor" => {
                        let mut blocks = Vec::new();
                        while p.eat_punct('{') {
                            let mut block = vec![p.ident("an edge name")?];
                            while p.eat_punct(',') {
                                block.push(p.ident("an edge name")?);
                            }
                            p.punct('}')?;
                            blocks.push(block);
                        }
                        if blocks.is_empty() {
                            return p.err("`{`");
                        }
                        constraints.push(RawConstraint::Factor { node, blocks });
                    }
                    "psub" => {
                        let mut edges = vec![p.ident("an edge name")?];
                        while p.eat_punct(',') {
                            edges.push(p.ident("an edge name")?);
                        }
                        constraints.push(RawConstraint::Psub { node, edges });
                    }
                    _ => {
                        return Err(DslError::Syntax { line: what.line, col: what.col, expected: "`factor` or `psub`".into() })
                    }
                }
            }
            (Section::Model, _) => return p.err("`var` or `node`"),
            (Section::Constraints, _) => return p.err("`edge` or `node`"),
            (Section::Schedule, _) => unreachable!("schedule sections are consumed eagerly"),
        }
        p.end_of_statement()?;
    }
    assemble(vars, nodes, constraints, schedule)
}

fn assemble(
    vars: Vec<(Named, usize)>,
    nodes: Vec<RawNode>,
    constraints: Vec<RawConstraint>,
    schedule: Option<Vec<ScheduleAst>>,
) -> Result<(CffgGraph, Option<Schedule>), DslError> {
    let states: BTreeMap<&str, usize> = vars.iter().map(|(n, s)| (n.name.as_str(), *s)).collect();
    let node_names: BTreeMap<&str, ()> = nodes.iter().map(|n| (n.name.name.as_str(), ())).collect();
    for n in &nodes {
        for e in &n.edges {
            if !states.contains_key(e.name.as_str()) {
                return Err(DslError::Params { line: e.line, col: e.col, reason: format!("undeclared variable `{}`", e.name) });
            }
        }
    }
    let mut node_specs = Vec::with_capacity(nodes.len());
    for n in &nodes {
        let params = node_params(n)?;
        node_specs.push(NodeSpec {
            name: n.name.name.clone(),
            kind: n.kind,
            edges: n.edges.iter().map(|e| e.name.clone()).collect(),
            params,
        });
    }
    let edge_specs = vars.iter().map(|(n, s)| EdgeSpec { name: n.name.clone(), states: *s }).collect();

    let check_edge = |e: &Named| -> Result<String, DslError> {
        if states.contains_key(e.name.as_str()) {
            Ok(e.name.clone())
        } else {
            Err(DslError::ConstraintOnUnknownEdge { line: e.line, col: e.col, edge: e.name.clone() })
        }
    };
    let check_node = |n: &Named| -> Result<String, DslError> {
        if node_names.contains_key(n.name.as_str()) {
            Ok(n.name.clone())
        } else {
            Err(DslError::UnknownNode { line: n.line, col: n.col, name: n.name.clone() })
        }
    };
    let mut specs = Vec::with_capacity(constraints.len());
    for c in &constraints {
        specs.push(match c {
            RawConstraint::Form { edge, form, side } => {
                if let Some(s) = side {
                    check_node(s)?;
                }
                ConstraintSpec::EdgeForm { edge: check_edge(edge)?, form: form.clone() }
            }
            RawConstraint::Factor { node, blocks } => ConstraintSpec::Factorisation {
                node: check_node(node)?,
                blocks: blocks.iter().map(|b| b.iter().map(check_edge).collect()).collect::<Result<_, _>>()?,
            },
            RawConstraint::Psub { node, edges } => ConstraintSpec::Psub {
                node: check_node(node)?,
                edges: edges.iter().map(check_edge).collect::<Result<_, _>>()?,
            },
        });
    }
    let graph = build_graph(node_specs, edge_specs, specs)?;
    let violations = validate_constraints(&graph);
    if !violations.is_empty() {
        return Err(DslError::Validation(violations));
    }
    let schedule = schedule.map(|s| resolve_schedule(&graph, &s)).transpose()?.map(Schedule::new);
    Ok((graph, schedule))
}

fn resolve_schedule(graph: &CffgGraph, steps: &[ScheduleAst]) -> Result<Vec<Step>, DslError> {
    let edge = |e: &Named| {
        graph.edge_id(&e.name).ok_or_else(|| DslError::Params {
            line: e.line,
            col: e.col,
            reason: format!("schedule refers to unknown edge `{}`", e.name),
        })
    };
    steps
        .iter()
        .map(|s| match s {
            ScheduleAst::Msg { node, edge: e } => {
                let nid = graph
                    .node_id(&node.name)
                    .ok_or_else(|| DslError::UnknownNode { line: node.line, col: node.col, name: node.name.clone() })?;
                let eid = edge(e)?;
                if !graph.node(nid).edges.contains(&eid) {
                    return Err(DslError::Params {
                        line: e.line,
                        col: e.col,
                        reason: format!("edge `{}` is not incident to `{}`", e.name, node.name),
                    });
                }
                Ok(Step::Msg { node: nid, edge: eid })
            }
            ScheduleAst::Marginal(e) => Ok(Step::Marginal(edge(e)?)),
            ScheduleAst::Iterate { count, body } => Ok(Step::Iterate { count: *count, steps: resolve_schedule(graph, body)? }),
        })
        .collect()
}

fn expected_key(kind: NodeKind) -> Option<&'static str> {
    match kind {
        NodeKind::CatPrior => Some("d"),
        NodeKind::GoalCat => Some("c"),
        NodeKind::Transition | NodeKind::GfeComposite => Some("A"),
        NodeKind::TransitionMixture => Some("B"),
        NodeKind::Equality | NodeKind::Terminator | NodeKind::Factor => None,
    }
}

fn node_params(n: &RawNode) -> Result<NodeParams, DslError> {
    let key = expected_key(n.kind);
    let (k, v) = match (&n.param, key) {
        (None, None) => return Ok(NodeParams::None),
        (None, Some(k)) => {
            return Err(DslError::Params {
                line: n.name.line,
                col: n.name.col,
                reason: format!("node `{}` needs parameter `{k}`", n.name.name),
            })
        }
        (Some((named, _)), None) => {
            return Err(DslError::Params {
                line: named.line,
                col: named.col,
                reason: format!("{} nodes take no parameters", n.kind),
            })
        }
        (Some((named, v)), Some(k)) => {
            if named.name != k {
                return Err(DslError::Syntax { line: named.line, col: named.col, expected: format!("parameter `{k}`") });
            }
            (named, v)
        }
    };
    let bad = |reason: String| DslError::Params { line: k.line, col: k.col, reason };
    match n.kind {
        NodeKind::CatPrior | NodeKind::GoalCat => Ok(NodeParams::Vector(vector_param(v).map_err(bad)?)),
        NodeKind::Transition | NodeKind::GfeComposite => Ok(NodeParams::Matrix(matrix_param(v).map_err(bad)?)),
        _ => match v {
            Value::List(items) => Ok(NodeParams::Mixture(
                items.iter().map(matrix_param).collect::<Result<_, _>>().map_err(bad)?,
            )),
            _ => Err(bad("expected a list of matrices".into())),
        },
    }
}

fn numbers(v: &Value) -> Result<Vec<f64>, String> {
    match v {
        Value::List(items) => items
            .iter()
            .map(|x| match x {
                Value::Num(n) => Ok(*n),
                _ => Err("expected a list of numbers".to_string()),
            })
            .collect(),
        _ => Err("expected a list of numbers".into()),
    }
}

fn rows(v: &Value) -> Result<Vec<Vec<f64>>, String> {
    match v {
        Value::List(items) if !items.is_empty() => items.iter().map(numbers).collect(),
        _ => Err("expected a non-empty list of rows".into()),
    }
}

fn vector_param(v: &Value) -> Result<VectorParam, String> {
    match v {
        Value::Dir(inner) => {
            Ok(VectorParam::Dirichlet(DirichletParams::new(numbers(inner)?).map_err(|e| e.to_string())?))
        }
        _ => Ok(VectorParam::PointMass(numbers(v)?)),
    }
}

fn matrix_param(v: &Value) -> Result<MatrixParam, String> {
    match v {
        Value::Dir(inner) => Ok(MatrixParam::Dirichlet(DirichletMatrix::from_rows(&rows(inner)?).map_err(|e| e.to_string())?)),
        _ => Ok(MatrixParam::PointMass(StochasticMatrix::from_rows(&rows(v)?).map_err(|e| e.to_string())?)),
    }
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", items.join(", "))
}

fn fmt_matrix(m: &MatrixParam, indent: &str) -> String {
    let (prefix, rows) = match m {
        MatrixParam::PointMass(a) => ("", a.to_rows()),
        MatrixParam::Dirichlet(a) => ("dir", a.to_rows()),
    };
    let body: Vec<String> = rows.iter().map(|r| format!("{indent}  {}", fmt_list(r))).collect();
    format!("{prefix}[\n{}\n{indent}]", body.join(",\n"))
}

fn fmt_vector(v: &VectorParam) -> String {
    match v {
        VectorParam::PointMass(w) => fmt_list(w),
        VectorParam::Dirichlet(d) => format!("dir{}", fmt_list(d.as_slice())),
    }
}

/// Canonical text for a graph (no schedule).
pub fn print(graph: &CffgGraph) -> String {
    print_with_schedule(graph, None)
}

/// Canonical text for a graph and optional schedule; byte-stable for equal inputs.
pub fn print_with_schedule(graph: &CffgGraph, schedule: Option<&Schedule>) -> String {
    let mut out = String::from("MODEL\n");
    for e in graph.edges() {
        let _ = writeln!(out, "var {}: cat({})", e.name, e.states);
    }
    for n in graph.nodes() {
        let edges: Vec<&str> = n.edges.iter().map(|&e| graph.edge(e).name.as_str()).collect();
        let param = match (&n.params, expected_key(n.kind)) {
            (NodeParams::Vector(v), Some(k)) => format!("; {k}={}", fmt_vector(v)),
            (NodeParams::Matrix(m), Some(k)) => format!("; {k}={}", fmt_matrix(m, "")),
            (NodeParams::Mixture(ms), Some(k)) => {
                let slices: Vec<String> = ms.iter().map(|m| format!("  {}", fmt_matrix(m, "  "))).collect();
                format!("; {k}=[\n{}\n]", slices.join(",\n"))
            }
            _ => String::new(),
        };
        let _ = writeln!(out, "node {}: {}({}{})", n.name, n.kind, edges.join(", "), param);
    }
    let specs = graph.constraint_specs();
    if !specs.is_empty() {
        out.push_str("CONSTRAINTS\n");
        for c in specs {
            let _ = match c {
                ConstraintSpec::EdgeForm { edge, form } => {
                    let form = match form {
                        FormSpec::Free => "free".to_string(),
                        FormSpec::Data(k) => format!("data({})", k + 1),
                        FormSpec::Delta => "delta".to_string(),
                        FormSpec::MomentMatch(None) => "moment(both)".to_string(),
                        FormSpec::MomentMatch(Some(n)) => format!("moment({n})"),
                        FormSpec::Family(t) => format!("family({t})"),
                    };
                    writeln!(out, "edge {edge}: {form}")
                }
                ConstraintSpec::Factorisation { node, blocks } => {
                    let b: String = blocks.iter().map(|b| format!("{{{}}}", b.join(", "))).collect();
                    writeln!(out, "node {node}: factor {b}")
                }
                ConstraintSpec::Psub { node, edges } => writeln!(out, "node {node}: psub {}", edges.join(", ")),
            };
        }
    }
    if let Some(s) = schedule {
        out.push_str("SCHEDULE\n");
        print_steps(graph, &s.steps, 0, &mut out);
    }
    out
}

fn print_steps(graph: &CffgGraph, steps: &[Step], depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    for s in steps {
        let _ = match s {
            Step::Msg { node, edge } => writeln!(out, "{pad}msg {} -> {}", graph.node(*node).name, graph.edge(*edge).name),
            Step::Marginal(e) => writeln!(out, "{pad}marginal {}", graph.edge(*e).name),
            Step::Iterate { count, steps } => {
                let _ = writeln!(out, "{pad}iterate {count} {{");
                print_steps(graph, steps, depth + 1, out);
                writeln!(out, "{pad}}}")
            }
        };
    }
}
