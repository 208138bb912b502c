//! Architecture graphs compiled from recursion formulas.
//!
//! Each state `X[i]` becomes a junction (a signed n-ary adder). Terms of the
//! state's affine definition become incoming edges:
//!
//! - `X[s]` with coefficient 1: identity edge from the state node of `X[s]`.
//! - `W[i]*X[i-1]`: block `i` fed by `X[i-1]`, mapped edge into the junction.
//! - `W[j]*X[j-1]` with `j < i`: tap on block `j`'s pre-junction output.
//! - any other `W[k]*X[s]`: a fresh block `k` fed by `X[s]`.
//!
//! Coefficients of degree two or more have no single-block realization.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::poly::PathPolynomial;
use crate::spec::{ArchitectureSpec, StateTerms};

/// Isomorphism checks refuse graphs larger than this.
pub const MAX_ISOMORPHISM_NODES: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("X[{state}] term `{term}` on X[{source_state}] has degree {degree}; only single blocks can be wired")]
    Unrealizable {
        state: u32,
        source_state: u32,
        term: String,
        degree: usize,
    },
    #[error("graph has {nodes} nodes; isomorphism is limited to {max}")]
    Size { nodes: usize, max: usize },
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("malformed graph: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Input,
    BlockMap(u32),
    Junction(u32),
    Tap(u32),
    Output,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Input => "input",
            NodeKind::BlockMap(_) => "block",
            NodeKind::Junction(_) => "junction",
            NodeKind::Tap(_) => "tap",
            NodeKind::Output => "output",
        }
    }

    pub fn block(self) -> Option<u32> {
        match self {
            NodeKind::BlockMap(i) | NodeKind::Junction(i) | NodeKind::Tap(i) => Some(i),
            NodeKind::Input | NodeKind::Output => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeLabel {
    Identity,
    Mapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub sign: i8,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchGraph {
    pub name: String,
    pub depth: u32,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

struct Builder {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl Builder {
    fn node(&mut self, kind: NodeKind) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node { id, kind });
        id
    }

    fn edge(&mut self, from: usize, to: usize, sign: i8, label: EdgeLabel) {
        self.edges.push(Edge {
            from,
            to,
            sign,
            label,
        });
    }
}

/// Compiles `spec` unrolled to `depth` states into an architecture graph.
pub fn build_graph(spec: &ArchitectureSpec, depth: u32) -> Result<ArchGraph, GraphError> {
    if depth == 0 {
        return Err(GraphError::ZeroDepth);
    }
    let mut b = Builder {
        nodes: Vec::new(),
        edges: Vec::new(),
    };
    let mut state_node = vec![b.node(NodeKind::Input)];
    // block k fed by X[k-1], and its tap once something reuses it
    let mut primary: HashMap<u32, usize> = HashMap::new();
    let mut taps: HashMap<u32, usize> = HashMap::new();

    for i in 1..=depth {
        let junction = b.node(NodeKind::Junction(i));
        for (src, coeff) in spec.state_terms(i) {
            let src_node = state_node[src as usize];
            for (word, c) in coeff.iter() {
                let sign: i8 = if c < 0 { -1 } else { 1 };
                let reps = c.unsigned_abs();
                match word.factors() {
                    [] => {
                        for _ in 0..reps {
                            b.edge(src_node, junction, sign, EdgeLabel::Identity);
                        }
                    }
                    &[k] if k - 1 == src && k <= i => {
                        let block = *primary.entry(k).or_insert_with(|| {
                            let n = b.node(NodeKind::BlockMap(k));
                            b.edge(state_node[src as usize], n, 1, EdgeLabel::Identity);
                            n
                        });
                        let from = if k == i {
                            block
                        } else {
                            *taps.entry(k).or_insert_with(|| {
                                let t = b.node(NodeKind::Tap(k));
                                b.edge(block, t, 1, EdgeLabel::Identity);
                                t
                            })
                        };
                        for _ in 0..reps {
                            b.edge(from, junction, sign, EdgeLabel::Mapped);
                        }
                    }
                    &[k] => {
                        let block = b.node(NodeKind::BlockMap(k));
                        b.edge(src_node, block, 1, EdgeLabel::Identity);
                        for _ in 0..reps {
                            b.edge(block, junction, sign, EdgeLabel::Mapped);
                        }
                    }
                    long => {
                        return Err(GraphError::Unrealizable {
                            state: i,
                            source_state: src,
                            term: PathPolynomial::monomial(c, word.clone()).to_string(),
                            degree: long.len(),
                        })
                    }
                }
            }
        }
        state_node.push(junction);
    }
    let out = b.node(NodeKind::Output);
    b.edge(state_node[depth as usize], out, 1, EdgeLabel::Identity);
    Ok(ArchGraph {
        name: spec.name.clone(),
        depth,
        nodes: b.nodes,
        edges: b.edges,
    })
}

impl ArchGraph {
    fn kind(&self, id: usize) -> NodeKind {
        self.nodes[self.index_of(id)].kind
    }

    fn index_of(&self, id: usize) -> usize {
        self.nodes
            .iter()
            .position(|n| n.id == id)
            .unwrap_or_else(|| panic!("edge refers to unknown node {id}"))
    }

    fn incoming(&self, id: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.to == id)
    }

    /// State index carried by a node, if it is `X[0]` or a junction.
    fn state_of(&self, id: usize) -> Option<u32> {
        match self.kind(id) {
            NodeKind::Input => Some(0),
            NodeKind::Junction(i) => Some(i),
            _ => None,
        }
    }

    /// Identity edges from a state node straight into a junction.
    pub fn shortcut_edges(&self) -> Vec<Edge> {
        self.edges
            .iter()
            .filter(|e| {
                e.label == EdgeLabel::Identity
                    && matches!(self.kind(e.to), NodeKind::Junction(_))
                    && self.state_of(e.from).is_some()
            })
            .copied()
            .collect()
    }

    pub fn count_kind(&self, pred: impl Fn(NodeKind) -> bool) -> usize {
        self.nodes.iter().filter(|n| pred(n.kind)).count()
    }

    /// Node ids in topological order, or an error naming a cycle.
    pub fn topological_order(&self) -> Result<Vec<usize>, GraphError> {
        let pos: HashMap<usize, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(p, n)| (n.id, p))
            .collect();
        let mut indeg = vec![0usize; self.nodes.len()];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            let (f, t) = match (pos.get(&e.from), pos.get(&e.to)) {
                (Some(&f), Some(&t)) => (f, t),
                _ => {
                    return Err(GraphError::Malformed(format!(
                        "edge {}->{} has an unknown end",
                        e.from, e.to
                    )))
                }
            };
            indeg[t] += 1;
            out[f].push(t);
        }
        let mut ready: Vec<usize> = (0..self.nodes.len())
            .filter(|&p| indeg[p] == 0)
            .rev()
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(p) = ready.pop() {
            order.push(self.nodes[p].id);
            for &t in out[p].iter().rev() {
                indeg[t] -= 1;
                if indeg[t] == 0 {
                    ready.push(t);
                }
            }
        }
        if order.len() != self.nodes.len() {
            return Err(GraphError::Malformed("graph has a cycle".into()));
        }
        Ok(order)
    }

    /// Acyclic, one input, one output, and one data edge into every block.
    pub fn validate(&self) -> Result<(), GraphError> {
        self.topological_order()?;
        let inputs = self.count_kind(|k| k == NodeKind::Input);
        let outputs = self.count_kind(|k| k == NodeKind::Output);
        if inputs != 1 || outputs != 1 {
            return Err(GraphError::Malformed(format!(
                "expected one input and one output, found {inputs} and {outputs}"
            )));
        }
        for n in &self.nodes {
            if let NodeKind::BlockMap(k) = n.kind {
                let fan_in = self.incoming(n.id).count();
                if fan_in != 1 {
                    return Err(GraphError::Malformed(format!(
                        "block {k} (node {}) has {fan_in} incoming edges",
                        n.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of distinct input-to-output paths, parallel edges counted apart.
    pub fn path_count(&self) -> Result<u128, GraphError> {
        let order = self.topological_order()?;
        let mut ways: HashMap<usize, u128> = HashMap::new();
        let input = self.nodes.iter().find(|n| n.kind == NodeKind::Input);
        let output = self.nodes.iter().find(|n| n.kind == NodeKind::Output);
        let (Some(input), Some(output)) = (input, output) else {
            return Err(GraphError::Malformed("missing input or output".into()));
        };
        ways.insert(input.id, 1);
        for id in order {
            let w = ways.get(&id).copied().unwrap_or(0);
            if w == 0 {
                continue;
            }
            for e in self.edges.iter().filter(|e| e.from == id) {
                *ways.entry(e.to).or_insert(0) += w;
            }
        }
        Ok(ways.get(&output.id).copied().unwrap_or(0))
    }

    /// Reads the affine definition of every state back off the wiring.
    pub fn recover_states(&self) -> Result<BTreeMap<u32, StateTerms>, GraphError> {
        let malformed = |m: String| GraphError::Malformed(m);
        let single_input = |id: usize| -> Result<usize, GraphError> {
            let mut it = self.incoming(id);
            match (it.next(), it.next()) {
                (Some(e), None) => Ok(e.from),
                _ => Err(malformed(format!("node {id} must have exactly one input"))),
            }
        };
        let mut out = BTreeMap::new();
        for n in &self.nodes {
            let NodeKind::Junction(i) = n.kind else {
                continue;
            };
            let mut terms = StateTerms::new();
            for e in self.incoming(n.id) {
                let (src, coeff) = match self.kind(e.from) {
                    NodeKind::Input => (0, PathPolynomial::one()),
                    NodeKind::Junction(s) => (s, PathPolynomial::one()),
                    NodeKind::BlockMap(k) => {
                        let feed = single_input(e.from)?;
                        let s = self
                            .state_of(feed)
                            .ok_or_else(|| malformed(format!("block {k} is not fed by a state")))?;
                        (s, PathPolynomial::block(k))
                    }
                    NodeKind::Tap(k) => {
                        let block = single_input(e.from)?;
                        let feed = single_input(block)?;
                        let s = self.state_of(feed).ok_or_else(|| {
                            malformed(format!("tap {k} is not fed by a block on a state"))
                        })?;
                        (s, PathPolynomial::block(k))
                    }
                    NodeKind::Output => return Err(malformed("edge leaves the output".into())),
                };
                terms
                    .entry(src)
                    .or_default()
                    .add_assign(&coeff.scale(i64::from(e.sign)));
            }
            terms.retain(|_, p| !p.is_zero());
            out.insert(i, terms);
        }
        Ok(out)
    }
}

/// Shortcut structure between consecutive states `X[i-1]` and `X[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairReport {
    pub from: u32,
    pub to: u32,
    pub has_direct_identity: bool,
    pub cross_layer_sources: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructuralReport {
    pub name: String,
    pub depth: u32,
    pub pairs: Vec<PairReport>,
}

impl StructuralReport {
    pub fn all_direct(&self) -> bool {
        self.pairs.iter().all(|p| p.has_direct_identity)
    }

    pub fn none_direct(&self) -> bool {
        self.pairs.iter().all(|p| !p.has_direct_identity)
    }
}

/// For each `i` in `2..=depth`: does an identity edge carry `X[i-1]` into
/// `X[i]`, and which older states reach `X[i]` by identity edges.
pub fn direct_propagation_check(g: &ArchGraph) -> StructuralReport {
    let mut sources: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for e in g.shortcut_edges() {
        if let (Some(s), NodeKind::Junction(i)) = (g.state_of(e.from), g.kind(e.to)) {
            sources.entry(i).or_default().push(s);
        }
    }
    let pairs = (2..=g.depth)
        .map(|i| {
            let srcs = sources.get(&i).cloned().unwrap_or_default();
            let mut cross: Vec<u32> = srcs.iter().copied().filter(|&s| s + 1 < i).collect();
            cross.sort_unstable();
            cross.dedup();
            PairReport {
                from: i - 1,
                to: i,
                has_direct_identity: srcs.contains(&(i - 1)),
                cross_layer_sources: cross,
            }
        })
        .collect();
    StructuralReport {
        name: g.name.clone(),
        depth: g.depth,
        pairs,
    }
}

type EdgeKey = (i8, EdgeLabel);

/// Dense view used by the isomorphism search.
struct Labeled {
    labels: Vec<NodeKind>,
    adj: HashMap<(usize, usize), Vec<EdgeKey>>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
}

impl Labeled {
    fn new(g: &ArchGraph) -> Self {
        let pos: HashMap<usize, usize> =
            g.nodes.iter().enumerate().map(|(p, n)| (n.id, p)).collect();
        let n = g.nodes.len();
        let mut adj: HashMap<(usize, usize), Vec<EdgeKey>> = HashMap::new();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for e in &g.edges {
            let (f, t) = (pos[&e.from], pos[&e.to]);
            adj.entry((f, t)).or_default().push((e.sign, e.label));
            succ[f].push(t);
            pred[t].push(f);
        }
        for v in adj.values_mut() {
            v.sort_unstable();
        }
        for v in succ.iter_mut().chain(pred.iter_mut()) {
            v.sort_unstable();
            v.dedup();
        }
        Labeled {
            labels: g.nodes.iter().map(|n| n.kind).collect(),
            adj,
            succ,
            pred,
        }
    }

    fn edges(&self, f: usize, t: usize) -> &[EdgeKey] {
        self.adj.get(&(f, t)).map_or(&[], Vec::as_slice)
    }

    /// Colour refinement seeded by node labels; colours are comparable
    /// across graphs because they are built from sorted signatures.
    fn refine(&self, rounds: usize) -> Vec<Vec<u8>> {
        let mut colors: Vec<Vec<u8>> = self
            .labels
            .iter()
            .map(|k| format!("{k:?}").into_bytes())
            .collect();
        for _ in 0..rounds {
            let next: Vec<Vec<u8>> = (0..self.labels.len())
                .map(|v| {
                    let mut ins: Vec<String> = self.pred[v]
                        .iter()
                        .map(|&u| format!("{:?}{:?}", self.edges(u, v), colors[u]))
                        .collect();
                    let mut outs: Vec<String> = self.succ[v]
                        .iter()
                        .map(|&w| format!("{:?}{:?}", self.edges(v, w), colors[w]))
                        .collect();
                    ins.sort();
                    outs.sort();
                    let sig = format!("{:?}|{}|{}", colors[v], ins.join(","), outs.join(","));
                    short_hash(&sig)
                })
                .collect();
            colors = next;
        }
        colors
    }
}

fn short_hash(s: &str) -> Vec<u8> {
    // FNV-1a, twice with different offsets, so colours stay short.
    let mut out = Vec::with_capacity(16);
    for basis in [0xcbf29ce484222325u64, 0x84222325cbf29ce4u64] {
        let mut h = basis;
        for b in s.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x100000001b3);
        }
        out.extend_from_slice(&h.to_le_bytes());
    }
    out
}

/// Labeled-DAG isomorphism respecting node kinds, block indices, and edge
/// signs and labels (with multiplicity).
pub fn structural_equal(a: &ArchGraph, b: &ArchGraph) -> Result<bool, GraphError> {
    for g in [a, b] {
        if g.nodes.len() > MAX_ISOMORPHISM_NODES {
            return Err(GraphError::Size {
                nodes: g.nodes.len(),
                max: MAX_ISOMORPHISM_NODES,
            });
        }
    }
    if a.nodes.len() != b.nodes.len() || a.edges.len() != b.edges.len() {
        return Ok(false);
    }
    let la = Labeled::new(a);
    let lb = Labeled::new(b);
    let rounds = a.nodes.len().min(8);
    let ca = la.refine(rounds);
    let cb = lb.refine(rounds);
    let mut ha = ca.clone();
    let mut hb = cb.clone();
    ha.sort();
    hb.sort();
    if ha != hb {
        return Ok(false);
    }
    // most constrained nodes first
    let mut order: Vec<usize> = (0..la.labels.len()).collect();
    let class_size = |c: &Vec<u8>| ca.iter().filter(|x| *x == c).count();
    order.sort_by_key(|&v| (class_size(&ca[v]), v));
    let mut map = vec![usize::MAX; la.labels.len()];
    let mut used = vec![false; lb.labels.len()];
    Ok(extend(&la, &lb, &ca, &cb, &order, 0, &mut map, &mut used))
}

#[allow(clippy::too_many_arguments)]
fn extend(
    a: &Labeled,
    b: &Labeled,
    ca: &[Vec<u8>],
    cb: &[Vec<u8>],
    order: &[usize],
    depth: usize,
    map: &mut [usize],
    used: &mut [bool],
) -> bool {
    let Some(&u) = order.get(depth) else {
        return true;
    };
    for v in 0..b.labels.len() {
        if used[v] || cb[v] != ca[u] || !consistent(a, b, map, u, v) {
            continue;
        }
        map[u] = v;
        used[v] = true;
        if extend(a, b, ca, cb, order, depth + 1, map, used) {
            return true;
        }
        map[u] = usize::MAX;
        used[v] = false;
    }
    false
}

fn consistent(a: &Labeled, b: &Labeled, map: &[usize], u: usize, v: usize) -> bool {
    if a.edges(u, u) != b.edges(v, v) {
        return false;
    }
    map.iter().enumerate().all(|(x, &y)| {
        y == usize::MAX || (a.edges(u, x) == b.edges(v, y) && a.edges(x, u) == b.edges(y, v))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    Json,
}

#[derive(Serialize)]
struct JsonNode {
    id: usize,
    kind: &'static str,
    block: Option<u32>,
}

#[derive(Serialize)]
struct JsonGraph<'a> {
    name: &'a str,
    depth: u32,
    nodes: Vec<JsonNode>,
    edges: Vec<Edge>,
}

/// Deterministic text export; nodes and edges are emitted sorted by id.
pub fn export(g: &ArchGraph, format: ExportFormat) -> String {
    let mut nodes = g.nodes.clone();
    nodes.sort_by_key(|n| n.id);
    let mut edges = g.edges.clone();
    edges.sort();
    match format {
        ExportFormat::Json => {
            let doc = JsonGraph {
                name: &g.name,
                depth: g.depth,
                nodes: nodes
                    .iter()
                    .map(|n| JsonNode {
                        id: n.id,
                        kind: n.kind.name(),
                        block: n.kind.block(),
                    })
                    .collect(),
                edges,
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("graph serializes");
            s.push('\n');
            s
        }
        ExportFormat::Dot => {
            let mut s = String::new();
            let _ = writeln!(s, "digraph {:?} {{", g.name);
            s.push_str("  rankdir=LR;\n");
            for n in &nodes {
                let (label, shape) = match n.kind {
                    NodeKind::Input => ("X[0]".to_string(), "ellipse"),
                    NodeKind::BlockMap(k) => (format!("W[{k}]"), "box"),
                    NodeKind::Junction(i) => (format!("X[{i}]"), "circle"),
                    NodeKind::Tap(k) => (format!("tap W[{k}]"), "diamond"),
                    NodeKind::Output => ("output".to_string(), "doublecircle"),
                };
                let _ = writeln!(s, "  n{} [label=\"{label}\", shape={shape}];", n.id);
            }
            for e in &edges {
                let mut attrs = Vec::new();
                if e.sign < 0 {
                    attrs.push("style=dashed".to_string());
                    attrs.push("label=\"-\"".to_string());
                }
                if e.label == EdgeLabel::Mapped {
                    attrs.push("color=blue".to_string());
                }
                if attrs.is_empty() {
                    let _ = writeln!(s, "  n{} -> n{};", e.from, e.to);
                } else {
                    let _ = writeln!(s, "  n{} -> n{} [{}];", e.from, e.to, attrs.join(", "));
                }
            }
            s.push_str("}\n");
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::Builtin;
    use crate::parser::parse;

    fn graph(b: Builtin, depth: u32) -> ArchGraph {
        build_graph(&b.spec(), depth).unwrap()
    }

    fn incoming_kinds(g: &ArchGraph, junction: u32) -> Vec<(NodeKind, i8, EdgeLabel)> {
        let j = g
            .nodes
            .iter()
            .find(|n| n.kind == NodeKind::Junction(junction))
            .unwrap()
            .id;
        let mut v: Vec<_> = g
            .incoming(j)
            .map(|e| (g.kind(e.from), e.sign, e.label))
            .collect();
        v.sort();
        v
    }

    #[test]
    fn resnet_two_blocks() {
        let g = graph(Builtin::ResNet, 2);
        g.validate().unwrap();
        assert_eq!(g.count_kind(|k| matches!(k, NodeKind::BlockMap(_))), 2);
        assert_eq!(g.count_kind(|k| matches!(k, NodeKind::Junction(_))), 2);
        assert_eq!(g.shortcut_edges().len(), 2);
    }

    #[test]
    fn new_architecture_wiring() {
        let g = graph(Builtin::NewArch, 3);
        g.validate().unwrap();
        assert_eq!(
            incoming_kinds(&g, 3),
            vec![
                (NodeKind::BlockMap(3), 1, EdgeLabel::Mapped),
                (NodeKind::Junction(2), 1, EdgeLabel::Identity),
                (NodeKind::Tap(2), -1, EdgeLabel::Mapped),
            ]
        );
        assert_eq!(g.count_kind(|k| matches!(k, NodeKind::BlockMap(_))), 3);
    }

    #[test]
    fn eq22_shortcuts_come_from_input() {
        let g = graph(Builtin::Eq22, 3);
        for e in g.shortcut_edges() {
            assert_eq!(g.kind(e.from), NodeKind::Input);
        }
        assert_eq!(g.shortcut_edges().len(), 3);
    }

    #[test]
    fn propagation_reports() {
        let r = direct_propagation_check(&graph(Builtin::NewArch, 5));
        assert_eq!(r.pairs.len(), 4);
        assert!(r.all_direct());
        let r = direct_propagation_check(&graph(Builtin::Eq22, 5));
        assert!(r.none_direct());
        assert!(r.pairs.iter().all(|p| p.cross_layer_sources == vec![0]));
        let r = direct_propagation_check(&graph(Builtin::Chain, 5));
        assert!(r.none_direct());
        assert!(r.pairs.iter().all(|p| p.cross_layer_sources.is_empty()));
    }

    #[test]
    fn isomorphism_cases() {
        let new4 = graph(Builtin::NewArch, 4);
        assert!(!structural_equal(&new4, &graph(Builtin::Eq22, 4)).unwrap());
        assert!(
            !structural_equal(&graph(Builtin::ResNet, 3), &graph(Builtin::NewArch, 3)).unwrap()
        );
        assert!(structural_equal(&new4, &new4).unwrap());
    }

    #[test]
    fn shuffled_ids_stay_isomorphic() {
        let g = graph(Builtin::AppendixEx2, 5);
        let n = g.nodes.len();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let mut h = g.clone();
        for node in &mut h.nodes {
            node.id = perm[node.id] + 100;
        }
        for e in &mut h.edges {
            e.from = perm[e.from] + 100;
            e.to = perm[e.to] + 100;
        }
        h.nodes.reverse();
        h.edges.reverse();
        assert!(structural_equal(&g, &h).unwrap());
    }

    #[test]
    fn edge_sign_matters() {
        let g = graph(Builtin::NewArch, 3);
        let mut h = g.clone();
        let e = h.edges.iter_mut().find(|e| e.sign < 0).unwrap();
        e.sign = 1;
        assert!(!structural_equal(&g, &h).unwrap());
    }

    #[test]
    fn size_cap() {
        let g = build_graph(&Builtin::NewArch.spec(), 70).unwrap();
        assert!(g.nodes.len() > MAX_ISOMORPHISM_NODES);
        assert!(matches!(
            structural_equal(&g, &g),
            Err(GraphError::Size { .. })
        ));
    }

    #[test]
    fn degree_two_is_unrealizable() {
        let s = parse("X[i] = (1 + W[i]*W[i-1])*X[i-1]; X[1] = X[0]").unwrap();
        let e = build_graph(&s, 3).unwrap_err();
        assert!(
            matches!(
                e,
                GraphError::Unrealizable {
                    state: 2,
                    degree: 2,
                    ..
                }
            ),
            "{e}"
        );
    }

    #[test]
    fn resnet_path_count() {
        for depth in 1..=10 {
            assert_eq!(
                graph(Builtin::ResNet, depth).path_count().unwrap(),
                1u128 << depth
            );
        }
    }

    #[test]
    fn recovers_affine_definition() {
        for b in Builtin::ALL {
            let s = b.spec();
            let g = build_graph(&s, 6).unwrap();
            let rec = g.recover_states().unwrap();
            for i in 1..=6 {
                assert_eq!(rec[&i], s.state_terms(i), "{b} X[{i}]");
            }
        }
    }

    #[test]
    fn dot_export_shapes() {
        let dot = export(&graph(Builtin::ResNet, 1), ExportFormat::Dot);
        assert_eq!(dot.matches("shape=box").count(), 1);
        assert!(dot.contains("n0 -> n1;"));
        let dot = export(&graph(Builtin::NewArch, 2), ExportFormat::Dot);
        assert!(dot.contains("style=dashed"));
    }

    #[test]
    fn json_export_schema() {
        let g = graph(Builtin::NewArch, 2);
        let v: serde_json::Value = serde_json::from_str(&export(&g, ExportFormat::Json)).unwrap();
        assert_eq!(v["name"], "newarch");
        assert_eq!(v["depth"], 2);
        for n in v["nodes"].as_array().unwrap() {
            assert!(n["id"].is_u64());
            assert!(n["kind"].is_string());
            assert!(n.get("block").is_some());
        }
        for e in v["edges"].as_array().unwrap() {
            assert!(e["from"].is_u64() && e["to"].is_u64());
            assert!(e["sign"] == 1 || e["sign"] == -1);
            assert!(e["label"] == "identity" || e["label"] == "mapped");
        }
        assert_eq!(
            export(&g, ExportFormat::Json),
            export(&g, ExportFormat::Json)
        );
    }
}
