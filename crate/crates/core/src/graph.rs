//! State transition graphs over the box lattice and structural queries on them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::model::{exit_directions, unstable_walls_under, BoxIndex, ModelError, Network, Sign};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GraphError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("graphs are defined over different box lattices")]
    NodeSetMismatch,
    #[error("edge {from} -> {to} is not a unit lattice step")]
    InvalidEdge { from: BoxIndex, to: BoxIndex },
    #[error("box {0} is not a node of the graph")]
    UnknownBox(BoxIndex),
    #[error("more than {0} elementary cycles")]
    CycleBudgetExceeded(usize),
    #[error("control value {u} for box {box_index} is outside [0, {bound}]")]
    LawOutOfRange { box_index: BoxIndex, u: f64, bound: f64 },
}

/// A box-wise constant input: explicit values on some boxes, a default elsewhere.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlLaw {
    pub values: BTreeMap<BoxIndex, f64>,
    pub default: f64,
}

impl ControlLaw {
    /// `u ≡ 0`.
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn uniform(u: f64) -> Self {
        Self { values: BTreeMap::new(), default: u }
    }

    pub fn with_values(values: impl IntoIterator<Item = (BoxIndex, f64)>, default: f64) -> Self {
        Self { values: values.into_iter().collect(), default }
    }

    pub fn set(&mut self, a: BoxIndex, u: f64) {
        self.values.insert(a, u);
    }

    pub fn get(&self, a: &BoxIndex) -> f64 {
        self.values.get(a).copied().unwrap_or(self.default)
    }

    pub fn check(&self, net: &Network) -> Result<(), GraphError> {
        let bound = net.input_bound();
        let bad = |u: f64| !(0.0..=bound).contains(&u);
        if bad(self.default) {
            return Err(GraphError::LawOutOfRange { box_index: BoxIndex(vec![]), u: self.default, bound });
        }
        for (a, &u) in &self.values {
            net.check_box(a)?;
            if bad(u) {
                return Err(GraphError::LawOutOfRange { box_index: a.clone(), u, bound });
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LawEntry {
    #[serde(rename = "box")]
    box_index: BoxIndex,
    u: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LawFile {
    #[serde(default)]
    default: f64,
    #[serde(default)]
    values: Vec<LawEntry>,
}

impl Serialize for ControlLaw {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        LawFile {
            default: self.default,
            values: self.values.iter().map(|(a, &u)| LawEntry { box_index: a.clone(), u }).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ControlLaw {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let f = LawFile::deserialize(d)?;
        Ok(ControlLaw::with_values(f.values.into_iter().map(|e| (e.box_index, e.u)), f.default))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Edge {
    pub from: BoxIndex,
    pub to: BoxIndex,
    pub direction: usize,
    pub sign: Sign,
}

/// Wall between two boxes that repels on both sides; never carries an edge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct UnstableWallMark {
    pub lower: BoxIndex,
    pub upper: BoxIndex,
    pub direction: usize,
}

/// Directed graph on all boxes of the lattice. Nodes are kept in
/// lexicographic order and edges sorted, so equal graphs compare and print equal.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionGraph {
    dims: Vec<usize>,
    nodes: Vec<BoxIndex>,
    edges: Vec<Edge>,
    succ: Vec<Vec<usize>>,
    unstable_walls: Vec<UnstableWallMark>,
}

impl TransitionGraph {
    fn empty(dims: &[usize]) -> Self {
        let nodes: Vec<BoxIndex> = lattice(dims).collect();
        let succ = vec![Vec::new(); nodes.len()];
        Self { dims: dims.to_vec(), nodes, edges: Vec::new(), succ, unstable_walls: Vec::new() }
    }

    /// Graph with the given edges over the lattice `∏ {0..dims_i-1}`. Every
    /// edge must be a unit step `a → a ± e_i` inside the lattice.
    pub fn from_edges(
        dims: &[usize],
        edges: impl IntoIterator<Item = (BoxIndex, BoxIndex)>,
    ) -> Result<Self, GraphError> {
        let mut g = Self::empty(dims);
        let mut set = BTreeSet::new();
        for (from, to) in edges {
            if g.id(&from).is_none() || g.id(&to).is_none() {
                return Err(GraphError::InvalidEdge { from, to });
            }
            let Some((direction, sign)) = from.unit_step_to(&to) else {
                return Err(GraphError::InvalidEdge { from, to });
            };
            set.insert(Edge { from, to, direction, sign });
        }
        g.edges = set.into_iter().collect();
        g.index_edges();
        Ok(g)
    }

    fn index_edges(&mut self) {
        let mut succ = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            let (f, t) = (self.id(&e.from).expect("node"), self.id(&e.to).expect("node"));
            succ[f].push(t);
        }
        self.succ = succ;
    }

    /// Mixed-radix position of a box in the node list.
    pub fn id(&self, a: &BoxIndex) -> Option<usize> {
        if a.len() != self.dims.len() {
            return None;
        }
        let mut id = 0;
        for (&v, &q) in a.0.iter().zip(&self.dims) {
            if v >= q {
                return None;
            }
            id = id * q + v;
        }
        Some(id)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn nodes(&self) -> &[BoxIndex] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn unstable_walls(&self) -> &[UnstableWallMark] {
        &self.unstable_walls
    }

    pub fn successors(&self, a: &BoxIndex) -> Vec<&BoxIndex> {
        match self.id(a) {
            Some(i) => self.succ[i].iter().map(|&j| &self.nodes[j]).collect(),
            None => Vec::new(),
        }
    }

    pub fn has_edge(&self, from: &BoxIndex, to: &BoxIndex) -> bool {
        match (self.id(from), self.id(to)) {
            (Some(f), Some(t)) => self.succ[f].contains(&t),
            _ => false,
        }
    }

    pub fn is_fixed(&self, a: &BoxIndex) -> bool {
        self.id(a).is_some_and(|i| self.succ[i].is_empty())
    }

    fn out_edges(&self, a: &BoxIndex) -> BTreeSet<&Edge> {
        self.edges.iter().filter(|e| &e.from == a).collect()
    }

    /// Graphviz rendering: fixed boxes double-circled, unstable walls dotted.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph TG {\n  node [shape=circle];\n");
        for (i, a) in self.nodes.iter().enumerate() {
            if self.succ[i].is_empty() {
                let _ = writeln!(s, "  \"{a}\" [shape=doublecircle];");
            } else {
                let _ = writeln!(s, "  \"{a}\";");
            }
        }
        for e in &self.edges {
            let _ = writeln!(s, "  \"{}\" -> \"{}\";", e.from, e.to);
        }
        for w in &self.unstable_walls {
            let _ = writeln!(s, "  \"{}\" -> \"{}\" [style=dotted, dir=none];", w.lower, w.upper);
        }
        s.push_str("}\n");
        s
    }
}

fn lattice(dims: &[usize]) -> impl Iterator<Item = BoxIndex> {
    let total: usize = dims.iter().product();
    let dims = dims.to_vec();
    (0..total).map(move |mut id| {
        let mut a = vec![0; dims.len()];
        for i in (0..dims.len()).rev() {
            a[i] = id % dims[i];
            id /= dims[i];
        }
        BoxIndex(a)
    })
}

/// `TG(u)`: edge `a → a ± e_i` iff `i ∈ I_out^±(a)` under `u(a)`.
pub fn build_transition_graph(net: &Network, law: &ControlLaw) -> Result<TransitionGraph, GraphError> {
    law.check(net)?;
    let mut g = TransitionGraph::empty(net.dims());
    for a in net.boxes() {
        let dirs = exit_directions(net, &a, law.get(&a))?;
        for (i, sign) in dirs.iter() {
            let to = a.step(i, sign, net.dims()).expect("escaping step stays in the lattice");
            g.edges.push(Edge { from: a.clone(), to, direction: i, sign });
        }
    }
    g.edges.sort();
    g.index_edges();
    g.unstable_walls = unstable_walls_under(net, |a| law.get(a))
        .into_iter()
        .map(|(lower, upper, direction)| UnstableWallMark { lower, upper, direction })
        .collect();
    Ok(g)
}

/// Boxes with no successor.
pub fn fixed_boxes(tg: &TransitionGraph) -> Vec<BoxIndex> {
    tg.nodes.iter().enumerate().filter(|(i, _)| tg.succ[*i].is_empty()).map(|(_, a)| a.clone()).collect()
}

/// Limits on elementary-cycle enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleBudget {
    pub max_len: usize,
    pub max_cycles: usize,
}

impl CycleBudget {
    /// Cycles up to `2 n max q_i` boxes, at most 10⁴ of them.
    pub fn for_dims(dims: &[usize]) -> Self {
        let q = dims.iter().copied().max().unwrap_or(1);
        Self { max_len: 2 * dims.len() * q, max_cycles: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleReport {
    /// Non-trivial strongly connected components, each sorted.
    pub sccs: Vec<Vec<BoxIndex>>,
    /// Elementary cycles, each starting at its smallest box.
    pub cycles: Vec<Vec<BoxIndex>>,
    /// Some path was cut at `max_len`; longer cycles may exist.
    pub truncated: bool,
}

/// Exact SCC decomposition plus budgeted elementary-cycle enumeration.
pub fn strongly_connected_cycles(tg: &TransitionGraph, budget: CycleBudget) -> Result<CycleReport, GraphError> {
    let mut pg = DiGraph::<(), ()>::with_capacity(tg.nodes.len(), tg.edges.len());
    let ids: Vec<_> = (0..tg.nodes.len()).map(|_| pg.add_node(())).collect();
    for (f, ts) in tg.succ.iter().enumerate() {
        for &t in ts {
            pg.add_edge(ids[f], ids[t], ());
        }
    }
    let mut comp = vec![usize::MAX; tg.nodes.len()];
    let mut sccs: Vec<Vec<usize>> = Vec::new();
    for scc in tarjan_scc(&pg) {
        let mut members: Vec<usize> = scc.into_iter().map(|ix| ix.index()).collect();
        if members.len() < 2 {
            continue;
        }
        members.sort_unstable();
        for &m in &members {
            comp[m] = sccs.len();
        }
        sccs.push(members);
    }
    sccs.sort();
    for (c, members) in sccs.iter().enumerate() {
        for &m in members {
            comp[m] = c;
        }
    }

    let mut cycles = Vec::new();
    let mut truncated = false;
    for start in 0..tg.nodes.len() {
        if comp[start] == usize::MAX {
            continue;
        }
        let mut path = vec![start];
        let mut on_path = vec![false; tg.nodes.len()];
        on_path[start] = true;
        enumerate_from(tg, &comp, start, &mut path, &mut on_path, budget, &mut cycles, &mut truncated)?;
    }
    Ok(CycleReport {
        sccs: sccs.into_iter().map(|m| m.into_iter().map(|i| tg.nodes[i].clone()).collect()).collect(),
        cycles: cycles.into_iter().map(|c: Vec<usize>| c.into_iter().map(|i| tg.nodes[i].clone()).collect()).collect(),
        truncated,
    })
}

#[allow(clippy::too_many_arguments)]
fn enumerate_from(
    tg: &TransitionGraph,
    comp: &[usize],
    start: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    budget: CycleBudget,
    cycles: &mut Vec<Vec<usize>>,
    truncated: &mut bool,
) -> Result<(), GraphError> {
    let v = *path.last().expect("non-empty path");
    for &w in &tg.succ[v] {
        if w == start {
            cycles.push(path.clone());
            if cycles.len() > budget.max_cycles {
                return Err(GraphError::CycleBudgetExceeded(budget.max_cycles));
            }
        } else if w > start && comp[w] == comp[start] && !on_path[w] {
            if path.len() >= budget.max_len {
                *truncated = true;
                continue;
            }
            path.push(w);
            on_path[w] = true;
            enumerate_from(tg, comp, start, path, on_path, budget, cycles, truncated)?;
            on_path[w] = false;
            path.pop();
        }
    }
    Ok(())
}

/// True iff no edge leaves `set`.
pub fn is_invariant(tg: &TransitionGraph, set: &[BoxIndex]) -> bool {
    let members: BTreeSet<&BoxIndex> = set.iter().collect();
    tg.edges.iter().all(|e| !members.contains(&e.from) || members.contains(&e.to))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphDiff {
    /// Edges of the second graph absent from the first.
    pub missing: Vec<Edge>,
    /// Edges of the first graph absent from the second.
    pub extra: Vec<Edge>,
    /// Boxes whose out-edge sets differ.
    pub changed: Vec<BoxIndex>,
}

impl GraphDiff {
    pub fn is_empty(&self) -> bool {
        self.missing.is_empty() && self.extra.is_empty()
    }
}

pub fn graph_diff(tg: &TransitionGraph, tg_star: &TransitionGraph) -> Result<GraphDiff, GraphError> {
    if tg.dims != tg_star.dims {
        return Err(GraphError::NodeSetMismatch);
    }
    let a: BTreeSet<&Edge> = tg.edges.iter().collect();
    let b: BTreeSet<&Edge> = tg_star.edges.iter().collect();
    let missing: Vec<Edge> = b.difference(&a).map(|e| (*e).clone()).collect();
    let extra: Vec<Edge> = a.difference(&b).map(|e| (*e).clone()).collect();
    let changed: BTreeSet<BoxIndex> = missing.iter().chain(&extra).map(|e| e.from.clone()).collect();
    debug_assert!(changed.iter().all(|x| tg.out_edges(x) != tg_star.out_edges(x)));
    Ok(GraphDiff { missing, extra, changed: changed.into_iter().collect() })
}
