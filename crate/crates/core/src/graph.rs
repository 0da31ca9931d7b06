//! Partially directed graphs, DAGs and CPDAGs over nodes `0..p`.
//!
//! Edges are stored in a dense `p x p` mark matrix: `m[i][j] && m[j][i]` is an
//! undirected edge `i - j`, `m[i][j] && !m[j][i]` is a directed edge `i -> j`.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of full restarts `extend_to_dag` makes before giving up.
pub const EXTENSION_ATTEMPTS: usize = 100;

/// Edge mark between an ordered pair `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mark {
    Absent,
    Undirected,
    /// `i -> j`
    Forward,
    /// `j -> i`
    Backward,
}

/// A v-structure `a -> collider <- b` with `a < b` and `a`, `b` nonadjacent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VStructure {
    pub a: usize,
    pub collider: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct PartiallyDirectedGraph {
    p: usize,
    m: Vec<bool>,
}

impl PartiallyDirectedGraph {
    /// Empty graph on `p` nodes.
    pub fn new(p: usize) -> Self {
        Self {
            p,
            m: vec![false; p * p],
        }
    }

    /// Complete undirected graph on `p` nodes.
    pub fn complete(p: usize) -> Self {
        let mut g = Self::new(p);
        for i in 0..p {
            for j in (i + 1)..p {
                g.set_undirected(i, j);
            }
        }
        g
    }

    /// Builds a graph from `(a, b, mark)` triples, validating indices and uniqueness.
    pub fn from_edges(p: usize, edges: &[(usize, usize, Mark)]) -> Result<Self> {
        let mut g = Self::new(p);
        for &(a, b, mark) in edges {
            if a >= p || b >= p {
                return Err(Error::GraphContract(format!(
                    "edge ({a}, {b}) out of range for p = {p}"
                )));
            }
            if a == b {
                return Err(Error::GraphContract(format!("self-edge at node {a}")));
            }
            if g.is_adjacent(a, b) {
                return Err(Error::GraphContract(format!("duplicate edge ({a}, {b})")));
            }
            match mark {
                Mark::Absent => {}
                Mark::Undirected => g.set_undirected(a, b),
                Mark::Forward => g.set_directed(a, b),
                Mark::Backward => g.set_directed(b, a),
            }
        }
        Ok(g)
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> bool {
        self.m[i * self.p + j]
    }

    #[inline]
    fn put(&mut self, i: usize, j: usize, v: bool) {
        self.m[i * self.p + j] = v;
    }

    fn check_pair(&self, i: usize, j: usize) {
        assert!(i < self.p && j < self.p, "node index out of range");
        assert!(i != j, "self-edges are not allowed");
    }

    pub fn set_undirected(&mut self, i: usize, j: usize) {
        self.check_pair(i, j);
        self.put(i, j, true);
        self.put(j, i, true);
    }

    /// Sets the mark between `from` and `to` to `from -> to`.
    pub fn set_directed(&mut self, from: usize, to: usize) {
        self.check_pair(from, to);
        self.put(from, to, true);
        self.put(to, from, false);
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.check_pair(i, j);
        self.put(i, j, false);
        self.put(j, i, false);
    }

    pub fn mark(&self, i: usize, j: usize) -> Mark {
        match (self.at(i, j), self.at(j, i)) {
            (false, false) => Mark::Absent,
            (true, true) => Mark::Undirected,
            (true, false) => Mark::Forward,
            (false, true) => Mark::Backward,
        }
    }

    #[inline]
    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        i != j && (self.at(i, j) || self.at(j, i))
    }

    /// True iff the edge `i -> j` is present.
    #[inline]
    pub fn is_directed(&self, i: usize, j: usize) -> bool {
        self.at(i, j) && !self.at(j, i)
    }

    #[inline]
    pub fn is_undirected(&self, i: usize, j: usize) -> bool {
        i != j && self.at(i, j) && self.at(j, i)
    }

    pub fn adjacent(&self, i: usize) -> Vec<usize> {
        (0..self.p).filter(|&j| self.is_adjacent(i, j)).collect()
    }

    pub fn parents(&self, i: usize) -> Vec<usize> {
        (0..self.p).filter(|&j| self.is_directed(j, i)).collect()
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.p).filter(|&j| self.is_directed(i, j)).collect()
    }

    pub fn undirected_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.p).filter(|&j| self.is_undirected(i, j)).collect()
    }

    /// Present edges as `(a, b, mark)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize, Mark)> {
        let mut out = Vec::new();
        for a in 0..self.p {
            for b in (a + 1)..self.p {
                let m = self.mark(a, b);
                if m != Mark::Absent {
                    out.push((a, b, m));
                }
            }
        }
        out
    }

    pub fn n_edges(&self) -> usize {
        self.edges().len()
    }

    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        self.edges()
            .into_iter()
            .filter(|e| e.2 == Mark::Undirected)
            .map(|(a, b, _)| (a, b))
            .collect()
    }

    pub fn has_undirected(&self) -> bool {
        (0..self.p).any(|i| ((i + 1)..self.p).any(|j| self.is_undirected(i, j)))
    }

    /// All v-structures `a -> c <- b` with `a`, `b` nonadjacent.
    pub fn v_structures(&self) -> BTreeSet<VStructure> {
        let mut out = BTreeSet::new();
        for c in 0..self.p {
            let pa = self.parents(c);
            for (x, &a) in pa.iter().enumerate() {
                for &b in &pa[x + 1..] {
                    if !self.is_adjacent(a, b) {
                        out.insert(VStructure { a, collider: c, b });
                    }
                }
            }
        }
        out
    }

    /// Same adjacency as `self`, ignoring marks.
    pub fn same_skeleton(&self, other: &Self) -> bool {
        self.p == other.p
            && (0..self.p)
                .all(|i| (0..self.p).all(|j| self.is_adjacent(i, j) == other.is_adjacent(i, j)))
    }

    /// True iff the directed part has a directed path `from ~> to` (length ≥ 1).
    pub fn has_directed_path(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.p];
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            for w in 0..self.p {
                if self.is_directed(v, w) && !seen[w] {
                    if w == to {
                        return true;
                    }
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        false
    }

    /// Topological order of the directed part (Kahn), or `None` on a directed cycle.
    /// Undirected edges are ignored.
    fn directed_topological_order(&self) -> Option<Vec<usize>> {
        let p = self.p;
        let mut indeg: Vec<usize> = (0..p).map(|i| self.parents(i).len()).collect();
        let mut queue: VecDeque<usize> = (0..p).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(p);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for w in 0..p {
                if self.is_directed(v, w) {
                    indeg[w] -= 1;
                    if indeg[w] == 0 {
                        queue.push_back(w);
                    }
                }
            }
        }
        (order.len() == p).then_some(order)
    }

    pub fn directed_part_is_acyclic(&self) -> bool {
        self.directed_topological_order().is_some()
    }

    /// Dor-Tarsi consistent extension: a DAG with the same skeleton and
    /// v-structures that keeps every directed edge, if one exists.
    pub fn consistent_extension(&self) -> Option<Dag> {
        let p = self.p;
        let mut out = self.clone();
        let mut alive = vec![true; p];
        for _ in 0..p {
            let sink = (0..p).find(|&x| {
                alive[x] && !(0..p).any(|y| alive[y] && self.is_directed(x, y)) && {
                    let nbrs: Vec<usize> = (0..p)
                        .filter(|&y| alive[y] && self.is_adjacent(x, y))
                        .collect();
                    nbrs.iter()
                        .filter(|&&y| self.is_undirected(x, y))
                        .all(|&y| nbrs.iter().all(|&z| z == y || self.is_adjacent(y, z)))
                }
            })?;
            for y in 0..p {
                if alive[y] && self.is_undirected(sink, y) {
                    out.set_directed(y, sink);
                }
            }
            alive[sink] = false;
        }
        Dag::new(out).ok()
    }
}

/// Drops every arrowhead.
pub fn skeleton(g: &PartiallyDirectedGraph) -> PartiallyDirectedGraph {
    let mut out = PartiallyDirectedGraph::new(g.p());
    for (a, b, _) in g.edges() {
        out.set_undirected(a, b);
    }
    out
}

/// Acyclicity of a fully directed graph.
pub fn is_acyclic(g: &PartiallyDirectedGraph) -> Result<bool> {
    if g.has_undirected() {
        return Err(Error::GraphContract(
            "is_acyclic requires a fully directed graph".into(),
        ));
    }
    Ok(g.directed_part_is_acyclic())
}

/// Closes `g` under orientation rules R1-R3. Directed marks are never reversed.
pub fn meek_orient(g: &PartiallyDirectedGraph) -> PartiallyDirectedGraph {
    let mut g = g.clone();
    let p = g.p();
    loop {
        let mut changed = false;
        for a in 0..p {
            for b in 0..p {
                if !g.is_undirected(a, b) {
                    continue;
                }
                // R1: c -> a - b, c and b nonadjacent
                let r1 = (0..p).any(|c| c != b && g.is_directed(c, a) && !g.is_adjacent(c, b));
                // R2: a -> c -> b
                let r2 = || (0..p).any(|c| g.is_directed(a, c) && g.is_directed(c, b));
                // R3: a - c -> b and a - d -> b with c, d nonadjacent
                let r3 = || {
                    let mids: Vec<usize> = (0..p)
                        .filter(|&c| g.is_undirected(a, c) && g.is_directed(c, b))
                        .collect();
                    mids.iter()
                        .enumerate()
                        .any(|(x, &c)| mids[x + 1..].iter().any(|&d| !g.is_adjacent(c, d)))
                };
                if r1 || r2() || r3() {
                    g.set_directed(a, b);
                    changed = true;
                }
            }
        }
        if !changed {
            return g;
        }
    }
}

/// A directed acyclic graph with a cached topological order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(into = "GraphJson")]
pub struct Dag {
    graph: PartiallyDirectedGraph,
    order: Vec<usize>,
}

impl Dag {
    pub fn new(graph: PartiallyDirectedGraph) -> Result<Self> {
        if graph.has_undirected() {
            return Err(Error::GraphContract("a DAG must be fully directed".into()));
        }
        let order = graph.directed_topological_order().ok_or(Error::Cycle)?;
        Ok(Self { graph, order })
    }

    /// DAG from a list of `(from, to)` arcs.
    pub fn from_arcs(p: usize, arcs: &[(usize, usize)]) -> Result<Self> {
        let edges: Vec<_> = arcs.iter().map(|&(a, b)| (a, b, Mark::Forward)).collect();
        Self::new(PartiallyDirectedGraph::from_edges(p, &edges)?)
    }

    pub fn empty(p: usize) -> Self {
        Self {
            graph: PartiallyDirectedGraph::new(p),
            order: (0..p).collect(),
        }
    }

    pub fn p(&self) -> usize {
        self.graph.p()
    }

    pub fn graph(&self) -> &PartiallyDirectedGraph {
        &self.graph
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn parents(&self, i: usize) -> Vec<usize> {
        self.graph.parents(i)
    }

    pub fn arcs(&self) -> Vec<(usize, usize)> {
        self.graph
            .edges()
            .into_iter()
            .map(|(a, b, m)| if m == Mark::Forward { (a, b) } else { (b, a) })
            .collect()
    }

    /// Undirected moral graph: parent-child links plus married co-parents.
    pub fn moral_graph(&self) -> PartiallyDirectedGraph {
        let mut out = skeleton(&self.graph);
        for c in 0..self.p() {
            let pa = self.parents(c);
            for (x, &a) in pa.iter().enumerate() {
                for &b in &pa[x + 1..] {
                    out.set_undirected(a, b);
                }
            }
        }
        out
    }

    pub fn ancestors_of(&self, set: &[usize]) -> Vec<bool> {
        let mut anc = vec![false; self.p()];
        let mut stack: Vec<usize> = set.to_vec();
        for &s in set {
            anc[s] = true;
        }
        while let Some(v) = stack.pop() {
            for u in self.parents(v) {
                if !anc[u] {
                    anc[u] = true;
                    stack.push(u);
                }
            }
        }
        anc
    }
}

/// Equivalence-class representative of a DAG: v-structures kept directed,
/// then closed under R1-R3.
pub fn cpdag_of(d: &Dag) -> Cpdag {
    let mut g = skeleton(d.graph());
    for v in d.graph().v_structures() {
        g.set_directed(v.a, v.collider);
        g.set_directed(v.b, v.collider);
    }
    Cpdag {
        graph: meek_orient(&g),
        extendable: true,
    }
}

/// d-separation of `a` and `b` given `s` (reachability / Bayes-ball).
pub fn d_separated(d: &Dag, a: &[usize], b: &[usize], s: &[usize]) -> Result<bool> {
    let p = d.p();
    let mut in_s = vec![false; p];
    let mut in_b = vec![false; p];
    for &x in a.iter().chain(b).chain(s) {
        if x >= p {
            return Err(Error::GraphContract(format!("node {x} out of range")));
        }
    }
    for &x in s {
        in_s[x] = true;
    }
    for &x in b {
        if in_s[x] {
            return Err(Error::GraphContract("node sets must be disjoint".into()));
        }
        in_b[x] = true;
    }
    for &x in a {
        if in_s[x] || in_b[x] {
            return Err(Error::GraphContract("node sets must be disjoint".into()));
        }
    }
    let anc_s = d.ancestors_of(s);
    // visited[v][0]: reached from a child (moving up), [1]: from a parent (moving down)
    let mut visited = vec![[false; 2]; p];
    let mut queue: VecDeque<(usize, usize)> = a.iter().map(|&x| (x, 0)).collect();
    while let Some((v, dir)) = queue.pop_front() {
        if visited[v][dir] {
            continue;
        }
        visited[v][dir] = true;
        if !in_s[v] && in_b[v] {
            return Ok(false);
        }
        if dir == 0 {
            if !in_s[v] {
                queue.extend(d.parents(v).into_iter().map(|u| (u, 0)));
                queue.extend(d.graph.children(v).into_iter().map(|w| (w, 1)));
            }
        } else {
            if !in_s[v] {
                queue.extend(d.graph.children(v).into_iter().map(|w| (w, 1)));
            }
            if anc_s[v] {
                queue.extend(d.parents(v).into_iter().map(|u| (u, 0)));
            }
        }
    }
    Ok(true)
}

/// A (possibly estimated) CPDAG together with its extendability status.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(into = "GraphJson")]
pub struct Cpdag {
    graph: PartiallyDirectedGraph,
    extendable: bool,
}

impl Cpdag {
    /// Wraps a graph, checking whether a consistent DAG extension exists.
    pub fn from_graph(graph: PartiallyDirectedGraph) -> Self {
        let extendable = graph.consistent_extension().is_some();
        Self { graph, extendable }
    }

    pub fn graph(&self) -> &PartiallyDirectedGraph {
        &self.graph
    }

    pub fn into_graph(self) -> PartiallyDirectedGraph {
        self.graph
    }

    pub fn p(&self) -> usize {
        self.graph.p()
    }

    pub fn is_extendable(&self) -> bool {
        self.extendable
    }
}

/// Orients the undirected edges of `c` at random without creating new
/// v-structures or directed cycles.
///
/// Each attempt repeatedly picks a uniformly random undirected edge, orients it in
/// a random legal direction and re-closes under R1-R3. Up to
/// [`EXTENSION_ATTEMPTS`] attempts are made.
pub fn extend_to_dag<R: Rng + ?Sized>(c: &Cpdag, rng: &mut R) -> Result<Dag> {
    let target = c.graph.v_structures();
    if !c.graph.directed_part_is_acyclic() {
        return Err(Error::InvalidCpdag { attempts: 0 });
    }
    for _ in 0..EXTENSION_ATTEMPTS {
        if let Some(d) = try_extend(&c.graph, &target, rng) {
            return Ok(d);
        }
    }
    Err(Error::InvalidCpdag {
        attempts: EXTENSION_ATTEMPTS,
    })
}

fn try_extend<R: Rng + ?Sized>(
    start: &PartiallyDirectedGraph,
    target: &BTreeSet<VStructure>,
    rng: &mut R,
) -> Option<Dag> {
    let mut g = start.clone();
    loop {
        let und = g.undirected_edges();
        if und.is_empty() {
            break;
        }
        let (a, b) = und[rng.random_range(0..und.len())];
        let dirs = if rng.random_bool(0.5) {
            [(a, b), (b, a)]
        } else {
            [(b, a), (a, b)]
        };
        let (from, to) = dirs
            .into_iter()
            .find(|&(from, to)| legal_orientation(&g, from, to))?;
        g.set_directed(from, to);
        g = meek_orient(&g);
    }
    if g.directed_part_is_acyclic() && g.v_structures() == *target {
        Dag::new(g).ok()
    } else {
        None
    }
}

fn legal_orientation(g: &PartiallyDirectedGraph, from: usize, to: usize) -> bool {
    let new_collider =
        (0..g.p()).any(|x| x != from && g.is_directed(x, to) && !g.is_adjacent(x, from));
    !new_collider && !g.has_directed_path(to, from)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EdgeJson {
    a: usize,
    b: usize,
    mark: String,
}

/// Wire form: `{"p": int, "edges": [{"a", "b", "mark": "undirected"|"a->b"|"b->a"}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphJson {
    p: usize,
    edges: Vec<EdgeJson>,
}

impl From<PartiallyDirectedGraph> for GraphJson {
    fn from(g: PartiallyDirectedGraph) -> Self {
        let edges = g
            .edges()
            .into_iter()
            .map(|(a, b, m)| EdgeJson {
                a,
                b,
                mark: match m {
                    Mark::Undirected => "undirected",
                    Mark::Forward => "a->b",
                    Mark::Backward => "b->a",
                    Mark::Absent => unreachable!(),
                }
                .to_string(),
            })
            .collect();
        GraphJson { p: g.p(), edges }
    }
}

impl From<Dag> for GraphJson {
    fn from(d: Dag) -> Self {
        d.graph.into()
    }
}

impl From<Cpdag> for GraphJson {
    fn from(c: Cpdag) -> Self {
        c.graph.into()
    }
}

impl TryFrom<GraphJson> for PartiallyDirectedGraph {
    type Error = Error;

    fn try_from(j: GraphJson) -> Result<Self> {
        let edges = j
            .edges
            .iter()
            .map(|e| {
                let mark = match e.mark.as_str() {
                    "undirected" => Mark::Undirected,
                    "a->b" => Mark::Forward,
                    "b->a" => Mark::Backward,
                    other => return Err(Error::Input(format!("unknown edge mark {other:?}"))),
                };
                Ok((e.a, e.b, mark))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_edges(j.p, &edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn graph(p: usize, edges: &[(usize, usize, Mark)]) -> PartiallyDirectedGraph {
        PartiallyDirectedGraph::from_edges(p, edges).unwrap()
    }

    #[test]
    fn skeleton_drops_arrowheads() {
        let g = graph(3, &[(0, 1, Mark::Forward), (1, 2, Mark::Undirected)]);
        let s = skeleton(&g);
        assert!(s.is_undirected(0, 1) && s.is_undirected(1, 2) && !s.is_adjacent(0, 2));
        assert_eq!(
            skeleton(&PartiallyDirectedGraph::new(4)),
            PartiallyDirectedGraph::new(4)
        );
        let d = Dag::from_arcs(3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        assert_eq!(skeleton(d.graph()), PartiallyDirectedGraph::complete(3));
    }

    #[test]
    fn acyclicity() {
        assert!(is_acyclic(&graph(3, &[(0, 1, Mark::Forward), (1, 2, Mark::Forward)])).unwrap());
        // a two-cycle cannot even be represented: one mark per pair
        assert!(PartiallyDirectedGraph::from_edges(
            2,
            &[(0, 1, Mark::Forward), (1, 0, Mark::Forward)]
        )
        .is_err());
        let cyc = graph(
            3,
            &[
                (0, 1, Mark::Forward),
                (1, 2, Mark::Forward),
                (2, 0, Mark::Forward),
            ],
        );
        assert!(!is_acyclic(&cyc).unwrap());
        assert_eq!(Dag::new(cyc).unwrap_err(), Error::Cycle);
        assert!(is_acyclic(&graph(2, &[(0, 1, Mark::Undirected)])).is_err());
    }

    #[test]
    fn meek_rules() {
        let r1 = meek_orient(&graph(
            3,
            &[(0, 1, Mark::Forward), (1, 2, Mark::Undirected)],
        ));
        assert!(r1.is_directed(1, 2));
        let r2 = meek_orient(&graph(
            3,
            &[
                (0, 1, Mark::Undirected),
                (0, 2, Mark::Forward),
                (2, 1, Mark::Forward),
            ],
        ));
        assert!(r2.is_directed(0, 1));
        // a - c -> b, a - d -> b, a - b, c and d nonadjacent
        let r3 = meek_orient(&graph(
            4,
            &[
                (0, 1, Mark::Undirected),
                (0, 2, Mark::Undirected),
                (0, 3, Mark::Undirected),
                (2, 1, Mark::Forward),
                (3, 1, Mark::Forward),
            ],
        ));
        assert!(r3.is_directed(0, 1));
        let tree = graph(
            4,
            &[
                (0, 1, Mark::Undirected),
                (1, 2, Mark::Undirected),
                (1, 3, Mark::Undirected),
            ],
        );
        assert_eq!(meek_orient(&tree), tree);
    }

    #[test]
    fn cpdag_examples() {
        let collider = Dag::from_arcs(3, &[(0, 1), (2, 1)]).unwrap();
        assert_eq!(cpdag_of(&collider).graph(), collider.graph());
        let chain = Dag::from_arcs(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(*cpdag_of(&chain).graph(), skeleton(chain.graph()));
        let complete = Dag::from_arcs(3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        assert_eq!(
            *cpdag_of(&complete).graph(),
            PartiallyDirectedGraph::complete(3)
        );
    }

    #[test]
    fn chain_extensions_never_collide() {
        let c = Cpdag::from_graph(graph(
            3,
            &[(0, 1, Mark::Undirected), (1, 2, Mark::Undirected)],
        ));
        let mut rng = rng_from_seed(3);
        let mut seen = BTreeSet::new();
        for _ in 0..200 {
            let d = extend_to_dag(&c, &mut rng).unwrap();
            assert!(d.graph().v_structures().is_empty());
            seen.insert(d.arcs());
        }
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn directed_cpdag_extends_to_itself() {
        let d = Dag::from_arcs(4, &[(0, 2), (1, 2), (2, 3)]).unwrap();
        let c = cpdag_of(&d);
        assert_eq!(extend_to_dag(&c, &mut rng_from_seed(0)).unwrap(), d);
    }

    #[test]
    fn non_extendable_pattern_is_flagged() {
        // undirected 4-cycle without a chord has no consistent extension
        let g = graph(
            4,
            &[
                (0, 1, Mark::Undirected),
                (1, 2, Mark::Undirected),
                (2, 3, Mark::Undirected),
                (3, 0, Mark::Undirected),
            ],
        );
        let c = Cpdag::from_graph(g);
        assert!(!c.is_extendable());
        assert!(matches!(
            extend_to_dag(&c, &mut rng_from_seed(1)),
            Err(Error::InvalidCpdag { .. })
        ));
    }

    #[test]
    fn d_separation_examples() {
        let chain = Dag::from_arcs(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(!d_separated(&chain, &[0], &[2], &[]).unwrap());
        assert!(d_separated(&chain, &[0], &[2], &[1]).unwrap());
        let collider = Dag::from_arcs(4, &[(0, 1), (2, 1), (1, 3)]).unwrap();
        assert!(d_separated(&collider, &[0], &[2], &[]).unwrap());
        assert!(!d_separated(&collider, &[0], &[2], &[1]).unwrap());
        assert!(!d_separated(&collider, &[0], &[2], &[3]).unwrap());
        assert!(d_separated(&collider, &[0], &[0], &[]).is_err());
        assert!(d_separated(&collider, &[0], &[9], &[]).is_err());
    }

    #[test]
    fn moral_graph_marries_parents() {
        let d = Dag::from_arcs(3, &[(0, 2), (1, 2)]).unwrap();
        let m = d.moral_graph();
        assert!(m.is_undirected(0, 1) && m.is_undirected(0, 2) && m.is_undirected(1, 2));
    }

    #[test]
    fn json_round_trip() {
        let g = graph(
            3,
            &[
                (0, 1, Mark::Forward),
                (2, 1, Mark::Forward),
                (0, 2, Mark::Undirected),
            ],
        );
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(
            text,
            r#"{"p":3,"edges":[{"a":0,"b":1,"mark":"a->b"},{"a":0,"b":2,"mark":"undirected"},{"a":1,"b":2,"mark":"b->a"}]}"#
        );
        let back: PartiallyDirectedGraph = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<PartiallyDirectedGraph>(
            r#"{"p":2,"edges":[{"a":0,"b":5,"mark":"undirected"}]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<PartiallyDirectedGraph>(
            r#"{"p":2,"edges":[{"a":0,"b":1,"mark":"sideways"}]}"#
        )
        .is_err());
    }
}
