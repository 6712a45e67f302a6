//! Single-root, single-leaf DAGs and their cut-point structure.
//!
//! The evaluation design needs more than a plain DAG: it relies on the fact
//! that, for a graph with one root and one leaf, the biconnected components
//! of the undirected skeleton form a *chain* whose junctions are cut points.
//! Collapsing each component to an edge yields the **cut-point tree (CCT)**:
//! the complete DAG over `[root, cut points…, leaf]` in topological order.
//! Every CCT edge is a causal quantity worth estimating; every root→leaf
//! path through the CCT is a composition whose product must reproduce the
//! global quantity.
//!
//! Key concepts:
//! - [`Dag::try_new`] enforces *structural* well-formedness (unique names,
//!   known endpoints, acyclicity).
//! - [`Dag::validate_assumptions`] enforces the *modeling* assumptions:
//!   single root, single leaf, at least one cut point. (The remaining
//!   assumption — no unobserved confounding — is not checkable from the
//!   graph alone and is treated as given.)
//! - [`find_bccs`] partitions the edges into biconnected components via an
//!   iterative articulation-point DFS with an explicit edge stack.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a node within a [`Dag`] (position in its name list).
pub type NodeIdx = usize;

// ── Errors ──────────────────────────────────────────────────────────────────

/// The modeling assumptions a task graph must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// Exactly one node without parents, and it is the declared root.
    SingleRoot,
    /// Exactly one node without children, and it is the declared leaf.
    SingleLeaf,
    /// The skeleton has at least one cut point, so the CCT is nontrivial.
    CutPointExists,
    /// No unobserved confounders. Not checkable from the graph; assumed.
    Markovian,
}

impl std::fmt::Display for Assumption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Assumption::SingleRoot => "single-root",
            Assumption::SingleLeaf => "single-leaf",
            Assumption::CutPointExists => "cut-point-exists",
            Assumption::Markovian => "markovian",
        };
        f.write_str(name)
    }
}

/// Why a graph was rejected.
///
/// Structural defects (malformed input) are kept distinct from assumption
/// violations (well-formed DAG, wrong shape for this evaluation design).
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid graph structure: {0}")]
    Structure(String),
    #[error("{code} assumption violated: {detail}")]
    Assumption { code: Assumption, detail: String },
    #[error("no directed path from {from} to {to}")]
    NoDirectedPath { from: String, to: String },
}

// ── Dag ─────────────────────────────────────────────────────────────────────

/// Serialized form: node names, name-pair edges, declared root and leaf.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct DagJson {
    nodes: Vec<String>,
    edges: Vec<(String, String)>,
    root: String,
    leaf: String,
}

/// A validated directed acyclic graph with a declared root and leaf.
///
/// Construction ([`Dag::try_new`]) guarantees structural well-formedness
/// only; call [`Dag::validate_assumptions`] before using the graph for
/// compositional evaluation.
#[derive(Debug, Clone, Serialize)]
#[serde(into = "DagJson")]
pub struct Dag {
    names: Vec<String>,
    edges: Vec<(NodeIdx, NodeIdx)>,
    root: NodeIdx,
    leaf: NodeIdx,
    parents: Vec<Vec<NodeIdx>>,
    children: Vec<Vec<NodeIdx>>,
    /// `topo_pos[v]` = position of `v` in a deterministic topological order.
    topo_pos: Vec<usize>,
    /// Node indices sorted topologically.
    topo: Vec<NodeIdx>,
}

impl<'de> Deserialize<'de> for Dag {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = DagJson::deserialize(de)?;
        Dag::try_from(raw).map_err(serde::de::Error::custom)
    }
}

impl From<Dag> for DagJson {
    fn from(dag: Dag) -> Self {
        let name = |i: NodeIdx| dag.names[i].clone();
        DagJson {
            nodes: dag.names.clone(),
            edges: dag.edges.iter().map(|&(a, b)| (name(a), name(b))).collect(),
            root: name(dag.root),
            leaf: name(dag.leaf),
        }
    }
}

impl TryFrom<DagJson> for Dag {
    type Error = GraphError;
    fn try_from(raw: DagJson) -> Result<Self, GraphError> {
        let edges: Vec<(&str, &str)> = raw
            .edges
            .iter()
            .map(|(a, b)| (a.as_str(), b.as_str()))
            .collect();
        Dag::try_new(raw.nodes.clone(), &edges, &raw.root, &raw.leaf)
    }
}

impl Dag {
    /// Build a DAG from node names and name-pair edges.
    ///
    /// Rejects duplicate or empty names, unknown edge endpoints, self-loops,
    /// duplicate edges, and cycles. The declared root/leaf must be known
    /// names; whether they really are the unique root/leaf is checked by
    /// [`Dag::validate_assumptions`], not here.
    pub fn try_new(
        names: Vec<String>,
        edges: &[(&str, &str)],
        root: &str,
        leaf: &str,
    ) -> Result<Self, GraphError> {
        if names.is_empty() {
            return Err(GraphError::Structure("no nodes".into()));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(GraphError::Structure("empty node name".into()));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(GraphError::Structure(format!("duplicate node name {name:?}")));
            }
        }
        let resolve = |name: &str| -> Result<NodeIdx, GraphError> {
            index
                .get(name)
                .copied()
                .ok_or_else(|| GraphError::Structure(format!("unknown node {name:?}")))
        };

        let n = names.len();
        let mut idx_edges = Vec::with_capacity(edges.len());
        let mut seen = std::collections::HashSet::new();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(a, b) in edges {
            let (u, v) = (resolve(a)?, resolve(b)?);
            if u == v {
                return Err(GraphError::Structure(format!("self-loop on {a:?}")));
            }
            if !seen.insert((u, v)) {
                return Err(GraphError::Structure(format!("duplicate edge {a:?} -> {b:?}")));
            }
            idx_edges.push((u, v));
            children[u].push(v);
            parents[v].push(u);
        }

        // Kahn's algorithm; ties broken by node index so the order is
        // deterministic for a given name list.
        let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut ready: std::collections::BTreeSet<NodeIdx> =
            (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            topo.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if topo.len() != n {
            return Err(GraphError::Structure("graph contains a directed cycle".into()));
        }
        let mut topo_pos = vec![0; n];
        for (pos, &v) in topo.iter().enumerate() {
            topo_pos[v] = pos;
        }

        // Parent/child lists in topological order: downstream code relies on
        // deterministic iteration.
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_by_key(|&v| topo_pos[v]);
        }

        Ok(Dag {
            root: resolve(root)?,
            leaf: resolve(leaf)?,
            names,
            edges: idx_edges,
            parents,
            children,
            topo_pos,
            topo,
        })
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    /// True when the graph has no nodes (unreachable after `try_new`).
    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, v: NodeIdx) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Look up a node index by name.
    pub fn index_of(&self, name: &str) -> Option<NodeIdx> {
        self.names.iter().position(|n| n == name)
    }

    pub fn root(&self) -> NodeIdx {
        self.root
    }

    pub fn leaf(&self) -> NodeIdx {
        self.leaf
    }

    pub fn edges(&self) -> &[(NodeIdx, NodeIdx)] {
        &self.edges
    }

    pub fn parents(&self, v: NodeIdx) -> &[NodeIdx] {
        &self.parents[v]
    }

    pub fn children(&self, v: NodeIdx) -> &[NodeIdx] {
        &self.children[v]
    }

    /// Nodes in a deterministic topological order.
    pub fn topo_order(&self) -> &[NodeIdx] {
        &self.topo
    }

    /// Position of `v` in [`Dag::topo_order`].
    pub fn topo_pos(&self, v: NodeIdx) -> usize {
        self.topo_pos[v]
    }

    /// `mask[v]` = true for `from` and everything reachable from it.
    pub fn reachable_from(&self, from: NodeIdx) -> Vec<bool> {
        self.reach(from, false)
    }

    /// `mask[v]` = true for `to` and everything that reaches it.
    pub fn reaching_to(&self, to: NodeIdx) -> Vec<bool> {
        self.reach(to, true)
    }

    fn reach(&self, start: NodeIdx, backwards: bool) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        mask[start] = true;
        let mut queue = vec![start];
        while let Some(v) = queue.pop() {
            let next = if backwards { &self.parents[v] } else { &self.children[v] };
            for &w in next {
                if !mask[w] {
                    mask[w] = true;
                    queue.push(w);
                }
            }
        }
        mask
    }

    /// Check the modeling assumptions (single root, single leaf, at least
    /// one cut point). Returns the decomposition so callers don't pay for
    /// the articulation DFS twice.
    pub fn validate_assumptions(&self) -> Result<BccDecomposition, GraphError> {
        let parentless: Vec<NodeIdx> =
            (0..self.len()).filter(|&v| self.parents[v].is_empty()).collect();
        if parentless != [self.root] {
            let found: Vec<&str> = parentless.iter().map(|&v| self.name(v)).collect();
            return Err(GraphError::Assumption {
                code: Assumption::SingleRoot,
                detail: format!(
                    "declared root {:?}, parentless nodes {:?}",
                    self.name(self.root),
                    found
                ),
            });
        }
        let childless: Vec<NodeIdx> =
            (0..self.len()).filter(|&v| self.children[v].is_empty()).collect();
        if childless != [self.leaf] {
            let found: Vec<&str> = childless.iter().map(|&v| self.name(v)).collect();
            return Err(GraphError::Assumption {
                code: Assumption::SingleLeaf,
                detail: format!(
                    "declared leaf {:?}, childless nodes {:?}",
                    self.name(self.leaf),
                    found
                ),
            });
        }
        let bcc = find_bccs(self)?;
        if bcc.cut_points.is_empty() {
            return Err(GraphError::Assumption {
                code: Assumption::CutPointExists,
                detail: "skeleton is biconnected; the cut-point tree would be trivial".into(),
            });
        }
        Ok(bcc)
    }
}

// ── Biconnected components ──────────────────────────────────────────────────

/// One biconnected component of the skeleton, read as a causal segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BccComponent {
    /// Directed edges belonging to the component, ordered topologically.
    pub edges: Vec<(NodeIdx, NodeIdx)>,
    /// Nodes of the component in topological order.
    pub nodes: Vec<NodeIdx>,
    /// Entry node: the root or a cut point; topologically first.
    pub entry: NodeIdx,
    /// Exit node: the leaf or a cut point; topologically last.
    pub exit: NodeIdx,
}

/// Edge partition of the skeleton into biconnected components.
///
/// For a graph satisfying the single-root/single-leaf assumptions the
/// components form a chain: `components[i].exit == components[i+1].entry`,
/// and those junction nodes are exactly the cut points.
#[derive(Debug, Clone)]
pub struct BccDecomposition {
    /// Components ordered from root side to leaf side.
    pub components: Vec<BccComponent>,
    /// Cut points in topological order.
    pub cut_points: Vec<NodeIdx>,
}

/// A DFS frame for the iterative articulation-point search.
struct DfsFrame {
    node: NodeIdx,
    /// Edge id the DFS arrived by (`usize::MAX` at a DFS root).
    in_edge: usize,
    /// Next position to inspect in the adjacency list of `node`.
    cursor: usize,
    /// Tree children discovered so far (cut-point rule for DFS roots).
    kids: usize,
}

/// Partition the edges of the undirected skeleton into biconnected
/// components and identify cut points.
///
/// Iterative DFS with discovery/low-link values and an explicit edge stack;
/// a component is popped whenever a finished subtree cannot reach above its
/// parent. For the single-root graphs used here the result is additionally
/// checked to form a root→leaf chain.
pub fn find_bccs(dag: &Dag) -> Result<BccDecomposition, GraphError> {
    let n = dag.len();
    // Undirected adjacency with edge ids so the DFS can skip the edge it
    // arrived by (and only that one).
    let mut adj: Vec<Vec<(NodeIdx, usize)>> = vec![Vec::new(); n];
    for (eid, &(u, v)) in dag.edges().iter().enumerate() {
        adj[u].push((v, eid));
        adj[v].push((u, eid));
    }

    const UNSET: usize = usize::MAX;
    let mut disc = vec![UNSET; n];
    let mut low = vec![UNSET; n];
    let mut is_cut = vec![false; n];
    let mut timer = 0usize;
    let mut edge_stack: Vec<usize> = Vec::new();
    let mut components_edges: Vec<Vec<usize>> = Vec::new();
    let mut frames: Vec<DfsFrame> = Vec::new();

    for start in 0..n {
        if disc[start] != UNSET {
            continue;
        }
        disc[start] = timer;
        low[start] = timer;
        timer += 1;
        frames.push(DfsFrame { node: start, in_edge: UNSET, cursor: 0, kids: 0 });

        while let Some(top) = frames.last_mut() {
            let v = top.node;
            if top.cursor < adj[v].len() {
                let (w, eid) = adj[v][top.cursor];
                top.cursor += 1;
                if eid == top.in_edge {
                    continue;
                }
                if disc[w] == UNSET {
                    top.kids += 1;
                    edge_stack.push(eid);
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    frames.push(DfsFrame { node: w, in_edge: eid, cursor: 0, kids: 0 });
                } else if disc[w] < disc[v] {
                    // Back edge to an ancestor still on the DFS path. (The
                    // disc[w] > disc[v] case is the same edge seen from the
                    // other endpoint; it was pushed there.)
                    edge_stack.push(eid);
                    low[v] = low[v].min(disc[w]);
                }
                continue;
            }

            // `v` is finished.
            let kids = top.kids;
            frames.pop();
            if let Some(parent_frame) = frames.last() {
                let parent = parent_frame.node;
                low[parent] = low[parent].min(low[v]);
                if low[v] >= disc[parent] {
                    // `parent` separates the finished subtree: pop one
                    // component — every stacked edge touching the subtree,
                    // down to and including the tree edge into `v`.
                    if frames.len() > 1 {
                        is_cut[parent] = true;
                    }
                    let mut comp = Vec::new();
                    while let Some(&eid) = edge_stack.last() {
                        let (a, b) = dag.edges()[eid];
                        if disc[a].max(disc[b]) < disc[v] {
                            break;
                        }
                        edge_stack.pop();
                        comp.push(eid);
                    }
                    components_edges.push(comp);
                }
            } else if kids >= 2 {
                // A DFS root is a cut point iff it has two or more tree
                // children.
                is_cut[v] = true;
            }
        }
    }

    if components_edges.iter().map(Vec::len).sum::<usize>() != dag.edges().len() {
        return Err(GraphError::Structure(
            "biconnected decomposition did not partition the edges (disconnected skeleton?)".into(),
        ));
    }

    let mut components: Vec<BccComponent> = components_edges
        .into_iter()
        .map(|eids| {
            let mut edges: Vec<(NodeIdx, NodeIdx)> =
                eids.iter().map(|&e| dag.edges()[e]).collect();
            edges.sort_by_key(|&(a, b)| (dag.topo_pos(a), dag.topo_pos(b)));
            let mut nodes: Vec<NodeIdx> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
            nodes.sort_by_key(|&v| dag.topo_pos(v));
            nodes.dedup();
            let entry = nodes[0];
            let exit = *nodes.last().expect("component has nodes");
            BccComponent { edges, nodes, entry, exit }
        })
        .collect();
    components.sort_by_key(|c| dag.topo_pos(c.entry));

    let mut cut_points: Vec<NodeIdx> = (0..n).filter(|&v| is_cut[v]).collect();
    cut_points.sort_by_key(|&v| dag.topo_pos(v));

    // Defensive: single-root/single-leaf graphs must chain their components.
    for pair in components.windows(2) {
        if pair[0].exit != pair[1].entry {
            return Err(GraphError::Structure(format!(
                "biconnected components do not chain: one exits at {} but the next enters at {}",
                dag.name(pair[0].exit),
                dag.name(pair[1].entry),
            )));
        }
    }

    Ok(BccDecomposition { components, cut_points })
}

// ── Cut-point tree ──────────────────────────────────────────────────────────

/// The cut-point tree: complete DAG over `[root, cut points…, leaf]`.
///
/// Stored as the topologically ordered node chain; the edge set is implicit
/// (every ordered pair).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cct {
    chain: Vec<NodeIdx>,
}

/// A root→leaf path through the CCT, with the pair quantities it composes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Composition {
    /// Path nodes, including root and leaf.
    pub nodes: Vec<NodeIdx>,
    /// Consecutive pairs along the path.
    pub edges: Vec<(NodeIdx, NodeIdx)>,
}

/// Everything to estimate for one task: the global pair, the other CCT
/// pairs, and the path compositions to check against the global estimate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantityPlan {
    pub global: (NodeIdx, NodeIdx),
    pub locals: Vec<(NodeIdx, NodeIdx)>,
    pub compositions: Vec<Composition>,
}

impl QuantityPlan {
    /// Global pair first, then the locals — every quantity to estimate.
    pub fn all_pairs(&self) -> Vec<(NodeIdx, NodeIdx)> {
        let mut out = vec![self.global];
        out.extend_from_slice(&self.locals);
        out
    }
}

impl Cct {
    /// Build the CCT from a validated decomposition.
    pub fn build(dag: &Dag, bcc: &BccDecomposition) -> Cct {
        let mut chain = Vec::with_capacity(bcc.cut_points.len() + 2);
        chain.push(dag.root());
        chain.extend_from_slice(&bcc.cut_points);
        chain.push(dag.leaf());
        Cct { chain }
    }

    /// The chain `[root, cut points…, leaf]` in topological order.
    pub fn chain(&self) -> &[NodeIdx] {
        &self.chain
    }

    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }

    /// All ordered pairs `(chain[i], chain[j])`, `i < j`, lexicographic by
    /// position — the CCT's edges, i.e. the causal quantities of the task.
    pub fn pairs(&self) -> Vec<(NodeIdx, NodeIdx)> {
        let mut out = Vec::new();
        for i in 0..self.chain.len() {
            for j in (i + 1)..self.chain.len() {
                out.push((self.chain[i], self.chain[j]));
            }
        }
        out
    }

    /// All `2^(len-2)` root→leaf paths, ordered by the bitmask over interior
    /// nodes (the direct root→leaf edge first).
    pub fn paths(&self) -> Vec<Composition> {
        let interior = &self.chain[1..self.chain.len() - 1];
        let mut out = Vec::with_capacity(1 << interior.len());
        for mask in 0u64..(1u64 << interior.len()) {
            let mut nodes = vec![self.chain[0]];
            for (k, &node) in interior.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    nodes.push(node);
                }
            }
            nodes.push(*self.chain.last().expect("chain nonempty"));
            let edges = nodes.windows(2).map(|w| (w[0], w[1])).collect();
            out.push(Composition { nodes, edges });
        }
        out
    }

    /// The estimation plan: the global pair, `C(n,2) - 1` local pairs, and
    /// `2^(n-2) - 1` compositions (all paths except the direct edge).
    pub fn quantity_plan(&self) -> QuantityPlan {
        let global = (self.chain[0], *self.chain.last().expect("chain nonempty"));
        let locals = self.pairs().into_iter().filter(|&p| p != global).collect();
        let compositions = self
            .paths()
            .into_iter()
            .filter(|p| p.nodes.len() > 2)
            .collect();
        QuantityPlan { global, locals, compositions }
    }
}

// ── Path statistics ─────────────────────────────────────────────────────────

/// Mediation structure of one cause→effect pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStats {
    /// Length (in edges) of the shortest directed path.
    pub shortest: usize,
    /// Number of mediators: nodes lying strictly between cause and effect
    /// on some directed path.
    pub mediators: usize,
}

/// Shortest-path length and mediator count for a cause→effect pair.
pub fn path_stats(dag: &Dag, cause: NodeIdx, effect: NodeIdx) -> Result<PathStats, GraphError> {
    // BFS over directed edges for the shortest hop count.
    let mut dist = vec![usize::MAX; dag.len()];
    dist[cause] = 0;
    let mut queue = std::collections::VecDeque::from([cause]);
    while let Some(v) = queue.pop_front() {
        for &w in dag.children(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    if dist[effect] == usize::MAX {
        return Err(GraphError::NoDirectedPath {
            from: dag.name(cause).to_string(),
            to: dag.name(effect).to_string(),
        });
    }
    let downstream = dag.reachable_from(cause);
    let upstream = dag.reaching_to(effect);
    let mediators = (0..dag.len())
        .filter(|&v| v != cause && v != effect && downstream[v] && upstream[v])
        .count();
    Ok(PathStats { shortest: dist[effect], mediators })
}

// ── Tests ───────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(names: &[&str], edges: &[(&str, &str)], root: &str, leaf: &str) -> Dag {
        Dag::try_new(names.iter().map(|s| s.to_string()).collect(), edges, root, leaf)
            .expect("valid dag")
    }

    /// Three-diamond chain: A..D, D..G, G..J share cut points D and G… — a
    /// four-block "cactus" A..M with cut points D, G, J.
    fn cactus() -> Dag {
        dag(
            &["A", "B", "C", "D", "E", "F", "G", "H", "I", "J", "K", "L", "M"],
            &[
                ("A", "B"), ("A", "C"), ("B", "D"), ("C", "D"),
                ("D", "E"), ("D", "F"), ("E", "G"), ("F", "G"),
                ("G", "H"), ("G", "I"), ("H", "J"), ("I", "J"),
                ("J", "K"), ("J", "L"), ("K", "M"), ("L", "M"),
            ],
            "A",
            "M",
        )
    }

    /// Two fused cycles plus a bridge: X,A,B,C | C,D | D,E,F,Y.
    fn eight_node() -> Dag {
        dag(
            &["X", "A", "B", "C", "D", "E", "F", "Y"],
            &[
                ("X", "A"), ("X", "B"), ("X", "C"), ("A", "C"), ("B", "C"),
                ("C", "D"),
                ("D", "E"), ("D", "F"), ("E", "F"), ("E", "Y"), ("F", "Y"),
            ],
            "X",
            "Y",
        )
    }

    #[test]
    fn rejects_cycles() {
        let err = Dag::try_new(
            vec!["A".into(), "B".into(), "C".into()],
            &[("A", "B"), ("B", "C"), ("C", "A")],
            "A",
            "C",
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::Structure(_)));
    }

    #[test]
    fn rejects_duplicate_names_and_edges() {
        assert!(Dag::try_new(vec!["A".into(), "A".into()], &[], "A", "A").is_err());
        assert!(Dag::try_new(
            vec!["A".into(), "B".into()],
            &[("A", "B"), ("A", "B")],
            "A",
            "B"
        )
        .is_err());
    }

    #[test]
    fn single_root_violation_is_reported_as_assumption() {
        let g = dag(&["A", "B", "C"], &[("A", "C"), ("B", "C")], "A", "C");
        match g.validate_assumptions() {
            Err(GraphError::Assumption { code, .. }) => {
                assert_eq!(code, Assumption::SingleRoot)
            }
            other => panic!("expected single-root violation, got {other:?}"),
        }
    }

    #[test]
    fn single_leaf_violation_is_reported_as_assumption() {
        let g = dag(&["A", "B", "C"], &[("A", "B"), ("A", "C")], "A", "C");
        match g.validate_assumptions() {
            Err(GraphError::Assumption { code, .. }) => {
                assert_eq!(code, Assumption::SingleLeaf)
            }
            other => panic!("expected single-leaf violation, got {other:?}"),
        }
    }

    #[test]
    fn biconnected_graph_fails_cut_point_assumption() {
        // A diamond is 2-connected: no cut point.
        let g = dag(&["A", "B", "C", "D"], &[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")], "A", "D");
        match g.validate_assumptions() {
            Err(GraphError::Assumption { code, .. }) => {
                assert_eq!(code, Assumption::CutPointExists)
            }
            other => panic!("expected cut-point violation, got {other:?}"),
        }
    }

    #[test]
    fn chain_graph_decomposes_into_edge_components() {
        let g = dag(&["A", "B", "C", "D"], &[("A", "B"), ("B", "C"), ("C", "D")], "A", "D");
        let bcc = g.validate_assumptions().expect("chain satisfies assumptions");
        assert_eq!(bcc.components.len(), 3);
        assert_eq!(
            bcc.cut_points,
            vec![g.index_of("B").unwrap(), g.index_of("C").unwrap()]
        );
        for comp in &bcc.components {
            assert_eq!(comp.edges.len(), 1);
            assert_eq!(comp.nodes.len(), 2);
        }
    }

    #[test]
    fn cactus_has_three_cut_points_and_four_blocks() {
        let g = cactus();
        let bcc = g.validate_assumptions().expect("cactus satisfies assumptions");
        let names: Vec<&str> = bcc.cut_points.iter().map(|&v| g.name(v)).collect();
        assert_eq!(names, vec!["D", "G", "J"]);
        assert_eq!(bcc.components.len(), 4);
        for comp in &bcc.components {
            assert_eq!(comp.nodes.len(), 4);
            assert_eq!(comp.edges.len(), 4);
        }
        // Entry/exit chain: A→D→G→J→M.
        let entries: Vec<&str> = bcc.components.iter().map(|c| g.name(c.entry)).collect();
        let exits: Vec<&str> = bcc.components.iter().map(|c| g.name(c.exit)).collect();
        assert_eq!(entries, vec!["A", "D", "G", "J"]);
        assert_eq!(exits, vec!["D", "G", "J", "M"]);
    }

    #[test]
    fn eight_node_graph_has_cut_points_c_and_d() {
        let g = eight_node();
        let bcc = g.validate_assumptions().expect("satisfies assumptions");
        let names: Vec<&str> = bcc.cut_points.iter().map(|&v| g.name(v)).collect();
        assert_eq!(names, vec!["C", "D"]);
        let sizes: Vec<usize> = bcc.components.iter().map(|c| c.edges.len()).collect();
        assert_eq!(sizes, vec![5, 1, 5]);
    }

    #[test]
    fn cct_chain_pairs_and_paths() {
        let g = eight_node();
        let bcc = g.validate_assumptions().unwrap();
        let cct = Cct::build(&g, &bcc);
        let chain: Vec<&str> = cct.chain().iter().map(|&v| g.name(v)).collect();
        assert_eq!(chain, vec!["X", "C", "D", "Y"]);
        assert_eq!(cct.pairs().len(), 6);
        let paths = cct.paths();
        assert_eq!(paths.len(), 4);
        // Direct edge first, then by interior bitmask.
        assert_eq!(paths[0].nodes.len(), 2);
        assert_eq!(paths[3].nodes.len(), 4);
        let plan = cct.quantity_plan();
        assert_eq!(plan.global, (g.index_of("X").unwrap(), g.index_of("Y").unwrap()));
        assert_eq!(plan.locals.len(), 5);
        assert_eq!(plan.compositions.len(), 3);
    }

    #[test]
    fn cct_growth_matches_closed_forms() {
        // Chains of bridges: n nodes → n-2 cut points, C(n,2) pairs,
        // 2^(n-2) root→leaf paths.
        for n in 3..=11usize {
            let names: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
            let edge_names: Vec<(String, String)> = (0..n - 1)
                .map(|i| (format!("N{i}"), format!("N{}", i + 1)))
                .collect();
            let edges: Vec<(&str, &str)> =
                edge_names.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            let g = Dag::try_new(names, &edges, "N0", &format!("N{}", n - 1)).unwrap();
            let bcc = g.validate_assumptions().unwrap();
            assert_eq!(bcc.cut_points.len(), n - 2);
            let cct = Cct::build(&g, &bcc);
            assert_eq!(cct.pairs().len(), n * (n - 1) / 2);
            assert_eq!(cct.paths().len(), 1 << (n - 2));
            let plan = cct.quantity_plan();
            assert_eq!(plan.locals.len(), n * (n - 1) / 2 - 1);
            assert_eq!(plan.compositions.len(), (1 << (n - 2)) - 1);
        }
    }

    #[test]
    fn path_stats_on_the_eight_node_graph() {
        let g = eight_node();
        let idx = |s: &str| g.index_of(s).unwrap();
        let cases = [
            ("X", "C", 1, 2),
            ("X", "D", 2, 3),
            ("X", "Y", 4, 6),
            ("C", "D", 1, 0),
            ("C", "Y", 3, 3),
            ("D", "Y", 2, 2),
        ];
        for (a, b, shortest, mediators) in cases {
            let stats = path_stats(&g, idx(a), idx(b)).unwrap();
            assert_eq!(stats.shortest, shortest, "shortest {a}->{b}");
            assert_eq!(stats.mediators, mediators, "mediators {a}->{b}");
        }
        assert!(path_stats(&g, idx("Y"), idx("X")).is_err());
    }

    #[test]
    fn dag_json_round_trip() {
        let g = eight_node();
        let json = serde_json::to_string(&g).unwrap();
        let back: Dag = serde_json::from_str(&json).unwrap();
        assert_eq!(back.names(), g.names());
        assert_eq!(back.edges(), g.edges());
        assert_eq!(back.root(), g.root());
        assert_eq!(back.leaf(), g.leaf());
        // Malformed input is rejected at deserialization time.
        let bad = r#"{"nodes":["A","B"],"edges":[["A","B"],["B","A"]],"root":"A","leaf":"B"}"#;
        assert!(serde_json::from_str::<Dag>(bad).is_err());
    }
}
