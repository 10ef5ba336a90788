//! Undirected trees, their rooted views and weighted adjacency matrices.
//!
//! Vertices are dense `0..d` indices. A [`TreeTopology`] also carries a label
//! per vertex so that model files can use arbitrary names.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

/// Index of a vertex inside a tree.
pub type Vertex = usize;

/// Unordered edge, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub u: Vertex,
    pub v: Vertex,
}

impl Edge {
    pub fn new(a: Vertex, b: Vertex) -> Self {
        if a <= b {
            Edge { u: a, v: b }
        } else {
            Edge { u: b, v: a }
        }
    }

    /// The endpoint that is not `w`, if `w` is an endpoint.
    pub fn other(&self, w: Vertex) -> Option<Vertex> {
        if w == self.u {
            Some(self.v)
        } else if w == self.v {
            Some(self.u)
        } else {
            None
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.u, self.v)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("a tree needs at least one vertex")]
    Empty,
    #[error("vertex index {index} out of range for {d} vertices")]
    IndexOutOfRange { index: usize, d: usize },
    #[error("self loop on vertex {0}")]
    SelfLoop(Vertex),
    #[error("duplicate edge {0}")]
    DuplicateEdge(Edge),
    #[error("edge {0} closes a cycle")]
    CycleDetected(Edge),
    #[error("vertex {0} is not connected to vertex 0")]
    Disconnected(Vertex),
    #[error("label count {labels} does not match vertex count {d}")]
    LabelCount { labels: usize, d: usize },
    #[error("duplicate vertex label {0:?}")]
    DuplicateLabel(String),
    #[error("no weight given for edge {0}")]
    MissingEdgeWeight(Edge),
}

/// A validated undirected tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeTopology {
    labels: Vec<String>,
    edges: Vec<Edge>,
    // (neighbor, edge index) per vertex, neighbors ascending
    adjacency: Vec<Vec<(Vertex, usize)>>,
}

/// Build and validate a tree on `d` vertices labelled `"0".."d-1"`.
pub fn build_tree(d: usize, edges: &[(Vertex, Vertex)]) -> Result<TreeTopology, TreeError> {
    let labels = (0..d).map(|i| i.to_string()).collect();
    TreeTopology::with_labels(labels, edges)
}

impl TreeTopology {
    pub fn with_labels(
        labels: Vec<String>,
        edges: &[(Vertex, Vertex)],
    ) -> Result<TreeTopology, TreeError> {
        let d = labels.len();
        if d == 0 {
            return Err(TreeError::Empty);
        }
        let mut seen_labels = HashSet::with_capacity(d);
        for label in &labels {
            if !seen_labels.insert(label.as_str()) {
                return Err(TreeError::DuplicateLabel(label.clone()));
            }
        }

        let mut dsu = DisjointSets::new(d);
        let mut seen = HashSet::with_capacity(edges.len());
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            for index in [a, b] {
                if index >= d {
                    return Err(TreeError::IndexOutOfRange { index, d });
                }
            }
            if a == b {
                return Err(TreeError::SelfLoop(a));
            }
            let e = Edge::new(a, b);
            if !seen.insert(e) {
                return Err(TreeError::DuplicateEdge(e));
            }
            if !dsu.union(a, b) {
                return Err(TreeError::CycleDetected(e));
            }
            normalized.push(e);
        }
        // acyclic with fewer than d-1 edges: some vertex is cut off
        if normalized.len() + 1 < d {
            let root = dsu.find(0);
            let cut = (1..d).find(|&v| dsu.find(v) != root).unwrap_or(0);
            return Err(TreeError::Disconnected(cut));
        }

        let mut adjacency = vec![Vec::new(); d];
        for (i, e) in normalized.iter().enumerate() {
            adjacency[e.u].push((e.v, i));
            adjacency[e.v].push((e.u, i));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(TreeTopology {
            labels,
            edges: normalized,
            adjacency,
        })
    }

    /// Vertex count.
    pub fn d(&self) -> usize {
        self.labels.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, v: Vertex) -> &str {
        &self.labels[v]
    }

    pub fn vertex_by_label(&self, label: &str) -> Option<Vertex> {
        self.labels.iter().position(|l| l == label)
    }

    /// Neighbors of `v` with the index of the connecting edge, ascending.
    pub fn neighbors(&self, v: Vertex) -> &[(Vertex, usize)] {
        &self.adjacency[v]
    }

    pub fn edge_index(&self, a: Vertex, b: Vertex) -> Option<usize> {
        if a >= self.d() {
            return None;
        }
        self.adjacency[a]
            .binary_search_by_key(&b, |&(n, _)| n)
            .ok()
            .map(|pos| self.adjacency[a][pos].1)
    }

    fn check(&self, v: Vertex) -> Result<(), TreeError> {
        if v >= self.d() {
            Err(TreeError::IndexOutOfRange {
                index: v,
                d: self.d(),
            })
        } else {
            Ok(())
        }
    }

    /// The unique edge sequence joining `from` and `to`, walked from `from`.
    pub fn path(&self, from: Vertex, to: Vertex) -> Result<Vec<Edge>, TreeError> {
        self.check(from)?;
        self.check(to)?;
        if from == to {
            return Ok(Vec::new());
        }
        // breadth-first search from `to`, so following predecessors from `from`
        // yields the path in walking order
        let mut pred: Vec<Option<Vertex>> = vec![None; self.d()];
        let mut visited = vec![false; self.d()];
        let mut queue = VecDeque::from([to]);
        visited[to] = true;
        while let Some(w) = queue.pop_front() {
            if w == from {
                break;
            }
            for &(n, _) in &self.adjacency[w] {
                if !visited[n] {
                    visited[n] = true;
                    pred[n] = Some(w);
                    queue.push_back(n);
                }
            }
        }
        let mut out = Vec::new();
        let mut cur = from;
        while let Some(next) = pred[cur] {
            out.push(Edge::new(cur, next));
            cur = next;
        }
        Ok(out)
    }

    /// Root the tree at `root`.
    pub fn root_at(&self, root: Vertex) -> Result<RootedTree, TreeError> {
        self.check(root)?;
        let d = self.d();
        let mut parent = vec![None; d];
        let mut parent_edge = vec![None; d];
        let mut children = vec![Vec::new(); d];
        let mut depth = vec![0usize; d];
        let mut order = Vec::with_capacity(d);
        let mut visited = vec![false; d];
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(w) = queue.pop_front() {
            order.push(w);
            for &(n, e) in &self.adjacency[w] {
                if !visited[n] {
                    visited[n] = true;
                    parent[n] = Some(w);
                    parent_edge[n] = Some(e);
                    depth[n] = depth[w] + 1;
                    children[w].push(n);
                    queue.push_back(n);
                }
            }
        }
        let mut position = vec![0; d];
        for (i, &v) in order.iter().enumerate() {
            position[v] = i;
        }
        Ok(RootedTree {
            topology: self.clone(),
            root,
            order,
            position,
            parent,
            parent_edge,
            children,
            depth,
        })
    }
}

/// A tree with a distinguished root and breadth-first topological order.
///
/// Children are visited in ascending vertex index, so the order is
/// deterministic for a given topology and root.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedTree {
    topology: TreeTopology,
    root: Vertex,
    order: Vec<Vertex>,
    position: Vec<usize>,
    parent: Vec<Option<Vertex>>,
    parent_edge: Vec<Option<usize>>,
    children: Vec<Vec<Vertex>>,
    depth: Vec<usize>,
}

impl RootedTree {
    pub fn topology(&self) -> &TreeTopology {
        &self.topology
    }

    pub fn d(&self) -> usize {
        self.topology.d()
    }

    pub fn root(&self) -> Vertex {
        self.root
    }

    /// Vertices in topological order, starting with the root.
    pub fn order(&self) -> &[Vertex] {
        &self.order
    }

    /// Position of `v` in [`order`](Self::order).
    pub fn position(&self, v: Vertex) -> usize {
        self.position[v]
    }

    pub fn parent(&self, v: Vertex) -> Option<Vertex> {
        self.parent[v]
    }

    /// Index (into the topology's edge list) of the edge joining `v` to its parent.
    pub fn parent_edge(&self, v: Vertex) -> Option<usize> {
        self.parent_edge[v]
    }

    pub fn children(&self, v: Vertex) -> &[Vertex] {
        &self.children[v]
    }

    pub fn depth(&self, v: Vertex) -> usize {
        self.depth[v]
    }

    pub fn reroot(&self, root: Vertex) -> Result<RootedTree, TreeError> {
        self.topology.root_at(root)
    }

    /// Path between two vertices by climbing parents; same edges as
    /// [`TreeTopology::path`].
    pub fn path(&self, from: Vertex, to: Vertex) -> Result<Vec<Edge>, TreeError> {
        self.topology.check(from)?;
        self.topology.check(to)?;
        let (mut a, mut b) = (from, to);
        let mut head = Vec::new();
        let mut tail = Vec::new();
        while a != b {
            if self.depth[a] >= self.depth[b] {
                let p = self.parent[a].expect("non-root has a parent");
                head.push(Edge::new(a, p));
                a = p;
            } else {
                let p = self.parent[b].expect("non-root has a parent");
                tail.push(Edge::new(b, p));
                b = p;
            }
        }
        head.extend(tail.into_iter().rev());
        Ok(head)
    }
}

/// Dense `d x d` weighted adjacency matrix in a rooted tree's topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAdjacency {
    order: Vec<Vertex>,
    data: Vec<f64>,
}

impl WeightedAdjacency {
    pub fn dim(&self) -> usize {
        self.order.len()
    }

    /// Entry at (row, column) positions in topological order.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim() + j]
    }

    /// Vertex sitting at each row/column position.
    pub fn order(&self) -> &[Vertex] {
        &self.order
    }

    /// Parent position of column `j`: the first nonzero off-diagonal entry above it.
    pub fn parent_position(&self, j: usize) -> Option<usize> {
        (0..j).find(|&i| self.get(i, j) != 0.0)
    }

    /// Entry for a pair of vertices, independent of the order.
    pub fn weight(&self, a: Vertex, b: Vertex) -> f64 {
        let pa = self
            .order
            .iter()
            .position(|&v| v == a)
            .expect("vertex in order");
        let pb = self
            .order
            .iter()
            .position(|&v| v == b)
            .expect("vertex in order");
        self.get(pa, pb)
    }
}

/// Build the weighted adjacency matrix with `alpha[e]` on edge `e` of the
/// topology's edge list.
pub fn weighted_adjacency(rt: &RootedTree, alpha: &[f64]) -> Result<WeightedAdjacency, TreeError> {
    let d = rt.d();
    let edges = rt.topology().edges();
    if alpha.len() < edges.len() {
        return Err(TreeError::MissingEdgeWeight(edges[alpha.len()]));
    }
    let mut data = vec![0.0; d * d];
    for i in 0..d {
        data[i * d + i] = 1.0;
    }
    for (e, edge) in edges.iter().enumerate() {
        let (i, j) = (rt.position(edge.u), rt.position(edge.v));
        data[i * d + j] = alpha[e];
        data[j * d + i] = alpha[e];
    }
    Ok(WeightedAdjacency {
        order: rt.order().to_vec(),
        data,
    })
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when both were already in the same set.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Edges of the complete binary tree on `d` vertices in heap layout
/// (vertex `i` has children `2i+1`, `2i+2`).
pub fn binary_tree_edges(d: usize) -> Vec<(Vertex, Vertex)> {
    (1..d).map(|v| ((v - 1) / 2, v)).collect()
}

/// Edges of the chain `0 - 1 - ... - (d-1)`.
pub fn chain_edges(d: usize) -> Vec<(Vertex, Vertex)> {
    (1..d).map(|v| (v - 1, v)).collect()
}
