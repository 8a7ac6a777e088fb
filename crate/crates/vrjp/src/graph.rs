//! Graph data model: finite weighted graphs, rooted trees with generations,
//! lattice boxes, and the wired / per-branch boundary restrictions.
//!
//! Vertex identity is a `usize` index with a stable enumeration — trees are
//! numbered breadth-first from the root, lattice boxes row-major — so that
//! matrices and samplers are reproducible across runs.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite nondirected graph with nonnegative conductances.
///
/// Diagonal entries (self-weights) are permitted because conditioning a
/// potential on part of the graph produces them; plain input graphs have
/// zero diagonal. Each vertex additionally carries an `outward` weight: the
/// total conductance into an unrepresented exterior. Lattice boxes store
/// their outward edge multiplicities this way, so a wired restriction of a
/// box inside the infinite lattice needs no explicit super-graph.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    adj: Vec<Vec<(usize, f64)>>,
    self_weights: Vec<f64>,
    outward: Vec<f64>,
}

impl WeightedGraph {
    /// Builds a graph on `n` vertices from an undirected edge list.
    /// Self-loops `(i, i, w)` become self-weights.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = WeightedGraph {
            adj: vec![Vec::new(); n],
            self_weights: vec![0.0; n],
            outward: vec![0.0; n],
        };
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i},{j}) out of range for {n} vertices"
                )));
            }
            if w < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "negative conductance on edge ({i},{j})"
                )));
            }
            if i == j {
                g.self_weights[i] += w;
            } else if w > 0.0 {
                g.add_edge_weight(i, j, w);
            }
        }
        Ok(g)
    }

    fn add_edge_weight(&mut self, i: usize, j: usize, w: f64) {
        match self.adj[i].binary_search_by_key(&j, |&(v, _)| v) {
            Ok(pos) => self.adj[i][pos].1 += w,
            Err(pos) => self.adj[i].insert(pos, (j, w)),
        }
        match self.adj[j].binary_search_by_key(&i, |&(v, _)| v) {
            Ok(pos) => self.adj[j][pos].1 += w,
            Err(pos) => self.adj[j].insert(pos, (i, w)),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    /// Conductance between `i` and `j`; `weight(i, i)` is the self-weight.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.self_weights[i];
        }
        self.adj[i]
            .binary_search_by_key(&j, |&(v, _)| v)
            .map(|pos| self.adj[i][pos].1)
            .unwrap_or(0.0)
    }

    /// Neighbours of `i` with their conductances (excluding the diagonal).
    pub fn neighbours(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }

    pub fn self_weight(&self, i: usize) -> f64 {
        self.self_weights[i]
    }

    pub fn set_self_weight(&mut self, i: usize, w: f64) {
        self.self_weights[i] = w;
    }

    /// Weight from `i` into the unrepresented exterior.
    pub fn outward_weight(&self, i: usize) -> f64 {
        self.outward[i]
    }

    pub fn set_outward_weight(&mut self, i: usize, w: f64) {
        self.outward[i] = w;
    }

    /// Sum of all conductances at `i`, exterior included.
    pub fn total_weight_at(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|&(_, w)| w).sum::<f64>() + self.self_weights[i] + self.outward[i]
    }

    /// Undirected edges `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.vertex_count() {
            for &(j, w) in &self.adj[i] {
                if i < j {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Dense conductance matrix, self-weights on the diagonal.
    pub fn conductance_matrix(&self) -> DMatrix<f64> {
        let n = self.vertex_count();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.self_weights[i];
            for &(j, w) in &self.adj[i] {
                m[(i, j)] = w;
            }
        }
        m
    }

    /// Whether the subset (or, with `None`, the whole graph) is connected.
    pub fn is_connected(&self, subset: Option<&[usize]>) -> bool {
        let n = self.vertex_count();
        let in_set: Vec<bool> = match subset {
            Some(s) => {
                let mut mask = vec![false; n];
                for &v in s {
                    mask[v] = true;
                }
                mask
            }
            None => vec![true; n],
        };
        let count = in_set.iter().filter(|&&b| b).count();
        if count == 0 {
            return false;
        }
        let start = (0..n).find(|&v| in_set[v]).unwrap();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &(u, _) in &self.adj[v] {
                if in_set[u] && !seen[u] {
                    seen[u] = true;
                    reached += 1;
                    queue.push_back(u);
                }
            }
        }
        reached == count
    }

    /// Graph distance between two vertices (`usize::MAX` if unreachable).
    pub fn distance(&self, a: usize, b: usize) -> usize {
        if a == b {
            return 0;
        }
        let mut dist = vec![usize::MAX; self.vertex_count()];
        dist[a] = 0;
        let mut queue = VecDeque::from([a]);
        while let Some(v) = queue.pop_front() {
            for &(u, _) in &self.adj[v] {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    if u == b {
                        return dist[u];
                    }
                    queue.push_back(u);
                }
            }
        }
        dist[b]
    }
}

/// Box `{0..side-1}^dim` of the integer lattice with nearest-neighbour
/// edges of constant weight, vertices enumerated row-major (the last
/// coordinate varies fastest). Outward multiplicities toward the rest of
/// the lattice are recorded per vertex.
pub fn build_grid(dim: usize, side: usize, w: f64) -> Result<WeightedGraph> {
    if dim == 0 || side == 0 {
        return Err(Error::InvalidParameter(
            "grid needs dim >= 1 and side >= 1".into(),
        ));
    }
    if w <= 0.0 {
        return Err(Error::InvalidParameter("grid weight must be positive".into()));
    }
    let n = side.checked_pow(dim as u32).ok_or_else(|| {
        Error::InvalidParameter(format!("grid {side}^{dim} overflows"))
    })?;
    let mut edges = Vec::new();
    let mut outward = vec![0.0; n];
    for v in 0..n {
        let mut rem = v;
        let mut coords = vec![0usize; dim];
        for d in (0..dim).rev() {
            coords[d] = rem % side;
            rem /= side;
        }
        let mut stride = 1;
        for d in (0..dim).rev() {
            if coords[d] + 1 < side {
                edges.push((v, v + stride, w));
            } else {
                outward[v] += w;
            }
            if coords[d] == 0 {
                outward[v] += w;
            }
            stride *= side;
        }
    }
    let mut g = WeightedGraph::from_edges(n, &edges)?;
    for v in 0..n {
        g.set_outward_weight(v, outward[v]);
    }
    Ok(g)
}

/// Row-major index of a lattice coordinate inside `build_grid(dim, side, _)`.
pub fn grid_index(coords: &[usize], side: usize) -> usize {
    coords.iter().fold(0, |acc, &c| acc * side + c)
}

/// A rooted tree: a weighted graph together with parent/child structure and
/// generation bookkeeping. Vertices are numbered breadth-first from the
/// root, so the truncation to the first `n` generations is always an index
/// prefix.
#[derive(Debug, Clone)]
pub struct RootedTree {
    graph: WeightedGraph,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    generation_starts: Vec<usize>,
}

impl RootedTree {
    /// Wraps a graph that is a tree, rooted at `root`, renumbering is NOT
    /// performed: the graph must already be breadth-first numbered. Used by
    /// the JSON loader after it re-sorts vertices.
    pub fn from_graph(graph: WeightedGraph, root: usize) -> Result<Self> {
        let n = graph.vertex_count();
        if root != 0 {
            return Err(Error::InvalidParameter(
                "rooted trees are numbered breadth-first; root must be vertex 0".into(),
            ));
        }
        if !graph.is_connected(None) {
            return Err(Error::DisconnectedSubset);
        }
        let mut parent = vec![None; n];
        let mut depth = vec![usize::MAX; n];
        let mut children = vec![Vec::new(); n];
        depth[root] = 0;
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &(u, _) in graph.neighbours(v) {
                if depth[u] == usize::MAX {
                    depth[u] = depth[v] + 1;
                    parent[u] = Some(v);
                    children[v].push(u);
                    queue.push_back(u);
                }
            }
        }
        if order.len() != n || graph.edges().len() != n - 1 {
            return Err(Error::InvalidParameter("graph is not a tree".into()));
        }
        // Breadth-first numbering means depth must be nondecreasing in the
        // vertex index.
        for v in 1..n {
            if depth[v] < depth[v - 1] {
                return Err(Error::InvalidParameter(
                    "tree vertices are not breadth-first numbered".into(),
                ));
            }
        }
        let max_depth = *depth.iter().max().unwrap();
        let mut generation_starts = vec![0; max_depth + 2];
        for v in 0..n {
            generation_starts[depth[v] + 1] = v + 1;
        }
        Ok(Self {
            graph,
            parent,
            children,
            depth,
            generation_starts,
        })
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Generation index `|v|` (distance to the root).
    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn max_depth(&self) -> usize {
        self.generation_starts.len() - 2
    }

    /// Vertices of generation `k` as a contiguous index range.
    pub fn generation(&self, k: usize) -> std::ops::Range<usize> {
        if k > self.max_depth() {
            return 0..0;
        }
        self.generation_starts[k]..self.generation_starts[k + 1]
    }

    /// Number of vertices in the truncation to the first `n` generations.
    pub fn truncation_size(&self, n: usize) -> usize {
        let n = n.min(self.max_depth());
        self.generation_starts[n + 1]
    }

    /// Whether `y` lies in the subtree rooted at `x` (including `x`).
    pub fn is_descendant(&self, x: usize, y: usize) -> bool {
        let mut v = y;
        while self.depth[v] > self.depth[x] {
            v = self.parent[v].unwrap();
        }
        v == x
    }

    /// Closest common ancestor of `x` and `y`.
    pub fn meet(&self, x: usize, y: usize) -> usize {
        let (mut a, mut b) = (x, y);
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].unwrap();
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].unwrap();
        }
        while a != b {
            a = self.parent[a].unwrap();
            b = self.parent[b].unwrap();
        }
        a
    }

    /// Total conductance from `v` to the children of `v` lying strictly
    /// below generation `n`, i.e. the outward weight of the truncation to
    /// `n` generations at `v`. Zero unless `|v| = n`.
    pub fn eta_at(&self, v: usize, n: usize) -> f64 {
        if self.depth[v] != n {
            return 0.0;
        }
        if n == self.max_depth() {
            self.graph.outward_weight(v)
        } else {
            self.children[v]
                .iter()
                .map(|&c| self.graph.weight(v, c))
                .sum()
        }
    }
}

/// Finite truncation of the infinite `degree`-regular tree: the root has
/// `degree` children, every other internal vertex has `degree - 1`, all
/// edges carry weight `w`. The continuation of the infinite tree beyond
/// `depth` is recorded as outward weight on the last generation.
pub fn build_regular_tree(degree: usize, depth: usize, w: f64) -> Result<RootedTree> {
    if degree < 2 {
        return Err(Error::InvalidParameter("regular tree needs degree >= 2".into()));
    }
    if w <= 0.0 {
        return Err(Error::InvalidParameter("tree weight must be positive".into()));
    }
    let child_count = |v_depth: usize| if v_depth == 0 { degree } else { degree - 1 };
    let mut parent_of: Vec<Option<usize>> = vec![None];
    let mut depths = vec![0usize];
    let mut gen_start = 0usize;
    for d in 0..depth {
        let gen_end = depths.len();
        for v in gen_start..gen_end {
            for _ in 0..child_count(d) {
                parent_of.push(Some(v));
                depths.push(d + 1);
            }
        }
        gen_start = gen_end;
    }
    let n = parent_of.len();
    let edges: Vec<(usize, usize, f64)> = (1..n)
        .map(|v| (parent_of[v].unwrap(), v, w))
        .collect();
    let mut graph = WeightedGraph::from_edges(n, &edges)?;
    for v in 0..n {
        if depths[v] == depth {
            graph.set_outward_weight(v, child_count(depth) as f64 * w);
        }
    }
    RootedTree::from_graph(graph, 0)
}

/// A finite graph with designated boundary vertices absorbing all outward
/// edges of an interior set.
///
/// The interior keeps its original conductances; `boundary_weights[b]`
/// lists `(interior vertex, conductance)` pairs for boundary vertex `b`.
/// For every interior vertex the total boundary weight equals the recorded
/// `eta`, which is what the interior potential law depends on.
#[derive(Debug, Clone)]
pub struct BoundaryGraph {
    interior: WeightedGraph,
    boundary_weights: Vec<Vec<(usize, f64)>>,
    eta: Vec<f64>,
}

impl BoundaryGraph {
    pub fn interior(&self) -> &WeightedGraph {
        &self.interior
    }

    pub fn interior_count(&self) -> usize {
        self.interior.vertex_count()
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary_weights.len()
    }

    /// `(interior vertex, conductance)` pairs attached to boundary `b`.
    pub fn boundary_weights(&self, b: usize) -> &[(usize, f64)] {
        &self.boundary_weights[b]
    }

    /// The vector `eta` of total outward conductances per interior vertex.
    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// Conductance between interior vertex `i` and boundary vertex `b`.
    pub fn weight_to_boundary(&self, i: usize, b: usize) -> f64 {
        self.boundary_weights[b]
            .iter()
            .find(|&&(v, _)| v == i)
            .map(|&(_, w)| w)
            .unwrap_or(0.0)
    }

    /// The whole graph (interior then boundary vertices) as one
    /// [`WeightedGraph`]; boundary vertices carry no outward weight.
    pub fn full_graph(&self) -> WeightedGraph {
        let ni = self.interior_count();
        let n = ni + self.boundary_count();
        let mut edges = self.interior.edges();
        for (b, list) in self.boundary_weights.iter().enumerate() {
            for &(i, w) in list {
                edges.push((i, ni + b, w));
            }
        }
        let mut g = WeightedGraph::from_edges(n, &edges).expect("valid boundary graph");
        for i in 0..ni {
            g.set_self_weight(i, self.interior.self_weight(i));
        }
        g
    }
}

/// Restriction of `g` to `subset` with a single wired boundary vertex
/// absorbing every edge that leaves the subset (explicit edges to removed
/// vertices plus the subset's own outward weights).
///
/// Interior vertices are renumbered by their position in `subset`.
pub fn restrict_wired(g: &WeightedGraph, subset: &[usize]) -> Result<BoundaryGraph> {
    if subset.is_empty() {
        return Err(Error::InvalidParameter("empty interior".into()));
    }
    if !g.is_connected(Some(subset)) {
        return Err(Error::DisconnectedSubset);
    }
    let n = g.vertex_count();
    let mut pos = vec![usize::MAX; n];
    for (k, &v) in subset.iter().enumerate() {
        pos[v] = k;
    }
    let mut edges = Vec::new();
    let mut eta = vec![0.0; subset.len()];
    for (k, &v) in subset.iter().enumerate() {
        eta[k] += g.outward_weight(v);
        for &(u, w) in g.neighbours(v) {
            if pos[u] != usize::MAX {
                if pos[u] > k {
                    edges.push((k, pos[u], w));
                }
            } else {
                eta[k] += w;
            }
        }
    }
    let mut interior = WeightedGraph::from_edges(subset.len(), &edges)?;
    for (k, &v) in subset.iter().enumerate() {
        interior.set_self_weight(k, g.self_weight(v));
    }
    let delta: Vec<(usize, f64)> = eta
        .iter()
        .enumerate()
        .filter(|&(_, &w)| w > 0.0)
        .map(|(k, &w)| (k, w))
        .collect();
    Ok(BoundaryGraph {
        interior,
        boundary_weights: vec![delta],
        eta,
    })
}

/// Restriction of the first `n` generations of a tree, with one boundary
/// vertex per generation-`m` ancestor: the outward edges of a truncated
/// vertex are absorbed by the boundary point of its branch.
///
/// `m = 0` coincides with [`restrict_wired`] applied to the truncation.
pub fn restrict_tree_bm(t: &RootedTree, m: usize, n: usize) -> Result<BoundaryGraph> {
    if m > n {
        return Err(Error::InvalidParameter(format!(
            "branch generation {m} exceeds truncation {n}"
        )));
    }
    if n > t.max_depth() {
        return Err(Error::InvalidParameter(format!(
            "truncation {n} exceeds tree depth {}",
            t.max_depth()
        )));
    }
    let size = t.truncation_size(n);
    let mut edges = Vec::new();
    for v in 0..size {
        if let Some(p) = t.parent(v) {
            edges.push((p, v, t.graph().weight(p, v)));
        }
    }
    let interior = WeightedGraph::from_edges(size, &edges)?;
    let eta: Vec<f64> = (0..size).map(|v| t.eta_at(v, n)).collect();
    let cells: Vec<usize> = t.generation(m).collect();
    let mut boundary_weights = vec![Vec::new(); cells.len()];
    for v in t.generation(n) {
        if eta[v] == 0.0 {
            continue;
        }
        let cell = cells
            .iter()
            .position(|&x| t.is_descendant(x, v))
            .expect("every deep vertex descends from a generation-m vertex");
        boundary_weights[cell].push((v, eta[v]));
    }
    Ok(BoundaryGraph {
        interior,
        boundary_weights,
        eta,
    })
}

/// Serialized graph description: vertex count, undirected edge list, and
/// optional tree metadata. This is the on-disk JSON format the command-line
/// tools accept.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub vertices: usize,
    /// Undirected edges `[i, j, w]`.
    pub edges: Vec<(usize, usize, f64)>,
    /// Weight into the unrepresented exterior, per vertex.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outward: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeMeta>,
}

/// Tree metadata in a [`GraphFile`]: the root plus `parents[v]` for each
/// vertex (`null`/`-1` is not used; the root is simply omitted by index).
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeMeta {
    pub root: usize,
    pub parents: Vec<Option<usize>>,
}

impl GraphFile {
    pub fn to_graph(&self) -> Result<WeightedGraph> {
        let mut g = WeightedGraph::from_edges(self.vertices, &self.edges)?;
        if let Some(out) = &self.outward {
            if out.len() != self.vertices {
                return Err(Error::GraphFormat(format!(
                    "outward has {} entries for {} vertices",
                    out.len(),
                    self.vertices
                )));
            }
            for (v, &w) in out.iter().enumerate() {
                g.set_outward_weight(v, w);
            }
        }
        Ok(g)
    }

    pub fn to_tree(&self) -> Result<RootedTree> {
        let meta = self
            .tree
            .as_ref()
            .ok_or_else(|| Error::GraphFormat("missing tree metadata".into()))?;
        let g = self.to_graph()?;
        if meta.parents.len() != self.vertices {
            return Err(Error::GraphFormat("parents length mismatch".into()));
        }
        RootedTree::from_graph(g, meta.root)
    }

    pub fn from_graph(g: &WeightedGraph) -> Self {
        let outward: Vec<f64> = (0..g.vertex_count()).map(|v| g.outward_weight(v)).collect();
        GraphFile {
            vertices: g.vertex_count(),
            edges: g.edges(),
            outward: if outward.iter().any(|&w| w != 0.0) {
                Some(outward)
            } else {
                None
            },
            tree: None,
        }
    }

    pub fn from_tree(t: &RootedTree) -> Self {
        let mut f = Self::from_graph(t.graph());
        f.tree = Some(TreeMeta {
            root: t.root(),
            parents: (0..t.vertex_count()).map(|v| t.parent(v)).collect(),
        });
        f
    }
}

/// Convenience builders used throughout the tests and experiments.
pub mod small {
    use super::*;

    /// Path graph on `n` vertices with constant weight.
    pub fn path(n: usize, w: f64) -> WeightedGraph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, w)).collect();
        WeightedGraph::from_edges(n, &edges).unwrap()
    }

    /// Cycle graph on `n` vertices with constant weight.
    pub fn cycle(n: usize, w: f64) -> WeightedGraph {
        let mut edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, w)).collect();
        edges.push((n - 1, 0, w));
        WeightedGraph::from_edges(n, &edges).unwrap()
    }

    /// Triangle with constant weight.
    pub fn triangle(w: f64) -> WeightedGraph {
        cycle(3, w)
    }

    /// Two vertices joined by a single edge.
    pub fn pair(w: f64) -> WeightedGraph {
        WeightedGraph::from_edges(2, &[(0, 1, w)]).unwrap()
    }

    /// A single isolated vertex.
    pub fn singleton() -> WeightedGraph {
        WeightedGraph::from_edges(1, &[]).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_1d_is_a_path() {
        let g = build_grid(1, 3, 1.0).unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.weight(0, 1), 1.0);
        assert_eq!(g.weight(1, 2), 1.0);
        assert_eq!(g.weight(0, 2), 0.0);
        assert_eq!(g.outward_weight(0), 1.0);
        assert_eq!(g.outward_weight(1), 0.0);
        assert_eq!(g.outward_weight(2), 1.0);
    }

    #[test]
    fn grid_2x2_is_a_cycle_of_weight_two() {
        let g = build_grid(2, 2, 2.0).unwrap();
        assert_eq!(g.vertex_count(), 4);
        let edges = g.edges();
        assert_eq!(edges.len(), 4);
        for (_, _, w) in edges {
            assert_eq!(w, 2.0);
        }
        for v in 0..4 {
            assert_eq!(g.neighbours(v).len(), 2);
            assert_eq!(g.outward_weight(v), 2.0 * 2.0);
        }
    }

    #[test]
    fn grid_3d_edge_count() {
        // Brute enumeration oracle: count nearest-neighbour pairs directly.
        let (d, l) = (3usize, 4usize);
        let g = build_grid(d, l, 1.0).unwrap();
        assert_eq!(g.vertex_count(), 64);
        let mut count = 0usize;
        for x in 0..l {
            for y in 0..l {
                for z in 0..l {
                    if x + 1 < l {
                        count += 1;
                    }
                    if y + 1 < l {
                        count += 1;
                    }
                    if z + 1 < l {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, 144);
        assert_eq!(g.edges().len(), count);
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(build_grid(0, 3, 1.0).is_err());
        assert!(build_grid(2, 0, 1.0).is_err());
        assert!(build_grid(2, 3, 0.0).is_err());
    }

    #[test]
    fn regular_tree_generations() {
        let t = build_regular_tree(3, 1, 1.0).unwrap();
        assert_eq!(t.vertex_count(), 4);
        assert_eq!(t.generation(1).len(), 3);

        // |D^(k)| = 3 * 2^(k-1) for k >= 1, by brute count.
        let t = build_regular_tree(3, 3, 1.0).unwrap();
        let mut expected = vec![1usize];
        for k in 1..=3 {
            expected.push(3 * (1 << (k - 1)));
        }
        for (k, want) in expected.iter().enumerate() {
            assert_eq!(t.generation(k).len(), *want, "generation {k}");
        }
        assert_eq!(t.generation(3).len(), 12);

        let t = build_regular_tree(2, 5, 1.0).unwrap();
        assert_eq!(t.generation(5).len(), 2);
        assert_eq!(t.vertex_count(), 11);
    }

    #[test]
    fn tree_meet_cases() {
        let t = build_regular_tree(3, 3, 1.0).unwrap();
        let x = t.generation(2).start;
        assert_eq!(t.meet(x, x), x);
        let child = t.children(x)[0];
        assert_eq!(t.meet(x, child), x);
        let gen1 = t.generation(1);
        let a = t.children(gen1.start)[0];
        let b = t.children(gen1.start)[1];
        assert_eq!(t.meet(a, b), gen1.start);
        // Symmetry and depth bound.
        assert_eq!(t.meet(a, b), t.meet(b, a));
        assert!(t.depth(t.meet(a, b)) <= t.depth(a).min(t.depth(b)));
    }

    #[test]
    fn wired_restriction_on_path() {
        // Middle three vertices of a 5-path.
        let g = small::path(5, 1.0);
        let bg = restrict_wired(&g, &[1, 2, 3]).unwrap();
        assert_eq!(bg.boundary_count(), 1);
        assert_eq!(bg.weight_to_boundary(0, 0), 1.0);
        assert_eq!(bg.weight_to_boundary(1, 0), 0.0);
        assert_eq!(bg.weight_to_boundary(2, 0), 1.0);
        assert_eq!(bg.eta(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn wired_restriction_single_lattice_site() {
        let g = build_grid(2, 2, 1.0).unwrap();
        let bg = restrict_wired(&g, &[0]).unwrap();
        // 2 in-box neighbours + 2 outward edges.
        assert_eq!(bg.eta(), &[4.0]);
        assert_eq!(bg.weight_to_boundary(0, 0), 4.0);
    }

    #[test]
    fn wired_restriction_full_graph_isolates_delta() {
        let g = small::triangle(1.0);
        let bg = restrict_wired(&g, &[0, 1, 2]).unwrap();
        assert_eq!(bg.eta(), &[0.0, 0.0, 0.0]);
        assert!(bg.boundary_weights(0).is_empty());
    }

    #[test]
    fn wired_restriction_rejects_disconnected() {
        let g = small::path(5, 1.0);
        assert!(matches!(
            restrict_wired(&g, &[0, 4]),
            Err(Error::DisconnectedSubset)
        ));
    }

    #[test]
    fn bm_zero_matches_wired() {
        let t = build_regular_tree(3, 3, 1.5) .unwrap();
        let n = 2;
        let bm = restrict_tree_bm(&t, 0, n).unwrap();
        let subset: Vec<usize> = (0..t.truncation_size(n)).collect();
        let wired = restrict_wired(t.graph(), &subset).unwrap();
        assert_eq!(bm.eta(), wired.eta());
        assert_eq!(bm.boundary_count(), 1);
        let mut a = bm.boundary_weights(0).to_vec();
        let mut b = wired.boundary_weights(0).to_vec();
        a.sort_by_key(|&(v, _)| v);
        b.sort_by_key(|&(v, _)| v);
        assert_eq!(a, b);
    }

    #[test]
    fn bm_leaf_generation() {
        // m = 1, n = 1 on the 3-regular tree: each leaf connects to its own
        // boundary point with the weight of its two unseen children.
        let t = build_regular_tree(3, 1, 1.0).unwrap();
        let bg = restrict_tree_bm(&t, 1, 1).unwrap();
        assert_eq!(bg.boundary_count(), 3);
        for (b, leaf) in t.generation(1).enumerate() {
            assert_eq!(bg.boundary_weights(b), &[(leaf, 2.0)]);
        }
    }

    #[test]
    fn bm_equal_generations() {
        let t = build_regular_tree(3, 2, 1.0).unwrap();
        let bg = restrict_tree_bm(&t, 2, 2).unwrap();
        assert_eq!(bg.boundary_count(), 6);
        for (b, v) in t.generation(2).enumerate() {
            assert_eq!(bg.boundary_weights(b), &[(v, 2.0)]);
        }
        assert!(restrict_tree_bm(&t, 3, 2).is_err());
    }

    #[test]
    fn boundary_weight_sums_equal_eta() {
        let t = build_regular_tree(3, 4, 0.7).unwrap();
        for m in 0..=3 {
            let bg = restrict_tree_bm(&t, m, 3).unwrap();
            let mut totals = vec![0.0; bg.interior_count()];
            for b in 0..bg.boundary_count() {
                for &(i, w) in bg.boundary_weights(b) {
                    totals[i] += w;
                }
            }
            for (i, &total) in totals.iter().enumerate() {
                assert_eq!(total, bg.eta()[i], "vertex {i}, m={m}");
            }
        }
    }

    #[test]
    fn graph_file_round_trip() {
        let t = build_regular_tree(3, 2, 1.0).unwrap();
        let f = GraphFile::from_tree(&t);
        let json = serde_json::to_string(&f).unwrap();
        let back: GraphFile = serde_json::from_str(&json).unwrap();
        let t2 = back.to_tree().unwrap();
        assert_eq!(t2.vertex_count(), t.vertex_count());
        assert_eq!(t2.generation(2).len(), t.generation(2).len());
        assert_eq!(
            t2.graph().outward_weight(t2.vertex_count() - 1),
            t.graph().outward_weight(t.vertex_count() - 1)
        );
    }

    #[test]
    fn graph_file_rejects_unknown_keys() {
        let bad = r#"{"vertices": 2, "edges": [[0,1,1.0]], "extra": 1}"#;
        assert!(serde_json::from_str::<GraphFile>(bad).is_err());
    }
}
