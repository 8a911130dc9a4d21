//! Unrooted trees with signed edge weights and labeled leaves.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

/// A leaf label. Labels are positive integers.
pub type Label = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub usize);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub ends: (VertexId, VertexId),
    pub weight: Scalar,
}

impl Edge {
    pub fn other(&self, v: VertexId) -> VertexId {
        if self.ends.0 == v {
            self.ends.1
        } else {
            self.ends.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("unknown leaf label {0}")]
    UnknownLabel(Label),
    #[error("duplicate leaf label {0}")]
    DuplicateLabel(Label),
    #[error("leaf labels must be positive integers")]
    ZeroLabel,
    #[error("tree must have at least two leaves, found {0}")]
    TooFewLeaves(usize),
    #[error("graph is not a tree: {0}")]
    NotATree(String),
    #[error("labeled vertex {0} has degree {1}, expected 1")]
    LabeledNotLeaf(Label, usize),
    #[error("unlabeled vertex {0} has degree {1}, expected at least 2")]
    UnlabeledLeaf(VertexId, usize),
    #[error("no vertex of degree at least 3 reachable from leaf {0}")]
    NoBranchVertex(Label),
    #[error("two branch vertices are equally close to leaf {0}")]
    AmbiguousBranchVertex(Label),
    #[error("an empty leaf set has no minimal subtree")]
    EmptyLeafSet,
    #[error("{0:?} is not a complete cherry")]
    NotACherry(Vec<Label>),
}

/// Incremental construction of a [`WeightedTree`]; structural invariants are
/// checked by [`TreeBuilder::build`].
#[derive(Debug, Default, Clone)]
pub struct TreeBuilder {
    pub(crate) labels: Vec<Option<Label>>,
    pub(crate) edges: Vec<Edge>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, label: Option<Label>) -> VertexId {
        self.labels.push(label);
        VertexId(self.labels.len() - 1)
    }

    pub fn add_leaf(&mut self, label: Label) -> VertexId {
        self.add_vertex(Some(label))
    }

    pub fn add_internal(&mut self) -> VertexId {
        self.add_vertex(None)
    }

    pub fn add_edge(&mut self, a: VertexId, b: VertexId, weight: Scalar) {
        self.edges.push(Edge { ends: (a, b), weight });
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn build(self) -> Result<WeightedTree, TreeError> {
        let n = self.labels.len();
        let mut adjacency = vec![Vec::new(); n];
        for (idx, edge) in self.edges.iter().enumerate() {
            let (a, b) = edge.ends;
            if a.0 >= n {
                return Err(TreeError::UnknownVertex(a));
            }
            if b.0 >= n {
                return Err(TreeError::UnknownVertex(b));
            }
            if a == b {
                return Err(TreeError::NotATree(format!("self-loop at {a}")));
            }
            adjacency[a.0].push((b, idx));
            adjacency[b.0].push((a, idx));
        }
        if n == 0 || self.edges.len() != n - 1 {
            return Err(TreeError::NotATree(format!(
                "{} vertices but {} edges",
                n,
                self.edges.len()
            )));
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &(w, _) in &adjacency[v] {
                if !seen[w.0] {
                    seen[w.0] = true;
                    reached += 1;
                    queue.push_back(w.0);
                }
            }
        }
        if reached != n {
            return Err(TreeError::NotATree("graph is disconnected".into()));
        }
        let mut leaf_index = BTreeMap::new();
        for (v, label) in self.labels.iter().enumerate() {
            let degree = adjacency[v].len();
            match label {
                Some(0) => return Err(TreeError::ZeroLabel),
                Some(l) => {
                    if degree != 1 {
                        return Err(TreeError::LabeledNotLeaf(*l, degree));
                    }
                    if leaf_index.insert(*l, VertexId(v)).is_some() {
                        return Err(TreeError::DuplicateLabel(*l));
                    }
                }
                None if degree < 2 => {
                    return Err(TreeError::UnlabeledLeaf(VertexId(v), degree));
                }
                None => {}
            }
        }
        if leaf_index.len() < 2 {
            return Err(TreeError::TooFewLeaves(leaf_index.len()));
        }
        Ok(WeightedTree { labels: self.labels, edges: self.edges, adjacency, leaf_index })
    }
}

/// A finite tree whose edges carry signed weights and whose leaves are
/// labeled by distinct positive integers. Values are immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedTree {
    labels: Vec<Option<Label>>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(VertexId, usize)>>,
    leaf_index: BTreeMap<Label, VertexId>,
}

/// A connected set of edges of some tree, used as the `E` argument of
/// [`WeightedTree::nearest_branch_vertex`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subtree {
    pub edges: BTreeSet<usize>,
}

/// A complete cherry: the leaves whose first branch vertex is `stalk`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cherry {
    pub leaves: BTreeSet<Label>,
    pub stalk: VertexId,
    pub twigs: BTreeMap<Label, Scalar>,
}

impl WeightedTree {
    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_index.len()
    }

    /// Leaf labels in ascending order.
    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.leaf_index.keys().copied()
    }

    pub fn label_of(&self, v: VertexId) -> Option<Label> {
        self.labels.get(v.0).copied().flatten()
    }

    pub fn leaf(&self, label: Label) -> Result<VertexId, TreeError> {
        self.leaf_index.get(&label).copied().ok_or(TreeError::UnknownLabel(label))
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adjacency[v.0].len()
    }

    pub fn neighbors(&self, v: VertexId) -> impl Iterator<Item = (VertexId, usize)> + '_ {
        self.adjacency[v.0].iter().copied()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        (0..self.labels.len()).map(VertexId)
    }

    /// True when no unlabeled vertex has degree 2.
    pub fn is_canonical(&self) -> bool {
        self.vertices().all(|v| self.label_of(v).is_some() || self.degree(v) != 2)
    }

    fn check_vertex(&self, v: VertexId) -> Result<(), TreeError> {
        if v.0 < self.labels.len() {
            Ok(())
        } else {
            Err(TreeError::UnknownVertex(v))
        }
    }

    /// Edge indices along the unique path from `x` to `y`, in order.
    pub fn path_edges(&self, x: VertexId, y: VertexId) -> Result<Vec<usize>, TreeError> {
        self.check_vertex(x)?;
        self.check_vertex(y)?;
        let mut parent: Vec<Option<(VertexId, usize)>> = vec![None; self.labels.len()];
        let mut seen = vec![false; self.labels.len()];
        seen[x.0] = true;
        let mut queue = VecDeque::from([x]);
        while let Some(v) = queue.pop_front() {
            if v == y {
                break;
            }
            for &(w, e) in &self.adjacency[v.0] {
                if !seen[w.0] {
                    seen[w.0] = true;
                    parent[w.0] = Some((v, e));
                    queue.push_back(w);
                }
            }
        }
        let mut path = Vec::new();
        let mut cur = y;
        while let Some((p, e)) = parent[cur.0] {
            path.push(e);
            cur = p;
        }
        path.reverse();
        Ok(path)
    }

    /// Number of edges on the path from `x` to `y`.
    pub fn intrinsic_distance(&self, x: VertexId, y: VertexId) -> Result<usize, TreeError> {
        Ok(self.path_edges(x, y)?.len())
    }

    /// Signed sum of the weights on the path from `x` to `y`.
    pub fn w_distance(&self, x: VertexId, y: VertexId) -> Result<Scalar, TreeError> {
        Ok(self.path_edges(x, y)?.iter().map(|&e| &self.edges[e].weight).sum())
    }

    pub fn full_subtree(&self) -> Subtree {
        Subtree { edges: (0..self.edges.len()).collect() }
    }

    /// Union of the leaf-to-leaf paths among `leaves`.
    pub fn minimal_subtree(&self, leaves: &[Label]) -> Result<Subtree, TreeError> {
        let (first, rest) = leaves.split_first().ok_or(TreeError::EmptyLeafSet)?;
        let origin = self.leaf(*first)?;
        let mut edges = BTreeSet::new();
        for &l in rest {
            edges.extend(self.path_edges(origin, self.leaf(l)?)?);
        }
        Ok(Subtree { edges })
    }

    /// `N(x, E)`: the vertex of degree ≥ 3 in `subtree` (degrees counted
    /// inside `subtree`) closest to leaf `x` in edge count.
    pub fn nearest_branch_vertex(&self, x: Label, subtree: &Subtree) -> Result<VertexId, TreeError> {
        let start = self.leaf(x)?;
        let mut degree = vec![0usize; self.labels.len()];
        for &e in &subtree.edges {
            let (a, b) = self.edges[e].ends;
            degree[a.0] += 1;
            degree[b.0] += 1;
        }
        let mut dist = vec![usize::MAX; self.labels.len()];
        dist[start.0] = 0;
        let mut queue = VecDeque::from([start]);
        let mut best: Option<(usize, VertexId)> = None;
        let mut tie = false;
        while let Some(v) = queue.pop_front() {
            if let Some((d, _)) = best {
                if dist[v.0] > d {
                    break;
                }
            }
            if degree[v.0] >= 3 {
                match best {
                    None => best = Some((dist[v.0], v)),
                    Some((d, _)) if d == dist[v.0] => tie = true,
                    Some(_) => {}
                }
            }
            for &(w, _) in &self.adjacency[v.0] {
                if dist[w.0] == usize::MAX {
                    dist[w.0] = dist[v.0] + 1;
                    queue.push_back(w);
                }
            }
        }
        match best {
            None => Err(TreeError::NoBranchVertex(x)),
            Some(_) if tie => Err(TreeError::AmbiguousBranchVertex(x)),
            Some((_, v)) => Ok(v),
        }
    }

    /// Walks from leaf `x` through degree-2 vertices to its first branch
    /// vertex; returns that vertex and the signed weight of the walk.
    pub fn pendant_path(&self, x: Label) -> Result<(VertexId, Scalar), TreeError> {
        let mut prev = self.leaf(x)?;
        let (mut cur, first_edge) = self.adjacency[prev.0][0];
        let mut weight = self.edges[first_edge].weight.clone();
        loop {
            if self.degree(cur) >= 3 {
                return Ok((cur, weight));
            }
            if self.degree(cur) == 1 {
                return Err(TreeError::NoBranchVertex(x));
            }
            let &(next, e) = self.adjacency[cur.0]
                .iter()
                .find(|(w, _)| *w != prev)
                .expect("degree-2 vertex has a second neighbor");
            weight = weight + &self.edges[e].weight;
            prev = cur;
            cur = next;
        }
    }

    /// All complete cherries, ordered by smallest leaf.
    pub fn find_cherries(&self) -> Result<Vec<Cherry>, TreeError> {
        if self.leaf_count() < 3 {
            return Err(TreeError::TooFewLeaves(self.leaf_count()));
        }
        let mut by_stalk: BTreeMap<VertexId, BTreeMap<Label, Scalar>> = BTreeMap::new();
        for label in self.labels() {
            let (stalk, twig) = self.pendant_path(label)?;
            by_stalk.entry(stalk).or_default().insert(label, twig);
        }
        let mut cherries: Vec<Cherry> = by_stalk
            .into_iter()
            .filter(|(_, twigs)| twigs.len() >= 2)
            .map(|(stalk, twigs)| Cherry { leaves: twigs.keys().copied().collect(), stalk, twigs })
            .collect();
        cherries.sort_by_key(|c| *c.leaves.iter().next().expect("nonempty cherry"));
        Ok(cherries)
    }

    /// Suppresses every unlabeled degree-2 vertex, summing the weights of the
    /// two edges it joins.
    pub fn canonicalize(&self) -> WeightedTree {
        if self.is_canonical() {
            return self.clone();
        }
        let keep: Vec<bool> =
            self.vertices().map(|v| self.label_of(v).is_some() || self.degree(v) != 2).collect();
        let mut builder = TreeBuilder::new();
        let mut new_id = vec![None; self.labels.len()];
        for v in self.vertices().filter(|v| keep[v.0]) {
            new_id[v.0] = Some(builder.add_vertex(self.label_of(v)));
        }
        for v in self.vertices().filter(|v| keep[v.0]) {
            for &(start, e0) in &self.adjacency[v.0] {
                let mut prev = v;
                let mut cur = start;
                let mut weight = self.edges[e0].weight.clone();
                while !keep[cur.0] {
                    let &(next, e) = self.adjacency[cur.0]
                        .iter()
                        .find(|(w, _)| *w != prev)
                        .expect("suppressed vertex has degree 2");
                    weight = weight + &self.edges[e].weight;
                    prev = cur;
                    cur = next;
                }
                if v < cur {
                    builder.add_edge(new_id[v.0].unwrap(), new_id[cur.0].unwrap(), weight);
                }
            }
        }
        builder.build().expect("suppressing degree-2 vertices preserves tree structure")
    }

    /// Replaces every weight by its tolerant representation.
    pub fn to_real(&self) -> WeightedTree {
        let mut t = self.clone();
        for e in &mut t.edges {
            e.weight = e.weight.to_real();
        }
        t
    }

    /// Same topology with the given edge weights, in edge order.
    pub(crate) fn with_edge_weights(&self, weights: Vec<Scalar>) -> WeightedTree {
        assert_eq!(weights.len(), self.edges.len(), "one weight per edge");
        let mut t = self.clone();
        for (e, w) in t.edges.iter_mut().zip(weights) {
            e.weight = w;
        }
        t
    }

    /// Removes the complete cherry `leaves` and puts a leaf labeled `fresh` at
    /// its stalk. When the stalk still branches afterwards the new leaf hangs
    /// from it by a zero-weight edge.
    pub fn collapse_cherry(&self, leaves: &BTreeSet<Label>, fresh: Label) -> Result<WeightedTree, TreeError> {
        let cherry = self
            .find_cherries()?
            .into_iter()
            .find(|c| &c.leaves == leaves)
            .ok_or_else(|| TreeError::NotACherry(leaves.iter().copied().collect()))?;
        if self.leaf_index.contains_key(&fresh) {
            return Err(TreeError::DuplicateLabel(fresh));
        }
        let mut removed = vec![false; self.labels.len()];
        for &l in leaves {
            let mut prev = self.leaf(l)?;
            while prev != cherry.stalk {
                removed[prev.0] = true;
                let next = self.adjacency[prev.0].iter().map(|&(w, _)| w).find(|w| !removed[w.0]).expect("path to stalk");
                prev = next;
            }
        }
        let mut builder = TreeBuilder::new();
        let mut new_id = vec![None; self.labels.len()];
        for v in self.vertices().filter(|v| !removed[v.0]) {
            new_id[v.0] = Some(builder.add_vertex(self.label_of(v)));
        }
        for e in self.edges.iter().filter(|e| !removed[e.ends.0 .0] && !removed[e.ends.1 .0]) {
            builder.add_edge(new_id[e.ends.0 .0].unwrap(), new_id[e.ends.1 .0].unwrap(), e.weight.clone());
        }
        let stalk = new_id[cherry.stalk.0].expect("stalk kept");
        let remaining = self.adjacency[cherry.stalk.0].iter().filter(|(w, _)| !removed[w.0]).count();
        if remaining == 1 {
            builder.labels[stalk.0] = Some(fresh);
        } else {
            let leaf = builder.add_leaf(fresh);
            builder.add_edge(stalk, leaf, Scalar::zero());
        }
        Ok(builder.build()?.canonicalize())
    }

    /// Replaces the leaf labeled `at` by a stalk carrying new leaves `twigs`.
    pub(crate) fn attach_cherry(
        &self,
        at: Label,
        twigs: &BTreeMap<Label, Scalar>,
    ) -> Result<WeightedTree, TreeError> {
        let stalk = self.leaf(at)?;
        let mut builder = TreeBuilder { labels: self.labels.clone(), edges: self.edges.clone() };
        builder.labels[stalk.0] = None;
        for (&label, weight) in twigs {
            let leaf = builder.add_leaf(label);
            builder.add_edge(stalk, leaf, weight.clone());
        }
        builder.build()
    }
}
