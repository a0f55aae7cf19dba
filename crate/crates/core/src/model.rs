//! Directed graphical models with one hidden source node.
//!
//! A [`Model`] is a DAG over nodes `0..n` where node `0` is hidden and is a
//! parent of every observable node `1..n`. Edges between observables are
//! arbitrary as long as the whole graph stays acyclic. State counts are per
//! node; the catalog in [`crate::catalog`] instantiates the all-binary
//! networks this library ships procedures for, but the type itself permits
//! any sizes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a node; `0` is always the hidden variable.
pub type NodeId = usize;

/// A Bayesian network structure with node `0` hidden and parental to every
/// observable. Stores all edges explicitly, including the `0 -> v` ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    state_sizes: Vec<usize>,
    edges: BTreeSet<(NodeId, NodeId)>,
}

impl Model {
    /// Build from explicit state sizes and *observable-to-observable* edges.
    /// The hidden-to-observable edges are added automatically.
    pub fn with_hidden_parent(state_sizes: Vec<usize>, obs_edges: &[(NodeId, NodeId)]) -> Self {
        let mut edges: BTreeSet<(NodeId, NodeId)> = obs_edges.iter().copied().collect();
        for v in 1..state_sizes.len() {
            edges.insert((0, v));
        }
        Model { state_sizes, edges }
    }

    /// Build from a raw edge set (hidden edges included). Missing `0 -> v`
    /// edges are inserted, since the family requires them.
    pub fn from_edges(state_sizes: Vec<usize>, edges: &[(NodeId, NodeId)]) -> Self {
        let obs: Vec<(NodeId, NodeId)> = edges.iter().copied().filter(|&(i, _)| i != 0).collect();
        Model::with_hidden_parent(state_sizes, &obs)
    }

    pub fn n_nodes(&self) -> usize {
        self.state_sizes.len()
    }

    /// Number of observable nodes.
    pub fn n_obs(&self) -> usize {
        self.state_sizes.len().saturating_sub(1)
    }

    pub fn state_size(&self, v: NodeId) -> usize {
        self.state_sizes[v]
    }

    pub fn state_sizes(&self) -> &[usize] {
        &self.state_sizes
    }

    /// All nodes, hidden first.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.state_sizes.len()
    }

    pub fn observables(&self) -> impl Iterator<Item = NodeId> {
        1..self.state_sizes.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }

    /// Edges with both endpoints observable.
    pub fn obs_edges(&self) -> Vec<(NodeId, NodeId)> {
        self.edges.iter().copied().filter(|&(i, _)| i != 0).collect()
    }

    pub fn has_edge(&self, i: NodeId, j: NodeId) -> bool {
        self.edges.contains(&(i, j))
    }

    /// Parents of `v`, ascending. Ascending node id is also the row-index
    /// significance order used by [`crate::params`]: the smallest-indexed
    /// parent varies slowest.
    pub fn parents(&self, v: NodeId) -> Vec<NodeId> {
        self.edges
            .iter()
            .filter(|&&(_, j)| j == v)
            .map(|&(i, _)| i)
            .collect()
    }

    pub fn children(&self, v: NodeId) -> Vec<NodeId> {
        self.edges
            .iter()
            .filter(|&&(i, _)| i == v)
            .map(|&(_, j)| j)
            .collect()
    }

    /// Number of parent-state combinations of `v` (rows of its CPT).
    pub fn row_count(&self, v: NodeId) -> usize {
        self.parents(v)
            .iter()
            .map(|&w| self.state_sizes[w])
            .product()
    }

    /// Deterministic topological order: among ready nodes, smallest id first.
    /// `None` if the graph has a cycle.
    pub fn topo_order(&self) -> Option<Vec<NodeId>> {
        let n = self.n_nodes();
        let mut indegree = vec![0usize; n];
        for &(_, j) in &self.edges {
            indegree[j] += 1;
        }
        let mut ready: BTreeSet<NodeId> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            order.push(v);
            for &(i, j) in &self.edges {
                if i == v {
                    indegree[j] -= 1;
                    if indegree[j] == 0 {
                        ready.insert(j);
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Check structural invariants, collecting every violation.
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        let n = self.n_nodes();
        if n < 2 {
            violations.push("model needs the hidden node and at least one observable".to_string());
        }
        for (v, &size) in self.state_sizes.iter().enumerate() {
            if size < 2 {
                violations.push(format!("node {v} has {size} states; at least 2 required"));
            }
        }
        for &(i, j) in &self.edges {
            if i >= n || j >= n {
                violations.push(format!("edge ({i}, {j}) references a node outside 0..{n}"));
            } else if i == j {
                violations.push(format!("self-loop on node {i}"));
            } else if j == 0 {
                violations.push(format!("edge ({i}, 0): the hidden node cannot have parents"));
            }
        }
        for v in 1..n {
            if !self.edges.contains(&(0, v)) {
                violations.push(format!("hidden node is not a parent of observable {v}"));
            }
        }
        if violations.is_empty() && self.topo_order().is_none() {
            violations.push("graph has a directed cycle".to_string());
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel { violations })
        }
    }

    /// Dimension of the parameter space: for each node, (states - 1) free
    /// entries per CPT row, one row per parent-state combination.
    pub fn parameter_dimension(&self) -> usize {
        self.nodes()
            .map(|v| (self.state_sizes[v] - 1) * self.row_count(v))
            .sum()
    }

    /// Dimension of the observable probability simplex the model maps into.
    pub fn observable_dimension(&self) -> usize {
        self.observables()
            .map(|v| self.state_sizes[v])
            .product::<usize>()
            - 1
    }

    /// New model with edge `i -> j` replaced by `j -> i`. Panics if absent.
    pub fn reverse_edge(&self, i: NodeId, j: NodeId) -> Model {
        assert!(self.edges.contains(&(i, j)), "edge not present");
        let mut edges = self.edges.clone();
        edges.remove(&(i, j));
        edges.insert((j, i));
        Model {
            state_sizes: self.state_sizes.clone(),
            edges,
        }
    }

    /// Rename observables according to `perm`, where `perm[v]` is the new id
    /// of old node `v` and `perm[0] == 0`.
    pub fn relabel_observables(&self, perm: &[NodeId]) -> Model {
        assert_eq!(perm.len(), self.n_nodes());
        assert_eq!(perm[0], 0, "hidden node cannot be relabeled");
        let mut sizes = vec![0usize; self.n_nodes()];
        for (old, &new) in perm.iter().enumerate() {
            sizes[new] = self.state_sizes[old];
        }
        let edges = self
            .edges
            .iter()
            .map(|&(i, j)| (perm[i], perm[j]))
            .collect();
        Model {
            state_sizes: sizes,
            edges,
        }
    }

    /// Undirected adjacency (skeleton) as a set of ordered pairs `(min, max)`.
    pub fn skeleton(&self) -> BTreeSet<(NodeId, NodeId)> {
        self.edges
            .iter()
            .map(|&(i, j)| (i.min(j), i.max(j)))
            .collect()
    }

    pub fn to_doc(&self) -> ModelDoc {
        ModelDoc {
            state_sizes: self
                .state_sizes
                .iter()
                .enumerate()
                .map(|(v, &s)| (v.to_string(), s))
                .collect(),
            edges: self.edges.iter().copied().collect(),
        }
    }

    pub fn from_doc(doc: &ModelDoc) -> Result<Model> {
        let n = doc.state_sizes.len();
        let mut sizes = vec![0usize; n];
        for (key, &size) in &doc.state_sizes {
            let v: usize = key
                .parse()
                .map_err(|_| Error::Parse(format!("bad node id {key:?} in state_sizes")))?;
            if v >= n {
                return Err(Error::Parse(format!(
                    "state_sizes keys must cover 0..{n} exactly; got {key:?}"
                )));
            }
            sizes[v] = size;
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::Parse(
                "state_sizes keys must cover every node exactly once".to_string(),
            ));
        }
        let model = Model::from_edges(sizes, &doc.edges);
        model.validate()?;
        Ok(model)
    }
}

/// Serialization form of a [`Model`]: state sizes keyed by node id (as JSON
/// object keys, hence strings) plus the edge list. Hidden-to-observable
/// edges may be omitted on input; they are always written on output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDoc {
    pub state_sizes: BTreeMap<String, usize>,
    pub edges: Vec<(NodeId, NodeId)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_edges_are_implicit() {
        let m = Model::with_hidden_parent(vec![2, 2, 2], &[(1, 2)]);
        assert!(m.has_edge(0, 1));
        assert!(m.has_edge(0, 2));
        assert!(m.has_edge(1, 2));
        m.validate().unwrap();
        assert_eq!(m.parents(2), vec![0, 1]);
        assert_eq!(m.row_count(2), 4);
    }

    #[test]
    fn parameter_dimension_counts_free_entries() {
        // Hidden + 3 binary observables, no observable edges: 1 + 3*2 = 7.
        let m = Model::with_hidden_parent(vec![2, 2, 2, 2], &[]);
        assert_eq!(m.parameter_dimension(), 7);
        assert_eq!(m.observable_dimension(), 7);
        // Adding 1 -> 2 doubles node 2's rows: 7 + 2 = 9.
        let m = Model::with_hidden_parent(vec![2, 2, 2, 2], &[(1, 2)]);
        assert_eq!(m.parameter_dimension(), 9);
    }

    #[test]
    fn cycle_is_rejected() {
        let m = Model::with_hidden_parent(vec![2, 2, 2], &[(1, 2), (2, 1)]);
        let err = m.validate().unwrap_err();
        assert!(matches!(err, Error::InvalidModel { .. }));
    }

    #[test]
    fn topo_order_is_deterministic() {
        let m = Model::with_hidden_parent(vec![2, 2, 2, 2, 2], &[(3, 1), (1, 4)]);
        assert_eq!(m.topo_order().unwrap(), vec![0, 2, 3, 1, 4]);
    }

    #[test]
    fn doc_round_trip() {
        let m = Model::with_hidden_parent(vec![2, 3, 4], &[(1, 2)]);
        let doc = m.to_doc();
        let json = serde_json::to_string(&doc).unwrap();
        let back = Model::from_doc(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn relabeling_swaps_structure() {
        let m = Model::with_hidden_parent(vec![2, 2, 2, 2, 2], &[(1, 2), (2, 3)]);
        let swapped = m.relabel_observables(&[0, 2, 1, 3, 4]);
        let expected = Model::with_hidden_parent(vec![2, 2, 2, 2, 2], &[(2, 1), (1, 3)]);
        assert_eq!(swapped, expected);
    }
}
