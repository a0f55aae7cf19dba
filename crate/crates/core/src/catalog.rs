//! The all-binary network catalog.
//!
//! Every catalog entry has one hidden binary node `0` parental to all
//! observables, all observables binary, and a fixed set of edges between
//! observables. Ids follow a `B-E` scheme: `B` observables and `E` edges
//! between them, with a letter suffix distinguishing non-isomorphic shapes
//! at the same edge count. Each entry carries the generic fiber cardinality
//! of its observable-distribution map (the `k` in "generically k-to-one"),
//! which the oracle in [`crate::fiber`] can re-derive numerically.

use crate::error::{Error, Result};
use crate::model::{Model, NodeId};

/// Generic fiber cardinality claim for a catalog entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KClaim {
    /// Generic fibers are finite with exactly this many points.
    Finite(usize),
    /// Generic fibers are positive-dimensional.
    Infinite,
}

impl KClaim {
    pub fn is_finite(&self) -> bool {
        matches!(self, KClaim::Finite(_))
    }

    pub fn k(&self) -> Option<usize> {
        match self {
            KClaim::Finite(k) => Some(*k),
            KClaim::Infinite => None,
        }
    }
}

impl std::fmt::Display for KClaim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KClaim::Finite(k) => write!(f, "{k}"),
            KClaim::Infinite => write!(f, "infinite"),
        }
    }
}

/// One catalog row.
#[derive(Debug, Clone, Copy)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub n_obs: usize,
    pub obs_edges: &'static [(NodeId, NodeId)],
    pub k: KClaim,
}

impl CatalogEntry {
    pub fn model(&self) -> Model {
        Model::with_hidden_parent(vec![2; self.n_obs + 1], self.obs_edges)
    }
}

use KClaim::{Finite, Infinite};

/// All catalog entries, in id order.
pub static CATALOG: &[CatalogEntry] = &[
    CatalogEntry { id: "2-0", n_obs: 2, obs_edges: &[], k: Infinite },
    CatalogEntry { id: "2-1", n_obs: 2, obs_edges: &[(1, 2)], k: Infinite },
    CatalogEntry { id: "3-0", n_obs: 3, obs_edges: &[], k: Finite(2) },
    CatalogEntry { id: "3-1", n_obs: 3, obs_edges: &[(1, 2)], k: Infinite },
    CatalogEntry { id: "4-0", n_obs: 4, obs_edges: &[], k: Finite(2) },
    CatalogEntry { id: "4-1", n_obs: 4, obs_edges: &[(1, 2)], k: Finite(2) },
    CatalogEntry { id: "4-2a", n_obs: 4, obs_edges: &[(1, 2), (3, 4)], k: Infinite },
    CatalogEntry { id: "4-2b", n_obs: 4, obs_edges: &[(1, 2), (2, 3)], k: Finite(2) },
    CatalogEntry { id: "4-2c", n_obs: 4, obs_edges: &[(1, 2), (1, 3)], k: Finite(2) },
    CatalogEntry { id: "4-2d", n_obs: 4, obs_edges: &[(1, 3), (2, 3)], k: Finite(2) },
    CatalogEntry { id: "4-3a", n_obs: 4, obs_edges: &[(2, 1), (1, 3), (3, 4)], k: Finite(2) },
    CatalogEntry { id: "4-3b", n_obs: 4, obs_edges: &[(1, 2), (1, 3), (3, 4)], k: Finite(2) },
    CatalogEntry { id: "4-3c", n_obs: 4, obs_edges: &[(1, 2), (3, 2), (3, 4)], k: Infinite },
    CatalogEntry { id: "4-3d", n_obs: 4, obs_edges: &[(1, 2), (3, 2), (4, 3)], k: Infinite },
    CatalogEntry { id: "4-3e", n_obs: 4, obs_edges: &[(1, 2), (1, 3), (1, 4)], k: Finite(4) },
    CatalogEntry { id: "4-3f", n_obs: 4, obs_edges: &[(2, 1), (1, 3), (1, 4)], k: Finite(4) },
    CatalogEntry { id: "4-3g", n_obs: 4, obs_edges: &[(1, 3), (2, 3), (3, 4)], k: Infinite },
    CatalogEntry { id: "4-3h", n_obs: 4, obs_edges: &[(1, 4), (2, 4), (3, 4)], k: Infinite },
    CatalogEntry { id: "4-3i", n_obs: 4, obs_edges: &[(1, 2), (1, 3), (2, 3)], k: Infinite },
    CatalogEntry { id: "4-4", n_obs: 4, obs_edges: &[(1, 2), (1, 3), (1, 4), (3, 4)], k: Infinite },
];

/// Look up a catalog entry by id.
pub fn entry(id: &str) -> Result<&'static CatalogEntry> {
    CATALOG
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| Error::UnknownCatalogId(id.to_string()))
}

/// Instantiate the all-binary model for a catalog id.
pub fn catalog_model(id: &str) -> Result<Model> {
    Ok(entry(id)?.model())
}

/// Exact match: the id whose model equals `model` node-for-node.
pub fn catalog_id_of(model: &Model) -> Option<&'static str> {
    CATALOG
        .iter()
        .find(|e| e.model() == *model)
        .map(|e| e.id)
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            let mut perm = vec![first];
            perm.append(&mut tail);
            out.push(perm);
        }
    }
    out
}

/// Match `model` against the catalog up to renaming of observables.
/// Returns the id together with the full node permutation `perm` (hidden
/// fixed) such that `model.relabel_observables(&perm)` equals the catalog
/// model. The lexicographically smallest such permutation is returned.
pub fn catalog_id_up_to_relabeling(model: &Model) -> Option<(&'static str, Vec<NodeId>)> {
    if model.state_sizes().iter().any(|&s| s != 2) {
        return None;
    }
    let obs: Vec<usize> = (1..model.n_nodes()).collect();
    for e in CATALOG {
        if e.n_obs != model.n_obs() {
            continue;
        }
        let target = e.model();
        for tail in permutations(&obs) {
            let mut perm = vec![0];
            perm.extend(tail);
            if model.relabel_observables(&perm) == target {
                return Some((e.id, perm));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_entries_validate() {
        for e in CATALOG {
            let m = e.model();
            m.validate().unwrap();
            assert_eq!(m.n_obs(), e.n_obs, "{}", e.id);
        }
    }

    #[test]
    fn parameter_dimensions() {
        let expected = [
            ("2-0", 5),
            ("2-1", 7),
            ("3-0", 7),
            ("3-1", 9),
            ("4-0", 9),
            ("4-1", 11),
            ("4-2a", 13),
            ("4-2b", 13),
            ("4-2c", 13),
            ("4-2d", 15),
            ("4-3a", 15),
            ("4-3b", 15),
            ("4-3c", 17),
            ("4-3d", 17),
            ("4-3e", 15),
            ("4-3f", 15),
            ("4-3g", 17),
            ("4-3h", 23),
            ("4-3i", 17),
            ("4-4", 19),
        ];
        for (id, dim) in expected {
            assert_eq!(
                catalog_model(id).unwrap().parameter_dimension(),
                dim,
                "dimension mismatch for {id}"
            );
        }
    }

    #[test]
    fn entries_are_pairwise_non_isomorphic() {
        // The lookup scans in catalog order, so each entry finding itself
        // proves no entry shares a shape with an earlier one.
        for e in CATALOG {
            let (id, _) = catalog_id_up_to_relabeling(&e.model()).unwrap();
            assert_eq!(id, e.id);
        }
    }

    #[test]
    fn relabeled_lookup_finds_home() {
        // Reversing 1 -> 2 in the chain of 4-2b leaves node 2 as a hub with
        // children {1, 3}: the shape of 4-2c with observables 1 and 2 swapped.
        let m = catalog_model("4-2b").unwrap().reverse_edge(1, 2);
        let (id, perm) = catalog_id_up_to_relabeling(&m).unwrap();
        assert_eq!(id, "4-2c");
        assert_eq!(perm, vec![0, 2, 1, 3, 4]);
        assert_eq!(m.relabel_observables(&perm), catalog_model("4-2c").unwrap());
    }

    #[test]
    fn unknown_id_is_an_error() {
        assert!(matches!(
            catalog_model("9-9"),
            Err(Error::UnknownCatalogId(_))
        ));
    }
}
