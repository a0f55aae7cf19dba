//! Parameter sets: one conditional probability table per node.
//!
//! Row-indexing convention, used everywhere in this crate and in the JSON
//! interchange format: the rows of a node's CPT enumerate the joint states
//! of its parents in ascending node-id order with the *smallest-indexed
//! parent varying slowest* (most significant digit). Since the hidden node
//! `0` is a parent of every observable, it is always the most significant
//! coordinate of a row index. States are 0-based internally and 1-based in
//! documents and reports.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{Model, ModelDoc, NodeId};
use crate::scalar::{scalar_from_json, scalar_to_json, Mode, Scalar};

/// Row index for parent states `states` (0-based, one per parent in
/// ascending parent order) given the parent state counts in the same order.
pub fn row_index(parent_sizes: &[usize], states: &[usize]) -> usize {
    assert_eq!(parent_sizes.len(), states.len());
    let mut acc = 0;
    for (&size, &s) in parent_sizes.iter().zip(states) {
        debug_assert!(s < size);
        acc = acc * size + s;
    }
    acc
}

/// Inverse of [`row_index`]: the parent states encoded by `row`.
pub fn row_states(parent_sizes: &[usize], row: usize) -> Vec<usize> {
    let mut states = vec![0; parent_sizes.len()];
    let mut rem = row;
    for i in (0..parent_sizes.len()).rev() {
        states[i] = rem % parent_sizes[i];
        rem /= parent_sizes[i];
    }
    debug_assert_eq!(rem, 0);
    states
}

/// Conditional probability table of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt<S> {
    /// Parents in ascending node-id order.
    pub parents: Vec<NodeId>,
    /// State counts of the parents, in the same order.
    pub parent_sizes: Vec<usize>,
    /// `row_count x state_size` table; each row is a distribution.
    pub table: Matrix<S>,
}

impl<S: Scalar> Cpt<S> {
    pub fn row_count(&self) -> usize {
        self.table.nrows()
    }

    pub fn n_states(&self) -> usize {
        self.table.ncols()
    }

    /// Row for the given 0-based parent states.
    pub fn row_for(&self, states: &[usize]) -> &[S] {
        self.table.row(row_index(&self.parent_sizes, states))
    }

    pub fn prob(&self, parent_states: &[usize], state: usize) -> &S {
        &self.row_for(parent_states)[state]
    }
}

/// A full parameterization of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet<S> {
    pub model: Model,
    /// Indexed by node id.
    pub cpts: Vec<Cpt<S>>,
}

impl<S: Scalar> ParameterSet<S> {
    pub fn new(model: Model, cpts: Vec<Cpt<S>>) -> Self {
        ParameterSet { model, cpts }
    }

    /// The hidden node's prior as a single-row table.
    pub fn prior(&self) -> &[S] {
        self.cpts[0].table.row(0)
    }

    pub fn cpt(&self, v: NodeId) -> &Cpt<S> {
        &self.cpts[v]
    }

    /// Check CPT shapes against the model and each row against the simplex.
    /// Rational rows must sum to one exactly; float rows within `1e-9`.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.cpts.len() != self.model.n_nodes() {
            return Err(Error::Shape(format!(
                "expected {} tables, found {}",
                self.model.n_nodes(),
                self.cpts.len()
            )));
        }
        for v in self.model.nodes() {
            let cpt = &self.cpts[v];
            let parents = self.model.parents(v);
            if cpt.parents != parents {
                return Err(Error::InvalidCpt {
                    node: v,
                    reason: format!(
                        "parent list {:?} disagrees with the model's {:?}",
                        cpt.parents, parents
                    ),
                });
            }
            let sizes: Vec<usize> = parents.iter().map(|&w| self.model.state_size(w)).collect();
            if cpt.parent_sizes != sizes {
                return Err(Error::InvalidCpt {
                    node: v,
                    reason: "parent state counts disagree with the model".to_string(),
                });
            }
            if cpt.table.nrows() != self.model.row_count(v)
                || cpt.table.ncols() != self.model.state_size(v)
            {
                return Err(Error::InvalidCpt {
                    node: v,
                    reason: format!(
                        "table is {}x{}, expected {}x{}",
                        cpt.table.nrows(),
                        cpt.table.ncols(),
                        self.model.row_count(v),
                        self.model.state_size(v)
                    ),
                });
            }
            for r in 0..cpt.table.nrows() {
                let mut sum = S::zero();
                for c in 0..cpt.table.ncols() {
                    let e = cpt.table.at(r, c);
                    let in_range = match S::mode() {
                        Mode::Rational => *e >= S::zero() && *e <= S::one(),
                        Mode::Float => e.to_f64() >= -1e-12 && e.to_f64() <= 1.0 + 1e-12,
                    };
                    if !in_range {
                        return Err(Error::InvalidCpt {
                            node: v,
                            reason: format!("entry at row {r}, column {c} is outside [0, 1]"),
                        });
                    }
                    sum = sum + e.clone();
                }
                if !sum.eq_within(&S::one(), 1e-9) {
                    return Err(Error::InvalidCpt {
                        node: v,
                        reason: format!("row {r} sums to {sum}, not 1"),
                    });
                }
            }
        }
        Ok(())
    }

    /// True when every CPT entry exceeds `tol` (float) or is positive
    /// (rational). The first offending position is reported as a witness.
    pub fn positivity_witness(&self, tol: f64) -> Option<(NodeId, usize, usize)> {
        for (v, cpt) in self.cpts.iter().enumerate() {
            for r in 0..cpt.table.nrows() {
                for c in 0..cpt.table.ncols() {
                    if !cpt.table.at(r, c).positive_within(tol) {
                        return Some((v, r, c));
                    }
                }
            }
        }
        None
    }

    /// All table entries flattened in node order, each table row-major.
    /// This is the lexicographic key used to pick orbit representatives.
    pub fn flat_values(&self) -> Vec<S> {
        let mut out = Vec::new();
        for cpt in &self.cpts {
            out.extend_from_slice(cpt.table.data());
        }
        out
    }

    /// Largest entrywise deviation from `other` (same model assumed).
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.cpts
            .iter()
            .zip(&other.cpts)
            .map(|(a, b)| a.table.max_abs_diff(&b.table))
            .fold(0.0, f64::max)
    }

    /// Relabel the hidden states according to `perm` (`perm[old] = new`, a
    /// bijection on the hidden state space). The prior is permuted and the
    /// rows of every table are moved to the row with the renamed hidden
    /// coordinate; the observable joint is unchanged.
    pub fn apply_hidden_permutation(&self, perm: &[usize]) -> ParameterSet<S> {
        let n0 = self.model.state_size(0);
        assert_eq!(perm.len(), n0, "permutation length must match the hidden size");
        let mut cpts = Vec::with_capacity(self.cpts.len());
        for (v, cpt) in self.cpts.iter().enumerate() {
            let mut table = cpt.table.clone();
            if v == 0 {
                for (old, &new) in perm.iter().enumerate() {
                    *table.at_mut(0, new) = cpt.table.at(0, old).clone();
                }
            } else {
                for old_row in 0..cpt.row_count() {
                    let mut states = row_states(&cpt.parent_sizes, old_row);
                    states[0] = perm[states[0]];
                    let new_row = row_index(&cpt.parent_sizes, &states);
                    for c in 0..cpt.n_states() {
                        *table.at_mut(new_row, c) = cpt.table.at(old_row, c).clone();
                    }
                }
            }
            cpts.push(Cpt {
                parents: cpt.parents.clone(),
                parent_sizes: cpt.parent_sizes.clone(),
                table,
            });
        }
        ParameterSet {
            model: self.model.clone(),
            cpts,
        }
    }

    /// Rename observables according to `perm` (`perm[old] = new`,
    /// `perm[0] == 0`). Tables move to their new node ids and every table's
    /// rows are re-indexed, because renaming parents can change their
    /// ascending order and hence the row significance order.
    pub fn relabel_observables(&self, perm: &[NodeId]) -> ParameterSet<S> {
        let model = self.model.relabel_observables(perm);
        let mut cpts: Vec<Option<Cpt<S>>> = vec![None; model.n_nodes()];
        for old_v in self.model.nodes() {
            let new_v = perm[old_v];
            let old_cpt = &self.cpts[old_v];
            let new_parents = model.parents(new_v);
            let new_sizes: Vec<usize> =
                new_parents.iter().map(|&w| model.state_size(w)).collect();
            // Position of each new parent inside the old parent list.
            let old_pos: Vec<usize> = new_parents
                .iter()
                .map(|&np| {
                    old_cpt
                        .parents
                        .iter()
                        .position(|&op| perm[op] == np)
                        .expect("relabeling preserves parent sets")
                })
                .collect();
            let nrows = old_cpt.row_count();
            let ncols = old_cpt.n_states();
            let mut table = Matrix::zeros(nrows, ncols);
            for new_row in 0..nrows {
                let new_states = row_states(&new_sizes, new_row);
                let mut old_states = vec![0usize; old_cpt.parents.len()];
                for (k, &p) in old_pos.iter().enumerate() {
                    old_states[p] = new_states[k];
                }
                let old_row = row_index(&old_cpt.parent_sizes, &old_states);
                for c in 0..ncols {
                    *table.at_mut(new_row, c) = old_cpt.table.at(old_row, c).clone();
                }
            }
            cpts[new_v] = Some(Cpt {
                parents: new_parents,
                parent_sizes: new_sizes,
                table,
            });
        }
        ParameterSet {
            model,
            cpts: cpts.into_iter().map(Option::unwrap).collect(),
        }
    }

    /// Convert every entry to `f64`.
    pub fn to_float(&self) -> ParameterSet<f64> {
        ParameterSet {
            model: self.model.clone(),
            cpts: self
                .cpts
                .iter()
                .map(|c| Cpt {
                    parents: c.parents.clone(),
                    parent_sizes: c.parent_sizes.clone(),
                    table: Matrix::new(
                        c.table.nrows(),
                        c.table.ncols(),
                        c.table.data().iter().map(Scalar::to_f64).collect(),
                    ),
                })
                .collect(),
        }
    }

    /// Entry-by-entry lift of a float parameter set into this scalar type
    /// (exact in both modes: floats are dyadic rationals).
    pub(crate) fn from_float(p: &ParameterSet<f64>) -> ParameterSet<S> {
        ParameterSet {
            model: p.model.clone(),
            cpts: p
                .cpts
                .iter()
                .map(|c| Cpt {
                    parents: c.parents.clone(),
                    parent_sizes: c.parent_sizes.clone(),
                    table: Matrix::new(
                        c.table.nrows(),
                        c.table.ncols(),
                        c.table.data().iter().map(|&x| S::from_f64(x)).collect(),
                    ),
                })
                .collect(),
        }
    }

    pub fn to_doc(&self) -> ParamsDoc {
        ParamsDoc {
            mode: S::mode().as_str().to_string(),
            model: self.model.to_doc(),
            cpts: self
                .cpts
                .iter()
                .enumerate()
                .map(|(v, cpt)| {
                    let rows = (0..cpt.table.nrows())
                        .map(|r| cpt.table.row(r).iter().map(scalar_to_json).collect())
                        .collect();
                    (v.to_string(), rows)
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &ParamsDoc) -> Result<Self> {
        let model = Model::from_doc(&doc.model)?;
        let mut cpts = Vec::with_capacity(model.n_nodes());
        for v in model.nodes() {
            let rows = doc
                .cpts
                .get(&v.to_string())
                .ok_or_else(|| Error::Parse(format!("missing table for node {v}")))?;
            let parents = model.parents(v);
            let parent_sizes: Vec<usize> =
                parents.iter().map(|&w| model.state_size(w)).collect();
            let ncols = model.state_size(v);
            if rows.len() != model.row_count(v) || rows.iter().any(|r| r.len() != ncols) {
                return Err(Error::Parse(format!(
                    "table for node {v} has the wrong shape"
                )));
            }
            let mut data = Vec::with_capacity(rows.len() * ncols);
            for row in rows {
                for value in row {
                    data.push(scalar_from_json(value)?);
                }
            }
            cpts.push(Cpt {
                parents,
                parent_sizes,
                table: Matrix::new(rows.len(), ncols, data),
            });
        }
        let params = ParameterSet { model, cpts };
        params.validate()?;
        Ok(params)
    }
}

/// Serialization form of a [`ParameterSet`]. Tables are keyed by node id;
/// rational entries are `"p/q"` strings, float entries JSON numbers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsDoc {
    pub mode: String,
    pub model: ModelDoc,
    pub cpts: BTreeMap<String, Vec<Vec<serde_json::Value>>>,
}

/// Draw a generic parameter set for `model`, deterministically from `seed`.
///
/// Each CPT row is sampled from the flat Dirichlet by normalizing
/// exponential draws. The underlying `f64` draws are identical across
/// scalar modes; rational mode converts each draw exactly (every `f64` is a
/// dyadic rational) and renormalizes so rows sum to one exactly.
pub fn sample_generic<S: Scalar>(model: &Model, seed: u64) -> ParameterSet<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cpts = Vec::with_capacity(model.n_nodes());
    for v in model.nodes() {
        let parents = model.parents(v);
        let parent_sizes: Vec<usize> = parents.iter().map(|&w| model.state_size(w)).collect();
        let nrows = model.row_count(v);
        let ncols = model.state_size(v);
        let mut data: Vec<S> = Vec::with_capacity(nrows * ncols);
        for _ in 0..nrows {
            let draws: Vec<f64> = (0..ncols)
                .map(|_| {
                    let u: f64 = rng.gen_range(1e-12..1.0);
                    -u.ln()
                })
                .collect();
            let total: f64 = draws.iter().sum();
            let row_f: Vec<f64> = draws.iter().map(|e| e / total).collect();
            let row_s: Vec<S> = row_f.iter().map(|&x| S::from_f64(x)).collect();
            let mut sum = S::zero();
            for x in &row_s {
                sum = sum + x.clone();
            }
            for x in row_s {
                data.push(x / sum.clone());
            }
        }
        cpts.push(Cpt {
            parents,
            parent_sizes,
            table: Matrix::new(nrows, ncols, data),
        });
    }
    ParameterSet {
        model: model.clone(),
        cpts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::catalog_model;
    use num::{BigRational, One};
    use proptest::prelude::*;

    #[test]
    fn row_indexing_smallest_parent_most_significant() {
        // Parents (0, 1) with sizes (2, 3): row = s0 * 3 + s1.
        assert_eq!(row_index(&[2, 3], &[0, 0]), 0);
        assert_eq!(row_index(&[2, 3], &[0, 2]), 2);
        assert_eq!(row_index(&[2, 3], &[1, 0]), 3);
        assert_eq!(row_index(&[2, 3], &[1, 2]), 5);
        assert_eq!(row_states(&[2, 3], 4), vec![1, 1]);
    }

    #[test]
    fn sampled_rational_rows_sum_to_one_exactly() {
        let model = catalog_model("4-3b").unwrap();
        let params: ParameterSet<BigRational> = sample_generic(&model, 7);
        params.validate().unwrap();
        for cpt in &params.cpts {
            for sum in cpt.table.row_sums() {
                assert!(sum.is_one());
            }
        }
    }

    #[test]
    fn sampling_is_seed_deterministic_across_modes() {
        let model = catalog_model("3-0").unwrap();
        let a: ParameterSet<f64> = sample_generic(&model, 42);
        let b: ParameterSet<f64> = sample_generic(&model, 42);
        assert_eq!(a, b);
        let c: ParameterSet<BigRational> = sample_generic(&model, 42);
        assert!(a.max_abs_diff(&c.to_float()) < 1e-12);
        let d: ParameterSet<f64> = sample_generic(&model, 43);
        assert!(a.max_abs_diff(&d) > 1e-6);
    }

    #[test]
    fn doc_round_trip_rational() {
        let model = catalog_model("4-2c").unwrap();
        let params: ParameterSet<BigRational> = sample_generic(&model, 11);
        let doc = params.to_doc();
        let json = serde_json::to_string(&doc).unwrap();
        let back: ParameterSet<BigRational> =
            ParameterSet::from_doc(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(params, back);
    }

    #[test]
    fn doc_round_trip_float() {
        let model = catalog_model("4-0").unwrap();
        let params: ParameterSet<f64> = sample_generic(&model, 3);
        let doc = params.to_doc();
        let json = serde_json::to_string(&doc).unwrap();
        let back: ParameterSet<f64> =
            ParameterSet::from_doc(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(params, back);
    }

    #[test]
    fn relabeling_commutes_with_the_observable_joint() {
        use crate::dist::observable_joint;
        let model = catalog_model("4-3b").unwrap();
        let params: ParameterSet<BigRational> = sample_generic(&model, 19);
        let perm = vec![0, 3, 1, 4, 2];
        let relabeled = params.relabel_observables(&perm);
        relabeled.validate().unwrap();
        assert_eq!(
            observable_joint(&relabeled),
            observable_joint(&params).relabel_axes(&perm)
        );
        // Applying the inverse permutation restores the original.
        let mut inv = vec![0usize; perm.len()];
        for (old, &new) in perm.iter().enumerate() {
            inv[new] = old;
        }
        assert_eq!(relabeled.relabel_observables(&inv), params);
    }

    proptest! {
        #[test]
        fn row_index_bijective(sizes in proptest::collection::vec(2usize..5, 1..4)) {
            let total: usize = sizes.iter().product();
            for row in 0..total {
                let states = row_states(&sizes, row);
                prop_assert_eq!(row_index(&sizes, &states), row);
            }
        }
    }
}
