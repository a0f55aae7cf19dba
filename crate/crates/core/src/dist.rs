//! Joint distributions as dense tensors.
//!
//! A [`DistTensor`] holds a (sub-)probability table over a set of variables,
//! stored row-major with the smallest-indexed axis most significant — the
//! same significance convention as CPT row indexing. The map from a
//! parameter set to its full joint is built by expanding one CPT factor at a
//! time in topological order; marginalizing out the hidden axis then gives
//! the observable joint that the recovery procedures consume.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{Model, NodeId};
use crate::params::{row_index, row_states, Cpt, ParameterSet};
use crate::scalar::{scalar_from_json, scalar_to_json, Scalar};

/// Dense tensor over a strictly ascending list of variable axes.
#[derive(Debug, Clone, PartialEq)]
pub struct DistTensor<S> {
    axes: Vec<NodeId>,
    sizes: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> DistTensor<S> {
    pub fn new(axes: Vec<NodeId>, sizes: Vec<usize>, data: Vec<S>) -> Self {
        assert_eq!(axes.len(), sizes.len());
        assert!(axes.windows(2).all(|w| w[0] < w[1]), "axes must ascend");
        assert_eq!(data.len(), sizes.iter().product::<usize>().max(1));
        DistTensor { axes, sizes, data }
    }

    /// The empty-axes tensor holding the single value one.
    pub fn scalar_one() -> Self {
        DistTensor {
            axes: Vec::new(),
            sizes: Vec::new(),
            data: vec![S::one()],
        }
    }

    pub fn axes(&self) -> &[NodeId] {
        &self.axes
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn size_of(&self, axis: NodeId) -> usize {
        let pos = self.axis_pos(axis);
        self.sizes[pos]
    }

    fn axis_pos(&self, axis: NodeId) -> usize {
        self.axes
            .iter()
            .position(|&a| a == axis)
            .unwrap_or_else(|| panic!("axis {axis} not present"))
    }

    pub fn at(&self, idx: &[usize]) -> &S {
        &self.data[row_index(&self.sizes, idx)]
    }

    pub fn total_mass(&self) -> S {
        let mut acc = S::zero();
        for x in &self.data {
            acc = acc + x.clone();
        }
        acc
    }

    /// Fix `axis` to `state` (0-based), dropping the axis. Mass is kept, not
    /// renormalized.
    pub fn fix(&self, axis: NodeId, state: usize) -> Self {
        let pos = self.axis_pos(axis);
        let mut axes = self.axes.clone();
        let mut sizes = self.sizes.clone();
        axes.remove(pos);
        let removed = sizes.remove(pos);
        assert!(state < removed);
        let total: usize = sizes.iter().product::<usize>().max(1);
        let mut data = Vec::with_capacity(total);
        for r in 0..total {
            let mut idx = row_states(&sizes, r);
            idx.insert(pos, state);
            data.push(self.at(&idx).clone());
        }
        DistTensor { axes, sizes, data }
    }

    /// Sum out every axis not in `keep`.
    pub fn marginalize_onto(&self, keep: &[NodeId]) -> Self {
        let mut keep_sorted: Vec<NodeId> = keep.to_vec();
        keep_sorted.sort_unstable();
        keep_sorted.dedup();
        for a in &keep_sorted {
            assert!(self.axes.contains(a), "axis {a} not present");
        }
        let keep_pos: Vec<usize> = keep_sorted.iter().map(|&a| self.axis_pos(a)).collect();
        let sizes: Vec<usize> = keep_pos.iter().map(|&p| self.sizes[p]).collect();
        let total: usize = sizes.iter().product::<usize>().max(1);
        let mut data = vec![S::zero(); total];
        let self_total: usize = self.sizes.iter().product::<usize>().max(1);
        for r in 0..self_total {
            let idx = row_states(&self.sizes, r);
            let sub: Vec<usize> = keep_pos.iter().map(|&p| idx[p]).collect();
            let target = row_index(&sizes, &sub);
            data[target] = data[target].clone() + self.data[r].clone();
        }
        DistTensor {
            axes: keep_sorted,
            sizes,
            data,
        }
    }

    pub fn marginalize_out(&self, axis: NodeId) -> Self {
        let keep: Vec<NodeId> = self.axes.iter().copied().filter(|&a| a != axis).collect();
        self.marginalize_onto(&keep)
    }

    /// Divide by total mass.
    pub fn normalized(&self, context: &str) -> Result<Self> {
        let mass = self.total_mass();
        if !mass.positive_within(0.0) {
            return Err(Error::ZeroMass {
                context: context.to_string(),
            });
        }
        Ok(DistTensor {
            axes: self.axes.clone(),
            sizes: self.sizes.clone(),
            data: self.data.iter().map(|x| x.clone() / mass.clone()).collect(),
        })
    }

    /// Flatten to a matrix: rows enumerate the states of `row_axes` (first
    /// listed axis most significant), columns those of `col_axes`. Together
    /// the two lists must use each tensor axis exactly once.
    pub fn as_matrix(&self, row_axes: &[NodeId], col_axes: &[NodeId]) -> Matrix<S> {
        let mut used: Vec<NodeId> = row_axes.iter().chain(col_axes).copied().collect();
        used.sort_unstable();
        assert_eq!(used, self.axes, "row/col axes must partition the axes");
        let row_sizes: Vec<usize> = row_axes.iter().map(|&a| self.size_of(a)).collect();
        let col_sizes: Vec<usize> = col_axes.iter().map(|&a| self.size_of(a)).collect();
        let nrows = row_sizes.iter().product::<usize>().max(1);
        let ncols = col_sizes.iter().product::<usize>().max(1);
        let row_pos: Vec<usize> = row_axes.iter().map(|&a| self.axis_pos(a)).collect();
        let col_pos: Vec<usize> = col_axes.iter().map(|&a| self.axis_pos(a)).collect();
        Matrix::from_fn(nrows, ncols, |r, c| {
            let rs = row_states(&row_sizes, r);
            let cs = row_states(&col_sizes, c);
            let mut idx = vec![0usize; self.axes.len()];
            for (p, s) in row_pos.iter().zip(&rs) {
                idx[*p] = *s;
            }
            for (p, s) in col_pos.iter().zip(&cs) {
                idx[*p] = *s;
            }
            self.at(&idx).clone()
        })
    }

    /// Inverse of [`Self::as_matrix`]: rebuild a tensor from a flattened
    /// matrix and the axis lists (with their state counts) that index it.
    pub fn from_matrix(
        row_axes: &[NodeId],
        row_sizes: &[usize],
        col_axes: &[NodeId],
        col_sizes: &[usize],
        m: &Matrix<S>,
    ) -> Self {
        let mut axes: Vec<NodeId> = row_axes.iter().chain(col_axes).copied().collect();
        let mut sizes_by_axis: BTreeMap<NodeId, usize> = BTreeMap::new();
        for (&a, &s) in row_axes.iter().zip(row_sizes) {
            sizes_by_axis.insert(a, s);
        }
        for (&a, &s) in col_axes.iter().zip(col_sizes) {
            sizes_by_axis.insert(a, s);
        }
        axes.sort_unstable();
        let sizes: Vec<usize> = axes.iter().map(|a| sizes_by_axis[a]).collect();
        let total: usize = sizes.iter().product::<usize>().max(1);
        let mut data = vec![S::zero(); total];
        for r in 0..m.nrows() {
            let rs = row_states(row_sizes, r);
            for c in 0..m.ncols() {
                let cs = row_states(col_sizes, c);
                let mut idx = vec![0usize; axes.len()];
                for (&a, &s) in row_axes.iter().zip(&rs) {
                    idx[axes.iter().position(|&x| x == a).unwrap()] = s;
                }
                for (&a, &s) in col_axes.iter().zip(&cs) {
                    idx[axes.iter().position(|&x| x == a).unwrap()] = s;
                }
                data[row_index(&sizes, &idx)] = m.at(r, c).clone();
            }
        }
        DistTensor { axes, sizes, data }
    }

    /// Rename axes: `perm[old_id] = new_id`. Axes are re-sorted and the data
    /// permuted to keep the ascending-axis invariant.
    pub fn relabel_axes(&self, perm: &[NodeId]) -> Self {
        let new_ids: Vec<NodeId> = self.axes.iter().map(|&a| perm[a]).collect();
        let mut order: Vec<usize> = (0..new_ids.len()).collect();
        order.sort_by_key(|&i| new_ids[i]);
        let axes: Vec<NodeId> = order.iter().map(|&i| new_ids[i]).collect();
        assert!(axes.windows(2).all(|w| w[0] < w[1]), "perm must be injective");
        let sizes: Vec<usize> = order.iter().map(|&i| self.sizes[i]).collect();
        let total: usize = sizes.iter().product::<usize>().max(1);
        let mut data = Vec::with_capacity(total);
        for r in 0..total {
            let idx_new = row_states(&sizes, r);
            let mut idx_old = vec![0usize; self.axes.len()];
            for (pos_new, &pos_old) in order.iter().enumerate() {
                idx_old[pos_old] = idx_new[pos_new];
            }
            data.push(self.at(&idx_old).clone());
        }
        DistTensor { axes, sizes, data }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.axes, other.axes);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.clone() - b.clone()).abs_f64())
            .fold(0.0, f64::max)
    }

    pub fn eq_within(&self, other: &Self, tol: f64) -> bool {
        self.axes == other.axes
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.eq_within(b, tol))
    }

    /// Multiply in one CPT factor, extending the axis set by node `v`.
    fn expand_with_cpt(&self, cpt: &Cpt<S>, v: NodeId, v_size: usize) -> Self {
        let mut axes = self.axes.clone();
        let insert_pos = axes.iter().position(|&a| a > v).unwrap_or(axes.len());
        axes.insert(insert_pos, v);
        let mut sizes = self.sizes.clone();
        sizes.insert(insert_pos, v_size);
        let parent_pos: Vec<usize> = cpt
            .parents
            .iter()
            .map(|p| axes.iter().position(|a| a == p).expect("parent before child"))
            .collect();
        let total: usize = sizes.iter().product::<usize>().max(1);
        let mut data = Vec::with_capacity(total);
        for r in 0..total {
            let idx = row_states(&sizes, r);
            let mut old_idx = idx.clone();
            old_idx.remove(insert_pos);
            let parent_states: Vec<usize> = parent_pos.iter().map(|&p| idx[p]).collect();
            let factor = cpt.prob(&parent_states, idx[insert_pos]);
            data.push(self.at(&old_idx).clone() * factor.clone());
        }
        DistTensor { axes, sizes, data }
    }

    pub fn to_doc(&self) -> TensorDoc {
        TensorDoc {
            mode: S::mode().as_str().to_string(),
            axes: self.axes.clone(),
            state_sizes: self
                .axes
                .iter()
                .zip(&self.sizes)
                .map(|(a, &s)| (a.to_string(), s))
                .collect(),
            values: self.data.iter().map(scalar_to_json).collect(),
        }
    }

    pub fn from_doc(doc: &TensorDoc) -> Result<Self> {
        if !doc.axes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Parse(
                "tensor axes must be listed in ascending order".to_string(),
            ));
        }
        let mut sizes = Vec::with_capacity(doc.axes.len());
        for a in &doc.axes {
            let s = doc
                .state_sizes
                .get(&a.to_string())
                .ok_or_else(|| Error::Parse(format!("missing state size for axis {a}")))?;
            if *s < 2 {
                return Err(Error::Parse(format!("axis {a} has fewer than 2 states")));
            }
            sizes.push(*s);
        }
        let expected: usize = sizes.iter().product::<usize>().max(1);
        if doc.values.len() != expected {
            return Err(Error::Parse(format!(
                "expected {expected} values, found {}",
                doc.values.len()
            )));
        }
        let mut data = Vec::with_capacity(expected);
        for v in &doc.values {
            data.push(scalar_from_json(v)?);
        }
        Ok(DistTensor {
            axes: doc.axes.clone(),
            sizes,
            data,
        })
    }
}

/// Serialization form of a [`DistTensor`]: flat values in row-major order
/// with the first listed axis most significant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorDoc {
    pub mode: String,
    pub axes: Vec<NodeId>,
    pub state_sizes: BTreeMap<String, usize>,
    pub values: Vec<serde_json::Value>,
}

/// Full joint over all nodes (hidden included), as the product of CPTs.
pub fn joint_distribution<S: Scalar>(params: &ParameterSet<S>) -> DistTensor<S> {
    let order = params.model.topo_order().expect("model must be acyclic");
    let mut t = DistTensor::scalar_one();
    for v in order {
        t = t.expand_with_cpt(&params.cpts[v], v, params.model.state_size(v));
    }
    t
}

/// Observable joint: the full joint with the hidden axis summed out.
pub fn observable_joint<S: Scalar>(params: &ParameterSet<S>) -> DistTensor<S> {
    joint_distribution(params).marginalize_out(0)
}

/// Read a parameter set back off a full joint over all of `model`'s nodes:
/// each CPT row is the conditional distribution of the node given one
/// parent assignment. Fails with [`Error::ZeroMass`] when a parent
/// assignment has no mass to condition on.
pub fn parameters_from_joint<S: Scalar>(
    model: &Model,
    joint: &DistTensor<S>,
) -> Result<ParameterSet<S>> {
    let all: Vec<NodeId> = model.nodes().collect();
    assert_eq!(joint.axes(), &all[..], "joint must cover every node");
    let mut cpts = Vec::with_capacity(model.n_nodes());
    for v in model.nodes() {
        let parents = model.parents(v);
        let parent_sizes: Vec<usize> = parents.iter().map(|&w| model.state_size(w)).collect();
        let mut with_v = parents.clone();
        with_v.push(v);
        let num = joint.marginalize_onto(&with_v);
        let den = joint.marginalize_onto(&parents);
        let nrows = model.row_count(v);
        let ncols = model.state_size(v);
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in 0..nrows {
            let pstates = row_states(&parent_sizes, r);
            let mass = den.at(&pstates).clone();
            if !mass.positive_within(0.0) {
                return Err(Error::ZeroMass {
                    context: format!("parent assignment {pstates:?} of node {v}"),
                });
            }
            for x in 0..ncols {
                // `num`'s axes are sorted, so place v's state at its sorted
                // position among the parents.
                let mut idx = pstates.clone();
                let v_pos = num.axes().iter().position(|&a| a == v).unwrap();
                idx.insert(v_pos, x);
                data.push(num.at(&idx).clone() / mass.clone());
            }
        }
        cpts.push(Cpt {
            parents,
            parent_sizes,
            table: Matrix::new(nrows, ncols, data),
        });
    }
    Ok(ParameterSet::new(model.clone(), cpts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::catalog_model;
    use crate::params::sample_generic;
    use num::{BigRational, One};
    use proptest::prelude::*;

    /// Independent route: evaluate the joint cell by cell as a plain product
    /// of CPT lookups.
    fn naive_joint<S: Scalar>(params: &ParameterSet<S>) -> DistTensor<S> {
        let model = &params.model;
        let axes: Vec<NodeId> = model.nodes().collect();
        let sizes: Vec<usize> = axes.iter().map(|&v| model.state_size(v)).collect();
        let total: usize = sizes.iter().product();
        let mut data = Vec::with_capacity(total);
        for r in 0..total {
            let idx = row_states(&sizes, r);
            let mut p = S::one();
            for v in model.nodes() {
                let pstates: Vec<usize> =
                    model.parents(v).iter().map(|&w| idx[w]).collect();
                p = p * params.cpts[v].prob(&pstates, idx[v]).clone();
            }
            data.push(p);
        }
        DistTensor::new(axes, sizes, data)
    }

    #[test]
    fn factor_expansion_matches_naive_product() {
        for id in ["3-0", "4-2b", "4-3b", "4-3e", "4-4"] {
            let model = catalog_model(id).unwrap();
            let params: ParameterSet<BigRational> = sample_generic(&model, 5);
            assert_eq!(joint_distribution(&params), naive_joint(&params), "{id}");
        }
    }

    #[test]
    fn joint_mass_is_one_exactly() {
        let model = catalog_model("4-3g").unwrap();
        let params: ParameterSet<BigRational> = sample_generic(&model, 9);
        assert!(joint_distribution(&params).total_mass().is_one());
        assert!(observable_joint(&params).total_mass().is_one());
    }

    #[test]
    fn parameters_round_trip_through_joint() {
        for id in ["3-0", "4-1", "4-3f"] {
            let model = catalog_model(id).unwrap();
            let params: ParameterSet<BigRational> = sample_generic(&model, 13);
            let joint = joint_distribution(&params);
            let back = parameters_from_joint(&model, &joint).unwrap();
            assert_eq!(params, back, "{id}");
        }
    }

    #[test]
    fn matrix_round_trip() {
        let model = catalog_model("4-0").unwrap();
        let params: ParameterSet<BigRational> = sample_generic(&model, 2);
        let obs = observable_joint(&params);
        let m = obs.as_matrix(&[3, 1], &[4, 2]);
        let back = DistTensor::from_matrix(&[3, 1], &[2, 2], &[4, 2], &[2, 2], &m);
        assert_eq!(obs, back);
    }

    #[test]
    fn fix_and_marginalize_agree_with_hand_sums() {
        let model = catalog_model("3-0").unwrap();
        let params: ParameterSet<BigRational> = sample_generic(&model, 4);
        let obs = observable_joint(&params);
        // P(X1=0, X2=*, X3=*) summed should equal the X1 marginal at 0.
        let fixed = obs.fix(1, 0);
        let marg = obs.marginalize_onto(&[1]);
        assert_eq!(fixed.total_mass(), marg.at(&[0]).clone());
    }

    #[test]
    fn relabel_axes_moves_data() {
        let model = catalog_model("3-0").unwrap();
        let params: ParameterSet<BigRational> = sample_generic(&model, 21);
        let obs = observable_joint(&params);
        // Swap observables 1 and 2: P'(a, b, c) = P(b, a, c).
        let swapped = obs.relabel_axes(&[0, 2, 1, 3]);
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    assert_eq!(swapped.at(&[a, b, c]), obs.at(&[b, a, c]));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn marginalization_composes(seed in 0u64..500) {
            let model = catalog_model("4-0").unwrap();
            let params: ParameterSet<f64> = sample_generic(&model, seed);
            let obs = observable_joint(&params);
            let direct = obs.marginalize_onto(&[2, 4]);
            let via = obs.marginalize_out(1).marginalize_out(3);
            prop_assert!(direct.max_abs_diff(&via) < 1e-14);
        }
    }
}
