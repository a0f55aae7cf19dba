//! Markov equivalence and parameter transfer.
//!
//! Two DAGs are Markov equivalent exactly when one can be turned into the
//! other by a sequence of covered-edge reversals (an edge `i -> j` is
//! covered when `pa(j) = pa(i) + {i}`). Each single reversal has an explicit
//! parameter map that leaves the full joint untouched; composing them along
//! a reversal path transfers a parameterization from one member of an
//! equivalence class to another. The map divides by the reversed child's
//! new conditional, so its domain is the set of parameter vectors where the
//! two tables involved are strictly positive — outside it the transfer
//! reports a witness instead of producing garbage.
//!
//! Only edges between observables are ever reversed: reversing a hidden
//! edge would give the hidden node a parent and leave the model family.
//!
//! As an independent route to the same notion, this module also implements
//! the classical graphical characterization (same skeleton, same set of
//! immoralities) and d-separation; the tests play the two against each
//! other.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{Model, NodeId};
use crate::params::{row_index, row_states, Cpt, ParameterSet};
use crate::scalar::Scalar;

/// Observable edges `i -> j` with `pa(j) = pa(i) + {i}`, ascending.
pub fn covered_edges(model: &Model) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::new();
    for (i, j) in model.obs_edges() {
        let mut with_i = model.parents(i);
        with_i.push(i);
        with_i.sort_unstable();
        if model.parents(j) == with_i {
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}

/// Reverse the covered edge `i -> j` and push the parameters through the
/// corresponding joint-preserving map. Fails with [`Error::NotCovered`] if
/// the edge is not covered, and with [`Error::Precondition`] if either
/// table of the reversed pair has an entry at or below `tol` (the map
/// divides by sums of products of these entries).
pub fn reverse_covered_edge<S: Scalar>(
    params: &ParameterSet<S>,
    i: NodeId,
    j: NodeId,
    tol: f64,
) -> Result<ParameterSet<S>> {
    let model = &params.model;
    if !covered_edges(model).contains(&(i, j)) {
        return Err(Error::NotCovered(i, j));
    }
    for &v in &[i, j] {
        let t = &params.cpts[v].table;
        for r in 0..t.nrows() {
            for c in 0..t.ncols() {
                if !t.at(r, c).positive_within(tol) {
                    return Err(Error::Precondition {
                        name: "strict positivity of the reversed pair".to_string(),
                        witness: format!(
                            "node {v}, row {}, state {} has probability {}",
                            r + 1,
                            c + 1,
                            t.at(r, c)
                        ),
                    });
                }
            }
        }
    }

    let w_parents = model.parents(i);
    let w_sizes: Vec<usize> = w_parents.iter().map(|&w| model.state_size(w)).collect();
    let n_i = model.state_size(i);
    let n_j = model.state_size(j);
    let t_i = &params.cpts[i].table;
    let t_j = &params.cpts[j].table;

    let old_j_parents = model.parents(j);
    let pos_i_in_j = old_j_parents.iter().position(|&p| p == i).unwrap();
    let old_j_sizes = &params.cpts[j].parent_sizes;

    let target = model.reverse_edge(i, j);
    let new_i_parents = target.parents(i);
    let pos_j_in_i = new_i_parents.iter().position(|&p| p == j).unwrap();
    let new_i_sizes: Vec<usize> = new_i_parents
        .iter()
        .map(|&w| target.state_size(w))
        .collect();

    let w_rows: usize = w_sizes.iter().product::<usize>().max(1);
    let mut new_j = Matrix::zeros(w_rows, n_j);
    let mut new_i = Matrix::zeros(w_rows * n_j, n_i);
    for wr in 0..w_rows {
        let w = row_states(&w_sizes, wr);
        let old_j_row = |x: usize| {
            let mut states = w.clone();
            states.insert(pos_i_in_j, x);
            row_index(old_j_sizes, &states)
        };
        for y in 0..n_j {
            let mut total = S::zero();
            for x in 0..n_i {
                total = total + t_i.at(wr, x).clone() * t_j.at(old_j_row(x), y).clone();
            }
            *new_j.at_mut(wr, y) = total.clone();
            let mut states = w.clone();
            states.insert(pos_j_in_i, y);
            let new_i_row = row_index(&new_i_sizes, &states);
            for x in 0..n_i {
                *new_i.at_mut(new_i_row, x) =
                    t_i.at(wr, x).clone() * t_j.at(old_j_row(x), y).clone() / total.clone();
            }
        }
    }

    let mut cpts = params.cpts.clone();
    cpts[j] = Cpt {
        parents: w_parents.clone(),
        parent_sizes: w_sizes,
        table: new_j,
    };
    cpts[i] = Cpt {
        parents: new_i_parents,
        parent_sizes: new_i_sizes,
        table: new_i,
    };
    Ok(ParameterSet::new(target, cpts))
}

/// Every model reachable from `model` by covered-edge reversals, in
/// breadth-first discovery order (the model itself first). Limited to six
/// nodes to keep the search small.
pub fn markov_equivalence_class(model: &Model) -> Result<Vec<Model>> {
    if model.n_nodes() > 6 {
        return Err(Error::TooManyNodes {
            max: 6,
            got: model.n_nodes(),
        });
    }
    model.validate()?;
    let mut members = vec![model.clone()];
    let mut frontier = vec![0usize];
    while let Some(idx) = frontier.pop() {
        let current = members[idx].clone();
        for (i, j) in covered_edges(&current) {
            let next = current.reverse_edge(i, j);
            if !members.contains(&next) {
                members.push(next);
                frontier.insert(0, members.len() - 1);
            }
        }
    }
    Ok(members)
}

/// Shortest sequence of covered-edge reversals from `source` to `target`,
/// ties broken toward the lexicographically smallest edge sequence.
/// [`Error::NotEquivalent`] if `target` is not in the class.
pub fn reversal_path(source: &Model, target: &Model) -> Result<Vec<(NodeId, NodeId)>> {
    if source.n_nodes() > 6 {
        return Err(Error::TooManyNodes {
            max: 6,
            got: source.n_nodes(),
        });
    }
    source.validate()?;
    let mut members = vec![source.clone()];
    let mut back: Vec<Option<(usize, (NodeId, NodeId))>> = vec![None];
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        if members[idx] == *target {
            let mut path = Vec::new();
            let mut at = idx;
            while let Some((prev, edge)) = back[at] {
                path.push(edge);
                at = prev;
            }
            path.reverse();
            return Ok(path);
        }
        let current = members[idx].clone();
        for (i, j) in covered_edges(&current) {
            let next = current.reverse_edge(i, j);
            if !members.contains(&next) {
                members.push(next);
                back.push(Some((idx, (i, j))));
                queue.push_back(members.len() - 1);
            }
        }
    }
    Err(Error::NotEquivalent)
}

/// Result of moving a parameterization to another class member.
#[derive(Debug, Clone)]
pub struct TransferResult<S> {
    pub target: Model,
    /// The transferred parameters when `domain_ok`, otherwise the input
    /// parameters unchanged.
    pub params: ParameterSet<S>,
    /// Reversals successfully applied, in order.
    pub applied_reversals: Vec<(NodeId, NodeId)>,
    /// Observable renaming applied before the reversals, if any
    /// (`perm[old] = new`). `None` for plain fixed-label transfers.
    pub relabeling: Option<Vec<NodeId>>,
    pub domain_ok: bool,
    /// Which positivity requirement failed, when `!domain_ok`.
    pub witness: Option<String>,
}

/// Transfer `params` onto the Markov-equivalent `target` structure by
/// composing covered-edge reversals along the shortest path. A positivity
/// failure along the way is not an error: it is reported in the result with
/// the original parameters left untouched.
pub fn transfer_parameters<S: Scalar>(
    params: &ParameterSet<S>,
    target: &Model,
    tol: f64,
) -> Result<TransferResult<S>> {
    let path = reversal_path(&params.model, target)?;
    let mut current = params.clone();
    let mut applied = Vec::new();
    for &(i, j) in &path {
        match reverse_covered_edge(&current, i, j, tol) {
            Ok(next) => {
                current = next;
                applied.push((i, j));
            }
            Err(Error::Precondition { name, witness }) => {
                return Ok(TransferResult {
                    target: target.clone(),
                    params: params.clone(),
                    applied_reversals: applied,
                    relabeling: None,
                    domain_ok: false,
                    witness: Some(format!("{name}: {witness}")),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TransferResult {
        target: target.clone(),
        params: current,
        applied_reversals: applied,
        relabeling: None,
        domain_ok: true,
        witness: None,
    })
}

/// Like [`transfer_parameters`], but when the target is not reachable
/// under fixed labels, search renamings of the observables for one that
/// lands the source structure in the target's class. The lexicographically
/// smallest renaming (as `perm[old] = new`) is used and reported in the
/// result, and the transferred joint equals the original joint with its
/// axes renamed the same way.
pub fn transfer_with_relabeling<S: Scalar>(
    params: &ParameterSet<S>,
    target: &Model,
    tol: f64,
) -> Result<TransferResult<S>> {
    match transfer_parameters(params, target, tol) {
        Err(Error::NotEquivalent) => {}
        other => return other,
    }
    let n = params.model.n_nodes();
    if n != target.n_nodes() {
        return Err(Error::NotEquivalent);
    }
    let mut obs: Vec<NodeId> = (1..n).collect();
    let mut perms = Vec::new();
    obs_perms(&mut obs, 0, &mut perms);
    perms.sort();
    for tail in perms {
        let mut perm = vec![0];
        perm.extend(tail);
        let renamed = params.model.relabel_observables(&perm);
        if !same_markov_class(&renamed, target) {
            continue;
        }
        let mut result = transfer_parameters(&params.relabel_observables(&perm), target, tol)?;
        result.relabeling = Some(perm);
        return Ok(result);
    }
    Err(Error::NotEquivalent)
}

fn obs_perms(items: &mut Vec<NodeId>, at: usize, out: &mut Vec<Vec<NodeId>>) {
    if at == items.len() {
        out.push(items.clone());
        return;
    }
    for i in at..items.len() {
        items.swap(at, i);
        obs_perms(items, at + 1, out);
        items.swap(at, i);
    }
}

/// Immoralities of the DAG: triples `(a, b, c)` with `a < b`, both edges
/// `a -> c` and `b -> c` present, and `a`, `b` non-adjacent.
pub fn immoralities(model: &Model) -> BTreeSet<(NodeId, NodeId, NodeId)> {
    let skel = model.skeleton();
    let mut out = BTreeSet::new();
    for c in model.nodes() {
        let parents = model.parents(c);
        for (ai, &a) in parents.iter().enumerate() {
            for &b in &parents[ai + 1..] {
                if !skel.contains(&(a.min(b), a.max(b))) {
                    out.insert((a, b, c));
                }
            }
        }
    }
    out
}

/// Graphical characterization of Markov equivalence: same skeleton and the
/// same immoralities. Used as a cross-check on the reversal search.
pub fn same_markov_class(a: &Model, b: &Model) -> bool {
    a.state_sizes() == b.state_sizes()
        && a.skeleton() == b.skeleton()
        && immoralities(a) == immoralities(b)
}

/// d-separation of `x` and `y` given `z`, via the moralized ancestral
/// graph: restrict to ancestors of the three sets, marry co-parents, drop
/// `z`, and test undirected reachability.
pub fn d_separated(model: &Model, x: NodeId, y: NodeId, z: &BTreeSet<NodeId>) -> bool {
    if x == y || z.contains(&x) || z.contains(&y) {
        return true;
    }
    let n = model.n_nodes();
    // Ancestral closure of {x, y} + z.
    let mut in_set = vec![false; n];
    let mut stack: Vec<NodeId> = z.iter().copied().chain([x, y]).collect();
    while let Some(v) = stack.pop() {
        if in_set[v] {
            continue;
        }
        in_set[v] = true;
        stack.extend(model.parents(v));
    }
    // Moralize within the ancestral set.
    let mut adj = vec![BTreeSet::<NodeId>::new(); n];
    for (i, j) in model.edges() {
        if in_set[i] && in_set[j] {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    for c in 0..n {
        if !in_set[c] {
            continue;
        }
        let parents: Vec<NodeId> = model.parents(c).into_iter().filter(|&p| in_set[p]).collect();
        for (ai, &a) in parents.iter().enumerate() {
            for &b in &parents[ai + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
    }
    // Reachability avoiding z.
    let mut seen = vec![false; n];
    let mut stack = vec![x];
    while let Some(v) = stack.pop() {
        if seen[v] || z.contains(&v) {
            continue;
        }
        if v == y {
            return false;
        }
        seen[v] = true;
        stack.extend(adj[v].iter().copied());
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::catalog_model;
    use crate::dist::{joint_distribution, observable_joint};
    use crate::params::sample_generic;
    use num::BigRational;

    #[test]
    fn covered_edges_of_catalog_models() {
        let m = catalog_model("4-3b").unwrap();
        assert_eq!(covered_edges(&m), vec![(1, 2), (1, 3)]);
        let m = catalog_model("4-3e").unwrap();
        assert_eq!(covered_edges(&m), vec![(1, 2), (1, 3), (1, 4)]);
        // In the collider 4-2d neither edge is covered: node 3 has both 1
        // and 2 as parents but 1 and 2 have only the hidden node.
        let m = catalog_model("4-2d").unwrap();
        assert_eq!(covered_edges(&m), Vec::<(usize, usize)>::new());
    }

    #[test]
    fn reversal_preserves_the_full_joint_exactly() {
        let model = catalog_model("4-3b").unwrap();
        for seed in [1, 2, 3] {
            let params: ParameterSet<BigRational> = sample_generic(&model, seed);
            let reversed = reverse_covered_edge(&params, 1, 2, 1e-12).unwrap();
            reversed.validate().unwrap();
            assert_eq!(
                joint_distribution(&params),
                joint_distribution(&reversed),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn double_reversal_is_identity() {
        let model = catalog_model("4-3e").unwrap();
        let params: ParameterSet<BigRational> = sample_generic(&model, 5);
        let there = reverse_covered_edge(&params, 1, 3, 1e-12).unwrap();
        let back = reverse_covered_edge(&there, 3, 1, 1e-12).unwrap();
        assert_eq!(params, back);
    }

    #[test]
    fn class_of_the_chain_has_three_members() {
        let m = catalog_model("4-2b").unwrap();
        let class = markov_equivalence_class(&m).unwrap();
        assert_eq!(class.len(), 3);
        let hub2 = Model::with_hidden_parent(vec![2; 5], &[(2, 1), (2, 3)]);
        assert!(class.contains(&hub2));
        // 4-2c has a different skeleton and is not in the class.
        assert!(!class.contains(&catalog_model("4-2c").unwrap()));
        for member in &class {
            assert!(same_markov_class(&m, member));
        }
    }

    #[test]
    fn star_class_contains_its_single_in_edge_variants() {
        let m = catalog_model("4-3e").unwrap();
        let class = markov_equivalence_class(&m).unwrap();
        assert_eq!(class.len(), 4);
        assert!(class.contains(&catalog_model("4-3f").unwrap()));
        let m = catalog_model("4-3b").unwrap();
        let class = markov_equivalence_class(&m).unwrap();
        assert!(class.contains(&catalog_model("4-3a").unwrap()));
    }

    #[test]
    fn transfer_follows_the_shortest_path() {
        let source = catalog_model("4-3e").unwrap();
        let target = catalog_model("4-3f").unwrap();
        assert_eq!(reversal_path(&source, &target).unwrap(), vec![(1, 2)]);
        let params: ParameterSet<BigRational> = sample_generic(&source, 8);
        let result = transfer_parameters(&params, &target, 1e-12).unwrap();
        assert!(result.domain_ok);
        assert_eq!(result.applied_reversals, vec![(1, 2)]);
        assert_eq!(result.params.model, target);
        assert_eq!(observable_joint(&params), observable_joint(&result.params));
    }

    #[test]
    fn transfer_to_an_inequivalent_model_is_an_error() {
        let params: ParameterSet<BigRational> =
            sample_generic(&catalog_model("4-2b").unwrap(), 1);
        let err = transfer_parameters(&params, &catalog_model("4-2c").unwrap(), 1e-12);
        assert!(matches!(err, Err(Error::NotEquivalent)));
    }

    #[test]
    fn deterministic_tables_put_the_reversal_out_of_domain() {
        // X2 copies state 1 regardless of its parents: T2 contains zeros,
        // so the reversal of 1 -> 2 divides by quantities that can vanish
        // and must be refused with a witness.
        use crate::linalg::Matrix;
        let model = catalog_model("2-1").unwrap();
        let half = BigRational::from_ratio(1, 2);
        let cpts = vec![
            Cpt {
                parents: vec![],
                parent_sizes: vec![],
                table: Matrix::new(1, 2, vec![half.clone(), half.clone()]),
            },
            Cpt {
                parents: vec![0],
                parent_sizes: vec![2],
                table: Matrix::new(2, 2, vec![half.clone(); 4]),
            },
            Cpt {
                parents: vec![0, 1],
                parent_sizes: vec![2, 2],
                table: Matrix::new(
                    4,
                    2,
                    vec![
                        BigRational::from_int(1),
                        BigRational::from_int(0),
                        BigRational::from_int(1),
                        BigRational::from_int(0),
                        BigRational::from_int(1),
                        BigRational::from_int(0),
                        BigRational::from_int(1),
                        BigRational::from_int(0),
                    ],
                ),
            },
        ];
        let params = ParameterSet::new(model.clone(), cpts);
        params.validate().unwrap();
        let target = model.reverse_edge(1, 2);
        let result = transfer_parameters(&params, &target, 1e-12).unwrap();
        assert!(!result.domain_ok);
        assert!(result.witness.is_some());
        assert_eq!(result.params, params);
    }

    #[test]
    fn d_separation_in_the_chain() {
        let m = catalog_model("4-2b").unwrap();
        // 1 -> 2 -> 3 with the hidden common parent: conditioning on both
        // the middle node and the hidden node blocks everything.
        let z: BTreeSet<usize> = [0, 2].into_iter().collect();
        assert!(d_separated(&m, 1, 3, &z));
        let z: BTreeSet<usize> = [2].into_iter().collect();
        assert!(!d_separated(&m, 1, 3, &z), "hidden path stays open");
        let z = BTreeSet::new();
        assert!(!d_separated(&m, 1, 3, &z));
        // Node 4 is disconnected from the observables given the hidden node.
        let z: BTreeSet<usize> = [0].into_iter().collect();
        assert!(d_separated(&m, 1, 4, &z));
        assert!(!d_separated(&m, 1, 4, &BTreeSet::new()));
    }

    #[test]
    fn collider_opens_when_conditioned() {
        let m = catalog_model("4-2d").unwrap();
        // 1 -> 3 <- 2: given the hidden node, 1 and 2 are separated, but
        // conditioning on the collider 3 as well re-connects them.
        let z: BTreeSet<usize> = [0].into_iter().collect();
        assert!(d_separated(&m, 1, 2, &z));
        let z: BTreeSet<usize> = [0, 3].into_iter().collect();
        assert!(!d_separated(&m, 1, 2, &z));
    }

    #[test]
    fn d_separation_implies_conditional_independence() {
        // Every d-separation statement must hold numerically in a sampled
        // joint: P(x, y | z) = P(x | z) P(y | z), checked exactly.
        for id in ["4-2b", "4-2d", "4-3g"] {
            let model = catalog_model(id).unwrap();
            let params: ParameterSet<BigRational> = sample_generic(&model, 17);
            let joint = joint_distribution(&params);
            let nodes: Vec<usize> = model.nodes().collect();
            for &x in &nodes {
                for &y in &nodes {
                    if y <= x {
                        continue;
                    }
                    for zmask in 0..(1 << nodes.len()) {
                        let z: BTreeSet<usize> = nodes
                            .iter()
                            .copied()
                            .filter(|&v| zmask >> v & 1 == 1 && v != x && v != y)
                            .collect();
                        if z.len() > 2 || !d_separated(&model, x, y, &z) {
                            continue;
                        }
                        check_ci(&joint, x, y, &z);
                    }
                }
            }
        }
    }

    fn check_ci(
        joint: &crate::dist::DistTensor<BigRational>,
        x: usize,
        y: usize,
        z: &BTreeSet<usize>,
    ) {
        let mut zxy: Vec<usize> = z.iter().copied().collect();
        zxy.push(x);
        zxy.push(y);
        let pxyz = joint.marginalize_onto(&zxy);
        let mut zx: Vec<usize> = z.iter().copied().collect();
        zx.push(x);
        let pxz = joint.marginalize_onto(&zx);
        let mut zy: Vec<usize> = z.iter().copied().collect();
        zy.push(y);
        let pyz = joint.marginalize_onto(&zy);
        let pz = joint.marginalize_onto(&z.iter().copied().collect::<Vec<_>>());
        // P(x,y,z) * P(z) = P(x,z) * P(y,z) for all states.
        let sizes = pxyz.sizes().to_vec();
        let total: usize = sizes.iter().product();
        for r in 0..total {
            let idx = crate::params::row_states(&sizes, r);
            let pick = |t: &crate::dist::DistTensor<BigRational>| {
                let sub: Vec<usize> = t
                    .axes()
                    .iter()
                    .map(|a| idx[pxyz.axes().iter().position(|b| b == a).unwrap()])
                    .collect();
                t.at(&sub).clone()
            };
            let lhs = pxyz.at(&idx).clone() * pick(&pz);
            let rhs = pick(&pxz) * pick(&pyz);
            assert_eq!(lhs, rhs, "CI violated at {idx:?} given {z:?}");
        }
    }
}
