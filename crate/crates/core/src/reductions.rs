//! Reconstruction by reduction to the three-observable core.
//!
//! Three routes turn four-observable models into instances the
//! eigendecomposition recovery of [`crate::recovery`] can handle:
//!
//! * **Marginalizing a sink** ([`recover_via_sink`]). When every edge
//!   between observables points into a single childless node, summing that
//!   node out leaves three observables that are conditionally independent
//!   given the hidden variable. The reduced recovery yields the hidden
//!   prior and the outer tables; the sink's own table is then lifted by
//!   inverting one recovered factor against the full joint, which exposes
//!   the joint distribution *including* the hidden variable.
//!
//! * **Conditioning on a hub** ([`recover_via_conditioning`]). When a
//!   single node feeds some of the others, fixing its value makes the
//!   remaining three observables conditionally independent given the
//!   hidden variable, with the tables of nodes *not* fed by the hub shared
//!   across hub values. One successful conditioned recovery hands us such
//!   a shared table, and the same inversion lift reconstructs everything.
//!
//! * **Enumerating hub labelings** ([`fiber_43e`]). When the hub feeds
//!   *every* other observable, the conditioned recoveries share nothing:
//!   each one fixes its own hidden labeling independently, and the distinct
//!   ways of gluing them produce several parameter vectors that all map to
//!   the input distribution. The full list is returned; it is the fiber.
//!
//! All routes return the same [`RecoveryResult`] shape as the direct
//! procedures, with the checks of the reduced problems folded in.

use crate::dist::{observable_joint, parameters_from_joint, DistTensor};
use crate::error::{Error, Result};
use crate::linalg::{sigma_min_ratio, Matrix};
use crate::model::{Model, NodeId};
use crate::params::{row_index, row_states, Cpt, ParameterSet};
use crate::recovery::{
    kruskal_recover, push_range_and_reproduction_checks, Check, RecoveryResult, Tolerances,
};
use crate::scalar::{Mode, Scalar};

/// Observables other than `exclude`, ascending.
fn other_observables(model: &Model, exclude: &[NodeId]) -> Vec<NodeId> {
    model
        .observables()
        .filter(|v| !exclude.contains(v))
        .collect()
}

/// Build the helper three-observable model and the axis renaming that sends
/// `triple` to nodes 1, 2, 3 (and `parked` out of the way to node 4).
fn helper_30(model: &Model, triple: &[NodeId], parked: NodeId) -> (Model, Vec<NodeId>) {
    let n0 = model.state_size(0);
    let sizes: Vec<usize> = std::iter::once(n0)
        .chain(triple.iter().map(|&v| model.state_size(v)))
        .collect();
    let helper = Model::with_hidden_parent(sizes, &[]);
    let mut perm: Vec<NodeId> = (0..model.n_nodes()).collect();
    for (pos, &v) in triple.iter().enumerate() {
        perm[v] = pos + 1;
    }
    perm[parked] = model.n_nodes() - 1;
    (helper, perm)
}

/// Reconstruct the joint over *all* nodes from the observable joint and one
/// recovered factor: if node `t` is childless with the hidden node as its
/// only parent, then `P(rest, t) = P(rest, hidden) * table_t`, so inverting
/// the table on a well-conditioned column block recovers `P(rest, hidden)`.
/// Every conditional table then falls out of the lifted joint.
fn lift_with_factor<S: Scalar>(
    model: &Model,
    obs: &DistTensor<S>,
    t: NodeId,
    m_t: &Matrix<S>,
    tols: &Tolerances,
    checks: &mut Vec<Check>,
) -> Result<ParameterSet<S>> {
    let n0 = model.state_size(0);
    let rest = other_observables(model, &[t]);
    let rest_sizes: Vec<usize> = rest.iter().map(|&v| model.state_size(v)).collect();
    let p_mat = obs.as_matrix(&rest, &[t]);

    // Pick the best-conditioned square column block of the factor.
    let cols = best_column_block(m_t, n0);
    let block = m_t.select_cols(&cols);
    let v = p_mat
        .select_cols(&cols)
        .matmul(&block.inverse("factor inversion in the lift")?);

    // The lifted matrix is a joint distribution with the hidden variable;
    // genuine inputs keep it nonnegative up to numerical dust.
    let mut most_negative = 0.0_f64;
    for x in v.data() {
        most_negative = most_negative.min(x.to_f64());
    }
    checks.push(Check {
        name: "lifted joint is nonnegative".to_string(),
        passed: -most_negative <= tols.negative_mass,
        measured: Some(-most_negative),
        tolerance: Some(tols.negative_mass),
        note: None,
    });
    if -most_negative > tols.negative_mass {
        return Err(Error::ExceptionalInput(
            "lifting produced negative probability mass".to_string(),
        ));
    }
    let v = clamp_dust(v);

    // Assemble the full joint U(hidden, observables...) and condition.
    let axes: Vec<NodeId> = model.nodes().collect();
    let sizes: Vec<usize> = axes.iter().map(|&a| model.state_size(a)).collect();
    let total: usize = sizes.iter().product();
    let t_pos = axes.iter().position(|&a| a == t).unwrap();
    let rest_pos: Vec<usize> = rest.iter().map(|&r| axes.iter().position(|&a| a == r).unwrap()).collect();
    let mut data = Vec::with_capacity(total);
    for flat in 0..total {
        let idx = row_states(&sizes, flat);
        let k = idx[0];
        let rest_states: Vec<usize> = rest_pos.iter().map(|&p| idx[p]).collect();
        let r = row_index(&rest_sizes, &rest_states);
        data.push(v.at(r, k).clone() * m_t.at(k, idx[t_pos]).clone());
    }
    let lifted = DistTensor::new(axes, sizes, data);
    parameters_from_joint(model, &lifted)
}

fn best_column_block<S: Scalar>(m: &Matrix<S>, size: usize) -> Vec<usize> {
    if m.ncols() == size {
        return (0..size).collect();
    }
    let mf = Matrix::new(
        m.nrows(),
        m.ncols(),
        m.data().iter().map(Scalar::to_f64).collect(),
    );
    let mut best: (f64, Vec<usize>) = (-1.0, (0..size).collect());
    for cols in subsets(m.ncols(), size) {
        let s = sigma_min_ratio(&mf.select_cols(&cols));
        if s > best.0 {
            best = (s, cols);
        }
    }
    best.1
}

fn subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    rec(0, n, r, &mut Vec::new(), &mut out);
    out
}

/// Zero out negative float dust left behind by the inversion; exact mode
/// never produces any (a genuine negative was already rejected).
fn clamp_dust<S: Scalar>(m: Matrix<S>) -> Matrix<S> {
    match S::mode() {
        Mode::Rational => m,
        Mode::Float => Matrix::from_fn(m.nrows(), m.ncols(), |r, c| {
            let x = m.at(r, c).clone();
            if x.to_f64() < 0.0 {
                S::zero()
            } else {
                x
            }
        }),
    }
}

/// Sinks eligible for the marginalization route: every observable edge
/// points into `s`, and at least one remaining observable stays outside
/// `s`'s parent set to serve as the lifting factor.
pub(crate) fn eligible_sinks(model: &Model) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::new();
    for s in model.observables() {
        if !model.obs_edges().iter().all(|&(_, j)| j == s) {
            continue;
        }
        let n0 = model.state_size(0);
        let parents = model.parents(s);
        let helper = other_observables(model, &[s])
            .into_iter()
            .filter(|&t| !parents.contains(&t) && model.state_size(t) >= n0)
            .max();
        if let Some(t) = helper {
            out.push((s, t));
        }
    }
    out
}

/// Recover parameters for a four-observable model whose only observable
/// edges all point into one childless node, by summing that node out,
/// running the three-observable recovery, and lifting the sink's table
/// back through the full joint. Returns one fiber representative.
pub fn recover_via_sink<S: Scalar>(
    model: &Model,
    obs: &DistTensor<S>,
    tols: &Tolerances,
) -> Result<RecoveryResult<S>> {
    model.validate()?;
    let observables: Vec<NodeId> = model.observables().collect();
    if model.n_obs() != 4 || obs.axes() != observables {
        return Err(Error::NoProcedure(
            "the sink reduction needs four observables".to_string(),
        ));
    }
    let mut sinks = eligible_sinks(model);
    if sinks.is_empty() {
        return Err(Error::NoProcedure(
            "no childless node receives every observable edge while leaving a free factor"
                .to_string(),
        ));
    }
    // Prefer the sink whose reduced problem is best conditioned.
    sinks.sort_by(|a, b| {
        margin_after_marginalizing(model, obs, b.0)
            .partial_cmp(&margin_after_marginalizing(model, obs, a.0))
            .unwrap()
            .then(a.0.cmp(&b.0))
    });

    let mut last_err: Option<Error> = None;
    for (s, t) in sinks {
        match sink_attempt(model, obs, s, t, tols) {
            Ok(result) => return Ok(result),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap())
}

fn margin_after_marginalizing<S: Scalar>(model: &Model, obs: &DistTensor<S>, s: NodeId) -> f64 {
    let triple = other_observables(model, &[s]);
    let marg = obs.marginalize_out(s);
    let m = marg.as_matrix(&triple[..1], &triple[1..]);
    let mf = Matrix::new(
        m.nrows(),
        m.ncols(),
        m.data().iter().map(Scalar::to_f64).collect(),
    );
    sigma_min_ratio(&mf)
}

fn sink_attempt<S: Scalar>(
    model: &Model,
    obs: &DistTensor<S>,
    s: NodeId,
    t: NodeId,
    tols: &Tolerances,
) -> Result<RecoveryResult<S>> {
    let triple = other_observables(model, &[s]);
    let (helper, perm) = helper_30(model, &triple, s);
    let reduced = obs.marginalize_out(s).relabel_axes(&perm);
    let inner = kruskal_recover(&helper, &reduced, tols)?;

    let mut checks: Vec<Check> = inner
        .checks
        .into_iter()
        .map(|mut c| {
            c.name = format!("marginalized problem: {}", c.name);
            c
        })
        .collect();
    let mut warnings = inner.warnings;

    let t_pos = triple.iter().position(|&v| v == t).unwrap();
    let m_t = inner.candidates[0].cpts[t_pos + 1].table.clone();
    let params = lift_with_factor(model, obs, t, &m_t, tols, &mut checks)?;
    push_range_and_reproduction_checks(&params, obs, tols, &mut checks)?;
    warnings.dedup();
    Ok(RecoveryResult {
        model: model.clone(),
        mode: S::mode(),
        candidates: vec![params],
        checks,
        warnings,
    })
}

/// The hub decomposition of a four-observable model: the node that feeds
/// others, its children, and the free nodes (hidden-only parents, no
/// children).
pub(crate) struct HubShape {
    pub(crate) hub: NodeId,
    pub(crate) free: Vec<NodeId>,
    pub(crate) triple: Vec<NodeId>,
}

pub(crate) fn hub_shape(model: &Model, need_free: bool) -> Result<HubShape> {
    model.validate()?;
    if model.n_obs() != 4 {
        return Err(Error::NoProcedure(
            "the conditioning reduction needs four observables".to_string(),
        ));
    }
    let tails: std::collections::BTreeSet<NodeId> =
        model.obs_edges().iter().map(|&(i, _)| i).collect();
    if tails.len() != 1 {
        return Err(Error::NoProcedure(
            "the conditioning reduction needs a single node feeding the others".to_string(),
        ));
    }
    let hub = *tails.iter().next().unwrap();
    if model.parents(hub) != vec![0] {
        return Err(Error::NoProcedure(
            "the feeding node must have only the hidden parent".to_string(),
        ));
    }
    let mut free = Vec::new();
    for v in other_observables(model, &[hub]) {
        let parents = model.parents(v);
        if parents == vec![0] {
            free.push(v);
        } else if parents != vec![0, hub] {
            return Err(Error::NoProcedure(format!(
                "node {v} has parents beyond the hidden node and the hub"
            )));
        }
    }
    if need_free && free.is_empty() {
        return Err(Error::NoProcedure(
            "the conditioning reduction needs a node untouched by the hub".to_string(),
        ));
    }
    Ok(HubShape {
        hub,
        free,
        triple: other_observables(model, &[hub]),
    })
}

/// Run the three-observable recovery on each hub-conditioned slice.
/// Returns `(hub state, slice mass, reduced result)` per success, plus a
/// warning per failed slice.
fn conditioned_recoveries<S: Scalar>(
    model: &Model,
    obs: &DistTensor<S>,
    shape: &HubShape,
    tols: &Tolerances,
) -> Result<(Vec<(usize, S, RecoveryResult<S>)>, Vec<String>)> {
    let (helper, perm) = helper_30(model, &shape.triple, shape.hub);
    let mut successes = Vec::new();
    let mut warnings = Vec::new();
    let mut last_err: Option<Error> = None;
    for j in 0..model.state_size(shape.hub) {
        let slice = obs.fix(shape.hub, j);
        let mass = slice.total_mass();
        if !mass.positive_within(tols.positivity) {
            warnings.push(format!("hub state {} carries no mass", j + 1));
            last_err = Some(Error::ZeroMassSlice);
            continue;
        }
        let conditioned = slice.normalized("hub slice")?.relabel_axes(&perm);
        match kruskal_recover(&helper, &conditioned, tols) {
            Ok(res) => successes.push((j, mass, res)),
            Err(e) => {
                warnings.push(format!(
                    "conditioned recovery failed at hub state {}: {e}",
                    j + 1
                ));
                last_err = Some(e);
            }
        }
    }
    if successes.is_empty() {
        return Err(last_err.unwrap_or(Error::ZeroMassSlice));
    }
    Ok((successes, warnings))
}

/// Recover parameters for a four-observable model in which one node feeds
/// some (not all) of the others. Conditioning on the feeding node makes
/// the rest conditionally independent given the hidden variable; a node
/// the hub does not feed keeps the same table in every slice, and that
/// shared table lifts the full joint. Returns one fiber representative.
pub fn recover_via_conditioning<S: Scalar>(
    model: &Model,
    obs: &DistTensor<S>,
    tols: &Tolerances,
) -> Result<RecoveryResult<S>> {
    let shape = hub_shape(model, true)?;
    let observables: Vec<NodeId> = model.observables().collect();
    if obs.axes() != observables {
        return Err(Error::Shape(
            "observable tensor does not match the model's observables".to_string(),
        ));
    }
    let t = *shape.free.iter().max().unwrap();
    let n0 = model.state_size(0);
    if model.state_size(t) < n0 {
        return Err(Error::NoProcedure(format!(
            "the free node needs at least {n0} states to carry the lift"
        )));
    }
    let (successes, mut warnings) = conditioned_recoveries(model, obs, &shape, tols)?;

    let t_slot = shape.triple.iter().position(|&v| v == t).unwrap() + 1;
    let (ref_state, _, ref_res) = &successes[0];
    let m_t = ref_res.candidates[0].cpts[t_slot].table.clone();

    let mut checks: Vec<Check> = ref_res
        .checks
        .iter()
        .cloned()
        .map(|mut c| {
            c.name = format!("conditioned problem (hub state {}): {}", ref_state + 1, c.name);
            c
        })
        .collect();

    // Every other successful slice must reproduce the shared table up to a
    // relabeling of the hidden states; the spread is the witness.
    if successes.len() > 1 {
        let gap = min_row_gap(&m_t);
        if gap < tols.alignment_gap {
            return Err(Error::Precondition {
                name: "distinguishable shared factor rows".to_string(),
                witness: format!("two rows of the shared table are {gap:.3e} apart"),
            });
        }
        let mut worst = 0.0_f64;
        for (_, _, res) in successes.iter().skip(1) {
            let other = &res.candidates[0].cpts[t_slot].table;
            let (_, best_diff) = best_row_permutation(&m_t, other);
            worst = worst.max(best_diff);
        }
        checks.push(Check {
            name: "shared factor agrees across hub states".to_string(),
            passed: worst
                <= match S::mode() {
                    Mode::Rational => 0.0,
                    Mode::Float => tols.alignment_gap,
                },
            measured: Some(worst),
            tolerance: Some(tols.alignment_gap),
            note: None,
        });
    }
    if successes.len() < model.state_size(shape.hub) {
        warnings.push("some conditioned recoveries failed; the lift used the rest".to_string());
    }

    let params = lift_with_factor(model, obs, t, &m_t, tols, &mut checks)?;
    push_range_and_reproduction_checks(&params, obs, tols, &mut checks)?;
    Ok(RecoveryResult {
        model: model.clone(),
        mode: S::mode(),
        candidates: vec![params],
        checks,
        warnings,
    })
}

fn min_row_gap<S: Scalar>(m: &Matrix<S>) -> f64 {
    let mut min = f64::INFINITY;
    for a in 0..m.nrows() {
        for b in (a + 1)..m.nrows() {
            let mut diff = 0.0_f64;
            for c in 0..m.ncols() {
                diff = diff.max((m.at(a, c).clone() - m.at(b, c).clone()).abs_f64());
            }
            min = min.min(diff);
        }
    }
    min
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    fn heap(k: usize, items: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            out.push(items.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, items, out);
            if k % 2 == 0 {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
    }
    heap(n, &mut items, &mut out);
    out.sort();
    out
}

/// Find the row permutation of `other` closest to `reference`; returns the
/// permutation (`perm[reference row] = other row`) and its max deviation.
fn best_row_permutation<S: Scalar>(reference: &Matrix<S>, other: &Matrix<S>) -> (Vec<usize>, f64) {
    let n = reference.nrows();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for perm in permutations(n) {
        let mut diff = 0.0_f64;
        for k in 0..n {
            for c in 0..reference.ncols() {
                diff = diff
                    .max((reference.at(k, c).clone() - other.at(perm[k], c).clone()).abs_f64());
            }
        }
        match &best {
            Some((_, d)) if *d <= diff => {}
            _ => best = Some((perm, diff)),
        }
    }
    best.unwrap()
}

/// Reconstruct the full fiber for a four-observable model in which one
/// node feeds every other observable. Each hub-conditioned slice fixes its
/// own hidden labeling, so the slice recoveries can be glued in several
/// inequivalent ways; every gluing that reproduces the input is returned.
pub fn fiber_43e<S: Scalar>(
    model: &Model,
    obs: &DistTensor<S>,
    tols: &Tolerances,
) -> Result<RecoveryResult<S>> {
    let shape = hub_shape(model, false)?;
    if !shape.free.is_empty() {
        return Err(Error::NoProcedure(
            "this enumeration applies only when the hub feeds every other observable".to_string(),
        ));
    }
    let observables: Vec<NodeId> = model.observables().collect();
    if obs.axes() != observables {
        return Err(Error::Shape(
            "observable tensor does not match the model's observables".to_string(),
        ));
    }
    let n0 = model.state_size(0);
    let n_h = model.state_size(shape.hub);
    let n_combos = permutations(n0).len().pow(n_h as u32);
    if n_combos > 64 {
        return Err(Error::Unsupported(format!(
            "{n_combos} labeling combinations exceed the enumeration budget"
        )));
    }

    // Every hub state must admit a conditioned recovery here: the gluing
    // needs all of them.
    let (successes, warnings) = conditioned_recoveries(model, obs, &shape, tols)?;
    if successes.len() < n_h {
        return Err(Error::ExceptionalInput(
            "a hub-conditioned slice admitted no recovery; the fiber cannot be assembled"
                .to_string(),
        ));
    }

    let mut checks: Vec<Check> = Vec::new();
    for (j, _, res) in &successes {
        checks.push(Check {
            name: format!("conditioned recovery at hub state {}", j + 1),
            passed: res.all_checks_passed(),
            measured: None,
            tolerance: None,
            note: None,
        });
    }

    // Glue: choose one hidden relabeling per slice; `perm[final] = slice`.
    let perms = permutations(n0);
    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..n_h {
        let mut next = Vec::new();
        for c in &combos {
            for (pi, _) in perms.iter().enumerate() {
                let mut c2 = c.clone();
                c2.push(pi);
                next.push(c2);
            }
        }
        combos = next;
    }

    let verify_tol = match S::mode() {
        Mode::Rational => 0.0,
        Mode::Float => tols.reproduction,
    };
    let mut candidates = Vec::new();
    let mut worst_reproduction = 0.0_f64;
    for combo in combos {
        let candidate = glue_43e(model, &shape, &successes, &perms, &combo)?;
        let diff = observable_joint(&candidate).max_abs_diff(obs);
        worst_reproduction = worst_reproduction.max(diff);
        if diff <= verify_tol {
            candidates.push(candidate);
        }
    }
    checks.push(Check {
        name: "every gluing reproduces the input tensor".to_string(),
        passed: worst_reproduction <= verify_tol,
        measured: Some(worst_reproduction),
        tolerance: Some(verify_tol),
        note: None,
    });
    let mut most_negative = 0.0_f64;
    for cand in &candidates {
        for cpt in &cand.cpts {
            for x in cpt.table.data() {
                most_negative = most_negative.min(x.to_f64());
            }
        }
    }
    checks.push(Check {
        name: "entries within the probability range".to_string(),
        passed: -most_negative <= tols.negative_mass,
        measured: Some(-most_negative),
        tolerance: Some(tols.negative_mass),
        note: None,
    });
    if candidates.is_empty() {
        return Err(Error::ExceptionalInput(
            "no labeling combination reproduced the input tensor".to_string(),
        ));
    }
    Ok(RecoveryResult {
        model: model.clone(),
        mode: S::mode(),
        candidates,
        checks,
        warnings,
    })
}

/// Assemble one fiber point from the per-slice recoveries and a choice of
/// hidden relabeling for each slice.
fn glue_43e<S: Scalar>(
    model: &Model,
    shape: &HubShape,
    successes: &[(usize, S, RecoveryResult<S>)],
    perms: &[Vec<usize>],
    combo: &[usize],
) -> Result<ParameterSet<S>> {
    let n0 = model.state_size(0);
    let n_h = model.state_size(shape.hub);

    // Mass of hidden state k together with hub state j, under the chosen
    // labelings.
    let mut w = Matrix::zeros(n0, n_h);
    for (slot, (j, mass, res)) in successes.iter().enumerate() {
        let q = res.candidates[0].prior();
        let perm = &perms[combo[slot]];
        for k in 0..n0 {
            *w.at_mut(k, *j) = mass.clone() * q[perm[k]].clone();
        }
    }
    let mut prior = Vec::with_capacity(n0);
    for k in 0..n0 {
        let mut acc = S::zero();
        for j in 0..n_h {
            acc = acc + w.at(k, j).clone();
        }
        if !acc.positive_within(0.0) {
            return Err(Error::ExceptionalInput(
                "a hidden state carries no mass in a gluing".to_string(),
            ));
        }
        prior.push(acc);
    }
    let m_hub = Matrix::from_fn(n0, n_h, |k, j| w.at(k, j).clone() / prior[k].clone());

    let mut cpts: Vec<Option<Cpt<S>>> = (0..model.n_nodes()).map(|_| None).collect();
    cpts[0] = Some(Cpt {
        parents: vec![],
        parent_sizes: vec![],
        table: Matrix::new(1, n0, prior),
    });
    cpts[shape.hub] = Some(Cpt {
        parents: vec![0],
        parent_sizes: vec![n0],
        table: m_hub,
    });
    // Children: rows are (hidden, hub) lexicographic; slice `j` supplies
    // the rows with hub coordinate `j`, relabeled per the combo.
    for (slot_v, &v) in shape.triple.iter().enumerate() {
        let n_v = model.state_size(v);
        let mut table = Matrix::zeros(n0 * n_h, n_v);
        for (slot, (j, _, res)) in successes.iter().enumerate() {
            let slice_table = &res.candidates[0].cpts[slot_v + 1].table;
            let perm = &perms[combo[slot]];
            for k in 0..n0 {
                for x in 0..n_v {
                    *table.at_mut(k * n_h + j, x) = slice_table.at(perm[k], x).clone();
                }
            }
        }
        cpts[v] = Some(Cpt {
            parents: vec![0, shape.hub],
            parent_sizes: vec![n0, n_h],
            table,
        });
    }
    Ok(ParameterSet::new(
        model.clone(),
        cpts.into_iter().map(Option::unwrap).collect(),
    ))
}
