//! Fiber geometry: hidden-label orbits, canonical forms, and two
//! independent routes for judging how many parameter vectors share an
//! observable joint.
//!
//! Relabeling the hidden states permutes CPT rows without touching the
//! observable joint, so fibers decompose into orbits of size `n0!`.
//! [`canonicalize`] picks a deterministic orbit representative (the
//! lexicographically smallest flattened parameter vector), which turns
//! "same point up to relabeling" into plain equality.
//!
//! [`observable_jacobian_rank`] measures the local dimension of the
//! parameter-to-observable map by central finite differences: full column
//! rank at generic points is the numerical signature of a finite fiber,
//! while a persistent rank deficit signals positive-dimensional fibers.
//!
//! [`multistart_fiber_search`] is the brute-force cross-check: many random
//! restarts of a damped least-squares solver against the target joint,
//! keeping the near-exact fits and clustering their canonical forms. It
//! knows nothing about the algebraic recovery procedures, which is what
//! makes agreement between the two informative.

use num::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::{observable_joint, DistTensor};
use crate::error::{Error, Result};
use crate::linalg::{singular_values, svd_rank, svd_solve, Matrix};
use crate::model::Model;
use crate::params::{Cpt, ParameterSet, sample_generic};
use crate::recovery::Tolerances;
use crate::scalar::Scalar;

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

/// All distinct hidden relabelings of `params`, the identity first.
pub fn label_swap_orbit<S: Scalar>(params: &ParameterSet<S>) -> Vec<ParameterSet<S>> {
    let n0 = params.model.state_size(0);
    let mut orbit: Vec<ParameterSet<S>> = Vec::new();
    for perm in permutations(n0) {
        let candidate = params.apply_hidden_permutation(&perm);
        if orbit.iter().all(|p| p.max_abs_diff(&candidate) != 0.0) {
            orbit.push(candidate);
        }
    }
    orbit
}

fn lex_less<S: Scalar>(a: &[S], b: &[S]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.cmp_total(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// The orbit representative with the lexicographically smallest flattened
/// parameter vector. Two parameter sets are hidden relabelings of each
/// other exactly when their canonical forms are equal.
pub fn canonicalize<S: Scalar>(params: &ParameterSet<S>) -> ParameterSet<S> {
    let mut best = params.clone();
    let mut best_key = best.flat_values();
    for candidate in label_swap_orbit(params) {
        let key = candidate.flat_values();
        if lex_less(&key, &best_key) {
            best_key = key;
            best = candidate;
        }
    }
    best
}

/// Canonicalize every candidate and collapse near-equal forms (max-norm
/// within `tol`). The representatives come back sorted by their flattened
/// values, so the output order is deterministic.
pub fn distinct_canonical<S: Scalar>(
    candidates: &[ParameterSet<S>],
    tol: f64,
) -> Vec<ParameterSet<S>> {
    let mut canon: Vec<ParameterSet<S>> = candidates.iter().map(canonicalize).collect();
    canon.sort_by(|a, b| {
        let (ka, kb) = (a.flat_values(), b.flat_values());
        ka.iter()
            .zip(&kb)
            .map(|(x, y)| x.cmp_total(y))
            .find(|o| *o != std::cmp::Ordering::Equal)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Vec<ParameterSet<S>> = Vec::new();
    for c in canon {
        if out.iter().all(|p| p.max_abs_diff(&c) > tol) {
            out.push(c);
        }
    }
    out
}

/// The free coordinates of a parameter set: every CPT row minus its last
/// entry, in node and row order. Together with "rows sum to one" this is a
/// bijection onto the parameters, of length `model.parameter_dimension()`.
fn free_coordinates(params: &ParameterSet<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    for cpt in &params.cpts {
        for r in 0..cpt.row_count() {
            for c in 0..cpt.n_states() - 1 {
                out.push(*cpt.table.at(r, c));
            }
        }
    }
    out
}

fn params_from_free(model: &Model, free: &[f64]) -> ParameterSet<f64> {
    let mut cpts = Vec::with_capacity(model.n_nodes());
    let mut pos = 0;
    for v in model.nodes() {
        let parents = model.parents(v);
        let parent_sizes: Vec<usize> = parents.iter().map(|&w| model.state_size(w)).collect();
        let nrows = model.row_count(v);
        let ncols = model.state_size(v);
        let mut data = Vec::with_capacity(nrows * ncols);
        for _ in 0..nrows {
            let mut sum = 0.0;
            for _ in 0..ncols - 1 {
                data.push(free[pos]);
                sum += free[pos];
                pos += 1;
            }
            data.push(1.0 - sum);
        }
        cpts.push(Cpt {
            parents,
            parent_sizes,
            table: Matrix::new(nrows, ncols, data),
        });
    }
    ParameterSet::new(model.clone(), cpts)
}

/// Numerical rank of the parameter-to-observable-joint map at `params`,
/// by central finite differences in the free coordinates. Fails with
/// [`Error::BoundaryParameters`] when an entry sits too close to the
/// simplex boundary for the step to be trustworthy.
pub fn observable_jacobian_rank(
    params: &ParameterSet<f64>,
    tols: &Tolerances,
) -> Result<usize> {
    params.validate()?;
    for cpt in &params.cpts {
        for x in cpt.table.data() {
            if *x < tols.jacobian_step || *x > 1.0 - tols.jacobian_step {
                return Err(Error::BoundaryParameters(format!(
                    "entry {x:.3e} is within the finite-difference step of the simplex boundary"
                )));
            }
        }
    }
    let jac = finite_difference_jacobian(params, tols.jacobian_step);
    Ok(svd_rank(&jac, tols.jacobian_cutoff))
}

/// Central-difference Jacobian of the observable joint with respect to the
/// free coordinates. Callers are responsible for keeping `params` at least
/// `h` away from the simplex boundary.
fn finite_difference_jacobian(params: &ParameterSet<f64>, h: f64) -> Matrix<f64> {
    let model = &params.model;
    let theta = free_coordinates(params);
    let dim = theta.len();
    debug_assert_eq!(dim, model.parameter_dimension());
    let cells = observable_joint(params).data().len();
    let mut jac = Matrix::zeros(cells, dim);
    for i in 0..dim {
        let mut plus = theta.clone();
        plus[i] += h;
        let mut minus = theta.clone();
        minus[i] -= h;
        let fp = observable_joint(&params_from_free(model, &plus));
        let fm = observable_joint(&params_from_free(model, &minus));
        for (r, (a, b)) in fp.data().iter().zip(fm.data()).enumerate() {
            *jac.at_mut(r, i) = (a - b) / (2.0 * h);
        }
    }
    jac
}

/// A-posteriori bound on how accurately a float candidate can pin down the
/// parameters: residual round-off in the reproduced joint divided by the
/// smallest singular value of the forward map's Jacobian at the candidate.
/// Near-singular Jacobians amplify machine noise into parameter error that
/// no amount of refinement can remove. The Jacobian is analytic (in the
/// free probability coordinates), so the estimate resolves singular values
/// far below what finite differences could see. `None` when the candidate
/// touches the simplex boundary.
pub(crate) fn accuracy_floor(params: &ParameterSet<f64>, residual: f64) -> Option<f64> {
    for cpt in &params.cpts {
        for x in cpt.table.data() {
            if !(*x > 0.0 && *x < 1.0) {
                return None;
            }
        }
    }
    let plan = JointPlan::new(&params.model);
    let flat = flat_from_params(params);
    let mut jac = Matrix::zeros(plan.terms.len(), params.model.parameter_dimension());
    plan.prob_jacobian_into(&flat, &mut jac);
    let smin = singular_values(&jac)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if !(smin > 0.0) {
        return Some(f64::INFINITY);
    }
    Some(residual.max(f64::EPSILON) / smin)
}

/// Exact residual of a float candidate against an exactly rationalized
/// target, converted to floats: every f64 is a dyadic rational, so the
/// subtraction happens with no round-off at all.
fn exact_residual(p: &ParameterSet<f64>, obs_exact: &[BigRational]) -> (Vec<f64>, f64) {
    let lifted: ParameterSet<BigRational> = ParameterSet::from_float(p);
    let cells = observable_joint(&lifted);
    let mut r = Vec::with_capacity(obs_exact.len());
    let mut worst = 0.0f64;
    for (a, b) in cells.data().iter().zip(obs_exact) {
        let d = (a - b).to_f64();
        worst = worst.max(d.abs());
        r.push(d);
    }
    (r, worst)
}

/// Newton-polish a float candidate against the exactly rationalized input
/// joint. Plain float refinement cannot push the reproduction error below
/// its own evaluation noise (~1e-15); computing the residual in exact
/// arithmetic removes that noise, which on ill-conditioned instances is
/// the difference between a candidate at the information-theoretic floor
/// and one an order of magnitude above it. Returns the polished candidate
/// and its exact reproduction error (max-norm).
pub(crate) fn exact_polish(
    cand: &ParameterSet<f64>,
    obs: &DistTensor<f64>,
) -> (ParameterSet<f64>, f64) {
    let model = cand.model.clone();
    let plan = JointPlan::new(&model);
    let obs_exact: Vec<BigRational> = obs
        .data()
        .iter()
        .map(|&x| <BigRational as Scalar>::from_f64(x))
        .collect();
    let (mut r, mut best_norm) = exact_residual(cand, &obs_exact);
    let mut best = cand.clone();
    let mut cur = cand.clone();
    let mut jac = Matrix::zeros(obs_exact.len(), model.parameter_dimension());
    for _ in 0..6 {
        if best_norm <= 2.0 * f64::EPSILON {
            break;
        }
        let flat = flat_from_params(&cur);
        plan.prob_jacobian_into(&flat, &mut jac);
        let neg_r: Vec<f64> = r.iter().map(|x| -x).collect();
        let delta = svd_solve(&jac, &neg_r, 1e-12);
        let base = free_coordinates(&cur);
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..4 {
            let theta: Vec<f64> = base
                .iter()
                .zip(&delta)
                .map(|(t, d)| t + scale * d)
                .collect();
            let next = params_from_free(&model, &theta);
            if next.positivity_witness(1e-13).is_some() {
                scale *= 0.5;
                continue;
            }
            let (r_next, n_next) = exact_residual(&next, &obs_exact);
            if n_next < best_norm {
                best_norm = n_next;
                best = next.clone();
                cur = next;
                r = r_next;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (best, best_norm)
}

/// Softmax-reparameterized residual model used by the multistart search:
/// each CPT row is the softmax of free logits with the last logit pinned
/// to zero, which keeps every iterate a strictly positive stochastic
/// table.
fn params_from_logits(model: &Model, logits: &[f64]) -> ParameterSet<f64> {
    let mut cpts = Vec::with_capacity(model.n_nodes());
    let mut pos = 0;
    for v in model.nodes() {
        let parents = model.parents(v);
        let parent_sizes: Vec<usize> = parents.iter().map(|&w| model.state_size(w)).collect();
        let nrows = model.row_count(v);
        let ncols = model.state_size(v);
        let mut data = Vec::with_capacity(nrows * ncols);
        for _ in 0..nrows {
            let mut row = Vec::with_capacity(ncols);
            let mut max = 0.0_f64;
            for _ in 0..ncols - 1 {
                row.push(logits[pos]);
                max = max.max(logits[pos]);
                pos += 1;
            }
            row.push(0.0);
            let mut sum = 0.0;
            for z in &mut row {
                *z = (*z - max).exp();
                sum += *z;
            }
            for z in &row {
                data.push(z / sum);
            }
        }
        cpts.push(Cpt {
            parents,
            parent_sizes,
            table: Matrix::new(nrows, ncols, data),
        });
    }
    ParameterSet::new(model.clone(), cpts)
}

/// Precomputed evaluation plan for the observable joint as a function of
/// the flattened CPT tables: one list of table positions per additive
/// term of each observable cell. Turns a residual evaluation in the
/// multistart hot loop into plain product-sums with no allocation.
struct JointPlan {
    nrows: Vec<usize>,
    ncols: Vec<usize>,
    flat_len: usize,
    /// `terms[cell][k]` holds, for hidden state `k`, the flat positions
    /// whose product is that cell's `k`-th additive term.
    terms: Vec<Vec<Vec<u32>>>,
    /// Per flat position: start of its table row in the flat buffer, its
    /// column, the index of its row's first logit, and the row width —
    /// everything the softmax chain rule needs.
    row_base: Vec<u32>,
    col: Vec<u32>,
    zbase: Vec<u32>,
    width: Vec<u32>,
}

impl JointPlan {
    fn new(model: &Model) -> Self {
        let n = model.n_nodes();
        let mut offsets = vec![0usize; n];
        let mut nrows = vec![0usize; n];
        let mut ncols = vec![0usize; n];
        let mut flat_len = 0;
        for v in model.nodes() {
            offsets[v] = flat_len;
            nrows[v] = model.row_count(v);
            ncols[v] = model.state_size(v);
            flat_len += nrows[v] * ncols[v];
        }
        let mut row_base = vec![0u32; flat_len];
        let mut col = vec![0u32; flat_len];
        let mut zbase = vec![0u32; flat_len];
        let mut width = vec![0u32; flat_len];
        let mut zoff = 0u32;
        for v in model.nodes() {
            for r in 0..nrows[v] {
                let base = (offsets[v] + r * ncols[v]) as u32;
                for c in 0..ncols[v] {
                    let p = base as usize + c;
                    row_base[p] = base;
                    col[p] = c as u32;
                    zbase[p] = zoff;
                    width[p] = ncols[v] as u32;
                }
                zoff += (ncols[v] - 1) as u32;
            }
        }
        let obs: Vec<usize> = model.observables().collect();
        let obs_sizes: Vec<usize> = obs.iter().map(|&v| model.state_size(v)).collect();
        let n0 = model.state_size(0);
        let n_cells: usize = obs_sizes.iter().product();
        let parents: Vec<Vec<usize>> = model.nodes().map(|v| model.parents(v)).collect();
        let mut terms = Vec::with_capacity(n_cells);
        let mut state = vec![0usize; n];
        for cell in 0..n_cells {
            // Observable cells are row-major with the first axis most
            // significant, matching the tensor layout.
            let mut rem = cell;
            for (i, &v) in obs.iter().enumerate().rev() {
                state[v] = rem % obs_sizes[i];
                rem /= obs_sizes[i];
            }
            let mut by_hidden = Vec::with_capacity(n0);
            for k in 0..n0 {
                state[0] = k;
                let mut prod = Vec::with_capacity(n);
                for v in model.nodes() {
                    let mut row = 0usize;
                    for &p in &parents[v] {
                        row = row * model.state_size(p) + state[p];
                    }
                    prod.push((offsets[v] + row * ncols[v] + state[v]) as u32);
                }
                by_hidden.push(prod);
            }
            terms.push(by_hidden);
        }
        JointPlan {
            nrows,
            ncols,
            flat_len,
            terms,
            row_base,
            col,
            zbase,
            width,
        }
    }

    /// Softmax every logit row into the flat table buffer (last logit of
    /// each row pinned to zero, same layout as `params_from_logits`).
    fn write_probs(&self, logits: &[f64], flat: &mut [f64]) {
        let mut pos = 0;
        let mut out = 0;
        for v in 0..self.nrows.len() {
            let c = self.ncols[v];
            for _ in 0..self.nrows[v] {
                let mut max = 0.0f64;
                for j in 0..c - 1 {
                    flat[out + j] = logits[pos + j];
                    max = max.max(logits[pos + j]);
                }
                flat[out + c - 1] = 0.0;
                let mut sum = 0.0;
                for x in &mut flat[out..out + c] {
                    *x = (*x - max).exp();
                    sum += *x;
                }
                for x in &mut flat[out..out + c] {
                    *x /= sum;
                }
                pos += c - 1;
                out += c;
            }
        }
    }

    fn residual_into(&self, logits: &[f64], target: &[f64], flat: &mut [f64], r: &mut [f64]) {
        self.write_probs(logits, flat);
        for (cell, groups) in self.terms.iter().enumerate() {
            let mut acc = 0.0;
            for prod in groups {
                let mut p = 1.0;
                for &i in prod {
                    p *= flat[i as usize];
                }
                acc += p;
            }
            r[cell] = acc - target[cell];
        }
    }

    /// Exact Jacobian of the residual with respect to the logits, by the
    /// product rule over each additive term and the softmax chain rule
    /// (`dT[j]/dz[l] = T[j] (1[j = l] - T[l])` within a row).
    fn jacobian_into(&self, flat: &[f64], jac: &mut Matrix<f64>) {
        for x in jac.data_mut() {
            *x = 0.0;
        }
        for (cell, groups) in self.terms.iter().enumerate() {
            for prod in groups {
                for (a, &pos) in prod.iter().enumerate() {
                    let mut partial = 1.0;
                    for (b, &q) in prod.iter().enumerate() {
                        if a != b {
                            partial *= flat[q as usize];
                        }
                    }
                    let p = pos as usize;
                    let scaled = partial * flat[p];
                    let rb = self.row_base[p] as usize;
                    let zb = self.zbase[p] as usize;
                    let c0 = self.col[p] as usize;
                    let w = self.width[p] as usize;
                    for l in 0..w - 1 {
                        let indicator = if c0 == l { 1.0 } else { 0.0 };
                        *jac.at_mut(cell, zb + l) += scaled * (indicator - flat[rb + l]);
                    }
                }
            }
        }
    }

    /// Jacobian of the joint with respect to the free *probability*
    /// coordinates (per row, all columns but the last; the last column is
    /// one minus the rest). Exact up to round-off — no finite-difference
    /// truncation — which matters when singular values near the noise
    /// floor decide whether an instance is flagged as ill-conditioned.
    fn prob_jacobian_into(&self, flat: &[f64], jac: &mut Matrix<f64>) {
        for x in jac.data_mut() {
            *x = 0.0;
        }
        for (cell, groups) in self.terms.iter().enumerate() {
            for prod in groups {
                for (a, &pos) in prod.iter().enumerate() {
                    let mut partial = 1.0;
                    for (b, &q) in prod.iter().enumerate() {
                        if a != b {
                            partial *= flat[q as usize];
                        }
                    }
                    let p = pos as usize;
                    let zb = self.zbase[p] as usize;
                    let c0 = self.col[p] as usize;
                    let w = self.width[p] as usize;
                    if c0 < w - 1 {
                        *jac.at_mut(cell, zb + c0) += partial;
                    } else {
                        for l in 0..w - 1 {
                            *jac.at_mut(cell, zb + l) -= partial;
                        }
                    }
                }
            }
        }
    }
}

/// Concatenated CPT tables in node order — the layout [`JointPlan`]
/// indexes into.
fn flat_from_params(params: &ParameterSet<f64>) -> Vec<f64> {
    let mut flat = Vec::new();
    for cpt in &params.cpts {
        flat.extend_from_slice(cpt.table.data());
    }
    flat
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One damped least-squares descent from `start`; returns the final logits
/// and residual norm. Gain-ratio damping control: the damping factor
/// shrinks smoothly when a step's actual improvement matches the local
/// model's prediction and inflates geometrically when it does not, with
/// curvature-proportional scaling so unevenly saturated logits do not
/// freeze the step.
fn levenberg_marquardt(
    plan: &JointPlan,
    target: &[f64],
    start: Vec<f64>,
    max_iters: usize,
) -> (Vec<f64>, f64) {
    let dim = start.len();
    let cells = target.len();
    let mut flat = vec![0.0; plan.flat_len];
    let mut theta = start;
    let mut r = vec![0.0; cells];
    plan.residual_into(&theta, target, &mut flat, &mut r);
    let mut r_trial = vec![0.0; cells];
    let mut jac = Matrix::zeros(cells, dim);
    let mut lambda = 1e-3;
    let mut nu = 2.0f64;
    let mut stale = true;
    for _ in 0..max_iters {
        let rn2: f64 = r.iter().map(|x| x * x).sum();
        if rn2 < 1e-30 {
            break;
        }
        if stale {
            // `flat` holds whatever the last trial evaluation wrote; refresh it
            // at `theta` before differentiating.
            plan.residual_into(&theta, target, &mut flat, &mut r);
            plan.jacobian_into(&flat, &mut jac);
            stale = false;
        }
        let jtj = {
            let jt = jac.transpose();
            jt.matmul(&jac)
        };
        let g: Vec<f64> = (0..dim)
            .map(|i| (0..cells).map(|k| jac.at(k, i) * r[k]).sum::<f64>())
            .collect();
        if g.iter().all(|x| x.abs() < 1e-16) {
            break;
        }
        let mut damped = jtj.clone();
        for i in 0..dim {
            let scale = jtj.at(i, i).max(1e-12);
            *damped.at_mut(i, i) += lambda * scale;
        }
        let step = match damped.inverse("damped normal equations") {
            Ok(inv) => {
                let mut s = vec![0.0; dim];
                for (i, si) in s.iter_mut().enumerate() {
                    *si = -(0..dim).map(|k| inv.at(i, k) * g[k]).sum::<f64>();
                }
                s
            }
            Err(_) => {
                lambda *= nu;
                nu *= 2.0;
                if lambda > 1e14 {
                    break;
                }
                continue;
            }
        };
        let trial: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + s).collect();
        plan.residual_into(&trial, target, &mut flat, &mut r_trial);
        let rt2: f64 = r_trial.iter().map(|x| x * x).sum();
        // Predicted reduction of the damped quadratic model.
        let predicted: f64 = step
            .iter()
            .enumerate()
            .map(|(i, s)| s * (lambda * jtj.at(i, i).max(1e-12) * s - g[i]))
            .sum::<f64>()
            / 2.0;
        let actual = (rn2 - rt2) / 2.0;
        let rho = if predicted > 0.0 { actual / predicted } else { -1.0 };
        if rho > 0.0 {
            theta = trial;
            std::mem::swap(&mut r, &mut r_trial);
            let shrink = (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
            lambda = (lambda * shrink).max(1e-14);
            nu = 2.0;
            stale = true;
        } else {
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e14 {
                break;
            }
        }
    }
    let rn = norm2(&r);
    (theta, rn)
}

fn sub_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_mul(0x0000_0100_0000_01B3).wrapping_add(index)
}

/// Float-mode polish: push a recovered candidate the last stretch onto
/// the fiber of `target` with a few damped least-squares steps. The
/// algebraic procedures land within the convergence basin but can lose a
/// few digits through ill-conditioned subproblems; this recovers them.
/// Exact arithmetic needs no polish, so rational candidates pass through
/// untouched, as does any candidate the step fails to improve.
pub(crate) fn refine_candidate<S: Scalar>(
    params: &ParameterSet<S>,
    target: &DistTensor<S>,
) -> ParameterSet<S> {
    if S::mode() == crate::scalar::Mode::Rational {
        return params.clone();
    }
    let mut logits = Vec::new();
    for cpt in &params.cpts {
        let c = cpt.n_states();
        for row in 0..cpt.row_count() {
            let last = cpt.table.at(row, c - 1).to_f64();
            if last <= 0.0 {
                return params.clone();
            }
            for j in 0..c - 1 {
                let v = cpt.table.at(row, j).to_f64();
                if v <= 0.0 {
                    return params.clone();
                }
                logits.push((v / last).ln());
            }
        }
    }
    let plan = JointPlan::new(&params.model);
    let target_cells: Vec<f64> = target.data().iter().map(Scalar::to_f64).collect();
    let mut flat = vec![0.0; plan.flat_len];
    let mut r0 = vec![0.0; target_cells.len()];
    plan.residual_into(&logits, &target_cells, &mut flat, &mut r0);
    let before = norm2(&r0);
    let (theta, after) = levenberg_marquardt(&plan, &target_cells, logits, 15);
    if after >= before {
        return params.clone();
    }
    let refined = params_from_logits(&params.model, &theta);
    let cpts = refined
        .cpts
        .into_iter()
        .map(|cpt| Cpt {
            parents: cpt.parents,
            parent_sizes: cpt.parent_sizes,
            table: Matrix::from_fn(cpt.table.nrows(), cpt.table.ncols(), |r, c| {
                S::from_f64(*cpt.table.at(r, c))
            }),
        })
        .collect();
    ParameterSet::new(params.model.clone(), cpts)
}

/// Search for fiber points by many random restarts of a damped
/// least-squares fit to `target`, keeping starts whose final residual is
/// essentially zero and clustering the canonical forms of the surviving
/// parameter sets. Deterministic in `seed`; sub-seeds are derived per
/// start, so the result does not depend on scheduling.
pub fn multistart_fiber_search(
    model: &Model,
    target: &DistTensor<f64>,
    starts: usize,
    seed: u64,
    tols: &Tolerances,
) -> Result<Vec<ParameterSet<f64>>> {
    model.validate()?;
    let observables: Vec<crate::model::NodeId> = model.observables().collect();
    if target.axes() != observables {
        return Err(Error::Shape(
            "target tensor does not match the model's observables".to_string(),
        ));
    }
    let dim = model.parameter_dimension();
    let plan = JointPlan::new(model);
    let target_cells = target.data().iter().map(Scalar::to_f64).collect::<Vec<_>>();
    let mut kept = Vec::new();
    for s in 0..starts {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, s as u64));
        let start: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let (theta, rn) = levenberg_marquardt(&plan, &target_cells, start, 700);
        if rn < tols.residual {
            kept.push(params_from_logits(model, &theta));
        }
    }
    Ok(distinct_canonical(&kept, tols.cluster))
}

/// How the generic fiber size of a model was judged: the per-seed Jacobian
/// ranks, how often they fell short of the parameter count, and the fiber
/// size reported by the recovery procedures when one applies.
#[derive(Debug, Clone)]
pub struct ClassificationReport {
    pub parameter_dimension: usize,
    pub observable_dimension: usize,
    pub seeds: usize,
    pub ranks: Vec<usize>,
    pub deficient_seeds: usize,
    /// Rank deficiency at (almost) every seed: the fiber is generically
    /// positive-dimensional.
    pub infinite: bool,
    /// Candidate counts from the recovery procedures on a few instances
    /// (empty when no procedure applies).
    pub fiber_sizes: Vec<usize>,
    /// The generic fiber size, when finite and consistently observed.
    pub k: Option<usize>,
}

/// Classify a model as generically k-to-one by sampling `seeds` generic
/// parameter draws, measuring the Jacobian rank at each, and — when the
/// rank stays full — counting candidates from the recovery procedures.
/// Draws too close to the simplex boundary are skipped and resampled.
pub fn classify_generic_k(
    model: &Model,
    seeds: usize,
    tols: &Tolerances,
) -> Result<ClassificationReport> {
    model.validate()?;
    let dim = model.parameter_dimension();
    let mut ranks = Vec::with_capacity(seeds);
    let mut seed = 0u64;
    let mut attempts = 0;
    while ranks.len() < seeds && attempts < seeds * 10 {
        attempts += 1;
        let params: ParameterSet<f64> = sample_generic(model, seed);
        seed += 1;
        match observable_jacobian_rank(&params, tols) {
            Ok(r) => ranks.push(r),
            Err(Error::BoundaryParameters(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let deficient = ranks.iter().filter(|&&r| r < dim).count();
    // "Almost every seed" with the documented 18-in-20 threshold, scaled.
    let infinite = deficient * 20 >= ranks.len() * 18 && !ranks.is_empty();
    let mut fiber_sizes = Vec::new();
    if !infinite {
        for s in 0..3u64 {
            let truth: ParameterSet<f64> = sample_generic(model, 1000 + s);
            let obs = observable_joint(&truth);
            match crate::identify::identify(model, &obs, tols) {
                Ok(found) => fiber_sizes.push(found.result.candidates.len()),
                Err(_) => break,
            }
        }
    }
    let k = match fiber_sizes.as_slice() {
        [] => None,
        [first, rest @ ..] if rest.iter().all(|x| x == first) => Some(*first),
        _ => None,
    };
    Ok(ClassificationReport {
        parameter_dimension: dim,
        observable_dimension: model.observable_dimension(),
        seeds: ranks.len(),
        ranks,
        deficient_seeds: deficient,
        infinite,
        fiber_sizes,
        k,
    })
}
