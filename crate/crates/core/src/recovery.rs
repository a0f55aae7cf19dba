//! Direct fiber reconstruction from observable joints.
//!
//! Two procedures live here. [`kruskal_recover`] handles the three-
//! observable model with no edges between observables (`3-0` and anything
//! reduced to its shape): the observable tensor factors through the hidden
//! variable, and eigendecompositions of products of its slices expose the
//! conditional tables one row per hidden state. [`recover_43b`] handles the
//! four-observable shape `1 -> 2, 1 -> 3, 3 -> 4` by the same idea applied
//! to doubly-indexed slices: products of four slice matrices are similar to
//! a diagonal matrix of conditional odds ratios, whose eigenvectors are the
//! rows of the last node's tables.
//!
//! Both procedures only need the hidden cardinality to be at most each
//! relevant observable cardinality; when an observable is strictly larger,
//! the eigen step runs on a well-conditioned square subarray and the full
//! tables are recovered afterwards by normalizing rows or columns of
//! products with the full-size slices (each such product is a positive
//! diagonal rescaling of the sought stochastic matrix).
//!
//! Every run returns the reconstructed candidate together with named
//! checks: invertibility margins, spectral separation, stochasticity of
//! derived rows, diagonality witnesses, and an end-to-end reproduction of
//! the input tensor. Inputs where a precondition genuinely fails (repeated
//! spectra, singular slices) produce errors rather than silently wrong
//! parameters.

use serde::Serialize;

use crate::dist::{observable_joint, DistTensor};
use crate::error::{Error, Result};
use crate::linalg::{left_eigen, sigma_min_ratio, Matrix};
use crate::model::Model;
use crate::params::{row_index, Cpt, ParameterSet};
use crate::scalar::{Mode, Scalar};

/// Numerical thresholds used across the recovery, transfer, and
/// classification procedures. The defaults are the documented contract;
/// tests pin them.
#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    /// Entries at or below this are treated as zero for strict-positivity
    /// domain checks.
    pub positivity: f64,
    /// Relative singular-value floor below which a matrix counts as
    /// numerically singular.
    pub singular: f64,
    /// Relative eigenvalue separation required to accept a spectrum as
    /// distinct.
    pub eigen_gap: f64,
    /// Maximum row discrepancy allowed when the same table is derived along
    /// two routes and must agree.
    pub alignment_gap: f64,
    /// Maximum deviation allowed when a candidate's observable joint is
    /// compared against the input.
    pub reproduction: f64,
    /// Most negative probability mass tolerated in lifted tensors before
    /// the input is declared inconsistent; smaller dust is clamped to zero.
    pub negative_mass: f64,
    /// Residual norm below which a numerical fiber search counts as exact.
    pub residual: f64,
    /// Max-norm radius for clustering numerically equal fiber points.
    pub cluster: f64,
    /// Step size for finite-difference Jacobians.
    pub jacobian_step: f64,
    /// Relative singular-value cutoff for Jacobian rank decisions.
    pub jacobian_cutoff: f64,
    /// Parameter accuracy promised by float-mode identification; candidates
    /// whose estimated round-off amplification exceeds this are flagged as
    /// conditioning-limited rather than reported as fully precise.
    pub conditioning: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            positivity: 1e-12,
            singular: 1e-10,
            eigen_gap: 1e-8,
            alignment_gap: 1e-6,
            reproduction: 1e-8,
            negative_mass: 1e-9,
            residual: 1e-10,
            cluster: 1e-4,
            jacobian_step: 1e-5,
            jacobian_cutoff: 1e-7,
            conditioning: 1e-9,
        }
    }
}

/// One named verification performed during a procedure.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// The measured quantity, when one exists (a max deviation, a margin).
    pub measured: Option<f64>,
    /// The threshold it was compared against.
    pub tolerance: Option<f64>,
    pub note: Option<String>,
}

impl Check {
    pub(crate) fn leq(name: &str, measured: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            passed: measured <= tolerance,
            measured: Some(measured),
            tolerance: Some(tolerance),
            note: None,
        }
    }

    fn geq(name: &str, measured: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            passed: measured >= tolerance,
            measured: Some(measured),
            tolerance: Some(tolerance),
            note: None,
        }
    }

    pub(crate) fn flag(name: &str, passed: bool, note: Option<String>) -> Self {
        Check {
            name: name.to_string(),
            passed,
            measured: None,
            tolerance: None,
            note,
        }
    }
}

/// Outcome of a reconstruction: the candidate parameter vectors that were
/// produced and verified, plus the trail of checks.
#[derive(Debug, Clone)]
pub struct RecoveryResult<S> {
    pub model: Model,
    pub mode: Mode,
    pub candidates: Vec<ParameterSet<S>>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl<S: Scalar> RecoveryResult<S> {
    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Row Kruskal rank: the largest `r` such that *every* set of `r` rows is
/// linearly independent (0 if any row is zero, and at most the row count).
pub fn kruskal_row_rank<S: Scalar>(m: &Matrix<S>, rel_tol: f64) -> usize {
    let n = m.nrows();
    let mut best = 0;
    for r in 1..=n {
        let mut all_independent = true;
        for subset in subsets_of_size(n, r) {
            if m.select_rows(&subset).rank_with_tol(rel_tol) < r {
                all_independent = false;
                break;
            }
        }
        if all_independent {
            best = r;
        } else {
            break;
        }
    }
    best
}

fn subsets_of_size(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(start: usize, n: usize, r: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == r {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            rec(i + 1, n, r, current, out);
            current.pop();
        }
    }
    rec(0, n, r, &mut current, &mut out);
    out
}

/// The sufficient condition for the three-observable recovery, evaluated on
/// a known parameter set: the row Kruskal ranks of the three conditional
/// tables must sum to at least `2 n0 + 2`.
pub fn kruskal_preconditions<S: Scalar>(
    params: &ParameterSet<S>,
    tols: &Tolerances,
) -> Result<Vec<Check>> {
    let model = &params.model;
    require_shape_30(model)?;
    let n0 = model.state_size(0);
    let mut checks = Vec::new();
    let mut total = 0;
    for v in 1..=3 {
        let k = kruskal_row_rank(&params.cpts[v].table, tols.singular);
        total += k;
        checks.push(Check {
            name: format!("kruskal rank of table {v}"),
            passed: true,
            measured: Some(k as f64),
            tolerance: None,
            note: None,
        });
    }
    checks.push(Check::geq(
        "kruskal rank sum at least 2 n0 + 2",
        total as f64,
        (2 * n0 + 2) as f64,
    ));
    Ok(checks)
}

fn require_shape_30(model: &Model) -> Result<()> {
    model.validate()?;
    if model.n_obs() != 3 || !model.obs_edges().is_empty() {
        return Err(Error::NoProcedure("this procedure needs exactly three observables with no edges between them"
                .to_string()));
    }
    Ok(())
}

/// Weight vectors used to form linear combinations of slices when a single
/// slice has a collided spectrum: unit vectors first, then geometric
/// progressions with a few small bases.
fn combination_slate(n: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for i in 0..n {
        let mut c = vec![0i64; n];
        c[i] = 1;
        out.push(c);
    }
    for base in [2i64, 3, 5, 7, 11] {
        let mut c = vec![0i64; n];
        let mut w = 1i64;
        for entry in c.iter_mut() {
            *entry = w;
            w *= base;
        }
        out.push(c);
    }
    out
}

/// Rank index-subset pairs by the conditioning of the corresponding square
/// submatrix, best first.
fn ranked_square_subsets<S: Scalar>(
    m: &Matrix<S>,
    size: usize,
) -> Vec<(Vec<usize>, Vec<usize>, f64)> {
    let rows = subsets_of_size(m.nrows(), size);
    let cols = subsets_of_size(m.ncols(), size);
    let mf = Matrix::new(
        m.nrows(),
        m.ncols(),
        m.data().iter().map(Scalar::to_f64).collect(),
    );
    let mut ranked = Vec::new();
    for r in &rows {
        for c in &cols {
            let sub = mf.select_rows(r).select_cols(c);
            ranked.push((r.clone(), c.clone(), sigma_min_ratio(&sub)));
        }
    }
    ranked.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap());
    ranked
}

/// Extract the eigenvalue of `a` associated with left eigenvector `w` as a
/// component ratio of `w a` against `w`, read at `w`'s largest component.
fn eigenvalue_for<S: Scalar>(w: &[S], a: &Matrix<S>) -> S {
    let wa = Matrix::new(1, w.len(), w.to_vec()).matmul(a);
    let pivot = (0..w.len())
        .max_by(|&i, &j| w[i].abs_f64().partial_cmp(&w[j].abs_f64()).unwrap())
        .unwrap();
    wa.at(0, pivot).clone() / w[pivot].clone()
}

fn normalize_rows_to_stochastic<S: Scalar>(
    rows: Vec<(S, Vec<S>)>,
    context: &str,
) -> Result<(Vec<S>, Matrix<S>)> {
    let mut eigvals = Vec::with_capacity(rows.len());
    let mut table = Vec::with_capacity(rows.len());
    for (l, v) in rows {
        let mut sum = S::zero();
        for x in &v {
            sum = sum + x.clone();
        }
        if sum.abs_f64() < 1e-12 {
            return Err(Error::ExceptionalInput(format!(
                "an eigenvector sums to zero in {context}; rows cannot be scaled to distributions"
            )));
        }
        eigvals.push(l);
        table.push(v.into_iter().map(|x| x / sum.clone()).collect::<Vec<S>>());
    }
    Ok((eigvals, Matrix::from_rows(table)))
}

/// Sort eigenpairs by descending eigenvalue so every derived table gets a
/// deterministic hidden-state order.
fn sort_pairs_desc<S: Scalar>(mut pairs: Vec<(S, Vec<S>)>) -> Vec<(S, Vec<S>)> {
    pairs.sort_by(|a, b| b.0.cmp_total(&a.0));
    pairs
}

/// Reconstruct a parameter set for a three-observable model with no edges
/// between observables from its observable joint. Returns one fiber
/// representative; the other fiber points are its hidden relabelings.
pub fn kruskal_recover<S: Scalar>(
    model: &Model,
    obs: &DistTensor<S>,
    tols: &Tolerances,
) -> Result<RecoveryResult<S>> {
    require_shape_30(model)?;
    let n0 = model.state_size(0);
    let (n1, n2, n3) = (
        model.state_size(1),
        model.state_size(2),
        model.state_size(3),
    );
    if obs.axes() != [1, 2, 3] || obs.sizes() != [n1, n2, n3] {
        return Err(Error::Shape(
            "observable tensor does not match the model's observables".to_string(),
        ));
    }
    if n1 < n0 || n2 < n0 {
        return Err(Error::NoProcedure(format!(
                "the first two observables need at least {n0} states to separate {n0} hidden states"
            )));
    }
    let mut checks = Vec::new();
    let mut warnings = Vec::new();

    // Slices P_i = P(X1, X2, X3 = i) and their sum, as n1 x n2 matrices.
    let slices: Vec<Matrix<S>> = (0..n3)
        .map(|i| obs.fix(3, i).as_matrix(&[1], &[2]))
        .collect();
    let mut p_plus = Matrix::zeros(n1, n2);
    for s in &slices {
        p_plus = p_plus.add(s);
    }

    let ranked = ranked_square_subsets(&p_plus, n0);
    let slate = combination_slate(n3);
    let mut last_err: Option<Error> = None;

    for (c1, c2, sigma) in ranked.into_iter().take(10) {
        let sub_plus = p_plus.select_rows(&c1).select_cols(&c2);
        let inv = match sub_plus.inverse("marginal slice inversion") {
            Ok(inv) => inv,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let sub_slices: Vec<Matrix<S>> = slices
            .iter()
            .map(|s| s.select_rows(&c1).select_cols(&c2))
            .collect();

        for weights in &slate {
            let mut p_c = Matrix::zeros(n0, n0);
            for (w, s) in weights.iter().zip(&sub_slices) {
                if *w != 0 {
                    p_c = p_c.add(&s.scale(&S::from_int(*w)));
                }
            }
            let a_c = inv.matmul(&p_c);
            let pairs = match left_eigen(&a_c, tols.eigen_gap, "slice combination spectrum") {
                Ok(Some(pairs)) => pairs,
                Ok(None) => continue,
                Err(e @ Error::ComplexEigenvalues { .. }) => {
                    last_err = Some(e);
                    continue;
                }
                Err(e) => return Err(e),
            };
            let pairs = sort_pairs_desc(pairs);
            let gap = min_rel_gap(&pairs);

            // Rows of the second observable's table, in eigenvalue order.
            let (_, m2_sub) = match normalize_rows_to_stochastic(pairs, "the second factor") {
                Ok(x) => x,
                Err(e) => {
                    last_err = Some(e);
                    continue;
                }
            };

            // Right eigenvectors of the mirrored product give the first
            // observable's rows; matching is by eigenvalue order.
            let b_c = p_c.matmul(&inv);
            let pairs_b = match left_eigen(&b_c.transpose(), tols.eigen_gap, "mirrored spectrum") {
                Ok(Some(p)) => p,
                Ok(None) => continue,
                Err(e @ Error::ComplexEigenvalues { .. }) => {
                    last_err = Some(e);
                    continue;
                }
                Err(e) => return Err(e),
            };
            let pairs_b = sort_pairs_desc(pairs_b);
            let (_, m1_sub) = match normalize_rows_to_stochastic(pairs_b, "the first factor") {
                Ok(x) => x,
                Err(e) => {
                    last_err = Some(e);
                    continue;
                }
            };

            match assemble_30(
                model, obs, &slices, &p_plus, &c1, &c2, &m1_sub, &m2_sub, &inv, tols,
            ) {
                Ok((params, mut assembly_checks)) => {
                    checks.push(Check::geq(
                        "marginal subarray conditioning",
                        sigma,
                        tols.singular,
                    ));
                    checks.push(Check::geq("spectral separation", gap, tols.eigen_gap));
                    checks.append(&mut assembly_checks);
                    if weights.iter().filter(|&&w| w != 0).count() > 1 {
                        warnings.push(format!(
                            "single slices had collided spectra; used slice weights {weights:?}"
                        ));
                    }
                    return Ok(RecoveryResult {
                        model: model.clone(),
                        mode: S::mode(),
                        candidates: vec![params],
                        checks,
                        warnings,
                    });
                }
                Err(e) => {
                    last_err = Some(e);
                    continue;
                }
            }
        }
    }
    Err(last_err.unwrap_or_else(|| {
        Error::ExceptionalInput(
            "no slice combination produced a separated spectrum on any well-conditioned subarray"
                .to_string(),
        )
    }))
}

fn min_rel_gap<S: Scalar>(pairs: &[(S, Vec<S>)]) -> f64 {
    let scale = pairs
        .iter()
        .map(|(l, _)| l.abs_f64())
        .fold(1.0_f64, f64::max);
    let mut min = f64::INFINITY;
    for i in 0..pairs.len() {
        for j in (i + 1)..pairs.len() {
            let g = (pairs[i].0.clone() - pairs[j].0.clone()).abs_f64() / scale;
            min = min.min(g);
        }
    }
    if min.is_finite() {
        min
    } else {
        f64::INFINITY
    }
}

/// From the row-normalized square factors on a subarray, lift to the
/// full-size tables and the hidden prior, then verify.
#[allow(clippy::too_many_arguments)]
fn assemble_30<S: Scalar>(
    model: &Model,
    obs: &DistTensor<S>,
    slices: &[Matrix<S>],
    p_plus: &Matrix<S>,
    c1: &[usize],
    c2: &[usize],
    m1_sub: &Matrix<S>,
    m2_sub: &Matrix<S>,
    sub_plus_inv: &Matrix<S>,
    tols: &Tolerances,
) -> Result<(ParameterSet<S>, Vec<Check>)> {
    let n0 = model.state_size(0);
    let n3 = model.state_size(3);
    let mut checks = Vec::new();

    // Third table: eigenvalues of each sub-slice product, one column per
    // slice value; the rows must come out stochastic because the slices sum
    // to the marginal.
    let mut m3 = Matrix::zeros(n0, n3);
    for (i, s) in slices.iter().enumerate() {
        let a_i = sub_plus_inv.matmul(&s.select_rows(c1).select_cols(c2));
        for k in 0..n0 {
            *m3.at_mut(k, i) = eigenvalue_for(m2_sub.row(k), &a_i);
        }
    }
    let m3_sum_dev = max_row_sum_deviation(&m3);
    checks.push(Check::leq(
        "third table rows sum to one",
        m3_sum_dev,
        row_sum_tolerance::<S>(tols),
    ));
    if m3_sum_dev > 1e-4 {
        return Err(Error::ExceptionalInput(
            "slice eigenvalues do not assemble into distributions".to_string(),
        ));
    }

    // Full second table: rows of inv(M1_sub)^T P_plus[C1, :] are positive
    // multiples of the true rows; normalizing restores them.
    let m1_sub_inv_t = m1_sub.inverse("first factor inversion")?.transpose();
    let m2_full = m1_sub_inv_t
        .matmul(&p_plus.select_rows(c1))
        .normalized_rows("second factor lift")?;
    // Full first table, symmetrically, via columns.
    let m2_sub_inv = m2_sub.inverse("second factor inversion")?;
    let m1_full = p_plus
        .select_cols(c2)
        .matmul(&m2_sub_inv)
        .transpose()
        .normalized_rows("first factor lift")?;

    // Hidden prior: conjugating the subarray marginal by the recovered true
    // sub-blocks must give a diagonal matrix with the prior on it.
    let m1_block = m1_full.select_cols(c1);
    let m2_block = m2_full.select_cols(c2);
    let d = m1_block
        .transpose()
        .inverse("prior extraction")?
        .matmul(&p_plus.select_rows(c1).select_cols(c2))
        .matmul(&m2_block.inverse("prior extraction")?);
    let mut off_diag = 0.0_f64;
    let mut prior = Vec::with_capacity(n0);
    for k in 0..n0 {
        for l in 0..n0 {
            if k != l {
                off_diag = off_diag.max(d.at(k, l).abs_f64());
            }
        }
        prior.push(d.at(k, k).clone());
    }
    checks.push(Check::leq(
        "prior extraction is diagonal",
        off_diag,
        diag_tolerance::<S>(tols),
    ));
    let mut prior_sum = S::zero();
    for p in &prior {
        prior_sum = prior_sum + p.clone();
    }
    checks.push(Check::leq(
        "prior sums to one",
        (prior_sum.clone() - S::one()).abs_f64(),
        row_sum_tolerance::<S>(tols),
    ));
    // Renormalize the prior so the candidate is exactly on the simplex.
    let prior: Vec<S> = prior.into_iter().map(|p| p / prior_sum.clone()).collect();

    let params = build_30_params(model, prior, m1_full, m2_full, m3);
    push_range_and_reproduction_checks(&params, obs, tols, &mut checks)?;
    Ok((params, checks))
}

fn row_sum_tolerance<S: Scalar>(tols: &Tolerances) -> f64 {
    match S::mode() {
        Mode::Rational => 0.0,
        Mode::Float => tols.reproduction,
    }
}

fn diag_tolerance<S: Scalar>(tols: &Tolerances) -> f64 {
    match S::mode() {
        Mode::Rational => 0.0,
        Mode::Float => tols.alignment_gap,
    }
}

fn max_row_sum_deviation<S: Scalar>(m: &Matrix<S>) -> f64 {
    m.row_sums()
        .into_iter()
        .map(|s| (s - S::one()).abs_f64())
        .fold(0.0, f64::max)
}

fn build_30_params<S: Scalar>(
    model: &Model,
    prior: Vec<S>,
    m1: Matrix<S>,
    m2: Matrix<S>,
    m3: Matrix<S>,
) -> ParameterSet<S> {
    let n0 = model.state_size(0);
    let cpts = vec![
        Cpt {
            parents: vec![],
            parent_sizes: vec![],
            table: Matrix::new(1, n0, prior),
        },
        Cpt {
            parents: vec![0],
            parent_sizes: vec![n0],
            table: m1,
        },
        Cpt {
            parents: vec![0],
            parent_sizes: vec![n0],
            table: m2,
        },
        Cpt {
            parents: vec![0],
            parent_sizes: vec![n0],
            table: m3,
        },
    ];
    ParameterSet::new(model.clone(), cpts)
}

/// Range check (entries near [0, 1]) and end-to-end reproduction check,
/// shared by all recovery procedures.
pub(crate) fn push_range_and_reproduction_checks<S: Scalar>(
    params: &ParameterSet<S>,
    obs: &DistTensor<S>,
    tols: &Tolerances,
    checks: &mut Vec<Check>,
) -> Result<()> {
    let mut most_negative = 0.0_f64;
    for cpt in &params.cpts {
        for x in cpt.table.data() {
            let v = x.to_f64();
            if v < most_negative {
                most_negative = v;
            }
        }
    }
    checks.push(Check::leq(
        "entries within the probability range",
        -most_negative,
        tols.negative_mass,
    ));
    let rebuilt = observable_joint(params);
    let diff = rebuilt.max_abs_diff(obs);
    checks.push(Check::leq(
        "candidate reproduces the input tensor",
        diff,
        match S::mode() {
            Mode::Rational => 0.0,
            Mode::Float => tols.reproduction,
        },
    ));
    Ok(())
}

/// Division-free form of one conditional odds-ratio comparison: for hidden
/// states `k`, `kp`, conditioner values `i`, `ip`, and target values `j`,
/// `jp`, the two cross products whose inequality makes the corresponding
/// spectrum separated.
#[derive(Debug, Clone)]
pub struct OddsRatioProducts<S> {
    pub lhs: S,
    pub rhs: S,
}

impl<S: Scalar> OddsRatioProducts<S> {
    pub fn distinct(&self, rel_tol: f64) -> bool {
        match S::mode() {
            Mode::Rational => self.lhs != self.rhs,
            Mode::Float => {
                let scale = self.lhs.abs_f64().max(self.rhs.abs_f64()).max(1.0);
                (self.lhs.clone() - self.rhs.clone()).abs_f64() > rel_tol * scale
            }
        }
    }
}

/// Compute the cross products for a table whose rows are indexed `(k, i)`
/// lexicographically (hidden most significant).
#[allow(clippy::too_many_arguments)]
pub fn odds_ratio_products<S: Scalar>(
    table: &Matrix<S>,
    sizes: &[usize; 2],
    k: usize,
    kp: usize,
    i: usize,
    ip: usize,
    j: usize,
    jp: usize,
) -> OddsRatioProducts<S> {
    let at = |kk: usize, ii: usize, jj: usize| {
        table.at(row_index(sizes, &[kk, ii]), jj).clone()
    };
    OddsRatioProducts {
        lhs: at(k, i, jp) * at(k, ip, j) * at(kp, i, j) * at(kp, ip, jp),
        rhs: at(k, i, j) * at(k, ip, jp) * at(kp, i, jp) * at(kp, ip, j),
    }
}

/// The spectral-separation condition for the slice-product recovery, stated
/// on the middle table: for every pair of hidden states, the conditional
/// odds ratios across the value pairs `(i, ip)` and `(j, jp)` must differ.
#[allow(clippy::too_many_arguments)]
pub fn odds_ratio_condition<S: Scalar>(
    table: &Matrix<S>,
    sizes: &[usize; 2],
    i: usize,
    ip: usize,
    j: usize,
    jp: usize,
    rel_tol: f64,
) -> (bool, Vec<OddsRatioProducts<S>>) {
    let n0 = sizes[0];
    let mut all = Vec::new();
    let mut ok = true;
    for k in 0..n0 {
        for kp in (k + 1)..n0 {
            let p = odds_ratio_products(table, sizes, k, kp, i, ip, j, jp);
            ok &= p.distinct(rel_tol);
            all.push(p);
        }
    }
    (ok, all)
}

pub(crate) fn require_shape_43b(model: &Model) -> Result<()> {
    model.validate()?;
    let expected = crate::catalog::catalog_model("4-3b").expect("catalog");
    let same_edges = model.n_obs() == 4
        && model.obs_edges() == expected.obs_edges()
        && model.state_sizes().len() == 5;
    if !same_edges {
        return Err(Error::NoProcedure("this procedure needs the edge set 1->2, 1->3, 3->4".to_string()));
    }
    Ok(())
}

/// Reconstruct a parameter set for the shape `1 -> 2, 1 -> 3, 3 -> 4` from
/// its observable joint. Slices are taken at fixed values of nodes 1 and 3;
/// a product of four of them is similar to the diagonal matrix of
/// conditional odds ratios, and its left eigenvectors are rows of node 4's
/// table. Everything else follows by normalizing products against the
/// slices. Returns one fiber representative.
pub fn recover_43b<S: Scalar>(
    model: &Model,
    obs: &DistTensor<S>,
    tols: &Tolerances,
) -> Result<RecoveryResult<S>> {
    require_shape_43b(model)?;
    let n0 = model.state_size(0);
    let (n1, n2, n3, n4) = (
        model.state_size(1),
        model.state_size(2),
        model.state_size(3),
        model.state_size(4),
    );
    if obs.axes() != [1, 2, 3, 4] || obs.sizes() != [n1, n2, n3, n4] {
        return Err(Error::Shape(
            "observable tensor does not match the model's observables".to_string(),
        ));
    }
    if n2 < n0 || n4 < n0 {
        return Err(Error::NoProcedure(format!("nodes 2 and 4 need at least {n0} states")));
    }
    if n1 < 2 || n3 < 2 {
        return Err(Error::NoProcedure("nodes 1 and 3 need at least two states".to_string()));
    }
    let mut checks = Vec::new();
    let mut warnings: Vec<String> = Vec::new();

    // Slice matrices P[i][j] = P(X2, X4, X1 = i, X3 = j), rows X2, cols X4.
    let slice = |i: usize, j: usize| obs.fix(1, i).fix(3, j).as_matrix(&[2], &[4]);
    let mut last_err: Option<Error> = None;

    // Choose the value pairs and the square subarray together, best
    // conditioned first.
    for i0 in 0..n1 {
        for i1 in (i0 + 1)..n1 {
            for j0 in 0..n3 {
                for j1 in (j0 + 1)..n3 {
                    match try_43b_pairs(model, obs, &slice, (i0, i1), (j0, j1), tols) {
                        Ok((params, mut pair_checks, gap, sigma)) => {
                            checks.push(Check::geq(
                                "slice subarray conditioning",
                                sigma,
                                tols.singular,
                            ));
                            checks.push(Check::geq(
                                "odds-ratio spectrum separation",
                                gap,
                                tols.eigen_gap,
                            ));
                            checks.append(&mut pair_checks);
                            if (i0, i1, j0, j1) != (0, 1, 0, 1) {
                                warnings.push(format!(
                                    "default value pairs were degenerate; used X1 pair \
                                     ({}, {}) and X3 pair ({}, {})",
                                    i0 + 1,
                                    i1 + 1,
                                    j0 + 1,
                                    j1 + 1
                                ));
                            }
                            return Ok(RecoveryResult {
                                model: model.clone(),
                                mode: S::mode(),
                                candidates: vec![params],
                                checks,
                                warnings,
                            });
                        }
                        Err(e) => {
                            last_err = Some(e);
                        }
                    }
                }
            }
        }
    }
    Err(last_err.unwrap_or_else(|| {
        Error::ExceptionalInput(
            "no pair of slice values produced a separated odds-ratio spectrum".to_string(),
        )
    }))
}

type Recovered43b<S> = (ParameterSet<S>, Vec<Check>, f64, f64);

fn try_43b_pairs<S: Scalar>(
    model: &Model,
    obs: &DistTensor<S>,
    slice: &impl Fn(usize, usize) -> Matrix<S>,
    (i0, i1): (usize, usize),
    (j0, j1): (usize, usize),
    tols: &Tolerances,
) -> Result<Recovered43b<S>> {
    let n0 = model.state_size(0);
    let (n1, n3) = (model.state_size(1), model.state_size(3));
    let p_ref = slice(i0, j0);
    let ranked = ranked_square_subsets(&p_ref, n0);
    let mut last_err: Option<Error> = None;
    for (c2, c4, sigma) in ranked.into_iter().take(10) {
        let sub = |i: usize, j: usize| slice(i, j).select_rows(&c2).select_cols(&c4);
        let result = (|| -> Result<Recovered43b<S>> {
            // F = P(i0,j0)^-1 P(i0,j1) P(i1,j1)^-1 P(i1,j0), on the subarray.
            let f = sub(i0, j0)
                .inverse("slice inversion")?
                .matmul(&sub(i0, j1))
                .matmul(&sub(i1, j1).inverse("slice inversion")?)
                .matmul(&sub(i1, j0));
            let pairs = match left_eigen(&f, tols.eigen_gap, "odds-ratio spectrum")? {
                Some(p) => p,
                None => {
                    return Err(Error::ExceptionalInput(
                        "odds-ratio spectrum is not separated".to_string(),
                    ))
                }
            };
            let pairs = sort_pairs_desc(pairs);
            let gap = min_rel_gap(&pairs);
            // Left eigenvectors of F are rows of node 4's table at X3 = j0,
            // restricted to the chosen columns; normalized they fix the
            // hidden order for everything downstream.
            let (_, m4_ref_sub) = normalize_rows_to_stochastic(pairs, "the last factor")?;
            let m4_ref_sub_inv = m4_ref_sub.inverse("last factor inversion")?;

            let mut checks = Vec::new();

            // Node 2's table rows at each X1 = i: columns of
            // P(i, j0)[:, C4] (M4_sub)^-1 are positive multiples of them.
            let mut m2_tables = Vec::with_capacity(n1);
            for i in 0..n1 {
                let g = slice(i, j0).select_cols(&c4).matmul(&m4_ref_sub_inv);
                for k in 0..n0 {
                    let mut colsum = S::zero();
                    for r in 0..g.nrows() {
                        colsum = colsum + g.at(r, k).clone();
                    }
                    if !colsum.positive_within(tols.positivity) {
                        return Err(Error::ExceptionalInput(
                            "a lifted column has non-positive mass".to_string(),
                        ));
                    }
                }
                m2_tables.push(g.transpose().normalized_rows("second factor lift")?);
            }

            // Diagonal factors and node 4's full tables. For each (i, j),
            // inv(M2_i[:, C2])^T P(i, j)[C2, :] equals D_{i,j} M4_j: its row
            // sums are the diagonal entries and its normalized rows are the
            // full rows of node 4's table, independently of i — the spread
            // across i is the consistency witness.
            let mut d = vec![vec![Vec::<S>::new(); n3]; n1];
            let mut m4_tables: Vec<Option<Matrix<S>>> = vec![None; n3];
            let mut consistency = 0.0_f64;
            for i in 0..n1 {
                let m2_block_inv_t = m2_tables[i]
                    .select_cols(&c2)
                    .inverse("second factor block inversion")?
                    .transpose();
                for j in 0..n3 {
                    let h = m2_block_inv_t.matmul(&slice(i, j).select_rows(&c2));
                    let sums = h.row_sums();
                    for s in &sums {
                        if !s.positive_within(tols.positivity) {
                            return Err(Error::ExceptionalInput(
                                "a diagonal slice factor is not positive".to_string(),
                            ));
                        }
                    }
                    let normalized = h.normalized_rows("last factor lift")?;
                    match &m4_tables[j] {
                        None => m4_tables[j] = Some(normalized),
                        Some(existing) => {
                            consistency = consistency.max(existing.max_abs_diff(&normalized));
                        }
                    }
                    d[i][j] = sums;
                }
            }
            checks.push(Check::leq(
                "last factor agrees across conditioning values",
                consistency,
                match S::mode() {
                    Mode::Rational => 0.0,
                    Mode::Float => tols.alignment_gap,
                },
            ));

            // Hidden prior and the tables of nodes 1 and 3 from the
            // diagonal factors: summing over j gives p0(k) M1(k, i).
            let mut e = Matrix::zeros(n0, n1);
            for i in 0..n1 {
                for k in 0..n0 {
                    let mut acc = S::zero();
                    for j in 0..n3 {
                        acc = acc + d[i][j][k].clone();
                    }
                    *e.at_mut(k, i) = acc;
                }
            }
            let mut prior_raw = Vec::with_capacity(n0);
            for k in 0..n0 {
                let mut acc = S::zero();
                for i in 0..n1 {
                    acc = acc + e.at(k, i).clone();
                }
                if !acc.positive_within(tols.positivity) {
                    return Err(Error::ExceptionalInput(
                        "a hidden state carries no mass".to_string(),
                    ));
                }
                prior_raw.push(acc);
            }
            let mut prior_sum = S::zero();
            for p in &prior_raw {
                prior_sum = prior_sum + p.clone();
            }
            checks.push(Check::leq(
                "prior sums to one",
                (prior_sum.clone() - S::one()).abs_f64(),
                row_sum_tolerance::<S>(tols),
            ));
            let prior: Vec<S> = prior_raw
                .iter()
                .map(|p| p.clone() / prior_sum.clone())
                .collect();

            // Rows of node 1's table sum to one by construction: each is
            // e(k, .) divided by its own total.
            let m1 = Matrix::from_fn(n0, n1, |k, i| e.at(k, i).clone() / prior_raw[k].clone());
            let m3 = Matrix::from_fn(n0 * n1, n3, |row, j| {
                let k = row / n1;
                let i = row % n1;
                d[i][j][k].clone() / e.at(k, i).clone()
            });

            // Assemble CPTs: node 2 rows are (k, i) lexicographic, node 4
            // rows are (k, j).
            let n2 = model.state_size(2);
            let n4 = model.state_size(4);
            let mut m2_table = Matrix::zeros(n0 * n1, n2);
            for i in 0..n1 {
                for k in 0..n0 {
                    for x in 0..n2 {
                        *m2_table.at_mut(k * n1 + i, x) = m2_tables[i].at(k, x).clone();
                    }
                }
            }
            let mut m4_table = Matrix::zeros(n0 * n3, n4);
            for j in 0..n3 {
                let t = m4_tables[j].as_ref().unwrap();
                for k in 0..n0 {
                    for x in 0..n4 {
                        *m4_table.at_mut(k * n3 + j, x) = t.at(k, x).clone();
                    }
                }
            }
            let cpts = vec![
                Cpt {
                    parents: vec![],
                    parent_sizes: vec![],
                    table: Matrix::new(1, n0, prior),
                },
                Cpt {
                    parents: vec![0],
                    parent_sizes: vec![n0],
                    table: m1,
                },
                Cpt {
                    parents: vec![0, 1],
                    parent_sizes: vec![n0, n1],
                    table: m2_table,
                },
                Cpt {
                    parents: vec![0, 1],
                    parent_sizes: vec![n0, n1],
                    table: m3,
                },
                Cpt {
                    parents: vec![0, 3],
                    parent_sizes: vec![n0, n3],
                    table: m4_table,
                },
            ];
            let params = ParameterSet::new(model.clone(), cpts);
            push_range_and_reproduction_checks(&params, obs, tols, &mut checks)?;
            Ok((params, checks, gap, sigma))
        })();
        match result {
            Ok(ok) => return Ok(ok),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| {
        Error::ExceptionalInput("no usable subarray for the slice recovery".to_string())
    }))
}
