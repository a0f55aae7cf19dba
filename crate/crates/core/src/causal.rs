//! Interventional queries on a parameterized model, and how they vary
//! across a fiber.
//!
//! An intervention `do(X_c = x)` replaces the CPT of the intervened node
//! with a point mass at `x` and leaves every other CPT alone (truncated
//! factorization). The interventional distribution of any other node is
//! then an ordinary marginal of the surgered joint — hidden causes
//! included, since the hidden node's CPT is part of the product.
//!
//! When a distribution has several preimages, an effect computed from one
//! preimage need not match the others; in particular the *sign* of a
//! contrast can flip between fiber points while the observable joint stays
//! fixed. [`effect_ambiguity`] makes that visible: it evaluates the same
//! query on every candidate and reports whether all the contrast signs
//! agree.

use serde::Serialize;

use crate::dist::joint_distribution;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::NodeId;
use crate::params::{Cpt, ParameterSet};
use crate::scalar::Scalar;

/// The table `P(X_effect = y | do(X_cause = x))`, rows indexed by the
/// intervened state `x`, columns by the outcome `y`.
pub fn causal_effect<S: Scalar>(
    params: &ParameterSet<S>,
    cause: NodeId,
    effect: NodeId,
) -> Result<Matrix<S>> {
    let model = &params.model;
    if cause >= model.n_nodes() {
        return Err(Error::UnknownNode(cause));
    }
    if effect >= model.n_nodes() {
        return Err(Error::UnknownNode(effect));
    }
    if cause == effect {
        return Err(Error::Shape(
            "cause and effect must be different nodes".to_string(),
        ));
    }
    let n_cause = model.state_size(cause);
    let n_effect = model.state_size(effect);
    let mut out = Matrix::zeros(n_cause, n_effect);
    for x in 0..n_cause {
        let surgered = intervene(params, cause, x);
        let marg = joint_distribution(&surgered).marginalize_onto(&[effect]);
        for y in 0..n_effect {
            *out.at_mut(x, y) = marg.data()[y].clone();
        }
    }
    Ok(out)
}

/// `params` with the CPT of `node` replaced by a point mass at `state`,
/// regardless of parent configuration.
fn intervene<S: Scalar>(params: &ParameterSet<S>, node: NodeId, state: usize) -> ParameterSet<S> {
    let mut cpts = params.cpts.clone();
    let old = &params.cpts[node];
    let nrows = old.row_count();
    let ncols = old.n_states();
    let mut data = Vec::with_capacity(nrows * ncols);
    for _ in 0..nrows {
        for c in 0..ncols {
            data.push(if c == state { S::one() } else { S::zero() });
        }
    }
    cpts[node] = Cpt {
        parents: old.parents.clone(),
        parent_sizes: old.parent_sizes.clone(),
        table: Matrix::new(nrows, ncols, data),
    };
    ParameterSet::new(params.model.clone(), cpts)
}

/// One candidate's view of an interventional query: the full effect table
/// and the contrasts of every row against the first (baseline) row.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateEffect<S> {
    /// `P(X_effect = y | do(X_cause = x))`, row-major.
    pub table: Vec<Vec<S>>,
    /// `table[x][y] - table[0][y]` for `x > 0`, row-major.
    pub contrasts: Vec<Vec<S>>,
}

/// The same interventional query evaluated on every fiber candidate, with
/// a verdict on whether the candidates can disagree about the direction of
/// the effect.
#[derive(Debug, Clone, Serialize)]
pub struct EffectReport<S> {
    pub cause: NodeId,
    pub effect: NodeId,
    pub per_candidate: Vec<CandidateEffect<S>>,
    /// True when every contrast entry has the same sign across all
    /// candidates. False means the data alone cannot settle the direction
    /// of this effect.
    pub signs_agree: bool,
}

fn sign_of(x: f64, tol: f64) -> i8 {
    if x > tol {
        1
    } else if x < -tol {
        -1
    } else {
        0
    }
}

/// Evaluate `P(X_effect | do(X_cause))` on each candidate and compare the
/// signs of all contrast entries across candidates. `tol` is the width of
/// the band treated as "zero" when classifying a sign in float mode; exact
/// zero is used for rational values.
pub fn effect_ambiguity<S: Scalar>(
    candidates: &[ParameterSet<S>],
    cause: NodeId,
    effect: NodeId,
    tol: f64,
) -> Result<EffectReport<S>> {
    if candidates.is_empty() {
        return Err(Error::Shape(
            "effect ambiguity needs at least one candidate".to_string(),
        ));
    }
    let mut per_candidate = Vec::with_capacity(candidates.len());
    for params in candidates {
        let m = causal_effect(params, cause, effect)?;
        let table: Vec<Vec<S>> = (0..m.nrows())
            .map(|r| (0..m.ncols()).map(|c| m.at(r, c).clone()).collect())
            .collect();
        let contrasts: Vec<Vec<S>> = (1..m.nrows())
            .map(|r| {
                (0..m.ncols())
                    .map(|c| m.at(r, c).clone() - m.at(0, c).clone())
                    .collect()
            })
            .collect();
        per_candidate.push(CandidateEffect { table, contrasts });
    }
    let band = match S::mode() {
        crate::scalar::Mode::Rational => 0.0,
        crate::scalar::Mode::Float => tol,
    };
    let reference: Vec<i8> = per_candidate[0]
        .contrasts
        .iter()
        .flatten()
        .map(|v| sign_of(v.to_f64(), band))
        .collect();
    let signs_agree = per_candidate.iter().skip(1).all(|cand| {
        cand.contrasts
            .iter()
            .flatten()
            .map(|v| sign_of(v.to_f64(), band))
            .eq(reference.iter().copied())
    });
    Ok(EffectReport {
        cause,
        effect,
        per_candidate,
        signs_agree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::{demo_effects, demo_params_one, demo_params_two};
    use crate::fiber::label_swap_orbit;
    use num::BigRational;

    #[test]
    fn interventional_tables_match_the_frozen_demo_values() {
        let frozen = demo_effects::<BigRational>();
        for (params, (do_hi, do_lo, contrast)) in [demo_params_one(), demo_params_two()]
            .iter()
            .zip(frozen)
        {
            let m = causal_effect::<BigRational>(params, 1, 2).unwrap();
            assert_eq!(*m.at(1, 1), do_hi);
            assert_eq!(*m.at(0, 1), do_lo);
            assert_eq!(m.at(1, 1).clone() - m.at(0, 1).clone(), contrast);
        }
    }

    #[test]
    fn signs_disagree_across_the_demo_fiber() {
        let candidates = [demo_params_one::<BigRational>(), demo_params_two()];
        let report = effect_ambiguity(&candidates, 1, 2, 0.0).unwrap();
        assert!(!report.signs_agree);
        assert_eq!(
            report.per_candidate[0].contrasts[0][1],
            BigRational::new((-7).into(), 50.into())
        );
        assert_eq!(
            report.per_candidate[1].contrasts[0][1],
            BigRational::new(3.into(), 50.into())
        );
    }

    #[test]
    fn hidden_relabeling_cannot_change_an_effect() {
        let orbit = label_swap_orbit(&demo_params_one::<BigRational>());
        assert_eq!(orbit.len(), 2);
        let report = effect_ambiguity(&orbit, 1, 2, 0.0).unwrap();
        assert!(report.signs_agree);
        assert_eq!(
            report.per_candidate[0].table,
            report.per_candidate[1].table
        );
    }

    #[test]
    fn intervening_on_a_childless_node_leaves_the_rest_alone() {
        let params = demo_params_two::<BigRational>();
        let m = causal_effect(&params, 4, 1).unwrap();
        for y in 0..2 {
            assert_eq!(m.at(0, y), m.at(1, y));
        }
    }

    #[test]
    fn the_truncated_joint_matches_the_parent_adjustment_by_hand() {
        // For the star model the hidden node is the only other parent of
        // node 2, so P(X2 = y | do(X1 = x)) = sum_k p0(k) M2((k, x), y).
        let params = demo_params_one::<BigRational>();
        let m = causal_effect(&params, 1, 2).unwrap();
        let prior = &params.cpts[0].table;
        let m2 = &params.cpts[2].table;
        for x in 0..2 {
            for y in 0..2 {
                let expect = prior.at(0, 0).clone() * m2.at(x, y).clone()
                    + prior.at(0, 1).clone() * m2.at(2 + x, y).clone();
                assert_eq!(*m.at(x, y), expect);
            }
        }
    }

    #[test]
    fn cause_and_effect_must_differ() {
        let params = demo_params_one::<BigRational>();
        assert!(matches!(
            causal_effect(&params, 2, 2),
            Err(Error::Shape(_))
        ));
    }
}
