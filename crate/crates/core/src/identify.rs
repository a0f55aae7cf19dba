//! The identification front door: route an observable joint to the right
//! recovery procedure and return the complete fiber.
//!
//! The recovery procedures each want a particular shape — no observable
//! edges among three observables, everything flowing into a sink, a hub
//! with a spare factor, the chain-with-tail labeling, the star. A model
//! that matches none of them directly may still match after covered-edge
//! reversals, which change the DAG but not the distribution family. So
//! dispatch walks the Markov equivalence class in discovery order, runs
//! the first member that fits a procedure, and carries the candidates back
//! to the requested structure along the reversal path.
//!
//! Procedures return one fiber point per hidden labeling class;
//! [`identify`] expands each by the hidden-relabeling orbit so the
//! candidate list is the whole fiber (the star enumeration already
//! produces the whole fiber and is left as is).

use crate::dist::{observable_joint, DistTensor};
use crate::error::{Error, Result};
use crate::fiber::{accuracy_floor, exact_polish, label_swap_orbit, refine_candidate};
use crate::markov::{markov_equivalence_class, transfer_parameters};
use crate::model::Model;
use crate::params::ParameterSet;
use crate::recovery::{kruskal_recover, recover_43b, require_shape_43b, Check, RecoveryResult, Tolerances};
use crate::reductions::{eligible_sinks, fiber_43e, hub_shape, recover_via_conditioning, recover_via_sink};
use crate::scalar::{Mode, Scalar};

/// Which recovery procedure the dispatcher settled on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Procedure {
    /// Spectral recovery on three observables with no edges.
    Direct,
    /// Marginalize a sink out, recover, lift the sink back.
    Sink,
    /// Condition on a hub, recover per hub state, align and lift.
    Conditioning,
    /// Slice products across two conditioning observables.
    SliceProduct,
    /// Per-hub-state recovery glued over all hidden relabelings.
    StarEnumeration,
}

impl Procedure {
    pub fn as_str(&self) -> &'static str {
        match self {
            Procedure::Direct => "direct spectral recovery",
            Procedure::Sink => "sink reduction",
            Procedure::Conditioning => "hub conditioning",
            Procedure::SliceProduct => "slice products",
            Procedure::StarEnumeration => "star enumeration",
        }
    }
}

fn detect(member: &Model) -> Option<Procedure> {
    let n_obs = member.n_nodes() - 1;
    if n_obs == 3 && member.obs_edges().is_empty() {
        return Some(Procedure::Direct);
    }
    if n_obs == 4 {
        if require_shape_43b(member).is_ok() {
            return Some(Procedure::SliceProduct);
        }
        if !eligible_sinks(member).is_empty() {
            return Some(Procedure::Sink);
        }
        if let Ok(shape) = hub_shape(member, false) {
            return Some(if shape.free.is_empty() {
                Procedure::StarEnumeration
            } else {
                Procedure::Conditioning
            });
        }
    }
    None
}

fn run_procedure<S: Scalar>(
    proc: Procedure,
    member: &Model,
    obs: &DistTensor<S>,
    tols: &Tolerances,
) -> Result<RecoveryResult<S>> {
    match proc {
        Procedure::Direct => kruskal_recover(member, obs, tols),
        Procedure::Sink => recover_via_sink(member, obs, tols),
        Procedure::Conditioning => recover_via_conditioning(member, obs, tols),
        Procedure::SliceProduct => recover_43b(member, obs, tols),
        Procedure::StarEnumeration => fiber_43e(member, obs, tols),
    }
}

/// The dispatcher's full answer: which class member and procedure did the
/// work, and the recovered fiber on the requested structure.
#[derive(Debug, Clone)]
pub struct Identification<S> {
    /// The class member the procedure ran on (equal to the input model
    /// when no reversals were needed).
    pub via: Model,
    pub procedure: Procedure,
    pub result: RecoveryResult<S>,
}

/// Reconstruct every parameter vector mapping to `obs` under `model`.
///
/// On success the candidate list is the complete fiber: procedures that
/// return one representative per relabeling class are expanded by the
/// hidden-label orbit, and candidates recovered on an equivalent structure
/// are transferred back. [`Error::NoProcedure`] when no member of the
/// equivalence class fits any procedure — which is exactly the
/// generically-infinite catalog structures.
pub fn identify<S: Scalar>(
    model: &Model,
    obs: &DistTensor<S>,
    tols: &Tolerances,
) -> Result<Identification<S>> {
    model.validate()?;
    let members = markov_equivalence_class(model)?;
    for member in &members {
        let Some(proc) = detect(member) else {
            continue;
        };
        let inner = run_procedure(proc, member, obs, tols)?;
        let mut checks = inner.checks;
        let mut warnings = inner.warnings;
        // Float-mode candidates can lose digits in ill-conditioned
        // subproblems; polish each onto the fiber before expanding.
        let polished: Vec<_> = inner
            .candidates
            .iter()
            .map(|c| refine_candidate(c, obs))
            .collect();
        // Procedures other than the star enumeration return one point per
        // orbit; expand to the full fiber.
        let fiber: Vec<_> = match proc {
            Procedure::StarEnumeration => polished,
            _ => polished.iter().flat_map(label_swap_orbit).collect(),
        };
        let mut candidates = if member == model {
            fiber
        } else {
            warnings.push(format!(
                "recovered on the equivalent structure with edges {:?} and transferred back",
                member.obs_edges()
            ));
            let mut transferred = Vec::with_capacity(fiber.len());
            let mut worst: Option<String> = None;
            for cand in &fiber {
                let tr = transfer_parameters(cand, model, tols.positivity)?;
                if !tr.domain_ok {
                    worst = tr.witness.clone();
                    continue;
                }
                transferred.push(tr.params);
            }
            checks.push(Check::flag(
                "candidates transferred to the requested structure",
                worst.is_none(),
                worst,
            ));
            transferred
        };
        if S::mode() == Mode::Float {
            // Round-off through a near-singular forward map caps the
            // precision of every float candidate; report the worst cap so
            // ill-conditioned instances are flagged instead of looking
            // exact.
            let mut floor: f64 = 0.0;
            let mut measured = false;
            for cand in &candidates {
                let repro = observable_joint(cand).max_abs_diff(obs);
                if let Some(f) = accuracy_floor(&cand.to_float(), repro) {
                    floor = floor.max(f);
                    measured = true;
                }
            }
            if measured && floor > tols.conditioning {
                // The measured reproduction error is dominated by float
                // evaluation noise, which may be hiding attainable digits.
                // Re-polish against the exactly rationalized input and
                // re-measure before deciding to flag.
                let obs_float = DistTensor::new(
                    obs.axes().to_vec(),
                    obs.sizes().to_vec(),
                    obs.data().iter().map(Scalar::to_f64).collect(),
                );
                floor = 0.0;
                measured = false;
                let mut polished = Vec::with_capacity(candidates.len());
                for cand in &candidates {
                    let (tight, exact_repro) = exact_polish(&cand.to_float(), &obs_float);
                    if let Some(f) = accuracy_floor(&tight, exact_repro) {
                        floor = floor.max(f);
                        measured = true;
                    }
                    polished.push(ParameterSet::from_float(&tight));
                }
                candidates = polished;
            }
            if measured {
                checks.push(Check::leq(
                    "conditioning-limited parameter accuracy",
                    floor,
                    tols.conditioning,
                ));
            }
        }
        return Ok(Identification {
            via: member.clone(),
            procedure: proc,
            result: RecoveryResult {
                model: model.clone(),
                mode: inner.mode,
                candidates,
                checks,
                warnings,
            },
        });
    }
    Err(Error::NoProcedure(format!(
        "no recovery procedure applies to this structure or any Markov-equivalent one \
         (observable edges {:?})",
        model.obs_edges()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::catalog_model;
    use crate::dist::observable_joint;
    use crate::params::{sample_generic, ParameterSet};
    use num::BigRational;

    fn fiber_contains<S: Scalar>(fiber: &[ParameterSet<S>], truth: &ParameterSet<S>, tol: f64) -> bool {
        fiber.iter().any(|c| c.max_abs_diff(truth) <= tol)
    }

    #[test]
    fn two_to_one_structures_return_both_fiber_points() {
        let tols = Tolerances::default();
        for id in ["3-0", "4-0", "4-1", "4-2d"] {
            let model = catalog_model(id).unwrap();
            let truth: ParameterSet<BigRational> = sample_generic(&model, 21);
            let obs = observable_joint(&truth);
            let found = identify(&model, &obs, &tols).unwrap();
            assert_eq!(found.via, model, "{id} should be handled in place");
            assert_eq!(found.result.candidates.len(), 2, "{id}");
            assert!(fiber_contains(&found.result.candidates, &truth, 0.0), "{id}");
            for c in &found.result.candidates {
                assert_eq!(observable_joint(c), obs, "{id}");
            }
        }
    }

    #[test]
    fn chain_and_tail_structures_route_through_their_class() {
        let tols = Tolerances::default();
        for (id, expected) in [
            ("4-2b", Procedure::Conditioning),
            ("4-3a", Procedure::SliceProduct),
            ("4-3f", Procedure::StarEnumeration),
        ] {
            let model = catalog_model(id).unwrap();
            let truth: ParameterSet<BigRational> = sample_generic(&model, 33);
            let obs = observable_joint(&truth);
            let found = identify(&model, &obs, &tols).unwrap();
            assert_eq!(found.procedure, expected, "{id}");
            assert_ne!(found.via, model, "{id} needs a reversal first");
            assert!(
                found.result.warnings.iter().any(|w| w.contains("equivalent structure")),
                "{id}"
            );
            assert!(fiber_contains(&found.result.candidates, &truth, 0.0), "{id}");
            for c in &found.result.candidates {
                assert_eq!(c.model, model, "{id}: candidates live on the input structure");
                assert_eq!(observable_joint(c), obs, "{id}");
            }
        }
    }

    #[test]
    fn the_star_fiber_has_four_points() {
        let tols = Tolerances::default();
        for id in ["4-3e", "4-3f"] {
            let model = catalog_model(id).unwrap();
            let truth: ParameterSet<BigRational> = sample_generic(&model, 8);
            let obs = observable_joint(&truth);
            let found = identify(&model, &obs, &tols).unwrap();
            assert_eq!(found.result.candidates.len(), 4, "{id}");
            assert!(fiber_contains(&found.result.candidates, &truth, 0.0), "{id}");
        }
    }

    #[test]
    fn generically_infinite_structures_are_refused() {
        let tols = Tolerances::default();
        for id in ["2-0", "2-1", "3-1", "4-2a", "4-3c", "4-3d", "4-3g", "4-3h", "4-3i", "4-4"] {
            let model = catalog_model(id).unwrap();
            let truth: ParameterSet<BigRational> = sample_generic(&model, 2);
            let obs = observable_joint(&truth);
            assert!(
                matches!(identify(&model, &obs, &tols), Err(Error::NoProcedure(_))),
                "{id} must be refused"
            );
        }
    }

    #[test]
    fn float_mode_identification_is_accurate() {
        let tols = Tolerances::default();
        for id in ["4-2b", "4-2c", "4-3b"] {
            let model = catalog_model(id).unwrap();
            let truth: ParameterSet<f64> = sample_generic(&model, 55);
            let obs = observable_joint(&truth);
            let found = identify(&model, &obs, &tols).unwrap();
            assert_eq!(found.result.candidates.len(), 2, "{id}");
            assert!(fiber_contains(&found.result.candidates, &truth, 1e-9), "{id}");
        }
    }
}
