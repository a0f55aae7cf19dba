//! Parameter identifiability for small discrete Bayesian networks with one
//! hidden variable.
//!
//! The library works with DAG models whose node `0` is hidden and parental
//! to every observable node. It can evaluate the map from parameters to the
//! observable joint distribution, reconstruct the set of parameter vectors
//! compatible with a given observable joint (the fiber) for the models in
//! its catalog where that set is finite, transfer parameters across
//! Markov-equivalent structures, classify structures as generically
//! k-to-one, and report interventional quantities together with their
//! genuine ambiguity.
//!
//! Arithmetic is generic over [`scalar::Scalar`] with two modes: exact
//! rationals ([`num::BigRational`]) and `f64`. Exact mode refuses steps that
//! would leave the rationals (irrational eigenvalues, say) instead of
//! silently approximating.

pub mod catalog;
pub mod causal;
pub mod demo;
pub mod dist;
pub mod error;
pub mod fiber;
pub mod identify;
pub mod linalg;
pub mod markov;
pub mod model;
pub mod params;
pub mod recovery;
pub mod reductions;
pub mod scalar;

pub use catalog::{catalog_id_of, catalog_model, CatalogEntry, KClaim, CATALOG};
pub use causal::{causal_effect, effect_ambiguity, CandidateEffect, EffectReport};
pub use dist::{joint_distribution, observable_joint, parameters_from_joint, DistTensor, TensorDoc};
pub use error::{Error, Result};
pub use fiber::{
    canonicalize, classify_generic_k, distinct_canonical, label_swap_orbit, multistart_fiber_search,
    observable_jacobian_rank, ClassificationReport,
};
pub use identify::{identify, Identification, Procedure};
pub use linalg::Matrix;
pub use markov::{
    covered_edges, d_separated, markov_equivalence_class, reverse_covered_edge, reversal_path,
    same_markov_class, transfer_parameters, transfer_with_relabeling, TransferResult,
};
pub use model::{Model, ModelDoc, NodeId};
pub use params::{sample_generic, Cpt, ParameterSet, ParamsDoc};
pub use recovery::{
    kruskal_preconditions, kruskal_recover, kruskal_row_rank, odds_ratio_condition,
    odds_ratio_products, recover_43b, Check, RecoveryResult, Tolerances,
};
pub use reductions::{fiber_43e, recover_via_conditioning, recover_via_sink};
pub use scalar::{Mode, Scalar};
