//! A worked example: two parameter sets for the star model `4-3e` with
//! exactly the same observable distribution.
//!
//! The pair lies in different label-swap orbits, so the observable joint
//! genuinely cannot tell them apart — and their interventional predictions
//! disagree in sign. The constants here are exact rationals and double as
//! fixtures for the recovery, fiber, and causal-effect tests.

use crate::catalog::catalog_model;
use crate::dist::DistTensor;
use crate::linalg::Matrix;
use crate::model::Model;
use crate::params::{Cpt, ParameterSet};
use crate::scalar::Scalar;

fn r<S: Scalar>(n: i64, d: i64) -> S {
    S::from_ratio(n, d)
}

fn cpt<S: Scalar>(parents: Vec<usize>, parent_sizes: Vec<usize>, rows: &[&[(i64, i64)]]) -> Cpt<S> {
    let nrows = rows.len();
    let ncols = rows[0].len();
    let mut data = Vec::with_capacity(nrows * ncols);
    for row in rows {
        for &(n, d) in *row {
            data.push(r::<S>(n, d));
        }
    }
    Cpt {
        parents,
        parent_sizes,
        table: Matrix::new(nrows, ncols, data),
    }
}

/// The model both demo parameter sets live on: observable 1 is a parent of
/// observables 2, 3, and 4, and the hidden node is parental to everything.
pub fn demo_model() -> Model {
    catalog_model("4-3e").expect("4-3e is in the catalog")
}

/// First parameter set of the pair.
pub fn demo_params_one<S: Scalar>() -> ParameterSet<S> {
    let model = demo_model();
    let cpts = vec![
        cpt(vec![], vec![], &[&[(2, 5), (3, 5)]]),
        cpt(vec![0], vec![2], &[&[(2, 5), (3, 5)], &[(14, 15), (1, 15)]]),
        cpt(
            vec![0, 1],
            vec![2, 2],
            &[
                &[(2, 5), (3, 5)],
                &[(3, 5), (2, 5)],
                &[(4, 5), (1, 5)],
                &[(9, 10), (1, 10)],
            ],
        ),
        cpt(
            vec![0, 1],
            vec![2, 2],
            &[
                &[(1, 5), (4, 5)],
                &[(9, 20), (11, 20)],
                &[(1, 2), (1, 2)],
                &[(2, 5), (3, 5)],
            ],
        ),
        cpt(
            vec![0, 1],
            vec![2, 2],
            &[
                &[(1, 2), (1, 2)],
                &[(7, 10), (3, 10)],
                &[(4, 5), (1, 5)],
                &[(3, 5), (2, 5)],
            ],
        ),
    ];
    ParameterSet::new(model, cpts)
}

/// Second parameter set: same observable joint, different orbit.
pub fn demo_params_two<S: Scalar>() -> ParameterSet<S> {
    let model = demo_model();
    let cpts = vec![
        cpt(vec![], vec![], &[&[(1, 5), (4, 5)]]),
        cpt(vec![0], vec![2], &[&[(4, 5), (1, 5)], &[(7, 10), (3, 10)]]),
        cpt(
            vec![0, 1],
            vec![2, 2],
            &[
                &[(2, 5), (3, 5)],
                &[(9, 10), (1, 10)],
                &[(4, 5), (1, 5)],
                &[(3, 5), (2, 5)],
            ],
        ),
        cpt(
            vec![0, 1],
            vec![2, 2],
            &[
                &[(1, 5), (4, 5)],
                &[(2, 5), (3, 5)],
                &[(1, 2), (1, 2)],
                &[(9, 20), (11, 20)],
            ],
        ),
        cpt(
            vec![0, 1],
            vec![2, 2],
            &[
                &[(1, 2), (1, 2)],
                &[(3, 5), (2, 5)],
                &[(4, 5), (1, 5)],
                &[(7, 10), (3, 10)],
            ],
        ),
    ];
    ParameterSet::new(model, cpts)
}

/// The shared observable joint over axes (1, 2, 3, 4), exact.
pub fn demo_observable<S: Scalar>() -> DistTensor<S> {
    // Indexed (x1, x2, x3, x4), x1 most significant.
    let cells: [(i64, i64); 16] = [
        (116, 625),
        (32, 625),
        (128, 625),
        (44, 625),
        (34, 625),
        (13, 625),
        (52, 625),
        (31, 625),
        (27, 500),
        (63, 2500),
        (171, 2500),
        (81, 2500),
        (39, 1250),
        (17, 1250),
        (24, 625),
        (21, 1250),
    ];
    DistTensor::new(
        vec![1, 2, 3, 4],
        vec![2, 2, 2, 2],
        cells.iter().map(|&(n, d)| r::<S>(n, d)).collect(),
    )
}

/// Interventional summaries of the demo pair for the effect of node 1 on
/// node 2: `(P(X2=2 | do(X1=2)), P(X2=2 | do(X1=1)), contrast)` per set.
/// The contrasts have opposite signs.
pub fn demo_effects<S: Scalar>() -> [(S, S, S); 2] {
    [
        (r(11, 50), r(9, 25), r(-7, 50)),
        (r(17, 50), r(7, 25), r(3, 50)),
    ]
}
