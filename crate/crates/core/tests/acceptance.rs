//! End-to-end acceptance sweep.
//!
//! Each test here pins one externally stated guarantee of the library —
//! exact reference values, fiber sizes, classification thresholds,
//! transfer invariants, oracle concordance — and prints a single PASS or
//! FAIL line (visible with `--nocapture`) in addition to the usual assert.

use std::time::Instant;

use latentid::demo::{demo_effects, demo_model, demo_observable, demo_params_one, demo_params_two};
use latentid::{
    canonicalize, causal_effect, classify_generic_k, catalog_model, distinct_canonical,
    effect_ambiguity, identify, label_swap_orbit, multistart_fiber_search, observable_joint,
    sample_generic, transfer_with_relabeling, DistTensor, ParameterSet, Tolerances,
};
use num::BigRational;

fn verdict(n: usize, name: &str, ok: bool, detail: &str) -> bool {
    let flag = if ok { "PASS" } else { "FAIL" };
    println!("criterion {n} ({name}): {flag} — {detail}");
    ok
}

fn r(num: i64, den: i64) -> BigRational {
    BigRational::new(num.into(), den.into())
}

/// Criterion 1: in rational mode both reference parameterizations map to
/// the published 16-cell demo distribution, cell for cell with zero
/// tolerance, in under a second.
#[test]
fn criterion_1_exact_demo_distribution() {
    let clock = Instant::now();
    // The published sequence lists the cells with axes ordered
    // (x3, x4, x1, x2), most significant first.
    let published: [(i64, i64); 16] = [
        (116, 625),
        (34, 625),
        (27, 500),
        (39, 1250),
        (32, 625),
        (13, 625),
        (63, 2500),
        (17, 1250),
        (128, 625),
        (52, 625),
        (171, 2500),
        (24, 625),
        (44, 625),
        (31, 625),
        (81, 2500),
        (21, 1250),
    ];
    let expected = demo_observable::<BigRational>();
    let mut ok = true;
    for params in [demo_params_one::<BigRational>(), demo_params_two()] {
        let got = observable_joint(&params);
        ok &= got == expected;
        // Cross-check against the published order: cell (x1,x2,x3,x4) of
        // the computed tensor sits at index x3*8 + x4*4 + x1*2 + x2 of the
        // published list.
        for (j, cell) in got.data().iter().enumerate() {
            let (x1, x2, x3, x4) = (j >> 3 & 1, j >> 2 & 1, j >> 1 & 1, j & 1);
            let i = x3 * 8 + x4 * 4 + x1 * 2 + x2;
            let (num, den) = published[i];
            ok &= *cell == r(num, den);
        }
    }
    let elapsed = clock.elapsed();
    ok &= elapsed.as_secs_f64() < 1.0;
    assert!(verdict(
        1,
        "exact demo distribution",
        ok,
        &format!("two parameterizations, 16 exact cells each, {:.3}s", elapsed.as_secs_f64()),
    ));
}

/// Criterion 2: the interventional contrasts of the two reference
/// parameterizations are exactly -7/50 and 3/50, so their signs disagree.
#[test]
fn criterion_2_opposite_sign_contrasts() {
    let one = demo_params_one::<BigRational>();
    let two = demo_params_two::<BigRational>();
    let frozen = demo_effects::<BigRational>();
    let mut ok = true;
    for (params, (do_hi, do_lo, contrast)) in [&one, &two].into_iter().zip(&frozen) {
        let m = causal_effect(params, 1, 2).unwrap();
        ok &= *m.at(1, 1) == *do_hi && *m.at(0, 1) == *do_lo;
        ok &= m.at(1, 1).clone() - m.at(0, 1).clone() == *contrast;
    }
    ok &= frozen[0].2 == r(-7, 50) && frozen[1].2 == r(3, 50);
    let report = effect_ambiguity(&[one, two], 1, 2, 0.0).unwrap();
    ok &= !report.signs_agree;
    assert!(verdict(
        2,
        "opposite-sign contrasts",
        ok,
        "contrasts -7/50 and 3/50 exact, signs_agree = false",
    ));
}

/// Criterion 3: identifying the demo distribution on the star structure
/// returns a fiber of exactly four points, exactly two after
/// canonicalization, and those two are the reference parameterizations.
#[test]
fn criterion_3_demo_fiber() {
    let model = demo_model();
    let obs = demo_observable::<BigRational>();
    let tols = Tolerances::default();
    let found = identify(&model, &obs, &tols).unwrap();
    let mut ok = found.result.candidates.len() == 4;
    let classes = distinct_canonical(&found.result.candidates, 0.0);
    ok &= classes.len() == 2;
    ok &= classes.len() == 2
        && classes[0] == demo_params_two::<BigRational>()
        && classes[1] == demo_params_one::<BigRational>();
    assert!(verdict(
        3,
        "demo fiber",
        ok,
        &format!(
            "{} candidates, {} after canonicalization, both reference points matched exactly",
            found.result.candidates.len(),
            classes.len()
        ),
    ));
}

/// Criterion 4: for every generically two-to-one structure, seeded draws
/// round-trip through identification — exactly two candidates, one equal
/// to the truth within 1e-9 — at a 99% success rate, with any failure
/// flagged by the procedure's own checks, in under a minute total.
#[test]
fn criterion_4_two_to_one_round_trips() {
    let clock = Instant::now();
    let tols = Tolerances::default();
    let ids = ["3-0", "4-0", "4-1", "4-2b", "4-2c", "4-2d", "4-3a", "4-3b"];
    let mut ok = true;
    let mut detail = String::new();
    for id in ids {
        let model = catalog_model(id).unwrap();
        let mut successes = 0;
        let mut flagged = 0;
        let mut silent = 0;
        for seed in 0..100u64 {
            let truth: ParameterSet<f64> = sample_generic(&model, seed);
            let obs = observable_joint(&truth);
            match identify(&model, &obs, &tols) {
                Ok(found) => {
                    let good = found.result.candidates.len() == 2
                        && found
                            .result
                            .candidates
                            .iter()
                            .any(|c| c.max_abs_diff(&truth) <= 1e-9);
                    if good {
                        successes += 1;
                    } else if found.result.all_checks_passed() {
                        silent += 1;
                    } else {
                        flagged += 1;
                    }
                }
                Err(e) if e.is_precondition_failure() => flagged += 1,
                Err(e) => panic!("{id}: unexpected error {e}"),
            }
        }
        let model_ok = successes >= 99 && silent == 0;
        ok &= model_ok;
        detail.push_str(&format!("{id}:{successes}/100 "));
        if flagged > 0 {
            detail.push_str(&format!("({flagged} flagged) "));
        }
        assert_eq!(silent, 0, "{id}: {silent} silently wrong results");
    }
    let elapsed = clock.elapsed().as_secs_f64();
    ok &= elapsed < 60.0;
    detail.push_str(&format!("in {elapsed:.1}s"));
    assert!(verdict(4, "two-to-one round trips", ok, &detail));
}

/// Criterion 5: the star structures are four-to-one — every seeded draw
/// yields exactly four pairwise-distinct candidates forming two
/// canonicalization classes, all reproducing the input within 1e-9.
#[test]
fn criterion_5_four_to_one_round_trips() {
    let tols = Tolerances::default();
    let mut ok = true;
    let mut detail = String::new();
    for id in ["4-3e", "4-3f"] {
        let model = catalog_model(id).unwrap();
        let mut successes = 0;
        for seed in 0..100u64 {
            let truth: ParameterSet<f64> = sample_generic(&model, seed);
            let obs = observable_joint(&truth);
            let found = identify(&model, &obs, &tols).unwrap();
            let cands = &found.result.candidates;
            let mut good = cands.len() == 4;
            for i in 0..cands.len() {
                for j in i + 1..cands.len() {
                    good &= cands[i].max_abs_diff(&cands[j]) > 0.0;
                }
            }
            good &= distinct_canonical(cands, tols.cluster).len() == 2;
            good &= cands.iter().all(|c| {
                observable_joint(c)
                    .data()
                    .iter()
                    .zip(obs.data())
                    .all(|(a, b)| (a - b).abs() <= 1e-9)
            });
            if good {
                successes += 1;
            }
        }
        ok &= successes == 100;
        detail.push_str(&format!("{id}:{successes}/100 "));
    }
    assert!(verdict(5, "four-to-one round trips", ok, detail.trim()));
}

/// Criterion 6: every generically infinite four-observable structure shows
/// a Jacobian rank deficit at 18 of 20 generic seeds or more, and the
/// two-disjoint-edges structure has rank exactly 11 at every seed.
#[test]
fn criterion_6_infinite_classification() {
    let tols = Tolerances::default();
    let mut ok = true;
    let mut detail = String::new();
    for id in ["4-2a", "4-3c", "4-3d", "4-3g", "4-3h", "4-3i"] {
        let model = catalog_model(id).unwrap();
        let report = classify_generic_k(&model, 20, &tols).unwrap();
        let mut model_ok = report.seeds == 20 && report.deficient_seeds >= 18 && report.infinite;
        if id == "4-2a" {
            model_ok &= report.ranks.iter().all(|&r| r == 11);
        }
        ok &= model_ok;
        detail.push_str(&format!("{id}:{}/{} deficient ", report.deficient_seeds, report.seeds));
    }
    assert!(verdict(6, "infinite classification", ok, detail.trim()));
}

/// Criterion 7: `parameter_dimension` reproduces the catalog's dimension
/// for every entry exactly.
#[test]
fn criterion_7_parameter_dimensions() {
    let expected = [
        ("2-0", 5),
        ("2-1", 7),
        ("3-0", 7),
        ("3-1", 9),
        ("4-0", 9),
        ("4-1", 11),
        ("4-2a", 13),
        ("4-2b", 13),
        ("4-2c", 13),
        ("4-2d", 15),
        ("4-3a", 15),
        ("4-3b", 15),
        ("4-3c", 17),
        ("4-3d", 17),
        ("4-3e", 15),
        ("4-3f", 15),
        ("4-3g", 17),
        ("4-3h", 23),
        ("4-3i", 17),
        ("4-4", 19),
    ];
    let mut ok = true;
    for (id, dim) in expected {
        ok &= catalog_model(id).unwrap().parameter_dimension() == dim;
    }
    assert!(verdict(
        7,
        "parameter dimensions",
        ok,
        "all 20 catalog dimensions exact",
    ));
}

/// Criterion 8: parameter transfer across equivalent structures preserves
/// the observable joint (exactly in rational mode, within 1e-12 in float
/// mode) and is undone exactly by the reverse transfer, including the
/// chain/fork pair that needs a documented observable relabeling.
#[test]
fn criterion_8_transfer_invariants() {
    let tols = Tolerances::default();
    let pairs = [("4-3a", "4-3b"), ("4-3e", "4-3f"), ("4-2b", "4-2c")];
    let mut ok = true;
    let mut detail = String::new();
    for (a, b) in pairs {
        let source = catalog_model(a).unwrap();
        let target = catalog_model(b).unwrap();
        let mut pair_ok = true;
        for seed in 0..100u64 {
            // Rational mode: exact preservation and exact round trip.
            let params: ParameterSet<BigRational> = sample_generic(&source, seed);
            let fwd = transfer_with_relabeling(&params, &target, tols.positivity).unwrap();
            pair_ok &= fwd.domain_ok;
            let expected = match &fwd.relabeling {
                Some(perm) => observable_joint(&params).relabel_axes(perm),
                None => observable_joint(&params),
            };
            pair_ok &= observable_joint(&fwd.params) == expected;
            let back = transfer_with_relabeling(&fwd.params, &source, tols.positivity).unwrap();
            pair_ok &= back.domain_ok && back.params == params;
            if a == "4-2b" {
                pair_ok &= fwd.relabeling == Some(vec![0, 2, 1, 3, 4]);
            }

            // Float mode: preservation within 1e-12.
            let params: ParameterSet<f64> = sample_generic(&source, seed);
            let fwd = transfer_with_relabeling(&params, &target, tols.positivity).unwrap();
            pair_ok &= fwd.domain_ok;
            let expected = match &fwd.relabeling {
                Some(perm) => observable_joint(&params).relabel_axes(perm),
                None => observable_joint(&params),
            };
            let drift = observable_joint(&fwd.params)
                .data()
                .iter()
                .zip(expected.data())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f64, f64::max);
            pair_ok &= drift <= 1e-12;
            let back = transfer_with_relabeling(&fwd.params, &source, tols.positivity).unwrap();
            pair_ok &= back.domain_ok && back.params.max_abs_diff(&params) <= 1e-12;
        }
        ok &= pair_ok;
        detail.push_str(&format!(
            "{a}<->{b}:{} ",
            if pair_ok { "exact" } else { "FAILED" }
        ));
    }
    assert!(verdict(8, "transfer invariants", ok, detail.trim()));
}

/// Criterion 9: the multistart oracle, knowing nothing of the algebraic
/// procedures, finds the same number of canonicalization classes as
/// identification does — one for the two-to-one structures, two for the
/// star — on ten seeded instances per structure, in under ten minutes.
#[test]
fn criterion_9_oracle_concordance() {
    let clock = Instant::now();
    let tols = Tolerances::default();
    let cases: [(&str, usize); 9] = [
        ("3-0", 1),
        ("4-0", 1),
        ("4-1", 1),
        ("4-2b", 1),
        ("4-2c", 1),
        ("4-2d", 1),
        ("4-3a", 1),
        ("4-3b", 1),
        ("4-3e", 2),
    ];
    let mut ok = true;
    let mut detail = String::new();
    for (id, expected_classes) in cases {
        let model = catalog_model(id).unwrap();
        let mut agreeing = 0;
        for i in 0..10u64 {
            let truth: ParameterSet<f64> = sample_generic(&model, 3000 + i);
            let obs: DistTensor<f64> = observable_joint(&truth);
            let found = identify(&model, &obs, &tols).unwrap();
            let algebraic = distinct_canonical(&found.result.candidates, tols.cluster).len();
            let clusters = multistart_fiber_search(&model, &obs, 500, 42 + i, &tols).unwrap();
            if clusters.len() == algebraic && algebraic == expected_classes {
                agreeing += 1;
            }
        }
        ok &= agreeing == 10;
        detail.push_str(&format!("{id}:{agreeing}/10 "));
    }
    let elapsed = clock.elapsed().as_secs_f64();
    ok &= elapsed < 600.0;
    detail.push_str(&format!("in {elapsed:.0}s"));
    assert!(verdict(9, "oracle concordance", ok, &detail));
}

/// The label-swap orbit is the only source of fiber multiplicity for the
/// two-to-one structures: both identified candidates lie in one orbit.
#[test]
fn two_to_one_fibers_are_single_orbits() {
    let tols = Tolerances::default();
    let model = catalog_model("4-2d").unwrap();
    let truth: ParameterSet<BigRational> = sample_generic(&model, 77);
    let obs = observable_joint(&truth);
    let found = identify(&model, &obs, &tols).unwrap();
    let orbit = label_swap_orbit(&found.result.candidates[0]);
    for cand in &found.result.candidates {
        assert!(orbit.iter().any(|p| p == cand));
    }
    assert_eq!(canonicalize(&found.result.candidates[0]), canonicalize(&found.result.candidates[1]));
}
