//! End-to-end tests of the command-line surface: exit codes, both output
//! formats, and the simulate → identify pipeline.

use std::io::Write as _;
use std::process::{Command, Output, Stdio};

use anyhow::{bail, Context, Result};
use num::BigRational;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_latentid"))
}

fn run(args: &[&str]) -> Result<Output> {
    bin().args(args).output().context("spawning latentid")
}

fn run_ok(args: &[&str]) -> Result<String> {
    let out = run(args)?;
    if !out.status.success() {
        bail!(
            "latentid {:?} failed: {}",
            args,
            String::from_utf8_lossy(&out.stderr)
        );
    }
    Ok(String::from_utf8(out.stdout)?)
}

fn run_json(args: &[&str]) -> Result<serde_json::Value> {
    let mut full = vec!["--format", "json"];
    full.extend_from_slice(args);
    Ok(serde_json::from_str(&run_ok(&full)?)?)
}

fn exit_code(args: &[&str]) -> Result<i32> {
    Ok(run(args)?.status.code().context("signal exit")?)
}

/// The worked-example observable, written to a temp file as a tensor
/// document.
fn demo_tensor_file() -> Result<tempfile::NamedTempFile> {
    let obs = latentid::demo::demo_observable::<BigRational>();
    let mut file = tempfile::NamedTempFile::new()?;
    serde_json::to_writer(&mut file, &obs.to_doc())?;
    file.flush()?;
    Ok(file)
}

#[test]
fn dim_prints_parameter_dimension() -> Result<()> {
    assert_eq!(run_ok(&["dim", "4-2c"])?.trim(), "13");
    assert_eq!(run_ok(&["dim", "3-0"])?.trim(), "7");
    assert_eq!(run_ok(&["dim", "4-3e"])?.trim(), "15");
    Ok(())
}

#[test]
fn unknown_model_is_a_usage_error() -> Result<()> {
    assert_eq!(exit_code(&["dim", "9-9z"])?, 1);
    Ok(())
}

#[test]
fn bad_tolerance_override_is_a_usage_error() -> Result<()> {
    assert_eq!(exit_code(&["dim", "4-0", "--tol", "nonsense=1"])?, 1);
    assert_eq!(exit_code(&["dim", "4-0", "--tol", "cluster"])?, 1);
    Ok(())
}

#[test]
fn simulate_is_deterministic_with_default_seed() -> Result<()> {
    let a = run_ok(&["simulate", "4-1", "--format", "json"])?;
    let b = run_ok(&["simulate", "4-1", "--seed", "0", "--format", "json"])?;
    assert_eq!(a, b);
    Ok(())
}

#[test]
fn identify_demo_reports_full_fiber() -> Result<()> {
    let tensor = demo_tensor_file()?;
    let path = tensor.path().to_str().unwrap();
    let out = run_json(&["identify", "4-3e", path])?;
    assert_eq!(out["procedure"], "star enumeration");
    assert_eq!(out["candidates"].as_array().unwrap().len(), 4);
    for check in out["checks"].as_array().unwrap() {
        assert_eq!(check["passed"], true, "failed check: {check}");
    }
    Ok(())
}

#[test]
fn fiber_demo_has_two_canonical_classes() -> Result<()> {
    let tensor = demo_tensor_file()?;
    let path = tensor.path().to_str().unwrap();
    let out = run_json(&["fiber", "4-3e", path])?;
    assert_eq!(out["candidates"], 4);
    assert_eq!(out["classes"].as_array().unwrap().len(), 2);
    Ok(())
}

#[test]
fn causal_demo_contrasts_disagree_in_sign() -> Result<()> {
    let tensor = demo_tensor_file()?;
    let path = tensor.path().to_str().unwrap();
    let out = run_json(&["causal", "4-3e", path, "--from", "1", "--to", "2"])?;
    assert_eq!(out["signs_agree"], false);
    let rendered = out.to_string();
    assert!(rendered.contains("-7/50"), "missing -7/50: {rendered}");
    assert!(rendered.contains("3/50"), "missing 3/50: {rendered}");

    // The text format must carry the same numbers.
    let text = run_ok(&["causal", "4-3e", path, "--from", "1", "--to", "2"])?;
    assert!(text.contains("-7/50") && text.contains("3/50"));
    assert!(text.contains("signs agree: false"));
    Ok(())
}

/// simulate | identify round-trips: the drawn parameters reappear among
/// the candidates, exactly, in rational mode.
#[test]
fn simulate_identify_roundtrip_rational() -> Result<()> {
    let sim = run_json(&["simulate", "4-1", "--seed", "11"])?;
    let mut child = bin()
        .args(["identify", "4-1", "-", "--format", "json"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()?;
    child
        .stdin
        .take()
        .unwrap()
        .write_all(sim.to_string().as_bytes())?;
    let out = child.wait_with_output()?;
    assert!(out.status.success());
    let found: serde_json::Value = serde_json::from_slice(&out.stdout)?;
    let candidates = found["candidates"].as_array().unwrap();
    assert_eq!(candidates.len(), 2);
    assert!(
        candidates.iter().any(|c| c["cpts"] == sim["parameters"]["cpts"]),
        "drawn parameters missing from the fiber"
    );
    Ok(())
}

#[test]
fn float_mode_identify_from_stdin() -> Result<()> {
    let sim = run_ok(&["simulate", "4-0", "--seed", "5", "--mode", "float", "--format", "json"])?;
    let mut child = bin()
        .args(["identify", "4-0", "-", "--mode", "float", "--format", "json"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()?;
    child.stdin.take().unwrap().write_all(sim.as_bytes())?;
    let out = child.wait_with_output()?;
    assert!(out.status.success());
    let found: serde_json::Value = serde_json::from_slice(&out.stdout)?;
    assert_eq!(found["candidates"].as_array().unwrap().len(), 2);
    Ok(())
}

/// A distribution outside the procedure's domain (here: uniform, so every
/// slice is singular) exits with the precondition code, not a panic.
#[test]
fn degenerate_input_exits_two() -> Result<()> {
    let mut file = tempfile::NamedTempFile::new()?;
    let doc = serde_json::json!({
        "mode": "rational",
        "axes": [1, 2, 3, 4],
        "state_sizes": {"1": 2, "2": 2, "3": 2, "4": 2},
        "values": vec!["1/16"; 16],
    });
    serde_json::to_writer(&mut file, &doc)?;
    file.flush()?;
    let path = file.path().to_str().unwrap();
    assert_eq!(exit_code(&["identify", "4-0", path])?, 2);
    Ok(())
}

#[test]
fn malformed_tensor_is_a_usage_error() -> Result<()> {
    let mut file = tempfile::NamedTempFile::new()?;
    file.write_all(b"{\"values\": 3}")?;
    file.flush()?;
    let path = file.path().to_str().unwrap();
    assert_eq!(exit_code(&["identify", "4-0", path])?, 1);
    Ok(())
}

#[test]
fn equiv_reports_class_and_transfers() -> Result<()> {
    let out = run_json(&["equiv", "4-3a", "4-3b"])?;
    assert_eq!(out["equivalent"], true);
    assert_eq!(out["class_size"], 4);

    let out = run_json(&["equiv", "4-0", "4-1"])?;
    assert_eq!(out["equivalent"], false);

    // Transfer across the covered-edge reversal, then check the carried
    // parameters live on the target structure.
    let sim = run_ok(&["simulate", "4-3a", "--seed", "3", "--format", "json"])?;
    let mut file = tempfile::NamedTempFile::new()?;
    file.write_all(sim.as_bytes())?;
    file.flush()?;
    let path = file.path().to_str().unwrap();
    let out = run_json(&["equiv", "4-3a", "4-3b", "--transfer", path])?;
    assert_eq!(
        out["transferred"]["model"]["edges"],
        serde_json::json!([[0, 1], [0, 2], [0, 3], [0, 4], [1, 2], [1, 3], [3, 4]])
    );
    Ok(())
}

#[test]
fn equiv_transfer_rejects_params_for_wrong_model() -> Result<()> {
    let sim = run_ok(&["simulate", "4-0", "--seed", "3", "--format", "json"])?;
    let mut file = tempfile::NamedTempFile::new()?;
    file.write_all(sim.as_bytes())?;
    file.flush()?;
    let path = file.path().to_str().unwrap();
    assert_eq!(exit_code(&["equiv", "4-3a", "4-3b", "--transfer", path])?, 1);
    Ok(())
}

#[test]
fn catalog_lists_every_model() -> Result<()> {
    let out = run_json(&["catalog"])?;
    let rows = out["catalog"].as_array().unwrap();
    assert_eq!(rows.len(), 20);
    let text = run_ok(&["catalog"])?;
    for row in rows {
        let id = row["model"].as_str().unwrap();
        assert!(text.contains(id), "text table is missing {id}");
    }
    Ok(())
}

#[test]
fn oracle_requires_float_mode() -> Result<()> {
    let tensor = demo_tensor_file()?;
    let path = tensor.path().to_str().unwrap();
    assert_eq!(exit_code(&["oracle", "4-3e", path])?, 1);
    Ok(())
}

#[test]
fn oracle_finds_both_classes_of_the_demo_fiber() -> Result<()> {
    let tensor = demo_tensor_file()?;
    let path = tensor.path().to_str().unwrap();
    let out = run_json(&[
        "oracle", "4-3e", path, "--mode", "float", "--starts", "120",
    ])?;
    assert_eq!(out["classes"].as_array().unwrap().len(), 2);
    Ok(())
}

#[test]
fn model_files_load_like_catalog_ids() -> Result<()> {
    let mut file = tempfile::NamedTempFile::new()?;
    let doc = serde_json::json!({
        "state_sizes": {"0": 2, "1": 2, "2": 2, "3": 2, "4": 2},
        "edges": [[0, 1], [0, 2], [0, 3], [0, 4], [1, 2], [1, 3], [1, 4]],
    });
    serde_json::to_writer(&mut file, &doc)?;
    file.flush()?;
    let path = file.path().to_str().unwrap();
    assert_eq!(run_ok(&["dim", path])?.trim(), "15");
    Ok(())
}
