//! Argument surface and command dispatch.
//!
//! Every command reads models either from the built-in catalog (by id,
//! e.g. `4-3e`) or from a model JSON file, and tensors/parameters from
//! JSON files (`-` for stdin). Arithmetic mode and output format are
//! global flags so pipelines like `simulate | identify` stay symmetric:
//! whatever one command emits, the next can ingest in either mode.

use std::io::{Read, Write};

use clap::{Parser, Subcommand, ValueEnum};
use num::BigRational;
use serde_json::json;

use latentid::scalar::scalar_to_json;
use latentid::{
    catalog_id_of, catalog_model, classify_generic_k, distinct_canonical, effect_ambiguity,
    identify, markov_equivalence_class, multistart_fiber_search, same_markov_class,
    sample_generic, transfer_with_relabeling, Check, DistTensor, Error, Mode, Model, NodeId,
    ParameterSet, ParamsDoc, Result, Scalar, TensorDoc, Tolerances, CATALOG,
};

#[derive(Parser)]
#[command(
    name = "latentid",
    version,
    about = "Parameter identifiability of discrete Bayesian networks with one hidden variable"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Arithmetic mode: exact rationals or f64.
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Rational)]
    pub mode: ModeArg,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,

    /// Tolerance override, NAME=VALUE (repeatable); names match the
    /// tolerance struct fields, e.g. `--tol reproduction=1e-6`.
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    pub tol: Vec<String>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Print the parameter dimension of a model.
    Dim { model: String },
    /// Draw generic parameters for a model and print them together with
    /// their observable joint.
    Simulate {
        model: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Reconstruct every parameter vector compatible with an observable
    /// joint.
    Identify { model: String, tensor: String },
    /// Identify, then report the fiber's orbit structure: candidates and
    /// canonical (relabeling-class) representatives.
    Fiber { model: String, tensor: String },
    /// Decide Markov equivalence of two structures; optionally carry a
    /// parameter file from the first to the second.
    Equiv {
        model_a: String,
        model_b: String,
        /// Parameter JSON to transfer onto the second model.
        #[arg(long)]
        transfer: Option<String>,
    },
    /// Interventional effect of one observable on another, evaluated on
    /// every fiber representative, with a sign-ambiguity verdict.
    Causal {
        model: String,
        tensor: String,
        #[arg(long)]
        from: NodeId,
        #[arg(long)]
        to: NodeId,
    },
    /// Print the model catalog; with --seeds, also classify each entry
    /// numerically at that many generic draws.
    Catalog {
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Multistart least-squares fiber search: the procedure-free
    /// cross-check (float mode only).
    Oracle {
        model: String,
        tensor: String,
        #[arg(long, default_value_t = 500)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Rational,
    Float,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Json,
}

pub fn run(cli: Cli) -> Result<()> {
    let tols = parse_tols(&cli.tol)?;
    match cli.mode {
        ModeArg::Rational => dispatch::<BigRational>(cli, tols),
        ModeArg::Float => dispatch::<f64>(cli, tols),
    }
}

fn dispatch<S: Scalar>(cli: Cli, tols: Tolerances) -> Result<()> {
    let format = cli.format;
    match cli.command {
        Command::Dim { model } => {
            let model = load_model(&model)?;
            let dim = model.parameter_dimension();
            emit(
                format,
                json!({ "model": model_label(&model), "dim": dim }),
                format!("{dim}\n"),
            )
        }
        Command::Simulate { model, seed } => {
            let model = load_model(&model)?;
            let params: ParameterSet<S> = sample_generic(&model, seed);
            let obs = latentid::observable_joint(&params);
            let mut text = format!("model: {}\nseed: {seed}\n", model_label(&model));
            text.push_str(&params_text(&params, "parameters"));
            text.push_str(&tensor_text(&obs));
            emit(
                format,
                json!({
                    "model": model_label(&model),
                    "seed": seed,
                    "parameters": params.to_doc(),
                    "observable": obs.to_doc(),
                }),
                text,
            )
        }
        Command::Identify { model, tensor } => {
            let model = load_model(&model)?;
            let obs: DistTensor<S> = load_tensor(&tensor)?;
            let found = identify(&model, &obs, &tols)?;
            let mut text = format!(
                "procedure: {}\nvia: {}\ncandidates: {}\n",
                found.procedure.as_str(),
                model_label(&found.via),
                found.result.candidates.len()
            );
            for (i, c) in found.result.candidates.iter().enumerate() {
                text.push_str(&params_text(c, &format!("candidate {}", i + 1)));
            }
            text.push_str(&checks_text(&found.result.checks, &found.result.warnings));
            emit(
                format,
                json!({
                    "model": model_label(&model),
                    "procedure": found.procedure.as_str(),
                    "via": model_label(&found.via),
                    "candidates": found.result.candidates.iter().map(|c| c.to_doc()).collect::<Vec<_>>(),
                    "checks": found.result.checks,
                    "warnings": found.result.warnings,
                }),
                text,
            )
        }
        Command::Fiber { model, tensor } => {
            let model = load_model(&model)?;
            let obs: DistTensor<S> = load_tensor(&tensor)?;
            let found = identify(&model, &obs, &tols)?;
            let cluster = cluster_tol::<S>(&tols);
            let classes = distinct_canonical(&found.result.candidates, cluster);
            let mut text = format!(
                "candidates: {}\ncanonical classes: {}\n",
                found.result.candidates.len(),
                classes.len()
            );
            for (i, c) in classes.iter().enumerate() {
                text.push_str(&params_text(c, &format!("class {}", i + 1)));
            }
            emit(
                format,
                json!({
                    "model": model_label(&model),
                    "procedure": found.procedure.as_str(),
                    "candidates": found.result.candidates.len(),
                    "classes": classes.iter().map(|c| c.to_doc()).collect::<Vec<_>>(),
                }),
                text,
            )
        }
        Command::Equiv {
            model_a,
            model_b,
            transfer,
        } => {
            let a = load_model(&model_a)?;
            let b = load_model(&model_b)?;
            let equivalent = same_markov_class(&a, &b);
            let class_size = markov_equivalence_class(&a)?.len();
            let mut out = json!({
                "equivalent": equivalent,
                "class_size": class_size,
            });
            let mut text = format!("equivalent: {equivalent}\nclass size: {class_size}\n");
            if let Some(path) = transfer {
                let params: ParameterSet<S> = load_params(&path, &a)?;
                let tr = transfer_with_relabeling(&params, &b, tols.positivity)?;
                if !tr.domain_ok {
                    return Err(Error::ExceptionalInput(format!(
                        "transfer left the positive domain: {}",
                        tr.witness.unwrap_or_default()
                    )));
                }
                text.push_str(&format!("relabeling: {:?}\n", tr.relabeling));
                text.push_str(&params_text(&tr.params, "transferred"));
                out["relabeling"] = json!(tr.relabeling);
                out["transferred"] = json!(tr.params.to_doc());
            }
            emit(format, out, text)
        }
        Command::Causal {
            model,
            tensor,
            from,
            to,
        } => {
            let model = load_model(&model)?;
            let obs: DistTensor<S> = load_tensor(&tensor)?;
            let found = identify(&model, &obs, &tols)?;
            let cluster = cluster_tol::<S>(&tols);
            let reps = distinct_canonical(&found.result.candidates, cluster);
            let report = effect_ambiguity(&reps, from, to, tols.positivity)?;
            let mut text = format!("cause: {from}\neffect: {to}\n");
            for (i, ce) in report.per_candidate.iter().enumerate() {
                text.push_str(&format!("candidate {}:\n", i + 1));
                for (x, row) in ce.table.iter().enumerate() {
                    let cells: Vec<String> = row.iter().map(fmt_scalar).collect();
                    text.push_str(&format!("  do(x={x}): {}\n", cells.join(" ")));
                }
                for (x, row) in ce.contrasts.iter().enumerate() {
                    let cells: Vec<String> = row.iter().map(fmt_scalar).collect();
                    text.push_str(&format!("  contrast vs 0 (x={}): {}\n", x + 1, cells.join(" ")));
                }
            }
            text.push_str(&format!("signs agree: {}\n", report.signs_agree));
            let per: Vec<_> = report
                .per_candidate
                .iter()
                .map(|ce| {
                    json!({
                        "table": ce.table.iter().map(|r| r.iter().map(scalar_to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
                        "contrasts": ce.contrasts.iter().map(|r| r.iter().map(scalar_to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            emit(
                format,
                json!({
                    "cause": report.cause,
                    "effect": report.effect,
                    "per_candidate": per,
                    "signs_agree": report.signs_agree,
                }),
                text,
            )
        }
        Command::Catalog { seeds } => {
            let mut rows = Vec::new();
            let mut text = String::from("model   dim  obsdim  k\n");
            for e in CATALOG {
                let model = e.model();
                let dim = model.parameter_dimension();
                let obsdim = model.observable_dimension();
                let mut row = json!({
                    "model": e.id,
                    "dim": dim,
                    "observable_dim": obsdim,
                    "k": e.k.k(),
                });
                let mut line = format!("{:<7} {:<4} {:<7} {}", e.id, dim, obsdim, e.k);
                if let Some(n) = seeds {
                    let report = classify_generic_k(&model, n, &tols)?;
                    let classified = if report.infinite {
                        "infinite".to_string()
                    } else {
                        report
                            .k
                            .map(|k| k.to_string())
                            .unwrap_or_else(|| "?".to_string())
                    };
                    line.push_str(&format!("  [classified: {classified}]"));
                    row["classified"] = json!(classified);
                }
                text.push_str(&line);
                text.push('\n');
                rows.push(row);
            }
            emit(format, json!({ "catalog": rows }), text)
        }
        Command::Oracle {
            model,
            tensor,
            starts,
            seed,
        } => {
            if S::mode() == Mode::Rational {
                return Err(Error::Unsupported(
                    "the multistart oracle minimizes a float residual; rerun with --mode float"
                        .to_string(),
                ));
            }
            let model = load_model(&model)?;
            let obs: DistTensor<f64> = load_tensor(&tensor)?;
            let classes = multistart_fiber_search(&model, &obs, starts, seed, &tols)?;
            let mut text = format!(
                "starts: {starts}\ncanonical classes found: {}\n",
                classes.len()
            );
            for (i, c) in classes.iter().enumerate() {
                text.push_str(&params_text(c, &format!("class {}", i + 1)));
            }
            emit(
                format,
                json!({
                    "model": model_label(&model),
                    "starts": starts,
                    "seed": seed,
                    "classes": classes.iter().map(|c| c.to_doc()).collect::<Vec<_>>(),
                }),
                text,
            )
        }
    }
}

/// Clustering radius for canonical-class deduplication: exact equality in
/// rational mode, the configured radius in float mode.
fn cluster_tol<S: Scalar>(tols: &Tolerances) -> f64 {
    match S::mode() {
        Mode::Rational => 0.0,
        Mode::Float => tols.cluster,
    }
}

fn emit(format: FormatArg, out: serde_json::Value, text: String) -> Result<()> {
    let payload = match format {
        FormatArg::Json => {
            let mut rendered = serde_json::to_string_pretty(&out)
                .map_err(|e| Error::Parse(format!("serializing output: {e}")))?;
            rendered.push('\n');
            rendered
        }
        FormatArg::Text => text,
    };
    match std::io::stdout().lock().write_all(payload.as_bytes()) {
        // A closed pipe downstream (`| head`, `| grep -q`) is a normal way
        // for output to end, not a failure.
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn model_label(model: &Model) -> String {
    match catalog_id_of(model) {
        Some(id) => id.to_string(),
        None => format!("edges {:?}", model.obs_edges()),
    }
}

/// A model argument is a catalog id first, a path to a model JSON file
/// second.
fn load_model(arg: &str) -> Result<Model> {
    match catalog_model(arg) {
        Ok(m) => Ok(m),
        Err(Error::UnknownCatalogId(_)) if std::path::Path::new(arg).exists() => {
            let raw = std::fs::read_to_string(arg)?;
            let doc: latentid::ModelDoc =
                serde_json::from_str(&raw).map_err(|e| Error::Parse(format!("{arg}: {e}")))?;
            Model::from_doc(&doc)
        }
        Err(e) => Err(e),
    }
}

fn read_input(arg: &str) -> Result<String> {
    if arg == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf)?;
        Ok(buf)
    } else {
        Ok(std::fs::read_to_string(arg)?)
    }
}

/// Tensors load from a bare tensor document or from any JSON object with
/// an `observable` field (the shape `simulate` emits), so simulate output
/// pipes straight into identify.
fn load_tensor<S: Scalar>(arg: &str) -> Result<DistTensor<S>> {
    let raw = read_input(arg)?;
    let value: serde_json::Value =
        serde_json::from_str(&raw).map_err(|e| Error::Parse(format!("{arg}: {e}")))?;
    let doc_value = match value.get("observable") {
        Some(inner) => inner.clone(),
        None => value,
    };
    let doc: TensorDoc = serde_json::from_value(doc_value)
        .map_err(|e| Error::Parse(format!("{arg}: not a tensor document: {e}")))?;
    DistTensor::from_doc(&doc)
}

/// Parameters load from a bare params document or from any JSON object
/// with a `parameters` field, and must live on the expected model.
fn load_params<S: Scalar>(arg: &str, expected: &Model) -> Result<ParameterSet<S>> {
    let raw = read_input(arg)?;
    let value: serde_json::Value =
        serde_json::from_str(&raw).map_err(|e| Error::Parse(format!("{arg}: {e}")))?;
    let doc_value = match value.get("parameters") {
        Some(inner) => inner.clone(),
        None => value,
    };
    let doc: ParamsDoc = serde_json::from_value(doc_value)
        .map_err(|e| Error::Parse(format!("{arg}: not a parameter document: {e}")))?;
    let params = ParameterSet::from_doc(&doc)?;
    if params.model != *expected {
        return Err(Error::Parse(format!(
            "{arg}: parameters are for a different model ({} vs {})",
            model_label(&params.model),
            model_label(expected)
        )));
    }
    Ok(params)
}

fn parse_tols(overrides: &[String]) -> Result<Tolerances> {
    let mut tols = Tolerances::default();
    for item in overrides {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("tolerance override `{item}` is not NAME=VALUE")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad tolerance value in `{item}`")))?;
        match name.trim() {
            "positivity" => tols.positivity = value,
            "singular" => tols.singular = value,
            "eigen_gap" => tols.eigen_gap = value,
            "alignment_gap" => tols.alignment_gap = value,
            "reproduction" => tols.reproduction = value,
            "negative_mass" => tols.negative_mass = value,
            "residual" => tols.residual = value,
            "cluster" => tols.cluster = value,
            "jacobian_step" => tols.jacobian_step = value,
            "jacobian_cutoff" => tols.jacobian_cutoff = value,
            "conditioning" => tols.conditioning = value,
            other => {
                return Err(Error::Parse(format!("unknown tolerance `{other}`")));
            }
        }
    }
    Ok(tols)
}

/// Rationals print as `p/q`; floats with 17 significant digits, enough to
/// round-trip.
fn fmt_scalar<S: Scalar>(s: &S) -> String {
    match S::mode() {
        Mode::Rational => format!("{s}"),
        Mode::Float => format!("{:.16e}", s.to_f64()),
    }
}

fn params_text<S: Scalar>(params: &ParameterSet<S>, label: &str) -> String {
    let mut out = format!("{label}:\n");
    for v in params.model.nodes() {
        let cpt = params.cpt(v);
        if cpt.parents.is_empty() {
            let cells: Vec<String> = cpt.table.row(0).iter().map(fmt_scalar).collect();
            out.push_str(&format!("  node {v}: {}\n", cells.join(" ")));
            continue;
        }
        out.push_str(&format!("  node {v} | parents {:?}:\n", cpt.parents));
        for r in 0..cpt.table.nrows() {
            let states = latentid::params::row_states(&cpt.parent_sizes, r);
            let cells: Vec<String> = cpt.table.row(r).iter().map(fmt_scalar).collect();
            out.push_str(&format!("    {states:?}: {}\n", cells.join(" ")));
        }
    }
    out
}

fn tensor_text<S: Scalar>(t: &DistTensor<S>) -> String {
    let mut out = format!("observable joint over nodes {:?}:\n", t.axes());
    let sizes = t.sizes().to_vec();
    let mut idx = vec![0usize; sizes.len()];
    for v in t.data() {
        out.push_str(&format!("  {idx:?}: {}\n", fmt_scalar(v)));
        for d in (0..sizes.len()).rev() {
            idx[d] += 1;
            if idx[d] < sizes[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

fn checks_text(checks: &[Check], warnings: &[String]) -> String {
    let mut out = String::new();
    for c in checks {
        let status = if c.passed { "ok " } else { "FAIL" };
        out.push_str(&format!("check [{status}] {}", c.name));
        if let (Some(m), Some(t)) = (c.measured, c.tolerance) {
            out.push_str(&format!(" (measured {m:.3e}, tolerance {t:.3e})"));
        }
        if let Some(note) = &c.note {
            out.push_str(&format!(" — {note}"));
        }
        out.push('\n');
    }
    for w in warnings {
        out.push_str(&format!("note: {w}\n"));
    }
    out
}
