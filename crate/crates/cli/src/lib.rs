//! `opdyn` command-line front end.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 input or usage error,
//! 3 analytical refusal (the structural verdict rules the request out).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use opdyn::analysis::{
    analyze, containment_check, french_social_power, abelson_social_power, influence_centrality, pagerank,
    taylor_leader_weights, taylor_stability_and_final, Depth, PageRankMode,
};
use opdyn::dynamics::{
    abelson_simulate_linear, abelson_simulate_nonlinear, degroot_simulate, fj_simulate, taylor_simulate,
    ContinuousMethod, Coupling, ModelSpec, ModelTag, OpinionState, DEFAULT_DT, DEFAULT_STOP_TOL,
};
use opdyn::io::{
    centrality_value, containment_value, load_network_with_warnings, render_json, report_value, save_trajectory,
    NetworkDocument,
};
use opdyn::Error;

#[derive(Debug, Parser)]
#[command(name = "opdyn", version, about = "Opinion-dynamics analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Structural verdicts, centrality and steady state.
    Analyze(AnalyzeArgs),
    /// Graph-theoretic verdicts only; no linear algebra.
    Predict(AnalyzeArgs),
    /// Simulate a trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Social power, influence centrality or PageRank.
    Centrality(CentralityArgs),
    /// Check that Taylor limits lie in the convex hull of the sources.
    Containment(ContainmentArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Network document (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Free-form note copied into JSON outputs.
    #[arg(long)]
    seed_note: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Degroot,
    Abelson,
    AbelsonNonlinear,
    Taylor,
    Fj,
}

impl From<ModelArg> for ModelTag {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Degroot => ModelTag::DeGroot,
            ModelArg::Abelson => ModelTag::Abelson,
            ModelArg::AbelsonNonlinear => ModelTag::AbelsonNonlinear,
            ModelArg::Taylor => ModelTag::Taylor,
            ModelArg::Fj => ModelTag::FriedkinJohnsen,
        }
    }
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Model; inferred from the document fields when omitted.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Step limit for discrete-time models.
    #[arg(long)]
    steps: Option<usize>,
    /// Early-stop tolerance for discrete-time models.
    #[arg(long)]
    tol: Option<f64>,
    /// Time horizon for continuous-time models.
    #[arg(long)]
    horizon: Option<f64>,
    /// Sampling step for continuous-time models.
    #[arg(long)]
    dt: Option<f64>,
    /// Integrator for continuous-time models: exact or rk4.
    #[arg(long)]
    method: Option<String>,
    /// Coupling of the nonlinear Abelson model.
    #[arg(long)]
    coupling: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CentralityKind {
    SocialPower,
    Influence,
    Pagerank,
}

#[derive(Debug, Args)]
struct CentralityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "social-power")]
    method: CentralityKind,
    /// Model for social power: degroot (default) or abelson.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Uniform susceptibility for influence centrality; overrides lambda.
    #[arg(long)]
    alpha: Option<f64>,
    /// Teleportation probability for PageRank.
    #[arg(long)]
    damping: Option<f64>,
}

#[derive(Debug, Args)]
struct ContainmentArgs {
    #[command(flatten)]
    common: Common,
    /// Check the state simulated up to this time instead of the limit.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Refusal(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Refusal(_) => 3,
            Failure::Numeric(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Refusal(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::ConsensusNotGuaranteed { .. } | Error::Unstable { .. } | Error::IdentitySusceptibility => {
                Failure::Refusal(msg)
            }
            Error::NotConverged { .. }
            | Error::Ambiguous { .. }
            | Error::Singular { .. }
            | Error::ExpOverflow { .. }
            | Error::Internal(_) => Failure::Numeric(msg),
            _ => Failure::Input(msg),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn input<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Input(msg.into()))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            let kind = match f {
                Failure::Input(_) => "input error",
                Failure::Refusal(_) => "refused",
                Failure::Numeric(_) => "numerical failure",
            };
            eprintln!("opdyn: {kind}: {}", f.message());
            f.code()
        }
    }
}

fn dispatch(cmd: Command) -> Outcome<()> {
    match cmd {
        Command::Analyze(a) => cmd_analyze(a, Depth::Full),
        Command::Predict(a) => cmd_analyze(a, Depth::Verdicts),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Centrality(a) => cmd_centrality(a),
        Command::Containment(a) => cmd_containment(a),
    }
}

fn load(path: &Path) -> Outcome<NetworkDocument> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    let (doc, warnings) =
        load_network_with_warnings(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    for w in warnings {
        eprintln!("opdyn: warning: {w}");
    }
    Ok(doc)
}

fn build_model(doc: &NetworkDocument, model: Option<ModelArg>, coupling: Option<Coupling>) -> Outcome<ModelSpec> {
    let tag = model.map(ModelTag::from).unwrap_or_else(|| doc.inferred_model());
    let mut warnings = Vec::new();
    let spec = doc.to_model(tag, coupling, &mut warnings)?;
    for w in warnings {
        eprintln!("opdyn: warning: {w}");
    }
    Ok(spec)
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed run never leaves a partial file.
fn emit(output: Option<&Path>, text: &str) -> Outcome<()> {
    let Some(path) = output else {
        let mut out = std::io::stdout().lock();
        return out
            .write_all(text.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Failure::Input(format!("cannot write to standard output: {e}")));
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| Failure::Input(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(text.as_bytes()).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn emit_json(common: &Common, mut value: Value) -> Outcome<()> {
    if let Some(note) = &common.seed_note {
        value["seed_note"] = json!(note);
    }
    emit(common.output.as_deref(), &render_json(&value))
}

fn cmd_analyze(a: AnalyzeArgs, depth: Depth) -> Outcome<()> {
    let doc = load(&a.common.input)?;
    let spec = build_model(&doc, a.model, None)?;
    let report = analyze(&spec, depth)?;
    emit_json(&a.common, report_value(&report))
}

fn cmd_simulate(a: SimulateArgs) -> Outcome<()> {
    let doc = load(&a.common.input)?;
    let tag: ModelTag = a.model.map(ModelTag::from).unwrap_or_else(|| doc.inferred_model());
    if tag.is_discrete() {
        for (flag, set) in [
            ("--horizon", a.horizon.is_some()),
            ("--dt", a.dt.is_some()),
            ("--method", a.method.is_some()),
            ("--coupling", a.coupling.is_some()),
        ] {
            if set {
                return input(format!("{flag} does not apply to the discrete-time model {tag}"));
            }
        }
    } else {
        for (flag, set) in [("--steps", a.steps.is_some()), ("--tol", a.tol.is_some())] {
            if set {
                return input(format!("{flag} does not apply to the continuous-time model {tag}"));
            }
        }
        if a.horizon.is_none() {
            return input(format!("--horizon is required for the continuous-time model {tag}"));
        }
        if a.coupling.is_some() && tag != ModelTag::AbelsonNonlinear {
            return input("--coupling applies only to abelson-nonlinear");
        }
        if a.method.is_some() && tag == ModelTag::AbelsonNonlinear {
            return input("--method does not apply to abelson-nonlinear (always rk4)");
        }
    }
    if let Some(tol) = a.tol {
        if !(tol >= 0.0) {
            return input(format!("--tol must be >= 0, got {tol}"));
        }
    }
    let method = match a.method.as_deref() {
        None => ContinuousMethod::ExactExpm,
        Some(m) => match ContinuousMethod::from_name(m) {
            Some(m) => m,
            None => return input(format!("unknown --method {m}; expected exact or rk4")),
        },
    };
    let coupling = match a.coupling.as_deref() {
        None => None,
        Some(c) => match Coupling::from_name(c) {
            Some(c) => Some(c),
            None => {
                return input(format!(
                    "unknown --coupling {c}; expected one of {}",
                    Coupling::BUILTIN.join(", ")
                ))
            }
        },
    };
    let spec = build_model(&doc, Some(tag_arg(tag)), coupling)?;
    let x0 = match (doc.initial_state(), &spec) {
        (Some(x), _) => x,
        (None, ModelSpec::Taylor(t)) => t.u.clone(),
        (None, _) => return input("document needs x0 or u for the initial opinions"),
    };
    let x0 = OpinionState::new(x0)?;
    let steps = a.steps.unwrap_or(1000);
    let tol = a.tol.unwrap_or(DEFAULT_STOP_TOL);
    let horizon = a.horizon.unwrap_or(0.0);
    let dt = a.dt.unwrap_or(DEFAULT_DT);
    let traj = match &spec {
        ModelSpec::DeGroot { w } => degroot_simulate(w, &x0, steps, tol)?,
        ModelSpec::FriedkinJohnsen(m) => fj_simulate(m, &x0, steps, tol)?,
        ModelSpec::Abelson { a, coupling: None } => abelson_simulate_linear(a, &x0, horizon, dt, method)?,
        ModelSpec::Abelson { a, coupling: Some(c) } => abelson_simulate_nonlinear(a, c, &x0, horizon, dt)?,
        ModelSpec::Taylor(m) => taylor_simulate(m, &x0, horizon, dt, method)?,
    };
    emit(a.common.output.as_deref(), &save_trajectory(&traj))?;
    let last = traj.times.last().copied().unwrap_or(0.0);
    eprintln!(
        "stop reason: {} (t = {last}, {} states, integrator {:?})",
        traj.stop.as_str(),
        traj.len(),
        traj.integrator
    );
    if let Some(note) = &a.common.seed_note {
        eprintln!("seed note: {note}");
    }
    Ok(())
}

fn tag_arg(tag: ModelTag) -> ModelArg {
    match tag {
        ModelTag::DeGroot => ModelArg::Degroot,
        ModelTag::Abelson => ModelArg::Abelson,
        ModelTag::AbelsonNonlinear => ModelArg::AbelsonNonlinear,
        ModelTag::Taylor => ModelArg::Taylor,
        ModelTag::FriedkinJohnsen => ModelArg::Fj,
    }
}

fn cmd_centrality(a: CentralityArgs) -> Outcome<()> {
    let doc = load(&a.common.input)?;
    let result = match a.method {
        CentralityKind::SocialPower => {
            if a.alpha.is_some() || a.damping.is_some() {
                return input("--alpha and --damping do not apply to social power");
            }
            match a.model.map(ModelTag::from).unwrap_or(ModelTag::DeGroot) {
                ModelTag::DeGroot => match build_model(&doc, Some(ModelArg::Degroot), None)? {
                    ModelSpec::DeGroot { w } => french_social_power(&w)?,
                    _ => unreachable!("degroot tag builds a degroot model"),
                },
                ModelTag::Abelson => match build_model(&doc, Some(ModelArg::Abelson), None)? {
                    ModelSpec::Abelson { a, .. } => abelson_social_power(&a)?,
                    _ => unreachable!("abelson tag builds an abelson model"),
                },
                other => return input(format!("social power is defined for degroot and abelson, not {other}")),
            }
        }
        CentralityKind::Influence => {
            if a.damping.is_some() || a.model.is_some() {
                return input("--damping and --model do not apply to influence centrality");
            }
            let lambda = match (a.alpha, &doc.lambda) {
                (Some(alpha), _) => {
                    if !(0.0..=1.0).contains(&alpha) {
                        return input(format!("--alpha = {alpha}: lambda out of [0,1]"));
                    }
                    vec![alpha; doc.n]
                }
                (None, Some(l)) => l.clone(),
                (None, None) => return input("influence centrality needs lambda in the document or --alpha"),
            };
            let w = doc_stochastic(&doc)?;
            influence_centrality(&w, &lambda)?
        }
        CentralityKind::Pagerank => {
            if a.alpha.is_some() || a.model.is_some() {
                return input("--alpha and --model do not apply to pagerank");
            }
            let m = a.damping.unwrap_or(0.15);
            let w = doc_stochastic(&doc)?;
            pagerank(&w, m, PageRankMode::ClosedForm)?
        }
    };
    emit_json(&a.common, centrality_value(&result))
}

fn doc_stochastic(doc: &NetworkDocument) -> Outcome<opdyn::matrix::StochasticMatrix> {
    match build_model(doc, Some(ModelArg::Degroot), None)? {
        ModelSpec::DeGroot { w } => Ok(w),
        _ => unreachable!("degroot tag builds a degroot model"),
    }
}

fn cmd_containment(a: ContainmentArgs) -> Outcome<()> {
    let doc = load(&a.common.input)?;
    let Some(src) = doc.sources.clone() else {
        return input("containment needs sources {B, s} in the document");
    };
    if a.dt.is_some() && a.horizon.is_none() {
        return input("--dt requires --horizon");
    }
    let ModelSpec::Taylor(model) = build_model(&doc, Some(ModelArg::Taylor), None)? else {
        unreachable!("taylor tag builds a taylor model");
    };
    let outcome = taylor_stability_and_final(&model, None)?;
    let (x_final, certificate): (DMatrix<f64>, Option<DMatrix<f64>>) = match a.horizon {
        Some(h) => {
            let x0 = OpinionState::new(doc.initial_state().unwrap_or_else(|| model.u.clone()))?;
            let traj = taylor_simulate(&model, &x0, h, a.dt.unwrap_or(DEFAULT_DT), ContinuousMethod::ExactExpm)?;
            (traj.last().as_matrix().clone(), None)
        }
        None => {
            let cert = taylor_leader_weights(&outcome, &src.b)?;
            let x = outcome
                .final_opinions
                .clone()
                .ok_or_else(|| Failure::Numeric("stable model without a steady state".into()))?;
            (x, Some(cert))
        }
    };
    let report = containment_check(&x_final, &src.s, certificate.as_ref())?;
    let mut value = containment_value(&report);
    value["stable"] = json!(outcome.stable);
    emit_json(&a.common, value)
}
