//! Network documents (JSON), analysis reports (key-sorted JSON) and
//! trajectory CSV.
//!
//! Agent indices are 1-based in every text format. An arc `{from: j, to: i,
//! weight: w}` means agent `i` listens to agent `j` and sets `w_ij = w`.

use nalgebra::DMatrix;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::analysis::{
    AnalysisReport, CentralityMethod, CentralityResult, ContainmentReport, ConvergenceVerdict, PDependence,
};
use crate::dynamics::{Coupling, FjModel, ModelSpec, ModelTag, TaylorModel, Trajectory};
use crate::error::{Error, Result};
use crate::matrix::{NonnegativeMatrix, StochasticMatrix, ROW_SUM_TOL};

pub const SCHEMA_VERSION: &str = "1";
/// Row-sum drift above this is rejected; between `ROW_SUM_TOL` and this,
/// rows are renormalized with a warning.
pub const ROW_SUM_HARD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct DocArc {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Influence {
    Matrix(DMatrix<f64>),
    Arcs(Vec<DocArc>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sources {
    /// `n x m` persuasibilities toward each source.
    pub b: DMatrix<f64>,
    /// `m x d` source positions.
    pub s: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDocument {
    pub n: usize,
    pub d: usize,
    pub influence: Influence,
    pub lambda: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub u: Option<DMatrix<f64>>,
    pub c: Option<DMatrix<f64>>,
    pub sources: Option<Sources>,
    pub x0: Option<DMatrix<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    schema_version: String,
    n: usize,
    d: usize,
    matrix: Option<Vec<Vec<f64>>>,
    arcs: Option<Vec<RawArc>>,
    lambda: Option<Vec<f64>>,
    gamma: Option<Vec<f64>>,
    u: Option<Vec<Vec<f64>>>,
    #[serde(rename = "C")]
    c: Option<Vec<Vec<f64>>>,
    sources: Option<RawSources>,
    x0: Option<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArc {
    from: usize,
    to: usize,
    weight: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSources {
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
}

fn schema(msg: String) -> Error {
    Error::Schema(msg)
}

fn table(field: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows {
        return Err(Error::Dimension(format!("{field}: expected {nrows} rows, got {}", rows.len())));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(Error::Dimension(format!(
                "{field}: row {} has {} entries, expected {ncols}",
                i + 1,
                r.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn nonnegative(field: &str, m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(schema(format!("{field}[{}][{}] = {v}: must be finite and >= 0", i + 1, j + 1)));
            }
        }
    }
    Ok(())
}

fn finite(field: &str, m: &DMatrix<f64>) -> Result<()> {
    match m.iter().position(|v| !v.is_finite()) {
        Some(k) => {
            let (i, j) = (k % m.nrows(), k / m.nrows());
            Err(schema(format!("{field}[{}][{}] is not finite", i + 1, j + 1)))
        }
        None => Ok(()),
    }
}

fn vector(field: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::Dimension(format!("{field}: expected {n} entries, got {}", v.len())));
    }
    Ok(())
}

/// Renormalizes rows of a nearly stochastic matrix. Drift up to
/// `ROW_SUM_TOL` is silent, up to `ROW_SUM_HARD_TOL` produces a warning.
pub fn to_stochastic(field: &str, m: &DMatrix<f64>, warnings: &mut Vec<String>) -> Result<StochasticMatrix> {
    for i in 0..m.nrows() {
        let drift = (m.row(i).sum() - 1.0).abs();
        if drift > ROW_SUM_TOL && drift <= ROW_SUM_HARD_TOL {
            warnings.push(format!("{field}: row {} sum drifts by {drift:e}; renormalized", i + 1));
        }
    }
    StochasticMatrix::with_tolerance(m.clone(), ROW_SUM_HARD_TOL).map_err(|e| match e {
        Error::RowSum { row, sum, .. } => schema(format!(
            "{field}: row {} sums to {sum}, more than {ROW_SUM_HARD_TOL:e} from 1",
            row + 1
        )),
        e => e,
    })
}

impl NetworkDocument {
    /// Dense influence matrix (`W` or `A`).
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        match &self.influence {
            Influence::Matrix(m) => Ok(m.clone()),
            Influence::Arcs(arcs) => {
                let mut m = DMatrix::zeros(self.n, self.n);
                for (k, a) in arcs.iter().enumerate() {
                    if a.from == 0 || a.to == 0 || a.from > self.n || a.to > self.n {
                        return Err(schema(format!(
                            "arcs[{}]: endpoints {} -> {} outside 1..={}",
                            k + 1,
                            a.from,
                            a.to,
                            self.n
                        )));
                    }
                    if !(a.weight.is_finite() && a.weight > 0.0) {
                        return Err(schema(format!("arcs[{}]: weight {} must be finite and > 0", k + 1, a.weight)));
                    }
                    let cell = &mut m[(a.to - 1, a.from - 1)];
                    if *cell != 0.0 {
                        return Err(schema(format!("arcs[{}]: duplicate arc {} -> {}", k + 1, a.from, a.to)));
                    }
                    *cell = a.weight;
                }
                Ok(m)
            }
        }
    }

    /// Initial opinions: `x0` if given, else `u`.
    pub fn initial_state(&self) -> Option<DMatrix<f64>> {
        self.x0.clone().or_else(|| self.u.clone())
    }

    /// Model implied by the fields present when no tag is given.
    pub fn inferred_model(&self) -> ModelTag {
        if self.lambda.is_some() {
            ModelTag::FriedkinJohnsen
        } else if self.gamma.is_some() || self.sources.is_some() {
            ModelTag::Taylor
        } else {
            ModelTag::DeGroot
        }
    }

    /// Builds the model, checking the fields it needs. Renormalization
    /// warnings are appended to `warnings`.
    pub fn to_model(&self, tag: ModelTag, coupling: Option<Coupling>, warnings: &mut Vec<String>) -> Result<ModelSpec> {
        let m = self.matrix()?;
        match tag {
            ModelTag::DeGroot => Ok(ModelSpec::DeGroot {
                w: to_stochastic("matrix", &m, warnings)?,
            }),
            ModelTag::Abelson => Ok(ModelSpec::Abelson {
                a: NonnegativeMatrix::new(m)?,
                coupling: None,
            }),
            ModelTag::AbelsonNonlinear => Ok(ModelSpec::Abelson {
                a: NonnegativeMatrix::new(m)?,
                coupling: Some(coupling.unwrap_or(Coupling::Constant)),
            }),
            ModelTag::Taylor => {
                let a = NonnegativeMatrix::new(m)?;
                match (&self.gamma, &self.u, &self.sources) {
                    (Some(g), Some(u), _) => Ok(ModelSpec::Taylor(TaylorModel::new(a, g.clone(), u.clone())?)),
                    (_, _, Some(src)) => Ok(ModelSpec::Taylor(TaylorModel::from_sources(a, &src.b, &src.s)?)),
                    _ => Err(schema("taylor model needs gamma and u, or sources".into())),
                }
            }
            ModelTag::FriedkinJohnsen => {
                let (Some(lambda), Some(u)) = (&self.lambda, &self.u) else {
                    return Err(schema("fj model needs lambda and u".into()));
                };
                let w = to_stochastic("matrix", &m, warnings)?;
                let c = self.c.as_ref().map(|c| to_stochastic("C", c, warnings)).transpose()?;
                Ok(ModelSpec::FriedkinJohnsen(FjModel::new(w, lambda.clone(), u.clone(), c)?))
            }
        }
    }
}

/// Parses and validates a network document.
pub fn load_network(text: &str) -> Result<NetworkDocument> {
    load_network_with_warnings(text).map(|(doc, _)| doc)
}

/// As [`load_network`], also returning non-fatal diagnostics.
pub fn load_network_with_warnings(text: &str) -> Result<(NetworkDocument, Vec<String>)> {
    let raw: RawDocument = serde_json::from_str(text)
        .map_err(|e| {
            let at = format!(" at line {} column {}", e.line(), e.column());
            let msg = e.to_string();
            let msg = msg.strip_suffix(&at).unwrap_or(&msg);
            schema(format!("line {} column {}: {msg}", e.line(), e.column()))
        })?;
    let mut warnings = Vec::new();
    if raw.schema_version != SCHEMA_VERSION {
        return Err(schema(format!(
            "schema_version: expected \"{SCHEMA_VERSION}\", got \"{}\"",
            raw.schema_version
        )));
    }
    let (n, d) = (raw.n, raw.d);
    if n == 0 || d == 0 {
        return Err(schema(format!("n and d must be positive, got n = {n}, d = {d}")));
    }
    let influence = match (raw.matrix, raw.arcs) {
        (Some(m), None) => {
            let m = table("matrix", &m, n, n)?;
            nonnegative("matrix", &m)?;
            Influence::Matrix(m)
        }
        (None, Some(arcs)) => Influence::Arcs(
            arcs.into_iter()
                .map(|a| DocArc {
                    from: a.from,
                    to: a.to,
                    weight: a.weight,
                })
                .collect(),
        ),
        _ => return Err(schema("exactly one of matrix or arcs is required".into())),
    };
    if let Some(l) = &raw.lambda {
        vector("lambda", l, n)?;
        if let Some(i) = l.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(schema(format!("lambda[{}] = {}: lambda out of [0,1]", i + 1, l[i])));
        }
    }
    if let Some(g) = &raw.gamma {
        vector("gamma", g, n)?;
        if let Some(i) = g.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(schema(format!("gamma[{}] = {}: must be finite and >= 0", i + 1, g[i])));
        }
    }
    let u = raw.u.as_deref().map(|u| table("u", u, n, d)).transpose()?;
    if let Some(u) = &u {
        finite("u", u)?;
    }
    let x0 = raw.x0.as_deref().map(|x| table("x0", x, n, d)).transpose()?;
    if let Some(x) = &x0 {
        finite("x0", x)?;
    }
    let c = raw.c.as_deref().map(|c| table("C", c, d, d)).transpose()?;
    if let Some(c) = &c {
        nonnegative("C", c)?;
        to_stochastic("C", c, &mut warnings)?;
    }
    let sources = match raw.sources {
        Some(src) => {
            let m = src.s.len();
            let b = table("sources.B", &src.b, n, m)?;
            nonnegative("sources.B", &b)?;
            let s = table("sources.s", &src.s, m, d)?;
            finite("sources.s", &s)?;
            Some(Sources { b, s })
        }
        None => None,
    };
    let doc = NetworkDocument {
        n,
        d,
        influence,
        lambda: raw.lambda,
        gamma: raw.gamma,
        u,
        c,
        sources,
        x0,
    };
    // arcs are validated here so that load errors surface immediately
    doc.matrix()?;
    Ok((doc, warnings))
}

fn rows_value(m: &DMatrix<f64>) -> Value {
    Value::Array(m.row_iter().map(|r| json!(r.iter().copied().collect::<Vec<f64>>())).collect())
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn render_json(value: &Value) -> String {
    // serde_json's default map is a BTreeMap, so keys come out sorted
    let mut s = serde_json::to_string_pretty(value).expect("finite values serialize");
    s.push('\n');
    s
}

/// Canonical text of a document.
pub fn render_network(doc: &NetworkDocument) -> String {
    let mut obj = Map::new();
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("n".into(), json!(doc.n));
    obj.insert("d".into(), json!(doc.d));
    match &doc.influence {
        Influence::Matrix(m) => {
            obj.insert("matrix".into(), rows_value(m));
        }
        Influence::Arcs(arcs) => {
            obj.insert(
                "arcs".into(),
                Value::Array(
                    arcs.iter()
                        .map(|a| json!({"from": a.from, "to": a.to, "weight": a.weight}))
                        .collect(),
                ),
            );
        }
    }
    if let Some(l) = &doc.lambda {
        obj.insert("lambda".into(), json!(l));
    }
    if let Some(g) = &doc.gamma {
        obj.insert("gamma".into(), json!(g));
    }
    if let Some(u) = &doc.u {
        obj.insert("u".into(), rows_value(u));
    }
    if let Some(c) = &doc.c {
        obj.insert("C".into(), rows_value(c));
    }
    if let Some(src) = &doc.sources {
        obj.insert("sources".into(), json!({"B": rows_value(&src.b), "s": rows_value(&src.s)}));
    }
    if let Some(x0) = &doc.x0 {
        obj.insert("x0".into(), rows_value(x0));
    }
    render_json(&Value::Object(obj))
}

fn agents(v: &[usize]) -> Value {
    json!(v.iter().map(|i| i + 1).collect::<Vec<_>>())
}

fn verdict_value(v: &ConvergenceVerdict) -> Value {
    json!({
        "convergent": v.convergent,
        "consensus": v.consensus,
        "reason": v.reason.to_string(),
        "closed_components": v.closed_components.iter().map(|c| json!({
            "agents": agents(&c.nodes),
            "period": c.period,
            "has_cycle": c.has_cycle,
        })).collect::<Vec<_>>(),
    })
}

fn p_dependence_value(p: &PDependence) -> Value {
    json!({
        "prejudiced": agents(&p.prejudiced),
        "p_dependent": agents(&p.p_dependent),
        "p_independent": agents(&p.p_independent),
    })
}

pub fn centrality_value(c: &CentralityResult) -> Value {
    let mut obj = Map::new();
    obj.insert("method".into(), json!(c.method.as_str()));
    obj.insert("values".into(), json!(c.values));
    if let Some(p) = c.parameter {
        let key = match c.method {
            CentralityMethod::PageRank => "damping",
            _ => "alpha",
        };
        obj.insert(key.into(), json!(p));
    }
    Value::Object(obj)
}

/// Key-sorted JSON rendering of an analysis report.
pub fn save_report(report: &AnalysisReport) -> String {
    render_json(&report_value(report))
}

pub fn report_value(report: &AnalysisReport) -> Value {
    let scc = &report.components;
    let mut obj = Map::new();
    obj.insert("model".into(), json!(report.model.as_str()));
    obj.insert("n".into(), json!(report.n));
    obj.insert(
        "components".into(),
        Value::Array(
            scc.components
                .iter()
                .zip(&scc.closed)
                .zip(&report.periods)
                .map(|((c, closed), p)| {
                    json!({"agents": agents(c), "closed": closed, "period": p.period, "has_cycle": p.has_cycle})
                })
                .collect(),
        ),
    );
    obj.insert(
        "condensation_order".into(),
        json!(scc.condensation_order.iter().map(|c| c + 1).collect::<Vec<_>>()),
    );
    obj.insert("roots".into(), agents(&report.roots));
    obj.insert("quasi_strong".into(), json!(report.quasi_strong));
    obj.insert("sources".into(), agents(&report.sources));
    if let Some(v) = &report.verdict {
        obj.insert("convergent".into(), json!(v.convergent));
        obj.insert("consensus".into(), json!(v.consensus));
        obj.insert("verdict".into(), verdict_value(v));
    }
    if let Some(p) = &report.p_dependence {
        obj.insert("p_dependence".into(), p_dependence_value(p));
    }
    if let Some(s) = report.stable {
        obj.insert("stable".into(), json!(s));
    }
    if let Some(c) = &report.centrality {
        let key = match c.method {
            CentralityMethod::FrenchSocialPower | CentralityMethod::AbelsonSocialPower => "social_power",
            _ => "centrality",
        };
        obj.insert(key.into(), json!(c.values));
        obj.insert(format!("{key}_method"), json!(c.method.as_str()));
    }
    if let Some(m) = &report.control_matrix {
        let rows = match &report.p_dependence {
            Some(p) => agents(&p.p_dependent),
            None => Value::Null,
        };
        obj.insert(
            "control_matrix".into(),
            json!({"rows": rows, "columns": agents(&report.control_columns), "values": rows_value(m)}),
        );
    }
    if let Some(x) = &report.final_opinions {
        obj.insert("final_opinions".into(), rows_value(x));
    }
    if !report.notes.is_empty() {
        obj.insert("notes".into(), json!(report.notes));
    }
    Value::Object(obj)
}

/// Key-sorted JSON rendering of a centrality result.
pub fn save_centrality(c: &CentralityResult) -> String {
    render_json(&centrality_value(c))
}

/// Key-sorted JSON rendering of a containment report; agent indices
/// 1-based.
pub fn save_containment(r: &ContainmentReport) -> String {
    render_json(&containment_value(r))
}

pub fn containment_value(r: &ContainmentReport) -> Value {
    let mut v = serde_json::to_value(r).expect("containment reports serialize");
    if let Some(a) = v.get_mut("agent") {
        *a = json!(a.as_u64().unwrap_or(0) + 1);
    }
    v["contained"] = json!(r.contained());
    v
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with header `t,agent_1_topic_1,...,agent_n_topic_d`. Values carry
/// 17 significant digits; discrete times are integers.
pub fn save_trajectory(traj: &Trajectory) -> String {
    let (n, d) = (traj.n(), traj.d());
    let mut out = String::from("t");
    for i in 1..=n {
        for k in 1..=d {
            out.push_str(&format!(",agent_{i}_topic_{k}"));
        }
    }
    out.push('\n');
    let discrete = traj.model.is_discrete();
    for (t, x) in traj.times.iter().zip(&traj.states) {
        if discrete {
            out.push_str(&format!("{}", *t as u64));
        } else {
            out.push_str(&sci(*t));
        }
        let m = x.as_matrix();
        for i in 0..n {
            for k in 0..d {
                out.push(',');
                out.push_str(&sci(m[(i, k)]));
            }
        }
        out.push('\n');
    }
    out
}
