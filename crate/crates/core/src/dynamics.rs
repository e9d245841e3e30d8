//! Trajectory simulators for the French-DeGroot, Abelson, Taylor and
//! Friedkin-Johnsen models, scalar and multidimensional.
//!
//! Opinions are `n x d` matrices: row `i` is agent `i`'s opinion on the
//! `d` topics.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{reachable_from, DiGraph};
use crate::matrix::{laplacian_of, matrix_exponential, m_matrix_solve, NonnegativeMatrix, StochasticMatrix};

/// Default early-stop tolerance on `||X(k+1) - X(k)||_inf`.
pub const DEFAULT_STOP_TOL: f64 = 1e-10;
/// Default step for continuous-time runs.
pub const DEFAULT_DT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct OpinionState(DMatrix<f64>);

impl OpinionState {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::Dimension("opinions need at least one topic".into()));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let n = values.nrows();
            return Err(Error::NonFinite { row: k % n, col: k / n });
        }
        Ok(Self(values))
    }

    /// One topic, one value per agent.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(values.len(), 1, values))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn d(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelTag {
    DeGroot,
    Abelson,
    AbelsonNonlinear,
    Taylor,
    FriedkinJohnsen,
}

impl ModelTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTag::DeGroot => "degroot",
            ModelTag::Abelson => "abelson",
            ModelTag::AbelsonNonlinear => "abelson-nonlinear",
            ModelTag::Taylor => "taylor",
            ModelTag::FriedkinJohnsen => "fj",
        }
    }

    pub const ALL: [ModelTag; 5] = [
        ModelTag::DeGroot,
        ModelTag::Abelson,
        ModelTag::AbelsonNonlinear,
        ModelTag::Taylor,
        ModelTag::FriedkinJohnsen,
    ];

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == name)
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ModelTag::DeGroot | ModelTag::FriedkinJohnsen)
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Coupling function `g(a, b)` of the nonlinear Abelson model, with range
/// in `(0, 1]`.
#[derive(Clone)]
pub enum Coupling {
    /// `g = 1`
    Constant,
    /// `g = 1 / (1 + (a - b)^2)`
    InverseQuadratic,
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl Coupling {
    pub const BUILTIN: [&'static str; 2] = ["constant-1", "inverse-quadratic"];

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "constant-1" => Some(Coupling::Constant),
            "inverse-quadratic" => Some(Coupling::InverseQuadratic),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Coupling::Constant => "constant-1",
            Coupling::InverseQuadratic => "inverse-quadratic",
            Coupling::Custom(_) => "custom",
        }
    }

    pub fn eval(&self, a: f64, b: f64) -> f64 {
        match self {
            Coupling::Constant => 1.0,
            Coupling::InverseQuadratic => 1.0 / (1.0 + (a - b) * (a - b)),
            Coupling::Custom(g) => g(a, b),
        }
    }
}

impl fmt::Debug for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coupling({})", self.name())
    }
}

/// Taylor model in prejudice form: `dx/dt = -(L[A] + Gamma) x + Gamma u`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorModel {
    pub a: NonnegativeMatrix,
    pub gamma: Vec<f64>,
    pub u: DMatrix<f64>,
}

impl TaylorModel {
    pub fn new(a: NonnegativeMatrix, gamma: Vec<f64>, u: DMatrix<f64>) -> Result<Self> {
        let n = a.dim();
        if gamma.len() != n || u.nrows() != n {
            return Err(Error::Dimension(format!(
                "A is {n}x{n}, gamma has {} entries, u has {} rows",
                gamma.len(),
                u.nrows()
            )));
        }
        if u.ncols() == 0 {
            return Err(Error::Dimension("u needs at least one topic".into()));
        }
        if let Some(i) = gamma.iter().position(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::Parameter(format!("gamma[{}] = {} must be >= 0", i + 1, gamma[i])));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("u has non-finite entries".into()));
        }
        Ok(Self { a, gamma, u })
    }

    /// Reduces the communication-source form with persuasibility matrix
    /// `b` (`n x m`) and source opinions `s` (`m x d`):
    /// `gamma_i = sum_k b_ik`, `u_i = sum_k b_ik s_k / gamma_i` (`u_i = 0`
    /// when `gamma_i = 0`).
    pub fn from_sources(a: NonnegativeMatrix, b: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<Self> {
        let n = a.dim();
        if b.nrows() != n || b.ncols() != s.nrows() {
            return Err(Error::Dimension(format!(
                "B is {}x{}, expected {n} rows and one column per source ({} sources)",
                b.nrows(),
                b.ncols(),
                s.nrows()
            )));
        }
        if let Some(k) = b.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::NegativeEntry {
                row: k % n.max(1),
                col: k / n.max(1),
                value: b.iter().nth(k).copied().unwrap_or(f64::NAN),
            });
        }
        let gamma: Vec<f64> = b.row_iter().map(|r| r.sum()).collect();
        let mut u = b * s;
        for (i, g) in gamma.iter().enumerate() {
            if *g > 0.0 {
                u.row_mut(i).scale_mut(1.0 / g);
            } else {
                u.row_mut(i).fill(0.0);
            }
        }
        Self::new(a, gamma, u)
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// `L[A] + Gamma`
    pub fn generator(&self) -> DMatrix<f64> {
        let mut m = laplacian_of(&self.a).as_matrix().clone();
        for (i, g) in self.gamma.iter().enumerate() {
            m[(i, i)] += g;
        }
        m
    }
}

/// Friedkin-Johnsen model `X(k+1) = Lambda W X(k) C^T + (I - Lambda) U`.
/// Without `C` the topics evolve independently.
#[derive(Debug, Clone, PartialEq)]
pub struct FjModel {
    pub w: StochasticMatrix,
    pub lambda: Vec<f64>,
    pub u: DMatrix<f64>,
    pub c: Option<StochasticMatrix>,
}

impl FjModel {
    pub fn new(w: StochasticMatrix, lambda: Vec<f64>, u: DMatrix<f64>, c: Option<StochasticMatrix>) -> Result<Self> {
        let n = w.dim();
        if lambda.len() != n || u.nrows() != n {
            return Err(Error::Dimension(format!(
                "W is {n}x{n}, lambda has {} entries, u has {} rows",
                lambda.len(),
                u.nrows()
            )));
        }
        if u.ncols() == 0 {
            return Err(Error::Dimension("u needs at least one topic".into()));
        }
        if let Some(i) = lambda.iter().position(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::Parameter(format!("lambda[{}] = {} out of [0,1]", i + 1, lambda[i])));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("u has non-finite entries".into()));
        }
        if let Some(c) = &c {
            if c.dim() != u.ncols() {
                return Err(Error::Dimension(format!(
                    "C is {0}x{0} but opinions have {1} topics",
                    c.dim(),
                    u.ncols()
                )));
            }
        }
        Ok(Self { w, lambda, u, c })
    }

    /// Scalar model with a single topic.
    pub fn scalar(w: StochasticMatrix, lambda: Vec<f64>, u: &[f64]) -> Result<Self> {
        Self::new(w, lambda, DMatrix::from_column_slice(u.len(), 1, u), None)
    }

    pub fn dim(&self) -> usize {
        self.w.dim()
    }

    /// `Lambda W`
    pub fn lambda_w(&self) -> DMatrix<f64> {
        let mut m = self.w.as_matrix().clone();
        for (i, l) in self.lambda.iter().enumerate() {
            m.row_mut(i).scale_mut(*l);
        }
        m
    }

    /// `(I - Lambda) U`
    pub fn anchor(&self) -> DMatrix<f64> {
        let mut m = self.u.clone();
        for (i, l) in self.lambda.iter().enumerate() {
            m.row_mut(i).scale_mut(1.0 - l);
        }
        m
    }
}

#[derive(Debug, Clone)]
pub enum ModelSpec {
    DeGroot { w: StochasticMatrix },
    Abelson { a: NonnegativeMatrix, coupling: Option<Coupling> },
    Taylor(TaylorModel),
    FriedkinJohnsen(FjModel),
}

impl ModelSpec {
    pub fn tag(&self) -> ModelTag {
        match self {
            ModelSpec::DeGroot { .. } => ModelTag::DeGroot,
            ModelSpec::Abelson { coupling: None, .. } => ModelTag::Abelson,
            ModelSpec::Abelson { coupling: Some(_), .. } => ModelTag::AbelsonNonlinear,
            ModelSpec::Taylor(_) => ModelTag::Taylor,
            ModelSpec::FriedkinJohnsen(_) => ModelTag::FriedkinJohnsen,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::DeGroot { w } => w.dim(),
            ModelSpec::Abelson { a, .. } => a.dim(),
            ModelSpec::Taylor(t) => t.dim(),
            ModelSpec::FriedkinJohnsen(f) => f.dim(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    StepLimit,
    PeriodicOrbitSuspected,
    HorizonReached,
    NonFinite,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::StepLimit => "step-limit",
            StopReason::PeriodicOrbitSuspected => "periodic-orbit-suspected",
            StopReason::HorizonReached => "horizon-reached",
            StopReason::NonFinite => "non-finite",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Discrete,
    ExactExpm,
    Rk4,
    /// Exact stepping was requested but `L + Gamma` is singular.
    Rk4Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContinuousMethod {
    ExactExpm,
    Rk4,
}

impl ContinuousMethod {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "exact" | "expm" | "exact-expm" => Some(Self::ExactExpm),
            "rk4" => Some(Self::Rk4),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub model: ModelTag,
    /// Step indices for discrete models, times for continuous ones.
    pub times: Vec<f64>,
    pub states: Vec<OpinionState>,
    pub dt: Option<f64>,
    pub stop: StopReason,
    pub integrator: Integrator,
}

impl Trajectory {
    pub fn last(&self) -> &OpinionState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n(&self) -> usize {
        self.states[0].n()
    }

    pub fn d(&self) -> usize {
        self.states[0].d()
    }
}

fn check_rows(expected: usize, x: &OpinionState) -> Result<()> {
    if x.n() == expected {
        Ok(())
    } else {
        Err(Error::Dimension(format!("model has {expected} agents, state has {} rows", x.n())))
    }
}

fn sup_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Iterates `step` from `x0`, stopping once successive states differ by
/// less than `tol` in the sup-norm. At the step limit a period-two
/// return (`||X(k) - X(k-2)|| < tol`) is reported as a suspected orbit.
fn run_discrete(
    model: ModelTag,
    x0: &OpinionState,
    k_max: usize,
    tol: f64,
    step: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
) -> Trajectory {
    let mut states = vec![x0.clone()];
    let mut stop = StopReason::StepLimit;
    for _ in 0..k_max {
        let prev = states.last().unwrap().as_matrix();
        let next = step(prev);
        if next.iter().any(|v| !v.is_finite()) {
            stop = StopReason::NonFinite;
            break;
        }
        let diff = sup_diff(&next, prev);
        states.push(OpinionState(next));
        if diff < tol {
            stop = StopReason::Converged;
            break;
        }
    }
    if stop == StopReason::StepLimit && states.len() >= 3 {
        let k = states.len() - 1;
        if sup_diff(states[k].as_matrix(), states[k - 2].as_matrix()) < tol {
            stop = StopReason::PeriodicOrbitSuspected;
        }
    }
    Trajectory {
        model,
        times: (0..states.len()).map(|k| k as f64).collect(),
        states,
        dt: None,
        stop,
        integrator: Integrator::Discrete,
    }
}

/// `X' = W X`
pub fn degroot_step(w: &StochasticMatrix, x: &OpinionState) -> Result<OpinionState> {
    check_rows(w.dim(), x)?;
    Ok(OpinionState(w.as_matrix() * x.as_matrix()))
}

pub fn degroot_simulate(w: &StochasticMatrix, x0: &OpinionState, k_max: usize, early_stop_tol: f64) -> Result<Trajectory> {
    check_rows(w.dim(), x0)?;
    let w = w.as_matrix();
    Ok(run_discrete(ModelTag::DeGroot, x0, k_max, early_stop_tol, |x| w * x))
}

/// `X' = Lambda W X C^T + (I - Lambda) U`
pub fn fj_step(model: &FjModel, x: &OpinionState) -> Result<OpinionState> {
    check_rows(model.dim(), x)?;
    if x.d() != model.u.ncols() {
        return Err(Error::Dimension(format!(
            "prejudices have {} topics, state has {}",
            model.u.ncols(),
            x.d()
        )));
    }
    let lw = model.lambda_w();
    let anchor = model.anchor();
    Ok(OpinionState(fj_map(&lw, model.c.as_ref(), &anchor, x.as_matrix())))
}

fn fj_map(lw: &DMatrix<f64>, c: Option<&StochasticMatrix>, anchor: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mixed = lw * x;
    match c {
        Some(c) => mixed * c.as_matrix().transpose() + anchor,
        None => mixed + anchor,
    }
}

pub fn fj_simulate(model: &FjModel, x0: &OpinionState, k_max: usize, early_stop_tol: f64) -> Result<Trajectory> {
    check_rows(model.dim(), x0)?;
    if x0.d() != model.u.ncols() {
        return Err(Error::Dimension(format!(
            "prejudices have {} topics, state has {}",
            model.u.ncols(),
            x0.d()
        )));
    }
    let lw = model.lambda_w();
    let anchor = model.anchor();
    let c = model.c.as_ref();
    Ok(run_discrete(ModelTag::FriedkinJohnsen, x0, k_max, early_stop_tol, |x| {
        fj_map(&lw, c, &anchor, x)
    }))
}

fn check_horizon(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::Parameter(format!("horizon must be >= 0, got {horizon}")));
    }
    Ok((horizon / dt + 1e-9).floor() as usize)
}

fn rk4_step(f: &impl Fn(&DMatrix<f64>) -> DMatrix<f64>, x: &DMatrix<f64>, dt: f64) -> DMatrix<f64> {
    let k1 = f(x);
    let k2 = f(&(x + &k1 * (dt / 2.0)));
    let k3 = f(&(x + &k2 * (dt / 2.0)));
    let k4 = f(&(x + &k3 * dt));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

fn run_continuous(
    model: ModelTag,
    integrator: Integrator,
    x0: &OpinionState,
    steps: usize,
    dt: f64,
    step: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
) -> Trajectory {
    let mut states = vec![x0.clone()];
    let mut stop = StopReason::HorizonReached;
    for _ in 0..steps {
        let next = step(states.last().unwrap().as_matrix());
        if next.iter().any(|v| !v.is_finite()) {
            stop = StopReason::NonFinite;
            break;
        }
        states.push(OpinionState(next));
    }
    Trajectory {
        model,
        times: (0..states.len()).map(|k| k as f64 * dt).collect(),
        states,
        dt: Some(dt),
        stop,
        integrator,
    }
}

/// Linear Abelson model `dx/dt = -L[A] x`, sampled at multiples of `dt` up
/// to `horizon`. The exact method applies `exp(-L dt)`, computed once.
pub fn abelson_simulate_linear(
    a: &NonnegativeMatrix,
    x0: &OpinionState,
    horizon: f64,
    dt: f64,
    method: ContinuousMethod,
) -> Result<Trajectory> {
    check_rows(a.dim(), x0)?;
    let steps = check_horizon(horizon, dt)?;
    let l = laplacian_of(a).as_matrix().clone();
    match method {
        ContinuousMethod::ExactExpm => {
            let e = matrix_exponential(&(-&l), dt)?;
            Ok(run_continuous(ModelTag::Abelson, Integrator::ExactExpm, x0, steps, dt, |x| &e * x))
        }
        ContinuousMethod::Rk4 => {
            let f = |x: &DMatrix<f64>| -(&l * x);
            Ok(run_continuous(ModelTag::Abelson, Integrator::Rk4, x0, steps, dt, |x| rk4_step(&f, x, dt)))
        }
    }
}

/// Nonlinear Abelson model
/// `dx_i/dt = sum_{j != i} a_ij g(x_i, x_j) (x_j - x_i)` by fixed-step RK4,
/// applied to each topic independently. A non-finite state stops the run
/// with the last finite state kept.
pub fn abelson_simulate_nonlinear(
    a: &NonnegativeMatrix,
    coupling: &Coupling,
    x0: &OpinionState,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    check_rows(a.dim(), x0)?;
    let steps = check_horizon(horizon, dt)?;
    let am = a.as_matrix();
    let n = am.nrows();
    let f = |x: &DMatrix<f64>| {
        DMatrix::from_fn(n, x.ncols(), |i, topic| {
            let xi = x[(i, topic)];
            (0..n)
                .filter(|&j| j != i && am[(i, j)] > 0.0)
                .map(|j| {
                    let xj = x[(j, topic)];
                    am[(i, j)] * coupling.eval(xi, xj) * (xj - xi)
                })
                .sum()
        })
    };
    Ok(run_continuous(ModelTag::AbelsonNonlinear, Integrator::Rk4, x0, steps, dt, |x| {
        rk4_step(&f, x, dt)
    }))
}

/// Whether every agent is prejudiced or reachable from a prejudiced agent
/// in `G[A]`; exactly the case where `L + Gamma` is nonsingular.
pub(crate) fn taylor_all_dependent(model: &TaylorModel) -> Result<bool> {
    let g = DiGraph::from_matrix(model.a.as_matrix())?;
    let prejudiced: Vec<usize> = (0..model.dim()).filter(|&i| model.gamma[i] > 0.0).collect();
    Ok(reachable_from(&g, &prejudiced).len() == model.dim())
}

/// Taylor model `dx/dt = -(L + Gamma) x + Gamma u`. The exact method steps
/// `X <- E X + (I - E) x_bar` with `E = exp(-(L + Gamma) dt)` and
/// `(L + Gamma) x_bar = Gamma u`; if some agent is P-independent that
/// system is singular and the run falls back to RK4.
pub fn taylor_simulate(
    model: &TaylorModel,
    x0: &OpinionState,
    horizon: f64,
    dt: f64,
    method: ContinuousMethod,
) -> Result<Trajectory> {
    check_rows(model.dim(), x0)?;
    if x0.d() != model.u.ncols() {
        return Err(Error::Dimension(format!(
            "prejudices have {} topics, state has {}",
            model.u.ncols(),
            x0.d()
        )));
    }
    let steps = check_horizon(horizon, dt)?;
    let gen = model.generator();
    let mut gamma_u = model.u.clone();
    for (i, g) in model.gamma.iter().enumerate() {
        gamma_u.row_mut(i).scale_mut(*g);
    }
    let exact = method == ContinuousMethod::ExactExpm && taylor_all_dependent(model)?;
    if exact {
        let e = matrix_exponential(&(-&gen), dt)?;
        let x_bar = m_matrix_solve(&gen, &gamma_u)?.x;
        let offset = (DMatrix::identity(model.dim(), model.dim()) - &e) * x_bar;
        return Ok(run_continuous(ModelTag::Taylor, Integrator::ExactExpm, x0, steps, dt, |x| {
            &e * x + &offset
        }));
    }
    let integrator = if method == ContinuousMethod::ExactExpm {
        Integrator::Rk4Fallback
    } else {
        Integrator::Rk4
    };
    let f = |x: &DMatrix<f64>| &gamma_u - &gen * x;
    Ok(run_continuous(ModelTag::Taylor, integrator, x0, steps, dt, |x| rk4_step(&f, x, dt)))
}
