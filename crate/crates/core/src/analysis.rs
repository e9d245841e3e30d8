//! Structural verdicts (convergence, consensus, asymptotic stability),
//! fixed-point formulas, centrality measures and containment checks.
//!
//! Verdicts are decided on the graph alone. Numerical spectral quantities
//! only ever serve as cross-checks.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{FjModel, ModelSpec, ModelTag, TaylorModel};
use crate::error::{Error, Result};
use crate::graph::{
    component_period, reachable_from, roots_from_components, source_nodes, strong_components, DiGraph, Period,
    StrongComponents,
};
use crate::matrix::{
    laplacian_left_null, laplacian_of, left_fixed_vector, m_matrix_solve, NonnegativeMatrix, StochasticMatrix,
};

/// `lambda_i` below `1 - PREJUDICE_TOL` marks agent `i` as prejudiced.
pub const PREJUDICE_TOL: f64 = 1e-12;
/// Seed for the random directions of the geometric containment test.
pub const CONTAINMENT_SEED: u64 = 0xC0FFEE;
pub const CONTAINMENT_DIRECTIONS: usize = 256;
pub const CONTAINMENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedComponent {
    pub nodes: Vec<usize>,
    pub period: usize,
    pub has_cycle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum VerdictReason {
    /// Unique closed component, aperiodic.
    QuasiStrongAperiodic,
    /// Every closed component aperiodic, more than one of them.
    ClosedComponentsAperiodic { count: usize },
    /// A closed component with period > 1.
    ClosedComponentPeriodic { nodes: Vec<usize>, period: usize },
    /// Continuous time, unique closed component.
    QuasiStrong,
    /// Continuous time, several closed components.
    NotQuasiStrong { closed: usize },
}

fn one_based(nodes: &[usize]) -> String {
    nodes.iter().map(|v| (v + 1).to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for VerdictReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerdictReason::QuasiStrongAperiodic => write!(f, "quasi-strong-aperiodic"),
            VerdictReason::ClosedComponentsAperiodic { count } => {
                write!(f, "closed-components-aperiodic:{count}")
            }
            VerdictReason::ClosedComponentPeriodic { nodes, period } => {
                write!(f, "closed-component-periodic:{{{}}}:period={period}", one_based(nodes))
            }
            VerdictReason::QuasiStrong => write!(f, "quasi-strong"),
            VerdictReason::NotQuasiStrong { closed } => write!(f, "not-quasi-strong:closed-components={closed}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceVerdict {
    pub convergent: bool,
    pub consensus: bool,
    pub reason: VerdictReason,
    pub closed_components: Vec<ClosedComponent>,
}

fn closed_with_periods(g: &DiGraph, scc: &StrongComponents) -> Vec<ClosedComponent> {
    scc.closed_components()
        .map(|c| {
            let p = component_period(g, c);
            ClosedComponent {
                nodes: c.to_vec(),
                period: p.period,
                has_cycle: p.has_cycle,
            }
        })
        .collect()
}

/// Discrete-time verdict on a graph: convergent iff every closed strong
/// component is aperiodic; consensus iff additionally there is only one.
pub fn discrete_verdict(g: &DiGraph) -> ConvergenceVerdict {
    let scc = strong_components(g);
    let closed = closed_with_periods(g, &scc);
    let periodic = closed.iter().find(|c| c.period > 1);
    let (convergent, consensus, reason) = match periodic {
        Some(c) => (
            false,
            false,
            VerdictReason::ClosedComponentPeriodic {
                nodes: c.nodes.clone(),
                period: c.period,
            },
        ),
        None if closed.len() == 1 => (true, true, VerdictReason::QuasiStrongAperiodic),
        None => (
            true,
            false,
            VerdictReason::ClosedComponentsAperiodic { count: closed.len() },
        ),
    };
    ConvergenceVerdict {
        convergent,
        consensus,
        reason,
        closed_components: closed,
    }
}

/// French-DeGroot verdict for a stochastic matrix.
pub fn degroot_verdict(w: &StochasticMatrix) -> ConvergenceVerdict {
    let g = DiGraph::from_matrix(w.as_matrix()).expect("stochastic matrices are nonnegative");
    discrete_verdict(&g)
}

/// Linear Abelson verdict: always convergent, consensus iff `G[A]` is
/// quasi-strongly connected.
pub fn abelson_verdict(a: &NonnegativeMatrix) -> ConvergenceVerdict {
    let g = DiGraph::from_matrix(a.as_matrix()).expect("validated nonnegative");
    let scc = strong_components(&g);
    let closed = closed_with_periods(&g, &scc);
    let consensus = closed.len() == 1;
    let reason = if consensus {
        VerdictReason::QuasiStrong
    } else {
        VerdictReason::NotQuasiStrong { closed: closed.len() }
    };
    ConvergenceVerdict {
        convergent: true,
        consensus,
        reason,
        closed_components: closed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CentralityMethod {
    FrenchSocialPower,
    AbelsonSocialPower,
    InfluenceCentrality,
    PageRank,
}

impl CentralityMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            CentralityMethod::FrenchSocialPower => "french-social-power",
            CentralityMethod::AbelsonSocialPower => "abelson-social-power",
            CentralityMethod::InfluenceCentrality => "influence-centrality",
            CentralityMethod::PageRank => "pagerank",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralityResult {
    pub method: CentralityMethod,
    pub values: Vec<f64>,
    /// `alpha` for uniform susceptibility, damping `m` for PageRank.
    pub parameter: Option<f64>,
}

/// Social power `p` of a fully regular `W`: the consensus value is
/// `p^T x(0)`.
pub fn french_social_power(w: &StochasticMatrix) -> Result<CentralityResult> {
    let verdict = degroot_verdict(w);
    if !verdict.consensus {
        return Err(Error::ConsensusNotGuaranteed {
            reason: verdict.reason.to_string(),
        });
    }
    let fv = left_fixed_vector(w)?;
    Ok(CentralityResult {
        method: CentralityMethod::FrenchSocialPower,
        values: fv.p.iter().copied().collect(),
        parameter: None,
    })
}

/// Social power of the linear Abelson model: `p^T L[A] = 0`, `p^T 1 = 1`,
/// supported on the unique closed component.
pub fn abelson_social_power(a: &NonnegativeMatrix) -> Result<CentralityResult> {
    let g = DiGraph::from_matrix(a.as_matrix())?;
    let scc = strong_components(&g);
    let (roots, quasi_strong) = roots_from_components(&scc);
    if !quasi_strong {
        return Err(Error::ConsensusNotGuaranteed {
            reason: VerdictReason::NotQuasiStrong {
                closed: scc.closed_count(),
            }
            .to_string(),
        });
    }
    let mut p = laplacian_left_null(&laplacian_of(a))?.p;
    let mut in_root = vec![false; a.dim()];
    for r in roots {
        in_root[r] = true;
    }
    for (i, v) in p.iter_mut().enumerate() {
        if !in_root[i] {
            *v = 0.0;
        }
    }
    let s = p.sum();
    p /= s;
    Ok(CentralityResult {
        method: CentralityMethod::AbelsonSocialPower,
        values: p.iter().copied().collect(),
        parameter: None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PDependence {
    pub prejudiced: Vec<usize>,
    pub p_dependent: Vec<usize>,
    pub p_independent: Vec<usize>,
}

impl PDependence {
    pub fn all_dependent(&self) -> bool {
        self.p_independent.is_empty()
    }
}

/// Agents that are prejudiced or reachable by a walk from a prejudiced one.
pub fn classify_p_dependence(g: &DiGraph, prejudiced: &[usize]) -> PDependence {
    let mut prejudiced = prejudiced.to_vec();
    prejudiced.sort_unstable();
    prejudiced.dedup();
    let p_dependent = reachable_from(g, &prejudiced);
    let mut dep = vec![false; g.node_count()];
    for &v in &p_dependent {
        dep[v] = true;
    }
    let p_independent = (0..g.node_count()).filter(|&v| !dep[v]).collect();
    PDependence {
        prejudiced,
        p_dependent,
        p_independent,
    }
}

/// Taylor agents with `gamma_i > 0`.
pub fn prejudiced_from_gamma(gamma: &[f64]) -> Vec<usize> {
    (0..gamma.len()).filter(|&i| gamma[i] > 0.0).collect()
}

/// Friedkin-Johnsen agents with `lambda_i < 1`.
pub fn prejudiced_from_lambda(lambda: &[f64]) -> Vec<usize> {
    (0..lambda.len()).filter(|&i| lambda[i] < 1.0 - PREJUDICE_TOL).collect()
}

fn sub(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Writes the rows of `dependent` and `independent` back to agent order.
fn scatter(n: usize, dep: &[usize], x1: &DMatrix<f64>, ind: &[usize], x2: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, x1.ncols().max(x2.ncols()));
    for (k, &i) in dep.iter().enumerate() {
        out.row_mut(i).copy_from(&x1.row(k));
    }
    for (k, &i) in ind.iter().enumerate() {
        out.row_mut(i).copy_from(&x2.row(k));
    }
    out
}

fn check_limit(x2: Option<&DMatrix<f64>>, rows: usize, cols: usize) -> Result<()> {
    match x2 {
        Some(m) if m.nrows() != rows || m.ncols() != cols => Err(Error::Dimension(format!(
            "limit of P-independent agents must be {rows}x{cols}, got {}x{}",
            m.nrows(),
            m.ncols()
        ))),
        _ => Ok(()),
    }
}

/// Stability and steady state of the Taylor model.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorOutcome {
    /// `-(L + Gamma)` is Hurwitz.
    pub stable: bool,
    pub partition: PDependence,
    /// `M = (L11 + Gamma11)^-1 [Gamma11, -L12]`, `r x n`, stochastic.
    /// Columns follow `column_agents`.
    pub mixing: Option<DMatrix<f64>>,
    /// P-dependent agents, then P-independent agents.
    pub column_agents: Vec<usize>,
    /// Limits of the P-dependent agents, rows in `partition.p_dependent` order.
    pub final_dependent: Option<DMatrix<f64>>,
    /// All limits in agent order, when the P-independent limits are known.
    pub final_opinions: Option<DMatrix<f64>>,
}

/// P-dependent agents converge to `M [u1; x2(inf)]`. When P-independent
/// agents exist, their limit `x2(inf)` (rows in `p_independent` order) has
/// to be supplied for the final opinions to be computed.
pub fn taylor_stability_and_final(model: &TaylorModel, x2_limit: Option<&DMatrix<f64>>) -> Result<TaylorOutcome> {
    let n = model.dim();
    let d = model.u.ncols();
    let g = DiGraph::from_matrix(model.a.as_matrix())?;
    let partition = classify_p_dependence(&g, &prejudiced_from_gamma(&model.gamma));
    let dep = partition.p_dependent.clone();
    let ind = partition.p_independent.clone();
    check_limit(x2_limit, ind.len(), d)?;
    let column_agents: Vec<usize> = dep.iter().chain(&ind).copied().collect();
    let stable = ind.is_empty();
    if dep.is_empty() {
        return Ok(TaylorOutcome {
            stable,
            partition,
            mixing: None,
            column_agents,
            final_dependent: None,
            final_opinions: None,
        });
    }
    let gen = model.generator();
    let z = sub(&gen, &dep, &dep);
    let r = dep.len();
    let mut rhs = DMatrix::zeros(r, n);
    for (k, &i) in dep.iter().enumerate() {
        rhs[(k, k)] = model.gamma[i];
    }
    for (k, &i) in dep.iter().enumerate() {
        for (c, &j) in ind.iter().enumerate() {
            // -L12 is the nonnegative block a_ij
            rhs[(k, r + c)] = -gen[(i, j)];
        }
    }
    let mixing = match m_matrix_solve(&z, &rhs) {
        Ok(s) => s.x,
        Err(Error::Singular { pivot }) => {
            return Err(Error::Internal(format!(
                "L11 + Gamma11 singular (pivot {pivot:e}) for a P-dependent block"
            )))
        }
        Err(e) => return Err(e),
    };
    let u1 = select_rows(&model.u, &dep);
    let stacked = match (ind.is_empty(), x2_limit) {
        (true, _) => Some(u1),
        (false, Some(x2)) => {
            let mut s = DMatrix::zeros(n, d);
            s.rows_mut(0, r).copy_from(&u1);
            s.rows_mut(r, n - r).copy_from(x2);
            Some(s)
        }
        (false, None) => None,
    };
    let final_dependent = stacked.map(|s| &mixing * s);
    let final_opinions = final_dependent.as_ref().map(|x1| match x2_limit {
        Some(x2) => scatter(n, &dep, x1, &ind, x2),
        None => scatter(n, &dep, x1, &ind, &DMatrix::zeros(0, d)),
    });
    Ok(TaylorOutcome {
        stable,
        partition,
        mixing: Some(mixing),
        column_agents,
        final_dependent,
        final_opinions,
    })
}

/// Stability and steady state of the Friedkin-Johnsen model.
#[derive(Debug, Clone, PartialEq)]
pub struct FjOutcome {
    /// `rho(Lambda W) < 1`.
    pub stable: bool,
    /// The P-independent block `W22` is regular (or absent).
    pub convergent: bool,
    pub partition: PDependence,
    /// `V = (I - Lambda11 W11)^-1 [I - Lambda11, Lambda11 W12]`, `r x n`.
    pub control: Option<DMatrix<f64>>,
    pub column_agents: Vec<usize>,
    pub final_dependent: Option<DMatrix<f64>>,
    pub final_opinions: Option<DMatrix<f64>>,
    /// Iterations spent on the topic-coupled fixed point, if any.
    pub coupled_iterations: Option<usize>,
}

/// Fixed-point iteration budget and tolerance for topic-coupled models.
const COUPLED_MAX_ITER: usize = 1_000_000;
const COUPLED_TOL: f64 = 1e-12;

pub fn fj_stability_and_final(model: &FjModel, x2_limit: Option<&DMatrix<f64>>) -> Result<FjOutcome> {
    if model.lambda.iter().all(|&l| l == 1.0) {
        return Err(Error::IdentitySusceptibility);
    }
    let n = model.dim();
    let d = model.u.ncols();
    let w = model.w.as_matrix();
    let g = DiGraph::from_matrix(w)?;
    let partition = classify_p_dependence(&g, &prejudiced_from_lambda(&model.lambda));
    let dep = partition.p_dependent.clone();
    let ind = partition.p_independent.clone();
    check_limit(x2_limit, ind.len(), d)?;
    let column_agents: Vec<usize> = dep.iter().chain(&ind).copied().collect();
    let stable = ind.is_empty();
    let convergent = stable || {
        let w22 = StochasticMatrix::new(sub(w, &ind, &ind))?;
        degroot_verdict(&w22).convergent
    };

    let r = dep.len();
    let lw = model.lambda_w();
    let mut z = -sub(&lw, &dep, &dep);
    for k in 0..r {
        z[(k, k)] += 1.0;
    }
    let mut rhs = DMatrix::zeros(r, n);
    for (k, &i) in dep.iter().enumerate() {
        rhs[(k, k)] = 1.0 - model.lambda[i];
        for (c, &j) in ind.iter().enumerate() {
            rhs[(k, r + c)] = lw[(i, j)];
        }
    }
    let control = m_matrix_solve(&z, &rhs)
        .map_err(|e| match e {
            Error::Singular { pivot } => Error::Internal(format!(
                "I - Lambda11 W11 singular (pivot {pivot:e}) for a P-dependent block"
            )),
            e => e,
        })?
        .x;

    let x2 = if ind.is_empty() {
        Some(DMatrix::zeros(0, d))
    } else if convergent {
        x2_limit.cloned()
    } else {
        None
    };
    let u1 = select_rows(&model.u, &dep);
    let mut coupled_iterations = None;
    let final_dependent = match (&x2, &model.c) {
        (None, _) => None,
        (Some(x2), None) => {
            let mut s = DMatrix::zeros(n, d);
            s.rows_mut(0, r).copy_from(&u1);
            s.rows_mut(r, n - r).copy_from(x2);
            Some(&control * s)
        }
        (Some(x2), Some(c)) => {
            // X1 <- Lambda11 (W11 X1 + W12 X2) C^T + (I - Lambda11) U1
            let lw11 = sub(&lw, &dep, &dep);
            let lw12 = sub(&lw, &dep, &ind);
            let anchor = select_rows(&model.anchor(), &dep);
            let drive = &lw12 * x2;
            let ct = c.as_matrix().transpose();
            let mut x = u1.clone();
            let mut iters = COUPLED_MAX_ITER;
            for it in 1..=COUPLED_MAX_ITER {
                let next = (&lw11 * &x + &drive) * &ct + &anchor;
                let diff = (&next - &x).amax();
                x = next;
                if diff < COUPLED_TOL {
                    iters = it;
                    break;
                }
            }
            coupled_iterations = Some(iters);
            Some(x)
        }
    };
    let final_opinions = match (&final_dependent, &x2) {
        (Some(x1), Some(x2)) => Some(scatter(n, &dep, x1, &ind, x2)),
        _ => None,
    };
    Ok(FjOutcome {
        stable,
        convergent,
        partition,
        control: Some(control),
        column_agents,
        final_dependent,
        final_opinions,
        coupled_iterations,
    })
}

/// Influence centrality `c = V^T 1 / n`, `V = (I - Lambda W)^-1 (I - Lambda)`.
pub fn influence_centrality(w: &StochasticMatrix, lambda: &[f64]) -> Result<CentralityResult> {
    let n = w.dim();
    if lambda.len() != n {
        return Err(Error::Dimension(format!("lambda has {} entries for {n} agents", lambda.len())));
    }
    if let Some(i) = lambda.iter().position(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::Parameter(format!("lambda[{}] = {} out of [0,1]", i + 1, lambda[i])));
    }
    let g = DiGraph::from_matrix(w.as_matrix())?;
    let part = classify_p_dependence(&g, &prejudiced_from_lambda(lambda));
    if !part.all_dependent() {
        return Err(Error::Unstable {
            reason: format!("P-independent agents {{{}}}", one_based(&part.p_independent)),
        });
    }
    let mut z = -w.as_matrix().clone();
    for (i, l) in lambda.iter().enumerate() {
        z.row_mut(i).scale_mut(*l);
        z[(i, i)] += 1.0;
    }
    let anchor = DMatrix::from_diagonal(&DVector::from_iterator(n, lambda.iter().map(|l| 1.0 - l)));
    let v = m_matrix_solve(&z, &anchor)?.x;
    let values = v.row_iter().fold(DVector::zeros(n), |acc, row| acc + row.transpose()) / n as f64;
    let uniform = lambda.windows(2).all(|p| p[0] == p[1]);
    Ok(CentralityResult {
        method: CentralityMethod::InfluenceCentrality,
        values: values.iter().copied().collect(),
        parameter: if uniform { lambda.first().copied() } else { None },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PageRankMode {
    Iterate,
    ClosedForm,
}

const PAGERANK_TOL: f64 = 1e-12;
const PAGERANK_MAX_ITER: usize = 1_000_000;

/// PageRank with teleportation probability `m`:
/// `c^T = (m / n) 1^T (I - (1 - m) W)^-1`, or the limit of
/// `p(k+1)^T = (1 - m) p(k)^T W + (m / n) 1^T` from the uniform vector.
pub fn pagerank(w: &StochasticMatrix, m: f64, mode: PageRankMode) -> Result<CentralityResult> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::Parameter(format!("damping m = {m} must lie in (0,1)")));
    }
    let n = w.dim();
    let teleport = m / n as f64;
    let p = match mode {
        PageRankMode::ClosedForm => {
            let mut z = -(w.as_matrix().transpose() * (1.0 - m));
            for i in 0..n {
                z[(i, i)] += 1.0;
            }
            let rhs = DMatrix::from_element(n, 1, teleport);
            m_matrix_solve(&z, &rhs)?.x.column(0).into_owned()
        }
        PageRankMode::Iterate => {
            let wt = w.as_matrix().transpose();
            let mut p = DVector::from_element(n, 1.0 / n as f64);
            let mut converged = false;
            let mut last_diff = f64::INFINITY;
            for _ in 0..PAGERANK_MAX_ITER {
                let mut next = &wt * &p * (1.0 - m);
                next.add_scalar_mut(teleport);
                last_diff = (&next - &p).amax();
                p = next;
                if last_diff < PAGERANK_TOL {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NotConverged {
                    iterations: PAGERANK_MAX_ITER,
                    best_residual: last_diff,
                    estimate: f64::NAN,
                });
            }
            p
        }
    };
    Ok(CentralityResult {
        method: CentralityMethod::PageRank,
        values: p.iter().copied().collect(),
        parameter: Some(m),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    /// Rows of a stochastic leader-weight matrix reproduce the positions.
    Algebraic,
    /// `d = 1`: every agent lies in `[min s, max s]`.
    Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ContainmentStatus {
    Certified { by: CertificateKind },
    /// No violating direction found among the sampled ones (necessary
    /// condition only).
    SupportTestPassed { directions: usize },
    Violated { agent: usize, direction: Vec<f64>, excess: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainmentReport {
    #[serde(flatten)]
    pub status: ContainmentStatus,
    /// A certificate was supplied but did not reproduce the positions.
    pub certificate_rejected: bool,
}

impl ContainmentReport {
    pub fn contained(&self) -> bool {
        !matches!(self.status, ContainmentStatus::Violated { .. })
    }
}

/// Checks that every row of `x_final` (`n x d`) lies in the convex hull of
/// the rows of `leaders` (`m x d`).
///
/// `certificate`, when given, is an `n x m` matrix of leader weights; if
/// its rows are convex weights and `certificate * leaders` reproduces
/// `x_final`, containment is certified exactly. Otherwise `d = 1` is
/// settled by an interval check and `d > 1` by a support-function test
/// along random unit directions.
pub fn containment_check(
    x_final: &DMatrix<f64>,
    leaders: &DMatrix<f64>,
    certificate: Option<&DMatrix<f64>>,
) -> Result<ContainmentReport> {
    let (n, d) = x_final.shape();
    if leaders.ncols() != d || leaders.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "positions are {n}x{d}, leaders are {}x{}",
            leaders.nrows(),
            leaders.ncols()
        )));
    }
    let mut certificate_rejected = false;
    if let Some(k) = certificate {
        if certificate_holds(x_final, leaders, k) {
            return Ok(ContainmentReport {
                status: ContainmentStatus::Certified {
                    by: CertificateKind::Algebraic,
                },
                certificate_rejected,
            });
        }
        certificate_rejected = true;
    }
    if d == 1 {
        let lo = leaders.column(0).min();
        let hi = leaders.column(0).max();
        let slack = CONTAINMENT_TOL * (1.0 + lo.abs().max(hi.abs()));
        for i in 0..n {
            let x = x_final[(i, 0)];
            if x > hi + slack {
                return Ok(violated(i, vec![1.0], x - hi, certificate_rejected));
            }
            if x < lo - slack {
                return Ok(violated(i, vec![-1.0], lo - x, certificate_rejected));
            }
        }
        return Ok(ContainmentReport {
            status: ContainmentStatus::Certified {
                by: CertificateKind::Interval,
            },
            certificate_rejected,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(CONTAINMENT_SEED);
    let mut worst: Option<(usize, DVector<f64>, f64)> = None;
    for _ in 0..CONTAINMENT_DIRECTIONS {
        let v = random_unit(&mut rng, d);
        let support = (leaders * &v).max();
        let proj = x_final * &v;
        for (i, &p) in proj.iter().enumerate() {
            let excess = p - support;
            if excess > CONTAINMENT_TOL && worst.as_ref().is_none_or(|w| excess > w.2) {
                worst = Some((i, v.clone(), excess));
            }
        }
    }
    Ok(match worst {
        Some((agent, direction, excess)) => {
            violated(agent, direction.iter().copied().collect(), excess, certificate_rejected)
        }
        None => ContainmentReport {
            status: ContainmentStatus::SupportTestPassed {
                directions: CONTAINMENT_DIRECTIONS,
            },
            certificate_rejected,
        },
    })
}

fn violated(agent: usize, direction: Vec<f64>, excess: f64, certificate_rejected: bool) -> ContainmentReport {
    ContainmentReport {
        status: ContainmentStatus::Violated {
            agent,
            direction,
            excess,
        },
        certificate_rejected,
    }
}

fn random_unit(rng: &mut impl Rng, d: usize) -> DVector<f64> {
    loop {
        // Box-Muller pairs give isotropic directions.
        let v = DVector::from_fn(d, |_, _| {
            let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        });
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

fn certificate_holds(x_final: &DMatrix<f64>, leaders: &DMatrix<f64>, k: &DMatrix<f64>) -> bool {
    if k.nrows() != x_final.nrows() || k.ncols() != leaders.nrows() {
        return false;
    }
    let convex = k.iter().all(|&v| v >= -1e-9) && k.row_iter().all(|r| (r.sum() - 1.0).abs() <= 1e-9);
    if !convex {
        return false;
    }
    let scale = 1.0 + leaders.amax().max(x_final.amax());
    (k * leaders - x_final).amax() <= CONTAINMENT_TOL * scale
}

/// Leader weights `K` (`n x m`) with `x(inf) = K s` for a Taylor model in
/// source form with all agents P-dependent: the mixing matrix composed
/// with the row-normalized persuasibility matrix `b`.
pub fn taylor_leader_weights(outcome: &TaylorOutcome, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !outcome.stable {
        return Err(Error::Unstable {
            reason: format!(
                "P-independent agents {{{}}}",
                one_based(&outcome.partition.p_independent)
            ),
        });
    }
    let mixing = outcome
        .mixing
        .as_ref()
        .ok_or_else(|| Error::Internal("stable Taylor outcome without mixing matrix".into()))?;
    let n = b.nrows();
    let mut bn = b.clone();
    for i in 0..n {
        let g: f64 = bn.row(i).sum();
        if g > 0.0 {
            bn.row_mut(i).scale_mut(1.0 / g);
        }
    }
    // all agents are P-dependent, so the columns of M are the u-columns
    let ordered = select_rows(&bn, &outcome.column_agents);
    let k_dep = mixing * ordered;
    Ok(scatter(n, &outcome.partition.p_dependent, &k_dep, &[], &DMatrix::zeros(0, b.ncols())))
}

/// Largest deviation of a scalar profile from the agents' best responses
/// `x_i* = lambda_i sum_j w_ij x_j + (1 - lambda_i) u_i`. Zero exactly at
/// the Friedkin-Johnsen fixed point.
pub fn nash_residual(w: &StochasticMatrix, lambda: &[f64], u: &[f64], x: &[f64]) -> Result<f64> {
    let n = w.dim();
    if lambda.len() != n || u.len() != n || x.len() != n {
        return Err(Error::Dimension(format!(
            "{n} agents but lambda/u/x have {}/{}/{} entries",
            lambda.len(),
            u.len(),
            x.len()
        )));
    }
    let wm = w.as_matrix();
    Ok((0..n)
        .map(|i| {
            let pooled: f64 = (0..n).map(|j| wm[(i, j)] * x[j]).sum();
            let best = lambda[i] * pooled + (1.0 - lambda[i]) * u[i];
            (x[i] - best).abs()
        })
        .fold(0.0, f64::max))
}

/// Structural facts and verdicts for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub model: ModelTag,
    pub n: usize,
    pub components: StrongComponents,
    pub periods: Vec<Period>,
    pub roots: Vec<usize>,
    pub quasi_strong: bool,
    pub sources: Vec<usize>,
    pub verdict: Option<ConvergenceVerdict>,
    pub p_dependence: Option<PDependence>,
    pub stable: Option<bool>,
    pub centrality: Option<CentralityResult>,
    /// Mixing (Taylor) or control (Friedkin-Johnsen) matrix.
    pub control_matrix: Option<DMatrix<f64>>,
    pub control_columns: Vec<usize>,
    pub final_opinions: Option<DMatrix<f64>>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Depth {
    /// Graph-theoretic verdicts only.
    Verdicts,
    /// Verdicts plus centralities and steady states.
    Full,
}

fn influence_graph(spec: &ModelSpec) -> Result<DiGraph> {
    match spec {
        ModelSpec::DeGroot { w } => DiGraph::from_matrix(w.as_matrix()),
        ModelSpec::Abelson { a, .. } => DiGraph::from_matrix(a.as_matrix()),
        ModelSpec::Taylor(t) => DiGraph::from_matrix(t.a.as_matrix()),
        ModelSpec::FriedkinJohnsen(f) => DiGraph::from_matrix(f.w.as_matrix()),
    }
}

pub fn analyze(spec: &ModelSpec, depth: Depth) -> Result<AnalysisReport> {
    let g = influence_graph(spec)?;
    let components = strong_components(&g);
    let periods = components.components.iter().map(|c| component_period(&g, c)).collect();
    let (roots, quasi_strong) = roots_from_components(&components);
    let mut report = AnalysisReport {
        model: spec.tag(),
        n: g.node_count(),
        periods,
        roots,
        quasi_strong,
        sources: source_nodes(&g),
        components,
        verdict: None,
        p_dependence: None,
        stable: None,
        centrality: None,
        control_matrix: None,
        control_columns: Vec::new(),
        final_opinions: None,
        notes: Vec::new(),
    };
    match spec {
        ModelSpec::DeGroot { w } => {
            let verdict = discrete_verdict(&g);
            if depth == Depth::Full {
                if verdict.consensus {
                    report.centrality = Some(french_social_power(w)?);
                } else {
                    report.notes.push(format!("social power undefined: {}", verdict.reason));
                }
            }
            report.verdict = Some(verdict);
        }
        ModelSpec::Abelson { a, coupling: None } => {
            let verdict = abelson_verdict(a);
            if depth == Depth::Full && verdict.consensus {
                report.centrality = Some(abelson_social_power(a)?);
            }
            report.verdict = Some(verdict);
        }
        ModelSpec::Abelson { coupling: Some(_), .. } => {
            report
                .notes
                .push("nonlinear coupling: no convergence verdict is rendered".into());
        }
        ModelSpec::Taylor(t) => {
            let part = classify_p_dependence(&g, &prejudiced_from_gamma(&t.gamma));
            report.stable = Some(part.all_dependent());
            if depth == Depth::Full {
                let out = taylor_stability_and_final(t, None)?;
                report.control_matrix = out.mixing;
                report.control_columns = out.column_agents;
                report.final_opinions = out.final_opinions;
                if !part.all_dependent() {
                    report
                        .notes
                        .push("final opinions depend on the initial opinions of P-independent agents".into());
                }
            }
            report.p_dependence = Some(part);
        }
        ModelSpec::FriedkinJohnsen(f) => {
            if f.lambda.iter().all(|&l| l == 1.0) {
                report
                    .notes
                    .push("lambda = I: the model is French-DeGroot".into());
                let verdict = discrete_verdict(&g);
                if depth == Depth::Full && verdict.consensus {
                    report.centrality = Some(french_social_power(&f.w)?);
                }
                report.verdict = Some(verdict);
                return Ok(report);
            }
            let part = classify_p_dependence(&g, &prejudiced_from_lambda(&f.lambda));
            report.stable = Some(part.all_dependent());
            if depth == Depth::Full {
                let out = fj_stability_and_final(f, None)?;
                if !out.convergent {
                    report.notes.push("P-independent block W22 is not regular: not convergent".into());
                }
                if out.stable && f.c.is_none() {
                    report.centrality = Some(influence_centrality(&f.w, &f.lambda)?);
                }
                report.control_matrix = out.control;
                report.control_columns = out.column_agents;
                report.final_opinions = out.final_opinions;
            }
            report.p_dependence = Some(part);
        }
    }
    Ok(report)
}
