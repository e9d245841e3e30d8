//! Directed weighted graphs of influence matrices and the structural
//! algorithms the convergence criteria rely on.
//!
//! A nonnegative matrix `A` is read with the convention that the arc
//! `(i, j)` exists iff `a[j][i] > 0`: agent `i` influences agent `j`.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Arc {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiGraph {
    n: usize,
    arcs: Vec<Arc>,
    successors: Vec<Vec<usize>>,
    predecessors: Vec<Vec<usize>>,
}

impl DiGraph {
    /// Graph with `n` nodes and no arcs.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            arcs: Vec::new(),
            successors: vec![Vec::new(); n],
            predecessors: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from explicit arcs. Weights must be positive and
    /// each `(source, target)` pair may appear once.
    pub fn from_arcs(n: usize, arcs: impl IntoIterator<Item = Arc>) -> Result<Self> {
        let mut g = Self::empty(n);
        for arc in arcs {
            g.add_arc(arc)?;
        }
        g.sort_adjacency();
        Ok(g)
    }

    /// Graph of a square nonnegative matrix: arc `(i, j)` with weight
    /// `a[j][i]` iff that entry is positive. Zero entries never create arcs.
    pub fn from_matrix(a: &DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let n = a.nrows();
        let mut g = Self::empty(n);
        for row in 0..n {
            for col in 0..n {
                let v = a[(row, col)];
                if !v.is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry { row, col, value: v });
                }
                if v > 0.0 {
                    g.push_arc(Arc {
                        source: col,
                        target: row,
                        weight: v,
                    });
                }
            }
        }
        g.sort_adjacency();
        Ok(g)
    }

    fn add_arc(&mut self, arc: Arc) -> Result<()> {
        if arc.source >= self.n || arc.target >= self.n {
            return Err(Error::InvalidArc(format!(
                "arc {} -> {} outside node range 1..={}",
                arc.source + 1,
                arc.target + 1,
                self.n
            )));
        }
        if !(arc.weight > 0.0) || !arc.weight.is_finite() {
            return Err(Error::InvalidArc(format!(
                "arc {} -> {} has non-positive weight {}",
                arc.source + 1,
                arc.target + 1,
                arc.weight
            )));
        }
        if self.successors[arc.source].contains(&arc.target) {
            return Err(Error::InvalidArc(format!(
                "duplicate arc {} -> {}",
                arc.source + 1,
                arc.target + 1
            )));
        }
        self.push_arc(arc);
        Ok(())
    }

    fn push_arc(&mut self, arc: Arc) {
        self.successors[arc.source].push(arc.target);
        self.predecessors[arc.target].push(arc.source);
        self.arcs.push(arc);
    }

    fn sort_adjacency(&mut self) {
        for s in &mut self.successors {
            s.sort_unstable();
        }
        for p in &mut self.predecessors {
            p.sort_unstable();
        }
        self.arcs.sort_by_key(|a| (a.source, a.target));
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.successors[v]
    }

    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.predecessors[v]
    }

    pub fn has_arc(&self, source: usize, target: usize) -> bool {
        self.successors[source].binary_search(&target).is_ok()
    }

    /// Induced subgraph on `nodes`, relabelled `0..nodes.len()` in the
    /// given order.
    pub fn induced(&self, nodes: &[usize]) -> DiGraph {
        let mut index = vec![usize::MAX; self.n];
        for (k, &v) in nodes.iter().enumerate() {
            index[v] = k;
        }
        let mut g = DiGraph::empty(nodes.len());
        for arc in &self.arcs {
            let (s, t) = (index[arc.source], index[arc.target]);
            if s != usize::MAX && t != usize::MAX {
                g.push_arc(Arc {
                    source: s,
                    target: t,
                    weight: arc.weight,
                });
            }
        }
        g.sort_adjacency();
        g
    }
}

/// Maximal strongly connected components of a graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongComponents {
    /// Components in reverse topological order of the condensation; nodes
    /// within a component are sorted.
    pub components: Vec<Vec<usize>>,
    /// `closed[c]` iff no arc enters component `c` from another component.
    pub closed: Vec<bool>,
    /// Component indices in topological order of the condensation.
    pub condensation_order: Vec<usize>,
    /// Component index of every node.
    pub membership: Vec<usize>,
}

impl StrongComponents {
    pub fn closed_components(&self) -> impl Iterator<Item = &[usize]> {
        self.components
            .iter()
            .zip(&self.closed)
            .filter(|(_, &c)| c)
            .map(|(comp, _)| comp.as_slice())
    }

    pub fn closed_count(&self) -> usize {
        self.closed.iter().filter(|&&c| c).count()
    }
}

/// Iterative Tarjan. DFS roots are taken in increasing node order and
/// successors are visited in increasing order, so the output is a pure
/// function of the graph.
pub fn strong_components(g: &DiGraph) -> StrongComponents {
    const UNVISITED: usize = usize::MAX;
    let n = g.node_count();
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut next_index = 0usize;
    // (node, position in successor list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        lowlink[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            let succ = g.successors(v);
            if *pos < succ.len() {
                let w = succ[*pos];
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    lowlink[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                lowlink[parent] = lowlink[parent].min(lowlink[v]);
            }
            if lowlink[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                components.push(comp);
            }
        }
    }

    let mut membership = vec![0usize; n];
    for (c, comp) in components.iter().enumerate() {
        for &v in comp {
            membership[v] = c;
        }
    }
    let mut closed = vec![true; components.len()];
    for arc in g.arcs() {
        let (cs, ct) = (membership[arc.source], membership[arc.target]);
        if cs != ct {
            closed[ct] = false;
        }
    }
    let condensation_order = (0..components.len()).rev().collect();
    StrongComponents {
        components,
        closed,
        condensation_order,
        membership,
    }
}

/// Root nodes (nodes with walks to every other node) and whether the graph
/// is quasi-strongly connected. Roots exist iff there is exactly one closed
/// strong component, and then they are its nodes.
pub fn roots_and_quasi_strong(g: &DiGraph) -> (Vec<usize>, bool) {
    let scc = strong_components(g);
    roots_from_components(&scc)
}

pub(crate) fn roots_from_components(scc: &StrongComponents) -> (Vec<usize>, bool) {
    let mut closed = scc.closed_components();
    match (closed.next(), closed.next()) {
        (Some(only), None) => (only.to_vec(), true),
        _ => (Vec::new(), false),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Period {
    /// gcd of the cycle lengths; 1 when the component has no cycle.
    pub period: usize,
    pub has_cycle: bool,
}

impl Period {
    pub fn is_aperiodic(&self) -> bool {
        self.period == 1
    }
}

/// Period of a strong component, by BFS levels from its smallest node:
/// the gcd over intra-component arcs `(u, v)` of `|level(u) + 1 - level(v)|`.
pub fn component_period(g: &DiGraph, component: &[usize]) -> Period {
    if component.is_empty() {
        return Period {
            period: 1,
            has_cycle: false,
        };
    }
    let mut inside = vec![false; g.node_count()];
    for &v in component {
        inside[v] = true;
    }
    let start = *component.iter().min().unwrap();
    let mut level = vec![usize::MAX; g.node_count()];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in g.successors(u) {
            if inside[v] && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut h = 0usize;
    for &u in component {
        for &v in g.successors(u) {
            if inside[v] {
                let diff = (level[u] + 1).abs_diff(level[v]);
                h = gcd(h, diff);
            }
        }
    }
    if h == 0 {
        Period {
            period: 1,
            has_cycle: false,
        }
    } else {
        Period {
            period: h,
            has_cycle: true,
        }
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Nodes whose only incoming arc, if any, is a self-loop.
pub fn source_nodes(g: &DiGraph) -> Vec<usize> {
    (0..g.node_count())
        .filter(|&v| g.predecessors(v).iter().all(|&u| u == v))
        .collect()
}

/// `seed` together with every node reachable from it by a walk, sorted.
pub fn reachable_from(g: &DiGraph, seed: &[usize]) -> Vec<usize> {
    let mut seen = vec![false; g.node_count()];
    let mut queue = VecDeque::new();
    for &s in seed {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &v in g.successors(u) {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen.iter()
        .enumerate()
        .filter_map(|(v, &s)| s.then_some(v))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}
