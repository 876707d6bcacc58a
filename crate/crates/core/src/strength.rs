//! Strength of connection.
//!
//! Two measures live here: the classical M-matrix rule on the entries of `A`,
//! and the algebraic distance `r_ij`, the reciprocal of the error left by the
//! best one-point least-squares interpolation of the (relaxation-corrected)
//! test-vector values at `i` from the values at `j`.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::split::CfSplit;
use crate::tv::TestVectorSet;

/// Relative floor applied to least-squares values before inverting them.
pub const DISTANCE_FLOOR: f64 = 1e-14;

/// How the depth-`d` strength graph is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    /// Distances to every vertex within graph distance `d`, thresholded once.
    #[default]
    Direct,
    /// Threshold the distance-1 graph, then connect vertices joined by a
    /// path of at most `d` strong edges.
    Power,
}

/// Target used by the least-squares fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitTarget {
    /// `v_i - r_i / a_ii`: the test vector after a local Jacobi correction.
    #[default]
    ResidualCorrected,
    /// `v_i` as is.
    Plain,
}

/// Test-vector data laid out per vertex for the local least-squares problems.
///
/// `values[i * k + κ]` holds `v_i^(κ)` and `targets[i * k + κ]` the fit target
/// at `i`, so every local problem reads contiguous memory.
#[derive(Debug, Clone)]
pub struct LsContext {
    k: usize,
    weights: Vec<f64>,
    values: Vec<f64>,
    targets: Vec<f64>,
    target_energy: Vec<f64>,
}

impl LsContext {
    pub fn new(tvs: &TestVectorSet, a: &CsrMatrix) -> Result<Self> {
        Self::with_target(tvs, a, FitTarget::ResidualCorrected)
    }

    pub fn with_target(tvs: &TestVectorSet, a: &CsrMatrix, target: FitTarget) -> Result<Self> {
        let n = a.n_rows();
        if tvs.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: tvs.n(),
            });
        }
        let k = tvs.k();
        let mut values = vec![0.0; n * k];
        for (kappa, v) in tvs.vectors().iter().enumerate() {
            for (i, &x) in v.iter().enumerate() {
                values[i * k + kappa] = x;
            }
        }
        let mut targets = values.clone();
        if target == FitTarget::ResidualCorrected {
            for i in 0..n {
                let (cols, vals) = a.row(i);
                let mut diag = 0.0;
                let mut residual = vec![0.0; k];
                for (&j, &aij) in cols.iter().zip(vals) {
                    if j == i {
                        diag = aij;
                    }
                    for (r, &vj) in residual.iter_mut().zip(&values[j * k..(j + 1) * k]) {
                        *r += aij * vj;
                    }
                }
                if diag == 0.0 {
                    return Err(Error::ZeroDiagonal { row: i });
                }
                for (t, r) in targets[i * k..(i + 1) * k].iter_mut().zip(&residual) {
                    *t -= r / diag;
                }
            }
        }
        let weights = tvs.weights().to_vec();
        let target_energy = (0..n)
            .map(|i| {
                targets[i * k..(i + 1) * k]
                    .iter()
                    .zip(&weights)
                    .map(|(t, w)| w * t * t)
                    .sum()
            })
            .collect();
        Ok(Self {
            k,
            weights,
            values,
            targets,
            target_energy,
        })
    }

    /// `sum_k w_k (v_i - t_i)^2`: energy of the local Jacobi correction at `i`.
    pub fn correction_energy(&self, i: usize) -> f64 {
        let k = self.k;
        (0..k).map(|c| self.weights[c] * (self.values[i * k + c] - self.targets[i * k + c]).powi(2)).sum()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.target_energy.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Test-vector values at vertex `i`, one per vector.
    pub fn values(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    /// Fit targets at vertex `i`, one per vector.
    pub fn targets(&self, i: usize) -> &[f64] {
        &self.targets[i * self.k..(i + 1) * self.k]
    }

    /// `sum_κ ω_κ t_i^(κ)^2`, the value of the functional for an empty set.
    pub fn target_energy(&self, i: usize) -> f64 {
        self.target_energy[i]
    }

    /// Best single coefficient `p` interpolating `i` from `j`, and the
    /// remaining weighted squared error.
    pub fn one_point_fit(&self, i: usize, j: usize) -> (f64, f64) {
        let t = self.targets(i);
        let v = self.values(j);
        let mut tv = 0.0;
        let mut vv = 0.0;
        for ((w, ti), vj) in self.weights.iter().zip(t).zip(v) {
            tv += w * ti * vj;
            vv += w * vj * vj;
        }
        if vv == 0.0 {
            return (0.0, self.target_energy(i));
        }
        let p = tv / vv;
        let ls = self
            .weights
            .iter()
            .zip(t)
            .zip(v)
            .map(|((w, ti), vj)| {
                let e = ti - p * vj;
                w * e * e
            })
            .sum();
        (p, ls)
    }

    /// `r_ij = 1 / max(LS, floor)`; larger means stronger.
    pub fn algebraic_distance(&self, i: usize, j: usize) -> f64 {
        let (_, ls) = self.one_point_fit(i, j);
        self.distance_from_ls(i, ls)
    }

    pub fn distance_from_ls(&self, i: usize, ls: f64) -> f64 {
        let floor = DISTANCE_FLOOR * (self.target_energy(i) + 1e-300);
        1.0 / ls.max(floor)
    }
}

/// One-point fit of `i` from `j` over the residual-corrected targets.
pub fn one_point_ls_fit(tvs: &TestVectorSet, a: &CsrMatrix, i: usize, j: usize) -> Result<(f64, f64)> {
    Ok(LsContext::new(tvs, a)?.one_point_fit(i, j))
}

pub fn algebraic_distance(tvs: &TestVectorSet, a: &CsrMatrix, i: usize, j: usize) -> Result<f64> {
    Ok(LsContext::new(tvs, a)?.algebraic_distance(i, j))
}

/// Reusable breadth-first search over the off-diagonal graph of `A`.
#[derive(Debug, Clone)]
pub(crate) struct GraphWalker {
    seen: Vec<usize>,
    stamp: usize,
    frontier: Vec<usize>,
    next: Vec<usize>,
}

impl GraphWalker {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            seen: vec![0; n],
            stamp: 0,
            frontier: Vec::new(),
            next: Vec::new(),
        }
    }

    /// Appends every vertex at graph distance `1..=depth` from `i` to `out`,
    /// unsorted.
    pub(crate) fn within(&mut self, a: &CsrMatrix, i: usize, depth: usize, out: &mut Vec<usize>) {
        self.stamp += 1;
        let stamp = self.stamp;
        self.seen[i] = stamp;
        self.frontier.clear();
        self.frontier.push(i);
        for _ in 0..depth {
            self.next.clear();
            for &u in &self.frontier {
                let (cols, vals) = a.row(u);
                for (&w, &v) in cols.iter().zip(vals) {
                    if v != 0.0 && self.seen[w] != stamp {
                        self.seen[w] = stamp;
                        self.next.push(w);
                        out.push(w);
                    }
                }
            }
            if self.next.is_empty() {
                break;
            }
            std::mem::swap(&mut self.frontier, &mut self.next);
        }
    }
}

/// Vertices reachable within `depth` steps, i.e. the pattern of `A^depth`
/// without the diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodGraph {
    depth: usize,
    adjacency: Vec<Vec<usize>>,
}

impl NeighborhoodGraph {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }
}

pub fn neighborhood_graph(a: &CsrMatrix, depth: usize) -> Result<NeighborhoodGraph> {
    if depth == 0 {
        return Err(Error::InvalidParameter("neighborhood depth must be >= 1".into()));
    }
    let n = a.n_rows();
    let adjacency = (0..n)
        .into_par_iter()
        .map_init(
            || GraphWalker::new(n),
            |walker, i| {
                let mut out = Vec::new();
                walker.within(a, i, depth, &mut out);
                out.sort_unstable();
                out
            },
        )
        .collect();
    Ok(NeighborhoodGraph { depth, adjacency })
}

/// Directed graph of strong algebraic-distance couplings among fine vertices.
///
/// An edge `i -> j` means `i` depends strongly on `j`, i.e. `j` interpolates
/// `i` well.
#[derive(Debug, Clone, PartialEq)]
pub struct StrengthGraph {
    depth: usize,
    theta: f64,
    in_graph: Vec<bool>,
    edges: Vec<Vec<(usize, f64)>>,
}

impl StrengthGraph {
    /// Builds a graph directly from edge lists; used for testing selection routines.
    pub fn from_edges(in_graph: Vec<bool>, edges: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if in_graph.len() != edges.len() {
            return Err(Error::DimensionMismatch {
                expected: in_graph.len(),
                found: edges.len(),
            });
        }
        for (i, list) in edges.iter().enumerate() {
            if !list.is_empty() && !in_graph[i] {
                return Err(Error::InvalidParameter(format!(
                    "vertex {i} has edges but is not in the graph"
                )));
            }
            if list.iter().any(|&(j, _)| j >= in_graph.len() || !in_graph[j] || j == i) {
                return Err(Error::InvalidParameter(format!("bad edge target in row {i}")));
            }
        }
        Ok(Self {
            depth: 0,
            theta: 0.0,
            in_graph,
            edges,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.in_graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.in_graph.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.in_graph[i]
    }

    /// Strong dependencies `S_i` with their distances, sorted by vertex.
    pub fn edges(&self, i: usize) -> &[(usize, f64)] {
        &self.edges[i]
    }

    pub fn strong_set(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges[i].iter().map(|e| e.0)
    }

    /// `S_i^T` for every vertex.
    pub fn transpose_sets(&self) -> Vec<Vec<usize>> {
        let mut t = vec![Vec::new(); self.len()];
        for (i, list) in self.edges.iter().enumerate() {
            for &(j, _) in list {
                t[j].push(i);
            }
        }
        t
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Writes one `i j r_ij` line per edge.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, list) in self.edges.iter().enumerate() {
            for &(j, r) in list {
                writeln!(out, "{i} {j} {r:e}")?;
            }
        }
        Ok(())
    }
}

/// Algebraic distances from `i` to every fine vertex within `depth` steps,
/// sorted by vertex.
pub(crate) fn distance_candidates(
    ctx: &LsContext,
    a: &CsrMatrix,
    split: &CfSplit,
    i: usize,
    depth: usize,
    walker: &mut GraphWalker,
    scratch: &mut Vec<usize>,
) -> Vec<(usize, f64)> {
    scratch.clear();
    walker.within(a, i, depth, scratch);
    scratch.sort_unstable();
    scratch
        .iter()
        .filter(|&&j| split.is_fine(j))
        .map(|&j| (j, ctx.algebraic_distance(i, j)))
        .collect()
}

/// Keeps the candidates with `r_ij > theta * max_k r_ik`.
pub(crate) fn threshold_edges(candidates: Vec<(usize, f64)>, theta: f64) -> Vec<(usize, f64)> {
    let max = candidates.iter().fold(0.0f64, |m, e| m.max(e.1));
    candidates.into_iter().filter(|e| e.1 > theta * max).collect()
}

/// `d`-step reachability along the edges of `g`; each new edge carries the
/// weakest link of its best path.
pub fn graph_power(g: &StrengthGraph, d: usize) -> StrengthGraph {
    let n = g.edges.len();
    let edges = (0..n)
        .into_par_iter()
        .map(|i| {
            if !g.in_graph[i] || d <= 1 {
                return g.edges[i].clone();
            }
            let mut best: BTreeMap<usize, f64> = BTreeMap::new();
            let mut frontier: Vec<(usize, f64)> = vec![(i, f64::INFINITY)];
            for _ in 0..d {
                let mut next = Vec::new();
                for &(u, w) in &frontier {
                    for &(v, r) in &g.edges[u] {
                        if v == i {
                            continue;
                        }
                        let w2 = w.min(r);
                        let e = best.entry(v).or_insert(0.0);
                        if w2 > *e {
                            *e = w2;
                            next.push((v, w2));
                        }
                    }
                }
                frontier = next;
            }
            best.into_iter().collect()
        })
        .collect();
    StrengthGraph {
        depth: d,
        theta: g.theta,
        in_graph: g.in_graph.clone(),
        edges,
    }
}

/// [`build_strength_graph`] or the `d`-th power of the distance-1 graph.
pub fn build_strength_graph_with(
    ctx: &LsContext,
    a: &CsrMatrix,
    split: &CfSplit,
    depth: usize,
    theta: f64,
    mode: GraphMode,
) -> Result<StrengthGraph> {
    match mode {
        GraphMode::Direct => build_strength_graph(ctx, a, split, depth, theta),
        GraphMode::Power => Ok(graph_power(&build_strength_graph(ctx, a, split, 1, theta)?, depth)),
    }
}

/// Strength graph `M^d` restricted to the fine vertices of `split`.
pub fn build_strength_graph(
    ctx: &LsContext,
    a: &CsrMatrix,
    split: &CfSplit,
    depth: usize,
    theta: f64,
) -> Result<StrengthGraph> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter(format!("theta_ad = {theta} outside (0, 1)")));
    }
    if depth == 0 {
        return Err(Error::InvalidParameter("strength depth must be >= 1".into()));
    }
    let n = a.n_rows();
    if split.len() != n || ctx.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: split.len(),
        });
    }
    let edges = (0..n)
        .into_par_iter()
        .map_init(
            || (GraphWalker::new(n), Vec::new()),
            |(walker, scratch), i| {
                if split.is_coarse(i) {
                    return Vec::new();
                }
                let cands = distance_candidates(ctx, a, split, i, depth, walker, scratch);
                threshold_edges(cands, theta)
            },
        )
        .collect();
    Ok(StrengthGraph {
        depth,
        theta,
        in_graph: split.labels().iter().map(|k| *k == crate::split::PointKind::Fine).collect(),
        edges,
    })
}

/// Classical strong-dependence sets `S_i` and their transposes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassicalStrength {
    pub strong: Vec<Vec<usize>>,
    pub transpose: Vec<Vec<usize>>,
}

/// `S_i = { j != i : -a_ij >= theta * max_{k != i}(-a_ik) }`, empty when the
/// row has no negative off-diagonal entry.
pub fn classical_strength(a: &CsrMatrix, theta: f64) -> Result<ClassicalStrength> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidParameter(format!("theta = {theta} outside (0, 1]")));
    }
    let n = a.n_rows();
    let mut strong = vec![Vec::new(); n];
    let mut transpose = vec![Vec::new(); n];
    for i in 0..n {
        let (cols, vals) = a.row(i);
        let max = cols
            .iter()
            .zip(vals)
            .filter(|(&j, _)| j != i)
            .fold(f64::NEG_INFINITY, |m, (_, &v)| m.max(-v));
        if !(max > 0.0) {
            continue;
        }
        for (&j, &v) in cols.iter().zip(vals) {
            if j != i && -v >= theta * max {
                strong[i].push(j);
                transpose[j].push(i);
            }
        }
    }
    Ok(ClassicalStrength { strong, transpose })
}
