//! Multistage coarsening driven by compatible relaxation.
//!
//! Each stage relaxes the homogeneous fine-point equations with the coarse
//! values pinned at zero. If the error decays slower than `delta`, the fine
//! points where it survives become candidates, and an independent set of
//! them (with respect to the algebraic-distance strength graph) joins `C`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{f_relaxation_sweep, CsrMatrix};
use crate::split::CfSplit;
use crate::strength::{build_strength_graph_with, GraphMode, LsContext, StrengthGraph};

/// Initial error for the compatible-relaxation sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrStart {
    /// All ones on `F`.
    #[default]
    Constant,
    /// Uniform `(0, 1]` entries on `F` from the given seed.
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrParams {
    /// CR sweeps per stage.
    pub nu: usize,
    /// Acceptance threshold on the CR rate.
    pub delta: f64,
    /// Graph distance used for the strength graph.
    pub depth: usize,
    /// Relative strength threshold.
    pub theta_ad: f64,
    /// Cap on the number of growth stages.
    pub max_stages: usize,
    pub start: CrStart,
    pub graph: GraphMode,
}

impl Default for CrParams {
    fn default() -> Self {
        Self {
            nu: 5,
            delta: 0.7,
            depth: 2,
            theta_ad: 0.5,
            max_stages: 20,
            start: CrStart::Constant,
            graph: GraphMode::Direct,
        }
    }
}

impl CrParams {
    pub fn validate(&self) -> Result<()> {
        if self.nu == 0 {
            return Err(Error::InvalidParameter("nu must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {} outside (0, 1)", self.delta)));
        }
        if self.depth == 0 {
            return Err(Error::InvalidParameter("depth must be >= 1".into()));
        }
        if !(self.theta_ad > 0.0 && self.theta_ad < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "theta_ad = {} outside (0, 1)",
                self.theta_ad
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrStage {
    pub stage: usize,
    /// Coarse points added at this stage (0 for the initial measurement).
    pub added: usize,
    /// CR rate measured after the addition.
    pub rho_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrReport {
    pub stages: Vec<CrStage>,
    pub final_rho_f: f64,
    pub sweeps_per_stage: usize,
}

impl CrReport {
    /// One JSON object per stage, newline separated.
    pub fn write_json_lines<W: Write>(&self, mut out: W) -> Result<()> {
        for s in &self.stages {
            serde_json::to_writer(&mut out, s)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn coarse_count(&self) -> usize {
        self.stages.iter().map(|s| s.added).sum()
    }
}

/// Runs `nu` F-relaxation sweeps on the homogeneous system from `u0` with
/// the coarse entries pinned at zero, and returns
/// `(||u_f^nu|| / ||u_f^0||)^(1/nu)` with the final iterate.
///
/// An empty fine set returns `(0, u0)`.
pub fn estimate_rho_f(
    a: &CsrMatrix,
    split: &CfSplit,
    nu: usize,
    u0: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if split.n_fine() == 0 {
        return Ok((0.0, u0.to_vec()));
    }
    if nu == 0 {
        return Err(Error::InvalidParameter("nu must be >= 1".into()));
    }
    if u0.len() != a.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: a.n_rows(),
            found: u0.len(),
        });
    }
    let mut u = u0.to_vec();
    for &c in split.coarse() {
        u[c] = 0.0;
    }
    let fine_norm = |u: &[f64]| split.fine().iter().map(|&i| u[i] * u[i]).sum::<f64>().sqrt();
    let start = fine_norm(&u);
    if start == 0.0 {
        return Err(Error::ZeroOnFine);
    }
    for _ in 0..nu {
        f_relaxation_sweep(a, split, &mut u)?;
    }
    let rho = (fine_norm(&u) / start).powf(1.0 / nu as f64);
    Ok((rho, u))
}

/// `sigma_i = |u_i| / max_{j in F} |u_j|` on fine points, zero on coarse points.
pub fn candidate_measure(u: &[f64], split: &CfSplit) -> Result<Vec<f64>> {
    let max = split.fine().iter().fold(0.0f64, |m, &i| m.max(u[i].abs()));
    if max == 0.0 {
        return Err(Error::ZeroOnFine);
    }
    let mut sigma = vec![0.0; u.len()];
    for &i in split.fine() {
        sigma[i] = u[i].abs() / max;
    }
    Ok(sigma)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mark {
    Free,
    Selected,
    Excluded,
}

/// Greedy maximum-weight independent set of `candidates` in the strength graph.
///
/// A candidate starts with weight `|S_i^T ∩ candidates|`, the number of
/// candidates depending strongly on it. The heaviest free candidate (lowest
/// index on ties) is selected; its free strong neighbors in either direction
/// are excluded, and every free candidate that an excluded point depends on
/// gains one unit of weight. The result is independent in the symmetrized
/// graph and maximal within `candidates`.
pub fn weighted_coloring_mis(graph: &StrengthGraph, candidates: &[usize]) -> Vec<usize> {
    let n = graph.len();
    let mut is_candidate = vec![false; n];
    for &c in candidates {
        if graph.contains(c) {
            is_candidate[c] = true;
        }
    }
    let transpose = graph.transpose_sets();
    let mut weight = vec![0usize; n];
    let mut mark = vec![Mark::Free; n];
    let mut heap = BinaryHeap::new();
    for i in 0..n {
        if is_candidate[i] {
            weight[i] = transpose[i].iter().filter(|&&j| is_candidate[j]).count();
            heap.push((weight[i], Reverse(i)));
        }
    }

    let mut selected = Vec::new();
    let mut excluded_now = Vec::new();
    while let Some((w, Reverse(i))) = heap.pop() {
        if mark[i] != Mark::Free || w != weight[i] {
            continue;
        }
        mark[i] = Mark::Selected;
        selected.push(i);

        excluded_now.clear();
        for j in transpose[i].iter().copied().chain(graph.strong_set(i)) {
            if is_candidate[j] && mark[j] == Mark::Free {
                mark[j] = Mark::Excluded;
                excluded_now.push(j);
            }
        }
        for &j in &excluded_now {
            for k in graph.strong_set(j) {
                if is_candidate[k] && mark[k] == Mark::Free {
                    weight[k] += 1;
                    heap.push((weight[k], Reverse(k)));
                }
            }
        }
    }
    selected.sort_unstable();
    selected
}

fn initial_error(params: &CrParams, split: &CfSplit) -> Vec<f64> {
    let n = split.len();
    match params.start {
        CrStart::Constant => split.labels().iter().map(|k| if *k == crate::split::PointKind::Fine { 1.0 } else { 0.0 }).collect(),
        CrStart::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut u: Vec<f64> = (0..n).map(|_| 1.0 - rng.gen::<f64>()).collect();
            for &c in split.coarse() {
                u[c] = 0.0;
            }
            u
        }
    }
}

/// Grows `C` from the empty set until compatible relaxation converges with
/// rate at most `delta`.
pub fn cr_coarsen(
    a: &CsrMatrix,
    ctx: &LsContext,
    params: &CrParams,
) -> Result<(CfSplit, CrReport)> {
    params.validate()?;
    let n = a.n_rows();
    let mut split = CfSplit::all_fine(n);
    let mut stages = Vec::new();

    let (mut rho, mut u) = estimate_rho_f(a, &split, params.nu, &initial_error(params, &split))?;
    stages.push(CrStage {
        stage: 0,
        added: 0,
        rho_f: rho,
    });
    let mut stage = 0;
    while rho > params.delta {
        if stage == params.max_stages {
            return Err(Error::CoarseningFailed {
                stages: params.max_stages,
                delta: params.delta,
                rho_f: rho,
            });
        }
        stage += 1;
        let sigma = candidate_measure(&u, &split)?;
        let tol = 1.0 - rho;
        let candidates: Vec<usize> = split
            .fine()
            .iter()
            .copied()
            .filter(|&i| sigma[i] > tol)
            .collect();
        let graph = build_strength_graph_with(ctx, a, &split, params.depth, params.theta_ad, params.graph)?;
        let added = weighted_coloring_mis(&graph, &candidates);
        split.promote(&added);
        (rho, u) = estimate_rho_f(a, &split, params.nu, &initial_error(params, &split))?;
        stages.push(CrStage {
            stage,
            added: added.len(),
            rho_f: rho,
        });
    }
    Ok((
        split,
        CrReport {
            stages,
            final_rho_f: rho,
            sweeps_per_stage: params.nu,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::test_util::laplacian_1d;
    use crate::tv::{generate_test_vectors, TestVectorSet, WeightScheme};

    fn independent_and_maximal(graph: &StrengthGraph, candidates: &[usize], set: &[usize]) -> bool {
        let adjacent = |i: usize, j: usize| {
            graph.strong_set(i).any(|x| x == j) || graph.strong_set(j).any(|x| x == i)
        };
        let independent = set
            .iter()
            .all(|&i| set.iter().all(|&j| i == j || !adjacent(i, j)));
        let maximal = candidates
            .iter()
            .filter(|c| !set.contains(c))
            .all(|&c| set.iter().any(|&s| adjacent(c, s)));
        independent && maximal && set.iter().all(|s| candidates.contains(s))
    }

    #[test]
    fn rho_f_trivial_cases() {
        let a = laplacian_1d(4);
        let (rho, u) = estimate_rho_f(&a, &CfSplit::all_coarse(4), 5, &[1.0; 4]).unwrap();
        assert_eq!((rho, u), (0.0, vec![1.0; 4]));

        let d = CsrMatrix::from_dense(&[vec![2.0, 0.0, 0.0], vec![0.0, 3.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let (rho, _) = estimate_rho_f(&d, &CfSplit::from_coarse(3, &[1]).unwrap(), 3, &[1.0; 3]).unwrap();
        assert_eq!(rho, 0.0);

        assert!(matches!(
            estimate_rho_f(&a, &CfSplit::from_coarse(4, &[0, 1]).unwrap(), 1, &[1.0, 1.0, 0.0, 0.0]),
            Err(Error::ZeroOnFine)
        ));
    }

    #[test]
    fn rho_f_hand_computation() {
        let a = laplacian_1d(3);
        // coarse end point: u_0 = 0.5, then u_1 = (0.5 + 0) / 2
        let (rho, u) = estimate_rho_f(&a, &CfSplit::from_coarse(3, &[2]).unwrap(), 1, &[1.0; 3]).unwrap();
        assert_eq!(u, vec![0.5, 0.25, 0.0]);
        assert!((rho - (0.3125f64 / 2.0).sqrt()).abs() < 1e-14);
        // coarse middle point decouples the two fine points
        let (rho, u) = estimate_rho_f(&a, &CfSplit::from_coarse(3, &[1]).unwrap(), 1, &[1.0; 3]).unwrap();
        assert_eq!(u, vec![0.0, 0.0, 0.0]);
        assert_eq!(rho, 0.0);
    }

    #[test]
    fn candidate_measure_examples() {
        let split = CfSplit::all_fine(3);
        assert_eq!(candidate_measure(&[0.0, 4.0, 0.0], &split).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(candidate_measure(&[0.3; 3], &split).unwrap(), vec![1.0; 3]);
        let s = candidate_measure(&[0.2, -0.5, 1.0], &split).unwrap();
        assert!((s[0] - 0.2).abs() < 1e-15 && s[1] == 0.5 && s[2] == 1.0);
        assert!(candidate_measure(&[0.0; 3], &split).is_err());
        let split = CfSplit::from_coarse(3, &[2]).unwrap();
        assert_eq!(candidate_measure(&[0.5, 0.25, 9.0], &split).unwrap(), vec![1.0, 0.5, 0.0]);
    }

    #[test]
    fn coloring_edgeless_selects_all() {
        let g = StrengthGraph::from_edges(vec![true; 5], vec![Vec::new(); 5]).unwrap();
        assert_eq!(weighted_coloring_mis(&g, &[0, 2, 3, 4]), vec![0, 2, 3, 4]);
    }

    #[test]
    fn coloring_paths() {
        // b depends equally on a and c: a and c tie, a is picked first, then c
        let g = StrengthGraph::from_edges(
            vec![true; 3],
            vec![vec![], vec![(0, 1.0), (2, 1.0)], vec![]],
        )
        .unwrap();
        assert_eq!(weighted_coloring_mis(&g, &[0, 1, 2]), vec![0, 2]);
        // symmetric path: the middle is depended upon twice and wins
        let g = StrengthGraph::from_edges(
            vec![true; 3],
            vec![vec![(1, 1.0)], vec![(0, 1.0), (2, 1.0)], vec![(1, 1.0)]],
        )
        .unwrap();
        assert_eq!(weighted_coloring_mis(&g, &[0, 1, 2]), vec![1]);
    }

    #[test]
    fn coloring_random_graphs_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let n = rng.gen_range(1..=12);
            let edges: Vec<Vec<(usize, f64)>> = (0..n)
                .map(|i| (0..n).filter(|&j| j != i && rng.gen_bool(0.25)).map(|j| (j, 1.0)).collect())
                .collect();
            let g = StrengthGraph::from_edges(vec![true; n], edges).unwrap();
            let candidates: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.7)).collect();
            let set = weighted_coloring_mis(&g, &candidates);
            assert!(independent_and_maximal(&g, &candidates, &set));
        }
    }

    #[test]
    fn diagonal_operator_needs_no_coarse_points() {
        let d = CsrMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 5.0]]).unwrap();
        let tvs = TestVectorSet::new(vec![vec![1.0, 2.0]], vec![1.0], 0).unwrap();
        let ctx = LsContext::new(&tvs, &d).unwrap();
        let (split, report) = cr_coarsen(&d, &ctx, &CrParams::default()).unwrap();
        assert_eq!(split.n_coarse(), 0);
        assert_eq!(report.final_rho_f, 0.0);
        assert_eq!(report.stages.len(), 1);
    }

    #[test]
    fn chain_coarsening() {
        let a = laplacian_1d(9);
        let tvs = generate_test_vectors(&a, 8, 40, 1, WeightScheme::InverseRayleigh).unwrap();
        let ctx = LsContext::new(&tvs, &a).unwrap();
        let params = CrParams {
            nu: 5,
            delta: 0.7,
            depth: 1,
            theta_ad: 0.5,
            ..CrParams::default()
        };
        let (split, report) = cr_coarsen(&a, &ctx, &params).unwrap();
        assert!(split.n_coarse() > 0);
        assert!(report.final_rho_f <= 0.7);
        // chain independence: no two adjacent coarse points
        assert!(split.coarse().windows(2).all(|w| w[1] > w[0] + 1));
        // re-measuring gives the same accepted rate
        let (rho, _) = estimate_rho_f(&a, &split, 5, &initial_error(&params, &split)).unwrap();
        assert!(rho <= 0.7);
        let added: usize = report.stages.iter().map(|s| s.added).sum();
        assert_eq!(added, split.n_coarse());
    }

    #[test]
    fn stage_cap_is_reported() {
        let a = laplacian_1d(40);
        let tvs = generate_test_vectors(&a, 8, 40, 1, WeightScheme::InverseRayleigh).unwrap();
        let ctx = LsContext::new(&tvs, &a).unwrap();
        let params = CrParams {
            depth: 1,
            max_stages: 0,
            ..CrParams::default()
        };
        assert!(matches!(cr_coarsen(&a, &ctx, &params), Err(Error::CoarseningFailed { .. })));
    }

    #[test]
    fn json_lines() {
        let r = CrReport {
            stages: vec![CrStage { stage: 0, added: 0, rho_f: 0.5 }, CrStage { stage: 1, added: 3, rho_f: 0.25 }],
            final_rho_f: 0.25,
            sweeps_per_stage: 5,
        };
        let mut buf = Vec::new();
        r.write_json_lines(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"stage\":0,\"added\":0,\"rho_f\":0.5}\n{\"stage\":1,\"added\":3,\"rho_f\":0.25}\n"
        );
    }
}
