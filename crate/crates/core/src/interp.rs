//! Least-squares interpolation with bounded caliber.
//!
//! For every fine point the coarse points within `search_depth` graph steps
//! are ranked by one-point algebraic distance. Subsets of the strongest
//! `max_candidates` of them, up to `caliber` points, are fitted to the test
//! vectors, and a larger set only wins if it cuts the (normalized) error by
//! the power rule `LS'' < LS'^(gamma * (|W''| - |W'|))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::split::CfSplit;
use crate::strength::{GraphWalker, LsContext};

/// Relative ridge added to rank-deficient local normal equations.
const RIDGE: f64 = 1e-12;
/// Bounds for the normalized least-squares values fed to the penalty rule.
const NORMALIZED_FLOOR: f64 = 1e-16;
const NORMALIZED_CEIL: f64 = 1.0 - 1e-16;

/// Reference energy that turns least-squares values into the `(0, 1)` scale
/// the sparsity penalty works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyScale {
    /// Energy of the local Jacobi correction, `sum_k w_k (r_i / a_ii)^2`.
    #[default]
    CorrectionEnergy,
    /// Energy of the fit target, `sum_k w_k t_i^2`.
    TargetEnergy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpSearchParams {
    /// Maximum number of coarse points per row.
    pub caliber: usize,
    /// Graph distance defining the coarse neighborhood.
    pub search_depth: usize,
    /// Penalty exponent factor for larger sets.
    pub gamma: f64,
    /// Number of one-point-ranked coarse neighbors scanned.
    pub max_candidates: usize,
    pub penalty_scale: PenaltyScale,
}

impl Default for InterpSearchParams {
    fn default() -> Self {
        Self {
            caliber: 4,
            search_depth: 4,
            gamma: 1.5,
            max_candidates: 12,
            penalty_scale: PenaltyScale::CorrectionEnergy,
        }
    }
}

impl InterpSearchParams {
    pub fn validate(&self) -> Result<()> {
        if self.caliber == 0 || self.search_depth == 0 || self.max_candidates == 0 {
            return Err(Error::InvalidParameter(
                "caliber, search depth and max_candidates must be >= 1".into(),
            ));
        }
        if !(self.gamma > 1.0) {
            return Err(Error::InvalidParameter(format!("gamma = {} must exceed 1", self.gamma)));
        }
        Ok(())
    }
}

/// Prolongation `P` (identity on coarse rows) with per-row diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpOperator {
    prolongator: CsrMatrix,
    fitness: Vec<f64>,
    caliber_used: Vec<usize>,
    empty_rows: Vec<usize>,
}

impl InterpOperator {
    /// `n_fine x n_coarse` sparse prolongation.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.prolongator
    }

    pub fn n_fine(&self) -> usize {
        self.prolongator.n_rows()
    }

    pub fn n_coarse(&self) -> usize {
        self.prolongator.n_cols()
    }

    /// Final least-squares value of each row (zero on coarse rows, infinite
    /// on rows without coarse neighbors).
    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    /// `|C_i|` of each row (one on coarse rows).
    pub fn caliber_used(&self) -> &[usize] {
        &self.caliber_used
    }

    /// Fine rows that found no coarse point within the search depth.
    pub fn empty_rows(&self) -> &[usize] {
        &self.empty_rows
    }

    /// `(fine vertex, coarse vertex)` pairs for every interpolation edge.
    pub fn edges(&self, split: &CfSplit) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &i in split.fine() {
            for &col in self.prolongator.row(i).0 {
                out.push((i, split.coarse()[col]));
            }
        }
        out
    }
}

/// Coarse vertices within `depth` graph steps of `i`, sorted.
pub fn coarse_neighborhood(a: &CsrMatrix, split: &CfSplit, i: usize, depth: usize) -> Vec<usize> {
    let mut walker = GraphWalker::new(a.n_rows());
    let mut out = Vec::new();
    coarse_neighborhood_with(a, split, i, depth, &mut walker, &mut out);
    out
}

fn coarse_neighborhood_with(
    a: &CsrMatrix,
    split: &CfSplit,
    i: usize,
    depth: usize,
    walker: &mut GraphWalker,
    out: &mut Vec<usize>,
) {
    out.clear();
    walker.within(a, i, depth, out);
    out.retain(|&j| split.is_coarse(j));
    out.sort_unstable();
}

/// Minimizes `sum_κ ω_κ (t_i - sum_{j in W} p_j v_j)^2` over `p`.
///
/// Rank-deficient normal equations get a ridge of `1e-12 * trace`; the
/// returned value is the functional at the computed coefficients.
pub fn ls_fit_set(ctx: &LsContext, i: usize, set: &[usize]) -> Result<(Vec<f64>, f64)> {
    if set.len() > ctx.k() {
        return Err(Error::UnderdeterminedFit {
            set: set.len(),
            k: ctx.k(),
        });
    }
    let m = set.len();
    let w = ctx.weights();
    let t = ctx.targets(i);
    let mut gram = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for (r, &jr) in set.iter().enumerate() {
        let vr = ctx.values(jr);
        rhs[r] = w.iter().zip(t).zip(vr).map(|((w, t), v)| w * t * v).sum();
        for (c, &jc) in set.iter().enumerate().take(r + 1) {
            let vc = ctx.values(jc);
            let g: f64 = w.iter().zip(vr).zip(vc).map(|((w, a), b)| w * a * b).sum();
            gram[r * m + c] = g;
            gram[c * m + r] = g;
        }
    }
    let p = solve_spd_regularized(&mut gram, &rhs, m);
    let ls = residual_value(ctx, i, set, &p);
    Ok((p, ls))
}

fn residual_value(ctx: &LsContext, i: usize, set: &[usize], p: &[f64]) -> f64 {
    let w = ctx.weights();
    let t = ctx.targets(i);
    (0..ctx.k())
        .map(|kappa| {
            let fit: f64 = set.iter().zip(p).map(|(&j, pj)| pj * ctx.values(j)[kappa]).sum();
            let e = t[kappa] - fit;
            w[kappa] * e * e
        })
        .sum()
}

/// Cholesky solve of a small SPD system; retries with a ridge when a pivot
/// collapses. `gram` is overwritten.
fn solve_spd_regularized(gram: &mut [f64], rhs: &[f64], m: usize) -> Vec<f64> {
    let trace: f64 = (0..m).map(|d| gram[d * m + d]).sum();
    if trace <= 0.0 {
        return vec![0.0; m];
    }
    let original = gram.to_vec();
    if let Some(x) = cholesky_solve(gram, rhs, m, trace) {
        return x;
    }
    gram.copy_from_slice(&original);
    for d in 0..m {
        gram[d * m + d] += RIDGE * trace;
    }
    cholesky_solve(gram, rhs, m, 0.0).unwrap_or_else(|| vec![0.0; m])
}

fn cholesky_solve(g: &mut [f64], rhs: &[f64], m: usize, trace: f64) -> Option<Vec<f64>> {
    // pivots below this count as rank deficiency
    let tiny = 1e-14 * trace;
    for j in 0..m {
        let mut d = g[j * m + j];
        for k in 0..j {
            d -= g[j * m + k] * g[j * m + k];
        }
        if !(d > tiny) {
            return None;
        }
        let d = d.sqrt();
        g[j * m + j] = d;
        for r in j + 1..m {
            let mut s = g[r * m + j];
            for k in 0..j {
                s -= g[r * m + k] * g[j * m + k];
            }
            g[r * m + j] = s / d;
        }
    }
    let mut y = rhs.to_vec();
    for r in 0..m {
        for k in 0..r {
            y[r] -= g[r * m + k] * y[k];
        }
        y[r] /= g[r * m + r];
    }
    for r in (0..m).rev() {
        for k in r + 1..m {
            y[r] -= g[k * m + r] * y[k];
        }
        y[r] /= g[r * m + r];
    }
    Some(y)
}

/// `ls` relative to the reference energy of row `i`, clamped into `[1e-16, 1)`.
///
/// A row whose correction energy vanishes falls back to the target energy.
pub fn normalized_ls(ctx: &LsContext, i: usize, ls: f64, scale: PenaltyScale) -> f64 {
    let reference = match scale {
        PenaltyScale::CorrectionEnergy => match ctx.correction_energy(i) {
            e if e > 0.0 => e,
            _ => ctx.target_energy(i),
        },
        PenaltyScale::TargetEnergy => ctx.target_energy(i),
    };
    let x = if reference > 0.0 { ls / reference } else { 0.0 };
    x.clamp(NORMALIZED_FLOOR, NORMALIZED_CEIL)
}

/// `true` when a set of size `larger` with normalized value `candidate`
/// displaces an incumbent of size `smaller` with value `incumbent`.
pub fn passes_penalty(candidate: f64, incumbent: f64, larger: usize, smaller: usize, gamma: f64) -> bool {
    candidate < incumbent.powf(gamma * (larger - smaller) as f64)
}

/// Chosen interpolatory set of one fine row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowFit {
    /// Coarse vertices, sorted.
    pub set: Vec<usize>,
    /// Coefficients matching `set`.
    pub weights: Vec<f64>,
    pub ls_value: f64,
}

/// Picks `C_i` and the interpolation weights for fine point `i`.
pub fn select_interpolatory_set(
    ctx: &LsContext,
    a: &CsrMatrix,
    split: &CfSplit,
    i: usize,
    params: &InterpSearchParams,
) -> Result<RowFit> {
    params.validate()?;
    let mut walker = GraphWalker::new(a.n_rows());
    let mut scratch = Vec::new();
    select_with(ctx, a, split, i, params, &mut walker, &mut scratch)
}

fn select_with(
    ctx: &LsContext,
    a: &CsrMatrix,
    split: &CfSplit,
    i: usize,
    params: &InterpSearchParams,
    walker: &mut GraphWalker,
    scratch: &mut Vec<usize>,
) -> Result<RowFit> {
    if split.is_coarse(i) {
        return Err(Error::InvalidParameter(format!("vertex {i} is coarse")));
    }
    coarse_neighborhood_with(a, split, i, params.search_depth, walker, scratch);
    if scratch.is_empty() {
        return Ok(RowFit {
            set: Vec::new(),
            weights: Vec::new(),
            ls_value: f64::INFINITY,
        });
    }
    let mut ranked: Vec<(usize, f64)> = scratch
        .iter()
        .map(|&j| (j, ctx.algebraic_distance(i, j)))
        .collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    ranked.truncate(params.max_candidates);
    let pool: Vec<usize> = ranked.into_iter().map(|e| e.0).collect();
    search_pool(ctx, i, &pool, params.caliber.min(ctx.k()), params.gamma, params.penalty_scale)
}

/// Best set per cardinality, then the penalty rule across cardinalities.
fn search_pool(
    ctx: &LsContext,
    i: usize,
    pool: &[usize],
    caliber: usize,
    gamma: f64,
    scale: PenaltyScale,
) -> Result<RowFit> {
    let mut incumbent: Option<(RowFit, f64)> = None;
    let mut subset = Vec::with_capacity(caliber);
    for size in 1..=caliber.min(pool.len()) {
        let mut best: Option<(RowFit, f64)> = None;
        for_each_combination(pool.len(), size, |idx| {
            subset.clear();
            subset.extend(idx.iter().map(|&p| pool[p]));
            let (weights, ls) = ls_fit_set(ctx, i, &subset).expect("size bounded by k");
            if best.as_ref().is_none_or(|b| ls < b.1) {
                best = Some((
                    RowFit {
                        set: subset.clone(),
                        weights,
                        ls_value: ls,
                    },
                    ls,
                ));
            }
        });
        let (fit, ls) = best.expect("pool has at least `size` entries");
        incumbent = match incumbent {
            None => Some((fit, ls)),
            Some((inc, inc_ls)) => {
                let cand = normalized_ls(ctx, i, ls, scale);
                let held = normalized_ls(ctx, i, inc_ls, scale);
                if passes_penalty(cand, held, size, inc.set.len(), gamma) {
                    Some((fit, ls))
                } else {
                    Some((inc, inc_ls))
                }
            }
        };
    }
    let (mut fit, _) = incumbent.expect("pool is nonempty");
    let mut order: Vec<usize> = (0..fit.set.len()).collect();
    order.sort_by_key(|&p| fit.set[p]);
    fit.set = order.iter().map(|&p| fit.set[p]).collect();
    fit.weights = order.iter().map(|&p| fit.weights[p]).collect();
    Ok(fit)
}

/// Calls `f` with every strictly increasing index tuple of length `size`
/// drawn from `0..n`, in lexicographic order.
pub fn for_each_combination(n: usize, size: usize, mut f: impl FnMut(&[usize])) {
    if size == 0 || size > n {
        return;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        f(&idx);
        let mut p = size;
        while p > 0 {
            p -= 1;
            if idx[p] != p + n - size {
                idx[p] += 1;
                for q in p + 1..size {
                    idx[q] = idx[q - 1] + 1;
                }
                break;
            }
            if p == 0 {
                return;
            }
        }
    }
}

/// Builds `P` row by row: unit rows on `C`, least-squares rows on `F`.
pub fn assemble_interpolation(
    ctx: &LsContext,
    a: &CsrMatrix,
    split: &CfSplit,
    params: &InterpSearchParams,
) -> Result<InterpOperator> {
    params.validate()?;
    let n = a.n_rows();
    if split.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: split.len(),
        });
    }
    let rows: Vec<RowFit> = (0..n)
        .into_par_iter()
        .map_init(
            || (GraphWalker::new(n), Vec::new()),
            |(walker, scratch), i| {
                if split.is_coarse(i) {
                    Ok(RowFit {
                        set: vec![i],
                        weights: vec![1.0],
                        ls_value: 0.0,
                    })
                } else {
                    select_with(ctx, a, split, i, params, walker, scratch)
                }
            },
        )
        .collect::<Result<_>>()?;

    let mut row_starts = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut fitness = Vec::with_capacity(n);
    let mut caliber_used = Vec::with_capacity(n);
    let mut empty_rows = Vec::new();
    row_starts.push(0);
    for (i, row) in rows.into_iter().enumerate() {
        if split.is_fine(i) && row.set.is_empty() {
            empty_rows.push(i);
        }
        for (&j, &w) in row.set.iter().zip(&row.weights) {
            cols.push(split.coarse_index(j).expect("interpolatory points are coarse"));
            vals.push(w);
        }
        row_starts.push(cols.len());
        fitness.push(row.ls_value);
        caliber_used.push(row.set.len());
    }
    let prolongator = CsrMatrix::new(n, split.n_coarse(), row_starts, cols, vals)?;
    Ok(InterpOperator {
        prolongator,
        fitness,
        caliber_used,
        empty_rows,
    })
}
