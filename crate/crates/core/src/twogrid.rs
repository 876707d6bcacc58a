//! Two-level cycle, convergence estimate and complexity metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::direct::EnvelopeCholesky;
use crate::error::{Error, Result};
use crate::interp::InterpOperator;
use crate::problem::Grid;
use crate::sparse::{a_norm, galerkin_product, gauss_seidel_sweep, CsrMatrix};
use crate::split::CfSplit;

/// Fine operator, prolongation, Galerkin coarse operator and its factorization.
#[derive(Debug, Clone)]
pub struct TwoGridHierarchy {
    fine: CsrMatrix,
    interp: InterpOperator,
    coarse: CsrMatrix,
    factor: EnvelopeCholesky,
    pre_sweeps: usize,
    post_sweeps: usize,
}

impl TwoGridHierarchy {
    pub fn fine(&self) -> &CsrMatrix {
        &self.fine
    }

    pub fn interp(&self) -> &InterpOperator {
        &self.interp
    }

    pub fn prolongator(&self) -> &CsrMatrix {
        self.interp.matrix()
    }

    pub fn coarse(&self) -> &CsrMatrix {
        &self.coarse
    }

    pub fn pre_sweeps(&self) -> usize {
        self.pre_sweeps
    }

    pub fn post_sweeps(&self) -> usize {
        self.post_sweeps
    }

    /// Solves `A_c x = b` with the stored factorization.
    pub fn coarse_solve(&self, b: &[f64]) -> Vec<f64> {
        self.factor.solve(b)
    }

    /// `x <- x + P A_c^{-1} P^T (b - A x)`.
    pub fn coarse_correct(&self, x: &mut [f64], b: &[f64]) {
        if self.coarse.n_rows() == 0 {
            return;
        }
        let n = self.fine.n_rows();
        let mut r = vec![0.0; n];
        self.fine.spmv_into(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let p = self.interp.matrix();
        let mut rc = vec![0.0; p.n_cols()];
        p.spmv_transpose_into(&r, &mut rc);
        let ec = self.factor.solve(&rc);
        let mut e = vec![0.0; n];
        p.spmv_into(&ec, &mut e);
        for (xi, ei) in x.iter_mut().zip(&e) {
            *xi += ei;
        }
    }
}

/// Forms `A_c = P^T A P` and factors it.
pub fn build_hierarchy(
    a: &CsrMatrix,
    split: &CfSplit,
    interp: InterpOperator,
    pre_sweeps: usize,
    post_sweeps: usize,
) -> Result<TwoGridHierarchy> {
    let p = interp.matrix();
    if p.n_rows() != a.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: a.n_rows(),
            found: p.n_rows(),
        });
    }
    if p.n_cols() != split.n_coarse() {
        return Err(Error::DimensionMismatch {
            expected: split.n_coarse(),
            found: p.n_cols(),
        });
    }
    let coarse = galerkin_product(a, p)?;
    let factor = EnvelopeCholesky::factor(&coarse)?;
    Ok(TwoGridHierarchy {
        fine: a.clone(),
        interp,
        coarse,
        factor,
        pre_sweeps,
        post_sweeps,
    })
}

/// One two-grid cycle on `A x = b`: pre-smoothing, coarse correction,
/// post-smoothing, all in place.
pub fn two_grid_cycle(h: &TwoGridHierarchy, x: &mut [f64], b: &[f64]) -> Result<()> {
    for _ in 0..h.pre_sweeps {
        gauss_seidel_sweep(&h.fine, x, b)?;
    }
    h.coarse_correct(x, b);
    for _ in 0..h.post_sweeps {
        gauss_seidel_sweep(&h.fine, x, b)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEstimate {
    /// `||e^eta||_A / ||e^(eta-1)||_A`.
    pub rho: f64,
    /// Cycles actually run.
    pub iterations: usize,
    /// The error vanished before `eta` cycles; `rho` is the last defined ratio.
    pub exact_early: bool,
}

/// Energy below which the unit-energy error counts as annihilated.
pub const EXACT_ZERO: f64 = 1e-14;

/// Runs `eta` cycles on `A x = 0` from a seeded random start and returns the
/// last energy-norm reduction ratio. The error is rescaled to unit energy
/// after every cycle; ratios are unaffected.
pub fn estimate_convergence(h: &TwoGridHierarchy, eta: usize, seed: u64) -> Result<ConvergenceEstimate> {
    if eta < 2 {
        return Err(Error::InvalidParameter(format!("eta = {eta} < 2")));
    }
    let n = h.fine.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let zero = vec![0.0; n];
    let norm = a_norm(&h.fine, &e)?;
    if norm == 0.0 {
        return Err(Error::InvalidParameter("random start has zero energy".into()));
    }
    e.iter_mut().for_each(|v| *v /= norm);
    let mut rho = 0.0;
    for it in 1..=eta {
        two_grid_cycle(h, &mut e, &zero)?;
        let ratio = a_norm(&h.fine, &e)?;
        if ratio <= EXACT_ZERO {
            return Ok(ConvergenceEstimate {
                rho,
                iterations: it,
                exact_early: true,
            });
        }
        rho = ratio;
        e.iter_mut().for_each(|v| *v /= ratio);
    }
    Ok(ConvergenceEstimate {
        rho,
        iterations: eta,
        exact_early: false,
    })
}

/// `(gamma_o, gamma_g)` = `((nnz(A) + nnz(A_c)) / nnz(A), |C| / |Ω|)`.
pub fn complexity_metrics(a: &CsrMatrix, a_coarse: &CsrMatrix, split: &CfSplit) -> (f64, f64) {
    let gamma_o = (a.nnz() + a_coarse.nnz()) as f64 / a.nnz() as f64;
    (gamma_o, split.coarsening_factor())
}

/// Summary of one two-level setup and solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub rho: f64,
    pub rho_f: f64,
    pub gamma_o: f64,
    pub gamma_g: f64,
    pub iterations: usize,
}

/// One entry of a coarse stencil in fine-grid offsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StencilEntry {
    pub dx: i64,
    pub dy: i64,
    pub value: f64,
}

/// Row of `A_c` belonging to `coarse_vertex`, as fine-grid offsets from that
/// vertex, with values multiplied by `scale` (typically `h^2`).
pub fn extract_coarse_stencil(
    h: &TwoGridHierarchy,
    split: &CfSplit,
    grid: Grid,
    coarse_vertex: usize,
    scale: f64,
) -> Result<Vec<StencilEntry>> {
    let ci = split
        .coarse_index(coarse_vertex)
        .ok_or(Error::NotCoarse(coarse_vertex))?;
    let (cx, cy) = grid.coords(coarse_vertex);
    let (cols, vals) = h.coarse.row(ci);
    Ok(cols
        .iter()
        .zip(vals)
        .map(|(&j, &v)| {
            let (jx, jy) = grid.coords(split.coarse()[j]);
            StencilEntry {
                dx: jx as i64 - cx as i64,
                dy: jy as i64 - cy as i64,
                value: v * scale,
            }
        })
        .collect())
}

/// Off-diagonal entries sorted by decreasing magnitude.
pub fn dominant_offdiagonals(stencil: &[StencilEntry]) -> Vec<StencilEntry> {
    let mut off: Vec<StencilEntry> = stencil
        .iter()
        .copied()
        .filter(|e| e.dx != 0 || e.dy != 0)
        .collect();
    off.sort_by(|a, b| b.value.abs().total_cmp(&a.value.abs()));
    off
}

/// Angle in degrees between the line through an offset and the line at
/// angle `alpha`, folded into `[0, 90]`.
pub fn angle_to_direction(dx: i64, dy: i64, alpha: f64) -> f64 {
    let theta = (dy as f64).atan2(dx as f64);
    let mut d = (theta - alpha).to_degrees().rem_euclid(180.0);
    if d > 90.0 {
        d = 180.0 - d;
    }
    d + 0.0
}
