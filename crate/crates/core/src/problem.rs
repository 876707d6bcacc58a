//! Seven-point finite-difference discretization of the rotated anisotropic
//! diffusion operator `a u_xx + b u_xy + c u_yy` on the unit square with
//! homogeneous Dirichlet boundary conditions.
//!
//! Unknowns live on the `N x N` interior points of a uniform grid with mesh
//! width `h = 1 / (N + 1)`, numbered lexicographically with `x` fastest:
//! vertex `(ix, iy)` has index `iy * N + ix`.
//!
//! The mixed derivative always uses the north-east / south-west corners. For
//! `alpha = pi/4` this follows the anisotropy; for `alpha = -pi/4` it runs
//! across it, which produces positive off-diagonal entries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Parameters of one test problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    /// Interior unknowns per side.
    pub n: usize,
    /// Rotation angle of the strong direction, in radians.
    pub alpha: f64,
    /// Anisotropy ratio, `0 <= epsilon <= 1`.
    pub epsilon: f64,
}

impl ProblemSpec {
    pub fn new(n: usize, alpha: f64, epsilon: f64) -> Result<Self> {
        let spec = Self { n, alpha, epsilon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("grid size N = {} < 2", self.n)));
        }
        if !self.alpha.is_finite() || self.alpha.abs() >= 2.0 * std::f64::consts::PI {
            return Err(Error::InvalidParameter(format!(
                "alpha = {} outside (-2pi, 2pi)",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} outside [0, 1]",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    pub fn unknowns(&self) -> usize {
        self.n * self.n
    }

    pub fn grid(&self) -> Grid {
        Grid { n: self.n }
    }
}

/// Lexicographic indexing of an `n x n` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub n: usize,
}

impl Grid {
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.n + ix
    }

    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i % self.n, i / self.n)
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Returns `(a, b, c)` for `a u_xx + b u_xy + c u_yy`.
pub fn coefficients(alpha: f64, epsilon: f64) -> (f64, f64, f64) {
    let (s, c) = alpha.sin_cos();
    let a = c * c + epsilon * s * s;
    let b = (1.0 - epsilon) * (2.0 * alpha).sin();
    let cc = s * s + epsilon * c * c;
    (a, b, cc)
}

/// Weights of the seven-point stencil of `-L_h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stencil7 {
    pub center: f64,
    pub east: f64,
    pub west: f64,
    pub north: f64,
    pub south: f64,
    pub northeast: f64,
    pub southwest: f64,
}

impl Stencil7 {
    /// `(dx, dy, weight)` for the six off-center legs.
    pub fn legs(&self) -> [(i64, i64, f64); 6] {
        [
            (1, 0, self.east),
            (-1, 0, self.west),
            (0, 1, self.north),
            (0, -1, self.south),
            (1, 1, self.northeast),
            (-1, -1, self.southwest),
        ]
    }

    pub fn row_sum(&self) -> f64 {
        self.center + self.legs().iter().map(|l| l.2).sum::<f64>()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            center: self.center * factor,
            east: self.east * factor,
            west: self.west * factor,
            north: self.north * factor,
            south: self.south * factor,
            northeast: self.northeast * factor,
            southwest: self.southwest * factor,
        }
    }
}

pub fn assemble_stencil(spec: &ProblemSpec) -> Stencil7 {
    let (a, b, c) = coefficients(spec.alpha, spec.epsilon);
    let inv_h2 = 1.0 / (spec.h() * spec.h());
    let ew = (-a + 0.5 * b) * inv_h2;
    let ns = (-c + 0.5 * b) * inv_h2;
    let corner = -0.5 * b * inv_h2;
    Stencil7 {
        center: (2.0 * a + 2.0 * c - b) * inv_h2,
        east: ew,
        west: ew,
        north: ns,
        south: ns,
        northeast: corner,
        southwest: corner,
    }
}

/// Assembles the `N^2 x N^2` system matrix.
///
/// Legs leaving the grid are dropped (Dirichlet elimination) and the diagonal
/// keeps its full center value. Legs whose weight is zero up to rounding
/// (`|w| <= 1e-14 |center|`) are not stored, so the matrix graph reflects the
/// actual couplings.
pub fn assemble_matrix(spec: &ProblemSpec) -> Result<CsrMatrix> {
    spec.validate()?;
    let st = assemble_stencil(spec);
    let n = spec.n;
    let grid = spec.grid();
    let cutoff = 1e-14 * st.center.abs();
    let mut legs: Vec<(i64, i64, f64)> = st
        .legs()
        .into_iter()
        .filter(|l| l.2.abs() > cutoff)
        .collect();
    legs.push((0, 0, st.center));
    // row-major column order: sort legs by index offset dy * n + dx
    legs.sort_by_key(|&(dx, dy, _)| dy * n as i64 + dx);

    let mut row_starts = Vec::with_capacity(n * n + 1);
    let mut col_indices = Vec::with_capacity(n * n * legs.len());
    let mut values = Vec::with_capacity(n * n * legs.len());
    row_starts.push(0);
    for iy in 0..n {
        for ix in 0..n {
            for &(dx, dy, w) in &legs {
                let jx = ix as i64 + dx;
                let jy = iy as i64 + dy;
                if jx < 0 || jy < 0 || jx >= n as i64 || jy >= n as i64 {
                    continue;
                }
                col_indices.push(grid.index(jx as usize, jy as usize));
                values.push(w);
            }
            row_starts.push(col_indices.len());
        }
    }
    CsrMatrix::new(n * n, n * n, row_starts, col_indices, values)?.with_symmetric_hint()
}
