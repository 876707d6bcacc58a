//! Two-level bootstrap algebraic multigrid.
//!
//! The setup builds its coarse level from the matrix and a handful of
//! relaxed test vectors only:
//!
//! * strength of connection comes from *algebraic distances*, the reciprocal
//!   of the error of one-point least-squares interpolation between two
//!   unknowns ([`strength`]);
//! * coarse points are grown by compatible relaxation, adding independent
//!   sets of the algebraic-distance strength graph until F-relaxation
//!   converges fast enough ([`coarsen`]);
//! * interpolation rows are least-squares fits over small coarse subsets,
//!   with a penalty that keeps the rows sparse ([`interp`]).
//!
//! [`problem`] assembles the rotated anisotropic diffusion test matrices,
//! [`twogrid`] measures the resulting solver and [`experiment`] runs whole
//! parameter sweeps.
//!
//! ```
//! use bamg::prelude::*;
//!
//! let spec = ProblemSpec::new(16, 0.0, 1.0)?;
//! let a = assemble_matrix(&spec)?;
//! let seeds = SetupSeeds { test_vectors: 1, cr_start: 2, convergence: 3 };
//! let result = run_setup(&a, &MethodParams::default(), seeds)?;
//! assert!(result.report.rho < 1.0);
//! # Ok::<(), bamg::Error>(())
//! ```

pub mod coarsen;
pub mod direct;
pub mod error;
pub mod experiment;
pub mod interp;
pub mod mm;
pub mod problem;
pub mod reference;
pub mod setup;
pub mod sparse;
pub mod split;
pub mod strength;
pub mod tv;
pub mod twogrid;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/problem.md")]
    mod problem {}
    #[doc = include_str!("../../../book/src/strength.md")]
    mod strength {}
    #[doc = include_str!("../../../book/src/coarsening.md")]
    mod coarsening {}
    #[doc = include_str!("../../../book/src/interpolation.md")]
    mod interpolation {}
    #[doc = include_str!("../../../book/src/two-grid.md")]
    mod two_grid {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::coarsen::{cr_coarsen, estimate_rho_f, CrParams, CrReport};
    pub use crate::error::{Error, Result};
    pub use crate::interp::{assemble_interpolation, InterpOperator, InterpSearchParams};
    pub use crate::problem::{assemble_matrix, assemble_stencil, ProblemSpec};
    pub use crate::setup::{run_setup, MethodParams, SetupSeeds};
    pub use crate::sparse::CsrMatrix;
    pub use crate::split::CfSplit;
    pub use crate::strength::{build_strength_graph, LsContext};
    pub use crate::tv::{generate_test_vectors, TestVectorSet, WeightScheme};
    pub use crate::twogrid::{build_hierarchy, estimate_convergence, two_grid_cycle};
}
