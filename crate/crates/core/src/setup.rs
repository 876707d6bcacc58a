//! The full two-level setup for one matrix: test vectors, coarsening,
//! interpolation, Galerkin hierarchy and the convergence measurement.

use serde::{Deserialize, Deserializer, Serialize};

use crate::coarsen::{cr_coarsen, CrParams, CrReport, CrStart};
use crate::error::{Error, Result};
use crate::interp::{assemble_interpolation, InterpSearchParams, PenaltyScale};
use crate::sparse::CsrMatrix;
use crate::split::CfSplit;
use crate::strength::{FitTarget, GraphMode, LsContext};
use crate::tv::{generate_test_vectors, WeightScheme};
use crate::twogrid::{build_hierarchy, complexity_metrics, estimate_convergence, SolveReport, TwoGridHierarchy};

/// Every knob of the setup and solve phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodParams {
    /// Graph distance for the strength graph.
    pub d: usize,
    /// Coarse search depth for interpolation; `None` (or `"d+2"` in a
    /// config file) means `d + 2`.
    #[serde(deserialize_with = "deserialize_d_ls", skip_serializing_if = "Option::is_none")]
    pub d_ls: Option<usize>,
    pub theta_ad: f64,
    pub caliber: usize,
    pub gamma: f64,
    pub max_candidates: usize,
    pub nu: usize,
    pub delta: f64,
    pub max_stages: usize,
    pub k: usize,
    pub tv_relax_count: usize,
    pub eta: usize,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    pub weights: WeightScheme,
    pub target: FitTarget,
    pub random_cr_start: bool,
    pub graph: GraphMode,
    pub penalty_scale: PenaltyScale,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            d: 2,
            d_ls: None,
            theta_ad: 0.5,
            caliber: 4,
            gamma: 1.5,
            max_candidates: 12,
            nu: 5,
            delta: 0.7,
            max_stages: 20,
            k: 8,
            tv_relax_count: 40,
            eta: 100,
            pre_sweeps: 2,
            post_sweeps: 2,
            weights: WeightScheme::InverseRayleigh,
            target: FitTarget::ResidualCorrected,
            random_cr_start: false,
            graph: GraphMode::Direct,
            penalty_scale: PenaltyScale::CorrectionEnergy,
        }
    }
}

fn deserialize_d_ls<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Option<usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Depth {
        Fixed(usize),
        Text(String),
    }
    match Option::<Depth>::deserialize(de)? {
        None => Ok(None),
        Some(Depth::Fixed(v)) => Ok(Some(v)),
        Some(Depth::Text(s)) if s.replace(' ', "") == "d+2" => Ok(None),
        Some(Depth::Text(s)) => Err(serde::de::Error::custom(format!("d_ls must be an integer or \"d+2\", got {s:?}"))),
    }
}

impl MethodParams {
    pub fn search_depth(&self) -> usize {
        self.d_ls.unwrap_or(self.d + 2)
    }

    pub fn cr_params(&self, seed: u64) -> CrParams {
        CrParams {
            nu: self.nu,
            delta: self.delta,
            depth: self.d,
            theta_ad: self.theta_ad,
            max_stages: self.max_stages,
            start: if self.random_cr_start {
                CrStart::Random(seed)
            } else {
                CrStart::Constant
            },
            graph: self.graph,
        }
    }

    pub fn interp_params(&self) -> InterpSearchParams {
        InterpSearchParams {
            caliber: self.caliber,
            search_depth: self.search_depth(),
            gamma: self.gamma,
            max_candidates: self.max_candidates,
            penalty_scale: self.penalty_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cr_params(0).validate()?;
        self.interp_params().validate()?;
        if self.k < 2 {
            return Err(Error::InvalidParameter(format!("k = {} < 2", self.k)));
        }
        if self.caliber > self.k {
            return Err(Error::InvalidParameter(format!(
                "caliber {} exceeds the number of test vectors {}",
                self.caliber, self.k
            )));
        }
        if self.eta < 2 {
            return Err(Error::InvalidParameter(format!("eta = {} < 2", self.eta)));
        }
        Ok(())
    }
}

/// Independent random streams used by one setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetupSeeds {
    pub test_vectors: u64,
    pub cr_start: u64,
    pub convergence: u64,
}

/// Everything produced by one setup and solve.
#[derive(Debug, Clone)]
pub struct SetupResult {
    pub split: CfSplit,
    pub cr_report: CrReport,
    pub hierarchy: TwoGridHierarchy,
    pub report: SolveReport,
    pub convergence_exact_early: bool,
}

/// Builds the two-level method for `a` and measures it.
pub fn run_setup(a: &CsrMatrix, params: &MethodParams, seeds: SetupSeeds) -> Result<SetupResult> {
    params.validate()?;
    let tvs = generate_test_vectors(a, params.k, params.tv_relax_count, seeds.test_vectors, params.weights)?;
    let ctx = LsContext::with_target(&tvs, a, params.target)?;
    let (split, cr_report) = cr_coarsen(a, &ctx, &params.cr_params(seeds.cr_start))?;
    let interp = assemble_interpolation(&ctx, a, &split, &params.interp_params())?;
    let hierarchy = build_hierarchy(a, &split, interp, params.pre_sweeps, params.post_sweeps)?;
    let estimate = estimate_convergence(&hierarchy, params.eta, seeds.convergence)?;
    let (gamma_o, gamma_g) = complexity_metrics(a, hierarchy.coarse(), &split);
    Ok(SetupResult {
        report: SolveReport {
            rho: estimate.rho,
            rho_f: cr_report.final_rho_f,
            gamma_o,
            gamma_g,
            iterations: estimate.iterations,
        },
        convergence_exact_early: estimate.exact_early,
        split,
        cr_report,
        hierarchy,
    })
}
