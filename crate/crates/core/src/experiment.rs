//! Parameter sweeps over the anisotropic test problem: configuration,
//! per-cell seeding, parallel execution, CSV output and pattern export.
//!
//! A configuration is a TOML document whose keys mirror [`ExperimentConfig`]:
//!
//! ```toml
//! sizes = [32]
//! alphas = ["pi/4", "-pi/4", 0.0]
//! epsilons = [0.1]
//! seeds = [1, 2, 3]
//!
//! [method]
//! d = 2
//! d_ls = "d+2"
//! caliber = 4
//!
//! [output]
//! dir = "out"
//! patterns = true
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::interp::InterpOperator;
use crate::mm::write_matrix_market;
use crate::problem::{assemble_matrix, Grid, ProblemSpec};
use crate::reference::{self, ReferenceCell};
use crate::setup::{run_setup, MethodParams, SetupResult, SetupSeeds};
use crate::split::CfSplit;
use crate::twogrid::{extract_coarse_stencil, SolveReport, StencilEntry};

/// Fixed CSV header, one row per (cell, seed).
pub const CSV_HEADER: &str = "alpha,epsilon,N,d,d_LS,rho,rho_f,gamma_g,gamma_o,seed,error";

/// A whole sweep: the grid of problems, the method and where results go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sizes: Vec<usize>,
    #[serde(deserialize_with = "deserialize_angles")]
    pub alphas: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// Master seeds; each one is one replicate of every cell.
    pub seeds: Vec<u64>,
    pub method: MethodParams,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sizes: vec![32],
            alphas: vec![0.0],
            epsilons: vec![1.0],
            seeds: vec![1],
            method: MethodParams::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for `results.csv`, `run.log` and the optional extras below.
    /// Without it nothing is written to disk.
    pub dir: Option<PathBuf>,
    /// One JSON pattern file per successful (cell, seed) in `patterns/`.
    pub patterns: bool,
    /// Compatible-relaxation stages as JSON lines in `cr.jsonl`.
    pub cr_log: bool,
    /// Fine and coarse operators in Matrix Market format in `matrices/`.
    pub matrices: bool,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// The published anisotropic sweep: four angles, three anisotropy
    /// ratios, three sizes, three replicates.
    pub fn table1() -> Self {
        Self {
            sizes: reference::TABLE1_SIZES.to_vec(),
            alphas: reference::TABLE1_ALPHAS.to_vec(),
            epsilons: reference::TABLE1_EPSILONS.to_vec(),
            seeds: vec![1, 2, 3],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.method.validate()?;
        for &n in &self.sizes {
            for &alpha in &self.alphas {
                for &epsilon in &self.epsilons {
                    ProblemSpec::new(n, alpha, epsilon)?;
                }
            }
        }
        Ok(())
    }

    /// Cells in output order: size-major, then angle, then epsilon.
    pub fn cells(&self) -> Vec<ProblemSpec> {
        let mut out = Vec::new();
        for &n in &self.sizes {
            for &alpha in &self.alphas {
                for &epsilon in &self.epsilons {
                    out.push(ProblemSpec { n, alpha, epsilon });
                }
            }
        }
        out
    }
}

/// Parses `"pi/4"`, `"-3*pi/8"`, `"pi"`, `"0.5"` and the like into radians.
pub fn parse_angle(text: &str) -> Result<f64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Config(format!("cannot parse angle {text:?}"));
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s.strip_prefix('+').unwrap_or(&s)),
    };
    let (num, den) = match body.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().map_err(|_| bad())?),
        None => (body, 1.0),
    };
    let coeff = match num {
        "pi" => 1.0,
        _ => num
            .strip_suffix("*pi")
            .or_else(|| num.strip_suffix("pi"))
            .ok_or_else(bad)?
            .parse::<f64>()
            .map_err(|_| bad())?,
    };
    if den == 0.0 {
        return Err(bad());
    }
    Ok(sign * coeff * std::f64::consts::PI / den)
}

fn deserialize_angles<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Angle {
        Number(f64),
        Text(String),
    }
    Vec::<Angle>::deserialize(de)?
        .into_iter()
        .map(|a| match a {
            Angle::Number(v) => Ok(v),
            Angle::Text(s) => parse_angle(&s).map_err(serde::de::Error::custom),
        })
        .collect()
}

/// Independent seeds for one (cell, master seed) pair. Depends only on the
/// cell parameters and the master seed, never on position in the sweep.
pub fn cell_seeds(spec: &ProblemSpec, master: u64) -> SetupSeeds {
    let stream = |tag: &str| {
        let mut h = Sha256::new();
        h.update(master.to_le_bytes());
        h.update((spec.n as u64).to_le_bytes());
        h.update(spec.alpha.to_bits().to_le_bytes());
        h.update(spec.epsilon.to_bits().to_le_bytes());
        h.update(tag.as_bytes());
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    };
    SetupSeeds {
        test_vectors: stream("test-vectors"),
        cr_start: stream("cr-start"),
        convergence: stream("convergence"),
    }
}

/// Outcome of one (cell, seed).
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub spec: ProblemSpec,
    pub seed: u64,
    pub d: usize,
    pub d_ls: usize,
    pub result: std::result::Result<CellResult, String>,
    pub elapsed_secs: f64,
}

/// What a successful cell keeps for reporting and export.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub report: SolveReport,
    pub pattern: Pattern,
    pub setup: SetupResult,
}

/// Runs the full pipeline on one problem.
pub fn run_cell(spec: &ProblemSpec, params: &MethodParams, seed: u64) -> Result<CellResult> {
    let a = assemble_matrix(spec)?;
    let setup = run_setup(&a, params, cell_seeds(spec, seed))?;
    let pattern = Pattern::from_setup(spec, &setup)?;
    Ok(CellResult {
        report: setup.report,
        pattern,
        setup,
    })
}

/// Runs every (cell, seed) in parallel and returns them in sweep order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<CellOutcome>> {
    config.validate()?;
    let jobs: Vec<(ProblemSpec, u64)> = config
        .cells()
        .into_iter()
        .flat_map(|c| config.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let params = config.method;
    Ok(jobs
        .into_par_iter()
        .map(|(spec, seed)| {
            let start = Instant::now();
            let result = run_cell(&spec, &params, seed).map_err(|e| e.to_string());
            CellOutcome {
                spec,
                seed,
                d: params.d,
                d_ls: params.search_depth(),
                result,
                elapsed_secs: start.elapsed().as_secs_f64(),
            }
        })
        .collect())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// The CSV row of one outcome (no trailing newline). Failed cells leave the
/// measurements empty and fill `error`.
pub fn csv_row(o: &CellOutcome) -> String {
    let mut row = format!(
        "{},{},{},{},{},",
        o.spec.alpha, o.spec.epsilon, o.spec.n, o.d, o.d_ls
    );
    match &o.result {
        Ok(r) => {
            let _ = write!(
                row,
                "{},{},{},{},{},",
                r.report.rho, r.report.rho_f, r.report.gamma_g, r.report.gamma_o, o.seed
            );
        }
        Err(e) => {
            let _ = write!(row, ",,,,{},{}", o.seed, csv_field(e));
        }
    }
    row
}

pub fn write_csv<W: Write>(outcomes: &[CellOutcome], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for o in outcomes {
        writeln!(out, "{}", csv_row(o))?;
    }
    out.flush()?;
    Ok(())
}

fn cell_stem(o: &CellOutcome) -> String {
    format!(
        "n{}_alpha{:+.6}_eps{:e}_seed{}",
        o.spec.n, o.spec.alpha, o.spec.epsilon, o.seed
    )
}

/// Writes everything the configuration asks for into `output.dir`.
/// Timing information goes only to `run.log`, so `results.csv` is
/// reproducible byte for byte.
pub fn write_outputs(config: &ExperimentConfig, outcomes: &[CellOutcome]) -> Result<()> {
    let Some(dir) = &config.output.dir else {
        return Ok(());
    };
    fs::create_dir_all(dir)?;
    write_csv(outcomes, BufWriter::new(fs::File::create(dir.join("results.csv"))?))?;

    let mut log = BufWriter::new(fs::File::create(dir.join("run.log"))?);
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    writeln!(log, "started_unix {stamp}")?;
    for o in outcomes {
        let status = match &o.result {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("error: {e}"),
        };
        writeln!(log, "{} {:.3}s {}", cell_stem(o), o.elapsed_secs, status)?;
    }
    log.flush()?;

    if config.output.cr_log {
        let mut out = BufWriter::new(fs::File::create(dir.join("cr.jsonl"))?);
        for o in outcomes {
            if let Ok(r) = &o.result {
                for s in &r.setup.cr_report.stages {
                    let line = serde_json::json!({
                        "alpha": o.spec.alpha,
                        "epsilon": o.spec.epsilon,
                        "N": o.spec.n,
                        "seed": o.seed,
                        "stage": s.stage,
                        "added": s.added,
                        "rho_f": s.rho_f,
                    });
                    serde_json::to_writer(&mut out, &line)?;
                    out.write_all(b"\n")?;
                }
            }
        }
        out.flush()?;
    }
    if config.output.patterns {
        let pdir = dir.join("patterns");
        fs::create_dir_all(&pdir)?;
        for o in outcomes {
            if let Ok(r) = &o.result {
                r.pattern.write(&pdir.join(format!("{}.json", cell_stem(o))))?;
            }
        }
    }
    if config.output.matrices {
        let mdir = dir.join("matrices");
        fs::create_dir_all(&mdir)?;
        for o in outcomes {
            if let Ok(r) = &o.result {
                let h = &r.setup.hierarchy;
                let stem = cell_stem(o);
                write_matrix_market(h.fine(), BufWriter::new(fs::File::create(mdir.join(format!("{stem}_A.mtx")))?))?;
                write_matrix_market(h.coarse(), BufWriter::new(fs::File::create(mdir.join(format!("{stem}_Ac.mtx")))?))?;
                write_matrix_market(h.prolongator(), BufWriter::new(fs::File::create(mdir.join(format!("{stem}_P.mtx")))?))?;
            }
        }
    }
    Ok(())
}

/// Coarse grid, interpolation edges and one coarse stencil of a cell, in
/// grid coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub grid: usize,
    pub coarse: Vec<[usize; 2]>,
    pub interp_edges: Vec<[usize; 4]>,
    pub coarse_stencil: CoarseStencil,
}

/// `h^2`-scaled row of the coarse operator, offsets in fine-grid steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoarseStencil {
    pub center: Option<[usize; 2]>,
    pub offsets: Vec<[i64; 2]>,
    pub values: Vec<f64>,
}

impl CoarseStencil {
    pub fn entries(&self) -> Vec<StencilEntry> {
        self.offsets
            .iter()
            .zip(&self.values)
            .map(|(o, &value)| StencilEntry {
                dx: o[0],
                dy: o[1],
                value,
            })
            .collect()
    }
}

/// Coarse vertex closest to the middle of the grid (smallest index on ties).
pub fn central_coarse_vertex(split: &CfSplit, grid: Grid) -> Option<usize> {
    let mid = (grid.n as f64 - 1.0) / 2.0;
    split.coarse().iter().copied().min_by(|&a, &b| {
        let dist = |i: usize| {
            let (x, y) = grid.coords(i);
            (x as f64 - mid).powi(2) + (y as f64 - mid).powi(2)
        };
        dist(a).total_cmp(&dist(b)).then(a.cmp(&b))
    })
}

impl Pattern {
    pub fn new(spec: &ProblemSpec, split: &CfSplit, interp: &InterpOperator, stencil: CoarseStencil) -> Self {
        let grid = spec.grid();
        let coarse = split
            .coarse()
            .iter()
            .map(|&i| {
                let (x, y) = grid.coords(i);
                [x, y]
            })
            .collect();
        let interp_edges = interp
            .edges(split)
            .into_iter()
            .map(|(f, c)| {
                let (fx, fy) = grid.coords(f);
                let (cx, cy) = grid.coords(c);
                [fx, fy, cx, cy]
            })
            .collect();
        Self {
            grid: spec.n,
            coarse,
            interp_edges,
            coarse_stencil: stencil,
        }
    }

    pub fn from_setup(spec: &ProblemSpec, setup: &SetupResult) -> Result<Self> {
        let grid = spec.grid();
        let stencil = match central_coarse_vertex(&setup.split, grid) {
            Some(v) => {
                let h2 = spec.h() * spec.h();
                let entries = extract_coarse_stencil(&setup.hierarchy, &setup.split, grid, v, h2)?;
                let (x, y) = grid.coords(v);
                CoarseStencil {
                    center: Some([x, y]),
                    offsets: entries.iter().map(|e| [e.dx, e.dy]).collect(),
                    values: entries.iter().map(|e| e.value).collect(),
                }
            }
            None => CoarseStencil::default(),
        };
        Ok(Self::new(spec, &setup.split, setup.hierarchy.interp(), stencil))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(fs::File::open(path)?))?)
    }

    /// Fraction of interpolation edges joining points with the same `y`.
    pub fn same_row_fraction(&self) -> f64 {
        if self.interp_edges.is_empty() {
            return 1.0;
        }
        let same = self.interp_edges.iter().filter(|e| e[1] == e[3]).count();
        same as f64 / self.interp_edges.len() as f64
    }
}

/// Median over seeds of one cell, next to the published value when there
/// is one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSummary {
    pub spec: ProblemSpec,
    pub runs: usize,
    pub failures: usize,
    pub rho: f64,
    pub gamma_g: f64,
    pub gamma_o: f64,
    pub reference: Option<ReferenceCell>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Groups outcomes by cell (in first-seen order) and takes medians.
pub fn summarize(outcomes: &[CellOutcome]) -> Vec<CellSummary> {
    let mut cells: Vec<ProblemSpec> = Vec::new();
    for o in outcomes {
        if !cells.contains(&o.spec) {
            cells.push(o.spec);
        }
    }
    cells
        .into_iter()
        .map(|spec| {
            let group: Vec<&CellOutcome> = outcomes.iter().filter(|o| o.spec == spec).collect();
            let ok: Vec<SolveReport> = group
                .iter()
                .filter_map(|o| o.result.as_ref().ok().map(|r| r.report))
                .collect();
            CellSummary {
                spec,
                runs: group.len(),
                failures: group.len() - ok.len(),
                rho: median(ok.iter().map(|r| r.rho).collect()),
                gamma_g: median(ok.iter().map(|r| r.gamma_g).collect()),
                gamma_o: median(ok.iter().map(|r| r.gamma_o).collect()),
                reference: reference::lookup(spec.alpha, spec.epsilon, spec.n),
            }
        })
        .collect()
}

/// Human-readable comparison table of summaries.
pub fn format_summary(rows: &[CellSummary]) -> String {
    let mut s = String::from("alpha     epsilon  N     rho   gamma_g gamma_o | ref   rho gamma_g gamma_o\n");
    for r in rows {
        let _ = write!(
            s,
            "{:+.4}  {:<7e}  {:<4}  {:.3} {:.3}   {:.3}  ",
            r.spec.alpha, r.spec.epsilon, r.spec.n, r.rho, r.gamma_g, r.gamma_o
        );
        match r.reference {
            Some(p) => {
                let _ = writeln!(s, "|       {:.2}  {:.2}    {:.1}", p.rho, p.gamma_g, p.gamma_o);
            }
            None => s.push_str("|\n"),
        }
        if r.failures > 0 {
            let _ = writeln!(s, "  ({} of {} runs failed)", r.failures, r.runs);
        }
    }
    s
}

/// Coarse stencil of the central coarse vertex, rounded to hundredths, and
/// the angle between its strongest off-diagonal coupling and the anisotropy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StencilReport {
    pub alpha: f64,
    pub epsilon: f64,
    pub n: usize,
    pub stencil: CoarseStencil,
    /// Degrees between the dominant off-diagonal offset and the strong
    /// direction, in `[0, 90]`.
    pub dominant_angle: f64,
}

pub fn stencil_report(spec: &ProblemSpec, params: &MethodParams, seed: u64) -> Result<StencilReport> {
    let cell = run_cell(spec, params, seed)?;
    let mut stencil = cell.pattern.coarse_stencil;
    let dominant = crate::twogrid::dominant_offdiagonals(&stencil.entries());
    let dominant_angle = dominant
        .first()
        .map(|e| crate::twogrid::angle_to_direction(e.dx, e.dy, spec.alpha))
        .unwrap_or(f64::NAN);
    for v in &mut stencil.values {
        *v = (*v * 100.0).round() / 100.0;
    }
    Ok(StencilReport {
        alpha: spec.alpha,
        epsilon: spec.epsilon,
        n: spec.n,
        stencil,
        dominant_angle,
    })
}

/// Lays a stencil out as a text grid, rows from north to south.
pub fn format_stencil(stencil: &CoarseStencil) -> String {
    if stencil.offsets.is_empty() {
        return String::from("(empty)\n");
    }
    let xs = stencil.offsets.iter().map(|o| o[0]);
    let ys = stencil.offsets.iter().map(|o| o[1]);
    let (x0, x1) = (xs.clone().min().unwrap(), xs.max().unwrap());
    let (y0, y1) = (ys.clone().min().unwrap(), ys.max().unwrap());
    let mut s = String::new();
    for y in (y0..=y1).rev() {
        for x in x0..=x1 {
            match stencil.offsets.iter().position(|o| *o == [x, y]) {
                Some(k) => {
                    let _ = write!(s, "{:>8.2}", stencil.values[k]);
                }
                None => s.push_str("       ."),
            }
        }
        s.push('\n');
    }
    s
}
