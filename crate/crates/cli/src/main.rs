use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use bamg::experiment::{
    format_stencil, format_summary, parse_angle, run_cell, run_experiment, stencil_report, summarize, write_csv,
    write_outputs, ExperimentConfig,
};
use bamg::prelude::*;
use clap::{Args, Parser, Subcommand};

/// Two-level bootstrap AMG experiments on the rotated anisotropic diffusion problem.
#[derive(Parser)]
#[command(name = "bamg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the built-in anisotropic sweep and compare with the published table.
    Table1 {
        /// Restrict to these grid sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[command(flatten)]
        common: Common,
    },
    /// Run one cell and export its coarse grid and interpolation pattern as JSON.
    Pattern {
        /// Output JSON file.
        path: PathBuf,
        #[command(flatten)]
        cell: CellArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Print the coarse-operator stencils for alpha = pi/4 and -pi/4.
    Stencil {
        #[arg(long, default_value_t = 32)]
        n: usize,
        #[arg(long, default_value_t = 1e-10)]
        epsilon: f64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct CellArgs {
    #[arg(long, default_value_t = 32)]
    n: usize,
    /// Angle in radians or as a multiple of pi, e.g. "-pi/4".
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    alpha: String,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
}

#[derive(Args)]
struct Common {
    /// Master seed (replaces the seed list of a sweep).
    #[arg(long)]
    seed: Option<u64>,
    /// Strength-graph distance; the interpolation search depth follows as d + 2.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    theta_ad: Option<f64>,
    #[arg(long)]
    caliber: Option<usize>,
    /// Output directory (sweeps) or file (stencil report as JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(d) = self.d {
            cfg.method.d = d;
        }
        if let Some(t) = self.theta_ad {
            cfg.method.theta_ad = t;
        }
        if let Some(c) = self.caliber {
            cfg.method.caliber = c;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = Some(o.clone());
        }
    }

    fn method(&self) -> MethodParams {
        let mut cfg = ExperimentConfig::default();
        self.apply(&mut cfg);
        cfg.method
    }
}

fn sweep(mut cfg: ExperimentConfig, common: &Common, comparison: bool) -> Result<()> {
    common.apply(&mut cfg);
    cfg.validate()?;
    let outcomes = run_experiment(&cfg)?;
    write_outputs(&cfg, &outcomes)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if comparison || cfg.output.dir.is_some() {
        write!(out, "{}", format_summary(&summarize(&outcomes)))?;
    } else {
        write_csv(&outcomes, &mut out)?;
    }
    for o in &outcomes {
        if let Err(e) = &o.result {
            eprintln!(
                "cell N={} alpha={} epsilon={} seed={} failed: {e}",
                o.spec.n, o.spec.alpha, o.spec.epsilon, o.seed
            );
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, common } => {
            let cfg = ExperimentConfig::from_path(&config)
                .with_context(|| format!("reading config {}", config.display()))?;
            sweep(cfg, &common, false)
        }
        Command::Table1 { sizes, common } => {
            let mut cfg = ExperimentConfig::table1();
            if let Some(s) = sizes {
                cfg.sizes = s;
            }
            sweep(cfg, &common, true)
        }
        Command::Pattern { path, cell, common } => {
            let alpha = parse_angle(&cell.alpha)?;
            let spec = ProblemSpec::new(cell.n, alpha, cell.epsilon)?;
            let params = common.method();
            params.validate()?;
            let result = run_cell(&spec, &params, common.seed.unwrap_or(1))?;
            result.pattern.write(&path)?;
            let r = result.report;
            println!(
                "rho {:.3} rho_f {:.3} gamma_g {:.3} gamma_o {:.3} -> {}",
                r.rho,
                r.rho_f,
                r.gamma_g,
                r.gamma_o,
                path.display()
            );
            Ok(())
        }
        Command::Stencil { n, epsilon, common } => {
            let params = common.method();
            params.validate()?;
            let seed = common.seed.unwrap_or(1);
            let mut reports = Vec::new();
            for alpha in [std::f64::consts::FRAC_PI_4, -std::f64::consts::FRAC_PI_4] {
                let spec = ProblemSpec::new(n, alpha, epsilon)?;
                let rep = stencil_report(&spec, &params, seed)?;
                let Some(c) = rep.stencil.center else {
                    bail!("no coarse points for alpha = {alpha}");
                };
                println!(
                    "alpha = {:+.4}, epsilon = {epsilon:e}, N = {n}, coarse vertex ({}, {}), dominant coupling {:.1} deg off the strong direction",
                    alpha, c[0], c[1], rep.dominant_angle
                );
                print!("{}", format_stencil(&rep.stencil));
                println!();
                reports.push(rep);
            }
            if let Some(path) = &common.out {
                fs::write(path, serde_json::to_string_pretty(&reports)?)?;
            }
            Ok(())
        }
    }
}
