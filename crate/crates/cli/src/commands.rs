use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use jacobi_spectra::chain::{chain_to_jacobi, perturbation_physics, MassSpringChain, Perturbation};
use jacobi_spectra::config::RunConfig;
use jacobi_spectra::direct::{classify_two_spectra, master_formula_residual, ratio_m};
use jacobi_spectra::fixtures::{generate, FixtureKind};
use jacobi_spectra::inverse::{check_ns_conditions_with, detect_mode, problem_from_forward, solve, InverseProblem, Mode};
use jacobi_spectra::par::Execution;
use jacobi_spectra::sweep::{run_sweep, SweepGrid};

use crate::output::{mode_record, read_json, sweep_record, OutDir, EXIT_DOMAIN, MODES_HEADER, SWEEP_HEADER};

#[derive(Debug, Parser)]
#[command(name = "ji", version, about = "Two-spectra analysis of Jacobi matrices and mass-spring chains")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Run configuration file (JSON); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Truncation size for generated chains.
    #[arg(long, global = true)]
    size: Option<usize>,
    /// Seed for random fixtures.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Maximum number of inverse candidates.
    #[arg(long, global = true)]
    cap: Option<usize>,
    /// Run without the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a generated chain to chain.json.
    Fixture {
        /// uniform, random-loguniform, palindromic or common-spectrum
        #[arg(long, default_value = "uniform")]
        kind: String,
    },
    /// Spectra and diagnostics of one perturbation of a chain.
    Forward {
        /// Chain file; a fixture is generated when omitted.
        chain: Option<PathBuf>,
        /// Fixture kind used when no chain file is given.
        #[arg(long, default_value = "uniform")]
        kind: String,
        /// Perturbed site, 1-based.
        #[arg(long)]
        site: usize,
        /// Scaling of the two springs around the site.
        #[arg(long)]
        theta: f64,
        /// Diagonal shift at the site.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        h: f64,
    },
    /// Reconstruct candidate matrices from two spectra.
    Inverse {
        /// Problem file, as written to inverse_input.json by `forward`.
        spectra: PathBuf,
        #[command(flatten)]
        overrides: ProblemOverrides,
    },
    /// Grid over theta, h and site; writes sweep.csv and modes.csv.
    Sweep {
        /// Chain file; a fixture is generated when omitted.
        chain: Option<PathBuf>,
        #[arg(long, default_value = "uniform")]
        kind: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        theta: Vec<f64>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        h: Vec<f64>,
        /// Comma-separated 1-based sites.
        #[arg(long, value_delimiter = ',', required = true)]
        site: Vec<usize>,
    },
    /// Check the solvability conditions on two spectra without solving.
    Check {
        /// Problem file, as for `inverse`.
        spectra: PathBuf,
        #[command(flatten)]
        overrides: ProblemOverrides,
    },
}

#[derive(Debug, clap::Args)]
struct ProblemOverrides {
    /// Replaces the file's gamma.
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Replaces the file's site.
    #[arg(long)]
    site: Option<usize>,
    /// Needed when gamma is a shared eigenvalue.
    #[arg(long)]
    theta: Option<f64>,
    /// disjoint, common or gamma-in-spectrum
    #[arg(long)]
    mode: Option<String>,
}

impl ProblemOverrides {
    fn apply(&self, mut p: InverseProblem) -> Result<InverseProblem> {
        if let Some(g) = self.gamma {
            p.gamma = g;
        }
        if let Some(n) = self.site {
            p.n = n;
        }
        if let Some(t) = self.theta {
            p.theta = Some(t);
        }
        if let Some(m) = &self.mode {
            p.mode = Some(m.parse::<Mode>()?);
        }
        Ok(p)
    }
}

fn config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => read_json::<RunConfig>(path)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.size {
        cfg.truncation_size = n;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(c) = cli.cap {
        cfg.candidate_cap = c;
    }
    if cli.sequential {
        cfg.execution = Execution::Sequential;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_chain(path: &Option<PathBuf>, kind: &str, cfg: &RunConfig) -> Result<MassSpringChain> {
    match path {
        Some(p) => read_json(p),
        None => Ok(generate(kind.parse::<FixtureKind>()?, cfg.seed, cfg.truncation_size)?),
    }
}

#[derive(Serialize)]
struct Spectra<'a> {
    spectrum_j: &'a [f64],
    spectrum_jt: &'a [f64],
}

#[derive(Serialize)]
struct PerturbationReport {
    site: usize,
    theta: f64,
    h: f64,
    gamma: f64,
    delta_m: f64,
    delta_k: f64,
}

#[derive(Serialize)]
struct ResidualPoint {
    z: Complex64,
    residual: f64,
    bound: f64,
    pass: bool,
}

#[derive(Serialize)]
struct ResidualReport {
    all_pass: bool,
    points: Vec<ResidualPoint>,
}

/// Off-axis sample points spanning the spectrum, in both half-planes.
fn residual_points(spectrum: &[f64]) -> Vec<Complex64> {
    let lo = spectrum.first().copied().unwrap_or(0.0);
    let hi = spectrum.last().copied().unwrap_or(0.0);
    let width = (hi - lo).max(1.0);
    (0..10)
        .map(|k| {
            let im = (0.1 + 0.3 * k as f64) * if k % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(lo + width * k as f64 / 9.0, im)
        })
        .collect()
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = config(&cli)?;
    let out = || OutDir::create(&cli.out);
    match &cli.command {
        Command::Fixture { kind } => {
            let chain = generate(kind.parse::<FixtureKind>()?, cfg.seed, cfg.truncation_size)?;
            let path = out()?.json("chain.json", &chain)?;
            println!("{}", path.display());
        }
        Command::Forward { chain, kind, site, theta, h } => {
            let chain = load_chain(chain, kind, &cfg)?;
            let j = chain_to_jacobi(&chain);
            let p = Perturbation::new(*site, *theta, *h)?;
            let dir = out()?;
            let data = classify_two_spectra(&j, &p)?;
            dir.json("jacobi.json", &j)?;
            dir.json("spectra.json", &Spectra { spectrum_j: &data.spectrum_j, spectrum_jt: &data.spectrum_jt })?;
            dir.json("two_spectra.json", &data)?;
            let gamma = p.gamma().context("the master-formula report needs gamma")?;
            let (delta_m, delta_k) = perturbation_physics(&p, chain.masses()[site - 1]);
            dir.json("perturbation.json", &PerturbationReport { site: *site, theta: *theta, h: *h, gamma, delta_m, delta_k })?;
            let mut points = Vec::new();
            for z in residual_points(&data.spectrum_j) {
                let residual = master_formula_residual(&j, &p, z)?;
                let bound = 1e-9 * (1.0 + ratio_m(&j, &p, z)?.norm());
                points.push(ResidualPoint { z, residual, bound, pass: residual <= bound });
            }
            let report = ResidualReport { all_pass: points.iter().all(|p| p.pass), points };
            dir.json("master_residuals.json", &report)?;
            dir.json("inverse_input.json", &problem_from_forward(&j, &p)?)?;
            println!(
                "{} common, {} pairs, master formula {}",
                data.common.len(),
                data.pairing.len(),
                if report.all_pass { "ok" } else { "FAILED" }
            );
        }
        Command::Inverse { spectra, overrides } => {
            let problem = overrides.apply(read_json(spectra)?)?;
            let sol = solve(&problem, &cfg.solve_options())?;
            let dir = out()?;
            dir.json("inverse.json", &sol)?;
            dir.json("conditions.json", &sol.conditions)?;
            let passing = sol.candidates.iter().filter(|c| c.residuals.pass).count();
            println!(
                "mode {}, theta {:.16e}, {} of {} candidates verified{}",
                sol.mode.name(),
                sol.theta,
                passing,
                sol.candidates.len(),
                if sol.truncated { format!(" (family of {} truncated)", sol.total_splits) } else { String::new() }
            );
        }
        Command::Sweep { chain, kind, theta, h, site } => {
            let chain = load_chain(chain, kind, &cfg)?;
            let grid = SweepGrid { thetas: theta.clone(), hs: h.clone(), sites: site.clone() };
            let result = run_sweep(&chain_to_jacobi(&chain), &grid, cfg.execution)?;
            let dir = out()?;
            dir.csv("sweep.csv", &SWEEP_HEADER, result.rows.iter().map(sweep_record))?;
            dir.csv("modes.csv", &MODES_HEADER, result.modes.iter().map(mode_record))?;
            println!("{} grid points", result.rows.len());
        }
        Command::Check { spectra, overrides } => {
            let problem = overrides.apply(read_json(spectra)?)?;
            let common_rel = cfg.tolerance("common_rel");
            let mode = problem.mode.unwrap_or_else(|| detect_mode(&problem.lambdas, &problem.mus, problem.gamma, common_rel, problem.theta));
            let report = check_ns_conditions_with(
                &problem.lambdas,
                &problem.mus,
                problem.gamma,
                problem.n,
                mode,
                problem.theta,
                common_rel,
            );
            out()?.json("conditions.json", &report)?;
            for (name, c) in [
                ("interlacing", &report.interlacing),
                ("summability", &report.summability),
                ("constancy", &report.constancy),
                ("cardinality", &report.cardinality),
            ] {
                println!("{name}: {} ({})", if c.pass { "pass" } else { "FAIL" }, c.detail);
            }
            if !report.all_pass() {
                return Ok(ExitCode::from(EXIT_DOMAIN));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
