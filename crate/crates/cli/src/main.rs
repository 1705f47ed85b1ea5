//! `symnv`: batch front end for sampled, symmetry-reduced moment relaxations.

mod config;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use symnv::pipeline::{self, assemble_setup, Method, Setup};
use symnv::rng::stream_rng;
use symnv::scenario::{ambient_group, discover_symmetries};
use symnv::sdp::write_sdpa;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "symnv", version, about = "Dimension-bounded quantum correlation bounds from sampled moment relaxations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample, symmetrize, assemble and solve; print the report.
    Run(Common),
    /// Search the ambient group for symmetries of the objective.
    Symmetries(Common),
    /// Print the isotypic and irreducible block structure.
    Decompose(Common),
    /// Write the assembled SDP in sparse SDPA format.
    Emit(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline problem, e.g. `rac n=3 d=2` (overrides the config's problem).
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    method: Option<Method>,
    /// Output file: JSON report for `run`, SDPA data for `emit`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximize over rank profiles (i3322 only).
    #[arg(long)]
    enumerate_ranks: bool,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    json: bool,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.problem {
            cfg.problem = Some(config::parse_inline_problem(p)?);
        }
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        if let Some(m) = self.method {
            cfg.run.method = m;
        }
        if let Some(o) = &self.out {
            cfg.output.path = Some(o.clone());
        }
        cfg.run.enumerate_ranks |= self.enumerate_ranks;
        if cfg.problem.is_none() {
            bail!("no problem given: pass --config or --problem");
        }
        Ok(cfg)
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(c) => run(&c),
        Command::Symmetries(c) => symmetries(&c),
        Command::Decompose(c) => decompose(&c),
        Command::Emit(c) => emit(&c),
    }
}

fn run(c: &Common) -> Result<()> {
    let cfg = c.resolve()?;
    let spec = cfg.problem.as_ref().expect("resolved");
    let opts = cfg.run_options();
    let report = if cfg.run.enumerate_ranks { pipeline::run_rank_enumeration(spec, &opts)? } else { pipeline::run(spec, &opts)? };
    if let Some(path) = &cfg.output.path {
        std::fs::write(path, report.to_json(cfg.output.timings)).with_context(|| format!("writing {}", path.display()))?;
    }
    if c.json {
        println!("{}", report.to_json(cfg.output.timings));
    } else {
        print!("{}", report.table());
    }
    Ok(())
}

fn symmetries(c: &Common) -> Result<()> {
    let cfg = c.resolve()?;
    let problem = cfg.problem.as_ref().expect("resolved").build()?;
    let ambient = ambient_group(&problem.scenario).context("ambient group")?;
    let mut rng = stream_rng(cfg.run.seed, 1 << 41);
    let objective = |r: &symnv::sampler::Realization| problem.objective.evaluate(r);
    let found = discover_symmetries(&problem.scenario, &ambient, &objective, 1_000_000, &mut rng)?;
    println!("order {}", found.order().unwrap_or(1));
    for g in &found.generators {
        println!("  {}", g.cycles());
    }
    Ok(())
}

fn decompose(c: &Common) -> Result<()> {
    let cfg = c.resolve()?;
    let problem = cfg.problem.as_ref().expect("resolved").build()?;
    let setup = Setup::new(problem, Method::Irreps, cfg.run.seed)?;
    let basis = setup.decomposition.as_ref().expect("irreps decomposition");
    println!("monomials {}", setup.mset.len());
    println!("group order {}", setup.group_order());
    println!("{:>6} {:>6} {:>12} {:>5}", "offset", "dim", "multiplicity", "real");
    for b in &basis.irreps {
        println!("{:>6} {:>6} {:>12} {:>5}", b.offset, b.dim, b.multiplicity, b.real_type);
    }
    println!("blocks {}", pipeline::block_summary(&basis.block_dims()));
    if let Some(path) = &cfg.output.path {
        std::fs::write(path, serde_json::to_string_pretty(&basis.to_json())?)?;
    }
    Ok(())
}

fn emit(c: &Common) -> Result<()> {
    let cfg = c.resolve()?;
    let Some(path) = cfg.output.path.clone() else { bail!("emit needs --out or [output] path") };
    let problem = cfg.problem.as_ref().expect("resolved").build()?;
    let setup = Setup::new(problem, cfg.run.method, cfg.run.seed)?;
    let a = assemble_setup(&setup, &cfg.run_options())?;
    write_sdpa(&a.sdp, &path)?;
    println!("wrote {} constraints, blocks {:?} to {}", a.sdp.m(), a.sdp.block_dims, path.display());
    Ok(())
}
