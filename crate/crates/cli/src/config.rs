//! Versioned TOML run configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use symnv::pipeline::{Method, RunOptions};
use symnv::problems::ProblemSpec;
use symnv::sdp::SolverOptions;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub problem: Option<ProblemSpec>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub method: Method,
    pub seed: u64,
    pub max_samples: usize,
    pub consistency_tol: f64,
    pub enumerate_ranks: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        let d = RunOptions::default();
        Self { method: d.method, seed: d.seed, max_samples: d.max_samples, consistency_tol: d.consistency_tol, enumerate_ranks: false }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    /// Include per-stage timings in the JSON report.
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { schema_version: SCHEMA_VERSION, problem: None, run: RunSection::default(), solver: SolverOptions::default(), output: OutputSection::default() }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            bail!("unsupported schema_version {} (expected {SCHEMA_VERSION})", cfg.schema_version);
        }
        Ok(cfg)
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions { method: self.run.method, seed: self.run.seed, max_samples: self.run.max_samples, consistency_tol: self.run.consistency_tol, solver: self.solver }
    }
}

/// `name key=value ..` with TOML values, e.g. `i3322 c=1.0 d=2 level="small"`.
pub fn parse_inline_problem(s: &str) -> Result<ProblemSpec> {
    let mut parts = s.split_whitespace();
    let Some(name) = parts.next() else { bail!("empty problem") };
    let mut doc = format!("name = {name:?}\n");
    for kv in parts {
        let Some((k, v)) = kv.split_once('=') else { bail!("expected key=value, got {kv:?}") };
        doc.push_str(&format!("{k} = {v}\n"));
    }
    Ok(toml::from_str(&doc).with_context(|| format!("problem {s:?}"))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_config_parses() {
        let cfg = RunConfig::parse(
            r#"
schema_version = 1
[problem]
name = "i3322"
c = 1.0
d = 2
level = "small"
[run]
method = "blocks"
seed = 7
[output]
path = "report.json"
"#,
        )
        .unwrap();
        assert_eq!(cfg.run.method, Method::Blocks);
        assert_eq!(cfg.run.seed, 7);
        assert!(matches!(cfg.problem, Some(ProblemSpec::I3322 { d: 2, .. })));
    }

    #[test]
    fn partial_solver_table_keeps_defaults() {
        let cfg = RunConfig::parse("schema_version = 1\n[solver]\ngap_tol = 1e-7\n").unwrap();
        assert_eq!(cfg.solver.gap_tol, 1e-7);
        assert_eq!(cfg.solver.max_iterations, SolverOptions::default().max_iterations);
        assert!(RunConfig::parse("schema_version = 1\n[solver]\ngap = 1e-7\n").is_err());
    }

    #[test]
    fn wrong_schema_is_rejected() {
        assert!(RunConfig::parse("schema_version = 2").is_err());
    }

    #[test]
    fn inline_problem() {
        assert_eq!(parse_inline_problem("rac n=3 d=2").unwrap(), ProblemSpec::Rac { n: 3, d: 2 });
        assert!(parse_inline_problem("rac n").is_err());
    }
}
