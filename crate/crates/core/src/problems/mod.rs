//! Built-in problem families: objective polynomials, symmetry generators and
//! relaxation levels.

mod facet;
mod i3322;
mod multiparty;
mod rac;
mod sic;

pub use facet::facet;
pub use i3322::{i3322, rank_orbit_representatives, I3322Level};
pub use multiparty::multiparty;
pub use rac::rac;
pub use sic::{sic, sic_quantum_value, PairRanks};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::permgroup::{PermError, PermGroup, Permutation};
use crate::sampler::Realization;
use crate::scenario::{Factor, Level, Monomial, Scenario};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid parameters: {0}")]
    Parameters(String),
    #[error(transparent)]
    Perm(#[from] PermError),
}

/// `constant + Σ coefficient · Re⟨word⟩`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Objective {
    pub constant: f64,
    pub terms: Vec<(f64, Vec<Factor>)>,
}

impl Objective {
    pub fn evaluate(&self, real: &Realization) -> f64 {
        self.constant + self.terms.iter().map(|(c, w)| c * real.expectation(w)).sum::<f64>()
    }

    pub fn add(&mut self, coefficient: f64, word: Vec<Factor>) {
        self.terms.push((coefficient, word));
    }

    /// Adds `coefficient · ⟨X_a X_b ..⟩` for Hermitian operator ids.
    pub fn add_ops(&mut self, coefficient: f64, ops: &[usize]) {
        self.add(coefficient, ops.iter().map(|&o| Factor::new(o)).collect());
    }
}

/// Which built-in problem to build, with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ProblemSpec {
    Rac { n: usize, d: usize },
    I3322 {
        c: f64,
        d: usize,
        /// Number of `+1` eigenvalues of `A_1..A_3, B_1..B_3`; free when absent.
        #[serde(default)]
        ranks: Option<Vec<usize>>,
        #[serde(default)]
        level: I3322Level,
    },
    Facet { d: usize },
    Sic {
        d: usize,
        #[serde(default)]
        pair_ranks: PairRanks,
    },
    Multiparty { n: usize, d: usize },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem, ProblemError> {
        match self {
            ProblemSpec::Rac { n, d } => rac(*n, *d),
            ProblemSpec::I3322 { c, d, ranks, level } => i3322(*c, *d, ranks.as_deref(), *level),
            ProblemSpec::Facet { d } => facet(*d),
            ProblemSpec::Sic { d, pair_ranks } => sic(*d, *pair_ranks),
            ProblemSpec::Multiparty { n, d } => multiparty(*n, *d),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ProblemSpec::Rac { n, d } => format!("rac(n={n}, d={d})"),
            ProblemSpec::I3322 { c, d, ranks, level } => match ranks {
                Some(r) => format!("i3322(c={c}, d={d}, ranks={r:?}, level={level:?})"),
                None => format!("i3322(c={c}, d={d}, level={level:?})"),
            },
            ProblemSpec::Facet { d } => format!("facet(d={d})"),
            ProblemSpec::Sic { d, .. } => format!("sic(d={d})"),
            ProblemSpec::Multiparty { n, d } => format!("multiparty(n={n}, d={d})"),
        }
    }
}

/// A fully specified optimization problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub scenario: Scenario,
    pub level: Level,
    /// Additional monomials, closed under the symmetry group before use.
    pub extra: Vec<Monomial>,
    /// Signed operator permutations generating the symmetry group.
    pub generators: Vec<Permutation>,
    pub objective: Objective,
}

impl Problem {
    pub fn group(&self) -> Result<PermGroup, ProblemError> {
        let degree = 2 * self.scenario.num_operators();
        if self.generators.is_empty() {
            return Ok(PermGroup::trivial(degree));
        }
        Ok(PermGroup::new(degree, self.generators.clone())?)
    }
}

/// Signed operator permutation from `op ↦ (image, negated)`.
pub(crate) fn relabel(n: usize, f: impl Fn(usize) -> (usize, bool)) -> Result<Permutation, ProblemError> {
    let v: Vec<(usize, bool)> = (0..n).map(f).collect();
    Ok(Permutation::signed(&v)?)
}

/// A transposition and a full cycle of `0..k`, as maps on `0..k`.
pub(crate) fn symmetric_generators(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k >= 2 {
        let mut t: Vec<usize> = (0..k).collect();
        t.swap(0, 1);
        out.push(t);
    }
    if k >= 3 {
        out.push((0..k).map(|i| (i + 1) % k).collect());
    }
    out
}

/// Products `a·b` of two monomials.
pub(crate) fn words(prefixes: &[Vec<Factor>], suffixes: &[Vec<Factor>]) -> Vec<Monomial> {
    let mut out = Vec::with_capacity(prefixes.len() * suffixes.len());
    for p in prefixes {
        for s in suffixes {
            let mut f = p.clone();
            f.extend_from_slice(s);
            out.push(Monomial { factors: f });
        }
    }
    out
}

pub(crate) fn singles(ids: impl IntoIterator<Item = usize>) -> Vec<Vec<Factor>> {
    ids.into_iter().map(|i| vec![Factor::new(i)]).collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng::engine_rng;
    use crate::sampler::sample_realization;

    /// Every generator preserves the objective on fresh generic samples.
    pub fn assert_invariant(p: &Problem, seed: u64) {
        let mut rng = engine_rng(seed);
        for _ in 0..5 {
            let real = sample_realization(&p.scenario, &mut rng).unwrap();
            let f0 = p.objective.evaluate(&real);
            for g in &p.generators {
                let f1 = p.objective.evaluate(&real.permuted(g));
                assert!((f1 - f0).abs() < 1e-9, "{}: generator {} changes objective {f0} -> {f1}", p.spec.label(), g.cycles());
            }
        }
    }
}
