//! Group averaging of moment matrices.
//!
//! A signed permutation `φ` of the monomial indices acts as
//! `φ(Γ)[φ(a), φ(b)] = σ_a σ_b Γ[a, b]`. The chained strategy evaluates the
//! average as nested sums over the transversals of a stabilizer chain,
//! innermost transversal first.

use rand::Rng;
use thiserror::Error;

use crate::linalg::{goe, RMat};
use crate::permgroup::{PermGroup, Permutation};
use crate::scenario::{MonomialSet, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum ReynoldsError {
    #[error(transparent)]
    Action(#[from] ScenarioError),
    #[error("naive and chained averages differ by {0:e}")]
    StrategyMismatch(f64),
}

/// Signed index map on monomial indices.
#[derive(Clone, Debug)]
pub struct IndexAction {
    target: Vec<usize>,
    sign: Vec<f64>,
}

impl IndexAction {
    pub fn from_signed(p: &Permutation) -> Self {
        let n = p.degree() / 2;
        let mut target = Vec::with_capacity(n);
        let mut sign = Vec::with_capacity(n);
        for i in 0..n {
            let (j, neg) = p.apply_signed(i);
            target.push(j);
            sign.push(if neg { -1.0 } else { 1.0 });
        }
        Self { target, sign }
    }

    /// `acc += φ(Γ)`.
    fn accumulate(&self, gamma: &RMat, acc: &mut RMat) {
        let n = self.target.len();
        for b in 0..n {
            let tb = self.target[b];
            let sb = self.sign[b];
            for a in 0..n {
                acc[(self.target[a], tb)] += self.sign[a] * sb * gamma[(a, b)];
            }
        }
    }

    pub fn apply(&self, gamma: &RMat) -> RMat {
        let mut out = RMat::zeros(gamma.nrows(), gamma.ncols());
        self.accumulate(gamma, &mut out);
        out
    }
}

#[derive(Clone, Debug)]
enum Strategy {
    Naive(Vec<IndexAction>),
    Chained(Vec<Vec<IndexAction>>),
}

/// Reynolds operator of a group acting on the monomial indices.
#[derive(Clone, Debug)]
pub struct Symmetrizer {
    n: usize,
    strategy: Strategy,
    generators: Vec<IndexAction>,
}

/// Groups up to this order are also averaged naively to validate the chain.
pub const NAIVE_VALIDATION_LIMIT: u128 = 5000;

impl Symmetrizer {
    /// Trivial group on `n` indices.
    pub fn trivial(n: usize) -> Self {
        Self { n, strategy: Strategy::Chained(Vec::new()), generators: Vec::new() }
    }

    /// Averages over an explicit list of signed monomial permutations.
    pub fn naive(n: usize, elements: &[Permutation]) -> Self {
        let acts: Vec<IndexAction> = elements.iter().map(IndexAction::from_signed).collect();
        Self { n, generators: acts.clone(), strategy: Strategy::Naive(acts) }
    }

    /// Chained symmetrizer of `group` (operator permutations) acting on `mset`.
    /// Small groups are cross-checked against the naive average.
    pub fn from_group<R: Rng + ?Sized>(group: &PermGroup, mset: &MonomialSet, scenario: &Scenario, rng: &mut R) -> Result<Self, ReynoldsError> {
        let n = mset.len();
        let chain = match &group.chain {
            Some(c) => c.clone(),
            None => crate::permgroup::stabilizer_chain(group.degree, &group.generators, rng),
        };
        let mut levels = Vec::with_capacity(chain.transversals.len());
        for t in &chain.transversals {
            let mut lvl = Vec::with_capacity(t.len());
            for u in t {
                lvl.push(IndexAction::from_signed(&mset.action(u, scenario)?));
            }
            levels.push(lvl);
        }
        let generators = group
            .generators
            .iter()
            .map(|g| mset.action(g, scenario).map(|p| IndexAction::from_signed(&p)))
            .collect::<Result<Vec<_>, _>>()?;
        let sym = Self { n, strategy: Strategy::Chained(levels), generators };
        if chain.order() <= NAIVE_VALIDATION_LIMIT {
            let els: Vec<Permutation> = chain.elements().iter().map(|e| mset.action(e, scenario)).collect::<Result<_, _>>()?;
            let naive = Self::naive(n, &els);
            let g = goe(n, rng);
            let diff = (&sym.apply(&g) - &naive.apply(&g)).norm_l2();
            if diff > 1e-10 * (1.0 + g.norm_l2()) {
                return Err(ReynoldsError::StrategyMismatch(diff));
            }
        }
        Ok(sym)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of single-permutation passes per application.
    pub fn passes(&self) -> usize {
        match &self.strategy {
            Strategy::Naive(e) => e.len(),
            Strategy::Chained(l) => l.iter().map(Vec::len).sum(),
        }
    }

    pub fn generators(&self) -> &[IndexAction] {
        &self.generators
    }

    pub fn is_trivial(&self) -> bool {
        match &self.strategy {
            Strategy::Naive(e) => e.len() <= 1,
            Strategy::Chained(l) => l.iter().all(|t| t.len() <= 1),
        }
    }

    /// `ℛ(Γ) = |G|⁻¹ Σ_g φ(g)(Γ)`.
    pub fn apply(&self, gamma: &RMat) -> RMat {
        match &self.strategy {
            Strategy::Naive(els) => {
                let mut out = pairwise_sum(els, gamma);
                scale_in_place(&mut out, 1.0 / els.len() as f64);
                out
            }
            Strategy::Chained(levels) => {
                let mut cur = gamma.clone();
                for lvl in levels.iter().rev() {
                    let mut acc = RMat::zeros(self.n, self.n);
                    for u in lvl {
                        u.accumulate(&cur, &mut acc);
                    }
                    scale_in_place(&mut acc, 1.0 / lvl.len() as f64);
                    cur = acc;
                }
                cur
            }
        }
    }
}

fn scale_in_place(m: &mut RMat, s: f64) {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] *= s;
        }
    }
}

fn pairwise_sum(els: &[IndexAction], gamma: &RMat) -> RMat {
    if els.len() <= 8 {
        let mut acc = RMat::zeros(gamma.nrows(), gamma.ncols());
        for e in els {
            e.accumulate(gamma, &mut acc);
        }
        return acc;
    }
    let (l, r) = els.split_at(els.len() / 2);
    let a = pairwise_sum(l, gamma);
    let b = pairwise_sum(r, gamma);
    &a + &b
}
