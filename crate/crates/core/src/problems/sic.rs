//! Witness for `d`-dimensional projective measurements with `N = d²` inputs:
//! binary pair settings `(y, y')` and one `N`-outcome setting of which only
//! the first `d` elements are nonzero rank-one projectors.

use serde::{Deserialize, Serialize};

use super::{relabel, singles, symmetric_generators, words, Objective, Problem, ProblemError, ProblemSpec};
use crate::scenario::{KrausFamily, Level, Locality, Monomial, OperatorIndex, OperatorKind, Scenario, Setting, SettingRanks, Variant};

/// Rank profile of the binary pair settings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRanks {
    /// Every split of the dimension, including the trivial ones.
    #[default]
    Free,
    /// `M⁰` of rank one.
    RankOne,
}

/// `½√(d⁵(d−1)²(d+1)) + C(d², 2) + d`.
pub fn sic_quantum_value(d: usize) -> f64 {
    let df = d as f64;
    let n = d * d;
    0.5 * (df.powi(5) * (df - 1.0).powi(2) * (df + 1.0)).sqrt() + (n * (n - 1) / 2) as f64 + df
}

pub fn sic(d: usize, pair_ranks: PairRanks) -> Result<Problem, ProblemError> {
    if d < 2 {
        return Err(ProblemError::Parameters(format!("witness needs d ≥ 2, got {d}")));
    }
    let n = d * d;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|y| (y + 1..n).map(move |y2| (y, y2))).collect();
    let pair_index = |y: usize, y2: usize| pairs.iter().position(|&p| p == (y, y2)).expect("ordered pair");
    let pair_op = |p: usize, b: usize| n + 2 * p + b;
    let povm = |o: usize| n + 2 * pairs.len() + o;
    let total = n + 2 * pairs.len() + n;

    let mut operators = Vec::with_capacity(total);
    for x in 0..n {
        operators.push(OperatorIndex { id: x, kind: OperatorKind::State { label: vec![x] } });
    }
    let mut settings = Vec::new();
    for p in 0..pairs.len() {
        for b in 0..2 {
            operators.push(OperatorIndex { id: pair_op(p, b), kind: OperatorKind::Projector { setting: p, outcome: b } });
        }
        let ranks = match pair_ranks {
            PairRanks::Free => SettingRanks::Free,
            PairRanks::RankOne => SettingRanks::Fixed(vec![1, d - 1]),
        };
        settings.push(Setting { locality: Locality::Whole, elements: vec![pair_op(p, 0), pair_op(p, 1)], ranks });
    }
    for o in 0..n {
        operators.push(OperatorIndex { id: povm(o), kind: OperatorKind::Projector { setting: pairs.len(), outcome: o } });
    }
    let mut povm_ranks = vec![1; d];
    povm_ranks.resize(n, 0);
    settings.push(Setting { locality: Locality::Whole, elements: (0..n).map(povm).collect(), ranks: SettingRanks::Fixed(povm_ranks) });
    let scenario = Scenario { variant: Variant::Custom, hilbert_dim: d, kraus: KrausFamily::Tracial, operators, settings };

    let mut objective = Objective::default();
    for (p, &(x, x2)) in pairs.iter().enumerate() {
        objective.add_ops(1.0, &[x, pair_op(p, 0)]);
        objective.add_ops(1.0, &[x2, pair_op(p, 1)]);
    }
    for x in 0..n {
        objective.add_ops(1.0, &[x, povm(x)]);
    }

    // Input permutations fixing the set of nonzero outcomes.
    let mut generators = Vec::new();
    let mut perms: Vec<Vec<usize>> = Vec::new();
    for g in symmetric_generators(d) {
        let mut w: Vec<usize> = (0..n).collect();
        w[..d].copy_from_slice(&g);
        perms.push(w);
    }
    for g in symmetric_generators(n - d) {
        let mut w: Vec<usize> = (0..n).collect();
        for (i, &gi) in g.iter().enumerate() {
            w[d + i] = d + gi;
        }
        perms.push(w);
    }
    for w in perms {
        generators.push(relabel(total, |i| {
            if i < n {
                (w[i], false)
            } else if i < povm(0) {
                let (p, b) = ((i - n) / 2, (i - n) % 2);
                let (y, y2) = pairs[p];
                let (a, c) = (w[y], w[y2]);
                if a < c {
                    (pair_op(pair_index(a, c), b), false)
                } else {
                    (pair_op(pair_index(c, a), 1 - b), false)
                }
            } else {
                (povm(w[i - povm(0)]), false)
            }
        })?);
    }

    let rho = singles(0..n);
    let mut list = vec![Monomial::identity()];
    list.extend(rho.iter().map(|f| Monomial { factors: f.clone() }));
    list.extend(singles(n..total).into_iter().map(|f| Monomial { factors: f }));
    list.extend(words(&rho, &rho));
    let mut extra = Vec::new();
    for (p, &(x, x2)) in pairs.iter().enumerate() {
        extra.push(Monomial::of(&[x, pair_op(p, 0)]));
        extra.push(Monomial::of(&[x2, pair_op(p, 1)]));
    }
    Ok(Problem { spec: ProblemSpec::Sic { d, pair_ranks }, scenario, level: Level::Explicit(list), extra, generators, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permgroup::enumerate;
    use crate::problems::tests::assert_invariant;

    #[test]
    fn quantum_value_closed_form() {
        assert!((sic_quantum_value(2) - (0.5 * 96f64.sqrt() + 8.0)).abs() < 1e-12);
        assert!((sic_quantum_value(2) - 12.8990).abs() < 5e-5);
        assert!((sic_quantum_value(3) - 70.1769).abs() < 5e-5);
    }

    #[test]
    fn generators_preserve_objective() {
        for d in 2..=3 {
            let p = sic(d, PairRanks::Free).unwrap();
            assert_invariant(&p, 10 + d as u64);
        }
        let p = sic(2, PairRanks::Free).unwrap();
        assert_eq!(enumerate(&p.generators, 100).unwrap().order(), Some(4));
    }
}
