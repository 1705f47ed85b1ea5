//! Random access codes: `n` symbols over an alphabet of size `d`, one of
//! which is to be recovered by a `d`-outcome rank-one measurement.

use super::{relabel, singles, symmetric_generators, words, Objective, Problem, ProblemError, ProblemSpec};
use crate::scenario::{Level, Monomial, OperatorKind, Scenario, SettingRanks};

/// Digits of the input string `x`, most significant first.
pub(crate) fn digits(mut x: usize, n: usize, d: usize) -> Vec<usize> {
    let mut v = vec![0; n];
    for k in (0..n).rev() {
        v[k] = x % d;
        x /= d;
    }
    v
}

pub(crate) fn index(digits: &[usize], d: usize) -> usize {
    digits.iter().fold(0, |acc, &v| acc * d + v)
}

pub fn rac(n: usize, d: usize) -> Result<Problem, ProblemError> {
    if n < 2 || d < 2 {
        return Err(ProblemError::Parameters(format!("random access code needs n ≥ 2 and d ≥ 2, got n={n}, d={d}")));
    }
    let states = d.pow(n as u32);
    let mut scenario = Scenario::prepare_measure(states, n, d, d);
    for (x, op) in scenario.operators.iter_mut().take(states).enumerate() {
        op.kind = OperatorKind::State { label: digits(x, n, d) };
    }
    for s in &mut scenario.settings {
        s.ranks = SettingRanks::Fixed(vec![1; d]);
    }
    let proj = |y: usize, b: usize| states + y * d + b;
    let total = scenario.num_operators();

    let mut objective = Objective::default();
    let w = 1.0 / (n * states) as f64;
    for x in 0..states {
        let dx = digits(x, n, d);
        for (y, &xy) in dx.iter().enumerate() {
            objective.add_ops(w, &[x, proj(y, xy)]);
        }
    }

    let mut generators = Vec::new();
    // Position permutations σ: x'_{σ(k)} = x_k, M_y ↦ M_{σ(y)}.
    for sigma in symmetric_generators(n) {
        generators.push(relabel(total, |i| {
            if i < states {
                let dx = digits(i, n, d);
                let mut out = vec![0; n];
                for k in 0..n {
                    out[sigma[k]] = dx[k];
                }
                (index(&out, d), false)
            } else {
                let (y, b) = ((i - states) / d, (i - states) % d);
                (proj(sigma[y], b), false)
            }
        })?);
    }
    // Value permutations τ of symbol k, applied jointly to the outcome of setting k.
    for k in 0..n {
        for tau in symmetric_generators(d) {
            generators.push(relabel(total, |i| {
                if i < states {
                    let mut dx = digits(i, n, d);
                    dx[k] = tau[dx[k]];
                    (index(&dx, d), false)
                } else {
                    let (y, b) = ((i - states) / d, (i - states) % d);
                    (if y == k { proj(y, tau[b]) } else { i }, false)
                }
            })?);
        }
    }

    let rho = singles(0..states);
    let meas = singles(states..total);
    let mut list = vec![Monomial::identity()];
    list.extend(rho.iter().map(|f| Monomial { factors: f.clone() }));
    list.extend(meas.iter().map(|f| Monomial { factors: f.clone() }));
    list.extend(words(&rho, &meas));

    Ok(Problem { spec: ProblemSpec::Rac { n, d }, scenario, level: Level::Explicit(list), extra: Vec::new(), generators, objective })
}
