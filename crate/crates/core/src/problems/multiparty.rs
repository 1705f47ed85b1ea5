//! Line of `n + 2` parties: a source state `ρ_{x₀,x₁}`, `n` unitaries
//! `U_{k,y_k}` and a final rank-one `d`-outcome measurement `M_{z,t}` that
//! should output `x_z + t·y mod d`.

use super::{relabel, Objective, Problem, ProblemError, ProblemSpec};
use crate::scenario::{Factor, KrausFamily, Level, Locality, Monomial, OperatorIndex, OperatorKind, Scenario, Setting, SettingRanks, Variant};

pub fn multiparty(n: usize, d: usize) -> Result<Problem, ProblemError> {
    if n < 1 || d < 2 {
        return Err(ProblemError::Parameters(format!("need n ≥ 1 and d ≥ 2, got n={n}, d={d}")));
    }
    let states = d * d;
    let rho = |x0: usize, x1: usize| x0 * d + x1;
    let unitary = |k: usize, y: usize| states + k * d + y;
    let meas_base = states + n * d;
    let t_count = 1usize << n;
    let setting = |z: usize, t: usize| z * t_count + t;
    let meas = |z: usize, t: usize, a: usize| meas_base + setting(z, t) * d + a;
    let total = meas_base + 2 * t_count * d;

    let mut operators = Vec::with_capacity(total);
    for x0 in 0..d {
        for x1 in 0..d {
            operators.push(OperatorIndex { id: rho(x0, x1), kind: OperatorKind::State { label: vec![x0, x1] } });
        }
    }
    for k in 0..n {
        for y in 0..d {
            operators.push(OperatorIndex { id: unitary(k, y), kind: OperatorKind::Unitary { party: k + 1, input: y } });
        }
    }
    let mut settings = Vec::new();
    for z in 0..2 {
        for t in 0..t_count {
            let s = setting(z, t);
            let elements: Vec<usize> = (0..d).map(|a| meas(z, t, a)).collect();
            for (a, &id) in elements.iter().enumerate() {
                operators.push(OperatorIndex { id, kind: OperatorKind::Projector { setting: s, outcome: a } });
            }
            settings.push(Setting { locality: Locality::Whole, elements, ranks: SettingRanks::Fixed(vec![1; d]) });
        }
    }
    let scenario = Scenario { variant: Variant::Custom, hilbert_dim: d, kraus: KrausFamily::Tracial, operators, settings };

    // `U_{k,y_k} … U_{1,y_1} ρ U_{1,y_1}† … U_{k,y_k}†` for the first `k` inputs of `ys`.
    let chain = |x0: usize, x1: usize, ys: &[usize]| -> Vec<Factor> {
        let mut f: Vec<Factor> = ys.iter().enumerate().rev().map(|(k, &y)| Factor::new(unitary(k, y))).collect();
        f.push(Factor::new(rho(x0, x1)));
        f.extend(ys.iter().enumerate().map(|(k, &y)| Factor::adjoint(unitary(k, y))));
        f
    };
    let tuples = |len: usize| -> Vec<Vec<usize>> {
        (0..d.pow(len as u32))
            .map(|mut c| {
                let mut v = vec![0; len];
                for slot in v.iter_mut() {
                    *slot = c % d;
                    c /= d;
                }
                v
            })
            .collect()
    };

    let mut objective = Objective::default();
    let w = 1.0 / (d.pow(n as u32 + 2) * 2 * t_count) as f64;
    for x0 in 0..d {
        for x1 in 0..d {
            for ys in tuples(n) {
                let body = chain(x0, x1, &ys);
                for z in 0..2 {
                    for t in 0..t_count {
                        let ty: usize = (0..n).filter(|k| t >> k & 1 == 1).map(|k| ys[k]).sum();
                        let a = ([x0, x1][z] + ty) % d;
                        let mut word = body.clone();
                        word.push(Factor::new(meas(z, t, a)));
                        objective.add(w, word);
                    }
                }
            }
        }
    }

    let split_meas = |i: usize| {
        let r = i - meas_base;
        let (s, a) = (r / d, r % d);
        (s / t_count, s % t_count, a)
    };
    let mut generators = Vec::new();
    // Swap the two source inputs together with `z`.
    generators.push(relabel(total, |i| {
        if i < states {
            (rho(i % d, i / d), false)
        } else if i < meas_base {
            (i, false)
        } else {
            let (z, t, a) = split_meas(i);
            (meas(1 - z, t, a), false)
        }
    })?);
    // Cyclic shift of `y_k`, compensated on the outcome when `t_k = 1`.
    for k in 0..n {
        generators.push(relabel(total, |i| {
            if i < states {
                (i, false)
            } else if i < meas_base {
                let (kk, y) = ((i - states) / d, (i - states) % d);
                (if kk == k { unitary(k, (y + 1) % d) } else { i }, false)
            } else {
                let (z, t, a) = split_meas(i);
                let a2 = if t >> k & 1 == 1 { (a + 1) % d } else { a };
                (meas(z, t, a2), false)
            }
        })?);
    }
    // Cyclic shift of `x_z`, compensated on the outcome of settings with that `z`.
    for zz in 0..2 {
        generators.push(relabel(total, |i| {
            if i < states {
                let (mut x0, mut x1) = (i / d, i % d);
                if zz == 0 {
                    x0 = (x0 + 1) % d;
                } else {
                    x1 = (x1 + 1) % d;
                }
                (rho(x0, x1), false)
            } else if i < meas_base {
                (i, false)
            } else {
                let (z, t, a) = split_meas(i);
                (meas(z, t, if z == zz { (a + 1) % d } else { a }), false)
            }
        })?);
    }

    let mut list = vec![Monomial::identity()];
    for x0 in 0..d {
        for x1 in 0..d {
            list.push(Monomial::of(&[rho(x0, x1)]));
            for k in 1..=n {
                for ys in tuples(k) {
                    list.push(Monomial { factors: chain(x0, x1, &ys) });
                }
            }
        }
    }
    list.extend((meas_base..total).map(|i| Monomial::of(&[i])));

    Ok(Problem { spec: ProblemSpec::Multiparty { n, d }, scenario, level: Level::Explicit(list), extra: Vec::new(), generators, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::tests::assert_invariant;

    #[test]
    fn generators_preserve_objective() {
        assert_invariant(&multiparty(1, 3).unwrap(), 21);
        assert_invariant(&multiparty(2, 2).unwrap(), 22);
    }
}
