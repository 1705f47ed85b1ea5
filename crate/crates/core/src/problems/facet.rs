//! Communication task built on a facet Bell expression: states `ρ_{x,x₀}`
//! with `x ∈ {0,1}`, `x₀ ∈ 0..d`, two `d`-outcome rank-one measurements.

use super::{relabel, singles, words, Objective, Problem, ProblemError, ProblemSpec};
use crate::scenario::{Level, Monomial, OperatorKind, Scenario, SettingRanks};

pub fn facet(d: usize) -> Result<Problem, ProblemError> {
    if d < 3 {
        return Err(ProblemError::Parameters(format!("facet task needs d ≥ 3, got {d}")));
    }
    let states = 2 * d;
    let mut scenario = Scenario::prepare_measure(states, 2, d, d);
    for x in 0..2 {
        for x0 in 0..d {
            scenario.operators[x * d + x0].kind = OperatorKind::State { label: vec![x, x0] };
        }
    }
    for s in &mut scenario.settings {
        s.ranks = SettingRanks::Fixed(vec![1; d]);
    }
    let rho = |x: usize, x0: usize| x * d + x0;
    let proj = |y: usize, b: usize| states + y * d + b;
    let total = scenario.num_operators();
    let md = |v: i64| v.rem_euclid(d as i64) as usize;

    // Collect coefficients per (state, projector) pair before emitting terms.
    let mut coef = vec![0.0; states * 2 * d];
    for k in 0..d / 2 {
        let ck = 1.0 - 2.0 * k as f64 / (d as f64 - 1.0);
        for x in 0..2usize {
            for x0 in 0..d {
                for y in 0..2usize {
                    let sign = if (x + y) % 2 == 0 { 1i64 } else { -1 };
                    let base = x0 as i64 - (x * y) as i64;
                    let f0 = md(base - sign * k as i64);
                    let f1 = md(base + sign * (k as i64 + 1));
                    coef[rho(x, x0) * 2 * d + y * d + f0] += ck;
                    coef[rho(x, x0) * 2 * d + y * d + f1] -= ck;
                }
            }
        }
    }
    let mut objective = Objective::default();
    let w = 1.0 / (4 * d) as f64;
    for s in 0..states {
        for m in 0..2 * d {
            let c = coef[s * 2 * d + m];
            if c != 0.0 {
                objective.add_ops(w * c, &[s, states + m]);
            }
        }
    }

    let split = |i: usize| -> Option<(usize, usize)> { (i < states).then(|| (i / d, i % d)) };
    let shift = relabel(total, |i| match split(i) {
        Some((x, x0)) => (rho(x, (x0 + 1) % d), false),
        None => {
            let (y, b) = ((i - states) / d, (i - states) % d);
            (proj(y, (b + 1) % d), false)
        }
    })?;
    let flip_both = relabel(total, |i| match split(i) {
        Some((x, x0)) => (rho(1 - x, d - 1 - x0), false),
        None => {
            let (y, b) = ((i - states) / d, (i - states) % d);
            (proj(y, md(d as i64 - 1 - y as i64 - b as i64)), false)
        }
    })?;
    let flip_setting = relabel(total, |i| match split(i) {
        Some((x, x0)) => (rho(x, md(d as i64 - (1 - x) as i64 - x0 as i64)), false),
        None => {
            let (y, b) = ((i - states) / d, (i - states) % d);
            (proj(1 - y, d - 1 - b), false)
        }
    })?;

    let rho_w = singles(0..states);
    let meas = singles(states..total);
    let mut list = vec![Monomial::identity()];
    list.extend(rho_w.iter().map(|f| Monomial { factors: f.clone() }));
    list.extend(meas.iter().map(|f| Monomial { factors: f.clone() }));
    list.extend(words(&rho_w, &meas));
    list.extend(words(&meas, &meas));

    Ok(Problem {
        spec: ProblemSpec::Facet { d },
        scenario,
        level: Level::Explicit(list),
        extra: Vec::new(),
        generators: vec![shift, flip_both, flip_setting],
        objective,
    })
}
