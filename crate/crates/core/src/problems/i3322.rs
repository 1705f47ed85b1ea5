//! Two-party Bell expression with three dichotomic observables per party and
//! coefficient `c` on the `A_1B_3 + A_3B_1 − A_2B_3 − A_3B_2` part.

use serde::{Deserialize, Serialize};

use super::{relabel, Objective, Problem, ProblemError, ProblemSpec};
use crate::permgroup::Permutation;
use crate::scenario::{Level, Monomial, Scenario, SettingRanks};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum I3322Level {
    /// Observable products of length ≤ 1.
    One,
    /// Products of length ≤ 2 plus all `AAA` and `BBB` words.
    Small,
    /// Products of length ≤ 4.
    #[default]
    Four,
}

const A: [usize; 3] = [0, 1, 2];
const B: [usize; 3] = [3, 4, 5];

pub fn i3322(c: f64, d: usize, ranks: Option<&[usize]>, level: I3322Level) -> Result<Problem, ProblemError> {
    if d < 1 {
        return Err(ProblemError::Parameters("dimension must be positive".into()));
    }
    let mut scenario = Scenario::bell_dichotomic(3, d);
    if let Some(r) = ranks {
        if r.len() != 6 || r.iter().any(|&x| x > d) {
            return Err(ProblemError::Parameters(format!("need six ranks in 0..={d}, got {r:?}")));
        }
        for (s, &rk) in scenario.settings.iter_mut().zip(r) {
            s.ranks = SettingRanks::Fixed(vec![rk]);
        }
    }

    let mut objective = Objective::default();
    objective.add_ops(c, &[A[0], B[2]]);
    objective.add_ops(c, &[A[2], B[0]]);
    objective.add_ops(-c, &[A[1], B[2]]);
    objective.add_ops(-c, &[A[2], B[1]]);
    for &o in &[A[0], A[1], B[0], B[1]] {
        objective.add_ops(1.0, &[o]);
    }
    for &a in &A[..2] {
        for &b in &B[..2] {
            objective.add_ops(-1.0, &[a, b]);
        }
    }

    let generators = vec![party_swap()?, relabelling()?];
    let (level, extra) = match level {
        I3322Level::One => (Level::Words(1), Vec::new()),
        I3322Level::Four => (Level::Words(4), Vec::new()),
        I3322Level::Small => {
            let mut extra = Vec::new();
            for side in [A, B] {
                for &i in &side {
                    for &j in &side {
                        for &k in &side {
                            extra.push(Monomial::of(&[i, j, k]));
                        }
                    }
                }
            }
            (Level::Words(2), extra)
        }
    };
    Ok(Problem {
        spec: ProblemSpec::I3322 { c, d, ranks: ranks.map(<[usize]>::to_vec), level: level_tag(&level, &extra) },
        scenario,
        level,
        extra,
        generators,
        objective,
    })
}

fn level_tag(level: &Level, extra: &[Monomial]) -> I3322Level {
    match (level, extra.is_empty()) {
        (Level::Words(1), _) => I3322Level::One,
        (Level::Words(2), false) => I3322Level::Small,
        _ => I3322Level::Four,
    }
}

/// `A_z ↔ B_z`.
fn party_swap() -> Result<Permutation, ProblemError> {
    relabel(6, |i| ((i + 3) % 6, false))
}

/// `A_1 ↔ A_2`, `B_3 ↦ −B_3`.
fn relabelling() -> Result<Permutation, ProblemError> {
    relabel(6, |i| match i {
        0 => (1, false),
        1 => (0, false),
        5 => (5, true),
        _ => (i, false),
    })
}

/// One representative (the lexicographically smallest) of each orbit of rank
/// sequences under `elements`. Negating an observable maps rank `r` to `d − r`.
pub fn rank_orbit_representatives(d: usize, elements: &[Permutation]) -> Vec<Vec<usize>> {
    let mut reps = Vec::new();
    let total = (d + 1).pow(6);
    for code in 0..total {
        let mut r = vec![0; 6];
        let mut c = code;
        for k in (0..6).rev() {
            r[k] = c % (d + 1);
            c /= d + 1;
        }
        let smallest = elements.iter().all(|g| {
            let mut img = vec![0; 6];
            for (i, &ri) in r.iter().enumerate() {
                let (j, neg) = g.apply_signed(i);
                img[j] = if neg { d - ri } else { ri };
            }
            img >= r
        });
        if smallest {
            reps.push(r);
        }
    }
    reps
}
