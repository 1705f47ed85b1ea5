//! Operator-variable layouts, ambient groups, symmetry discovery and the
//! duplicate-free monomial generating set.
//!
//! Group elements acting on operators are signed permutations in the doubled
//! encoding of [`crate::permgroup`]: variable `i` is point `2i`, `-X_i` is
//! point `2i + 1`. Only dichotomic observables may be negated.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{gaussian_complex, CMat};
use crate::permgroup::{enumerate, stabilizer_chain, PermError, PermGroup, Permutation};
use crate::sampler::{sample_realization, Realization, SamplerError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("ambient group is only defined for prepare-and-measure and Bell layouts")]
    CustomVariant,
    #[error("ambient group too large to enumerate: {0}")]
    AmbientTooLarge(#[source] PermError),
    #[error("symmetry discovery disagrees between two samples ({first} vs {second} elements)")]
    ValidationMismatch { first: usize, second: usize },
    #[error("monomial {monomial} is mapped outside the generating set")]
    ClosureViolation { monomial: String },
    #[error(transparent)]
    Perm(#[from] PermError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorKind {
    State { label: Vec<usize> },
    Projector { setting: usize, outcome: usize },
    /// ±1-valued observable `2P − 𝟙`.
    Observable { party: usize, input: usize },
    Unitary { party: usize, input: usize },
}

impl OperatorKind {
    pub fn is_hermitian(&self) -> bool {
        !matches!(self, OperatorKind::Unitary { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorIndex {
    pub id: usize,
    pub kind: OperatorKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Variant {
    PrepareMeasure { states: usize, settings: usize, outcomes: usize },
    /// Two parties, `settings` inputs each; `outcomes == 2` layouts use observables.
    Bell { settings: usize, outcomes: usize },
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KrausFamily {
    /// `⟨S⟩ = Tr S`.
    Tracial,
    /// `⟨S⟩ = ⟨ψ|S|ψ⟩` with a Haar-random `ψ`.
    PureState,
}

/// Which Hilbert space factor an operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locality {
    Whole,
    /// Tensor factor `party` of a two-party `d ⊗ d` space.
    Party(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Setting {
    pub locality: Locality,
    /// Operator ids of the outcomes, or the single observable.
    pub elements: Vec<usize>,
    pub ranks: SettingRanks,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingRanks {
    /// Rank per element; the last projector absorbs any remainder of the dimension.
    Fixed(Vec<usize>),
    /// Ranks drawn afresh for each sample, covering every rank sequence.
    Free,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub variant: Variant,
    /// Local Hilbert-space dimension.
    pub hilbert_dim: usize,
    pub kraus: KrausFamily,
    pub operators: Vec<OperatorIndex>,
    pub settings: Vec<Setting>,
}

impl Scenario {
    /// Dimension of the space realizations act on.
    pub fn total_dim(&self) -> usize {
        match self.variant {
            Variant::Bell { .. } => self.hilbert_dim * self.hilbert_dim,
            _ => self.hilbert_dim,
        }
    }

    /// Copy with every free setting fixed to near-equal ranks, rotated by `shift`.
    pub fn with_balanced_ranks(&self, shift: usize) -> Self {
        let mut out = self.clone();
        let d = self.hilbert_dim;
        for s in &mut out.settings {
            if s.ranks != SettingRanks::Free {
                continue;
            }
            let k = s.elements.len();
            if matches!(self.operators[s.elements[0]].kind, OperatorKind::Observable { .. }) {
                s.ranks = SettingRanks::Fixed(vec![d / 2 + (shift % 2) * (d % 2)]);
                continue;
            }
            s.ranks = SettingRanks::Fixed((0..k).map(|b| d / k + usize::from((b + shift) % k < d % k)).collect());
        }
        out
    }

    pub fn num_operators(&self) -> usize {
        self.operators.len()
    }

    /// Operator ids whose kind matches `pred`.
    pub fn ids_where(&self, pred: impl Fn(&OperatorKind) -> bool) -> Vec<usize> {
        self.operators.iter().filter(|o| pred(&o.kind)).map(|o| o.id).collect()
    }

    pub fn prepare_measure(states: usize, settings: usize, outcomes: usize, d: usize) -> Self {
        let mut operators = Vec::new();
        for x in 0..states {
            operators.push(OperatorIndex { id: x, kind: OperatorKind::State { label: vec![x] } });
        }
        let mut sets = Vec::new();
        for y in 0..settings {
            let mut elements = Vec::new();
            for b in 0..outcomes {
                let id = operators.len();
                operators.push(OperatorIndex { id, kind: OperatorKind::Projector { setting: y, outcome: b } });
                elements.push(id);
            }
            sets.push(Setting { locality: Locality::Whole, elements, ranks: SettingRanks::Free });
        }
        Self {
            variant: Variant::PrepareMeasure { states, settings, outcomes },
            hilbert_dim: d,
            kraus: KrausFamily::Tracial,
            operators,
            settings: sets,
        }
    }

    /// Two-party Bell layout with dichotomic observables `A_0.., B_0..` acting on `d ⊗ d`.
    pub fn bell_dichotomic(settings: usize, d: usize) -> Self {
        let mut operators = Vec::new();
        let mut sets = Vec::new();
        for party in 0..2 {
            for input in 0..settings {
                let id = operators.len();
                operators.push(OperatorIndex { id, kind: OperatorKind::Observable { party, input } });
                sets.push(Setting { locality: Locality::Party(party), elements: vec![id], ranks: SettingRanks::Free });
            }
        }
        Self { variant: Variant::Bell { settings, outcomes: 2 }, hilbert_dim: d, kraus: KrausFamily::PureState, operators, settings: sets }
    }

    /// Two-party Bell layout with projective `outcomes`-outcome measurements.
    pub fn bell_projective(settings: usize, outcomes: usize, d: usize) -> Self {
        let mut operators = Vec::new();
        let mut sets = Vec::new();
        for party in 0..2 {
            for input in 0..settings {
                let mut elements = Vec::new();
                for b in 0..outcomes {
                    let id = operators.len();
                    operators.push(OperatorIndex { id, kind: OperatorKind::Projector { setting: party * settings + input, outcome: b } });
                    elements.push(id);
                }
                sets.push(Setting { locality: Locality::Party(party), elements, ranks: SettingRanks::Free });
            }
        }
        Self { variant: Variant::Bell { settings, outcomes }, hilbert_dim: d, kraus: KrausFamily::PureState, operators, settings: sets }
    }

    /// Rank of each observable / projector in the fixed-rank settings, keyed by operator id.
    pub fn rank_sequence(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.operators.len()];
        for s in &self.settings {
            if let SettingRanks::Fixed(r) = &s.ranks {
                for (&id, &rk) in s.elements.iter().zip(r) {
                    out[id] = Some(rk);
                }
            }
        }
        out
    }
}

/// One factor of a monomial; `dagger` is only ever set on unitaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Factor {
    pub op: usize,
    pub dagger: bool,
}

impl Factor {
    pub fn new(op: usize) -> Self {
        Self { op, dagger: false }
    }
    pub fn adjoint(op: usize) -> Self {
        Self { op, dagger: true }
    }
}

/// Operator product; empty means the identity.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Monomial {
    pub factors: Vec<Factor>,
}

impl Monomial {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn of(ops: &[usize]) -> Self {
        Self { factors: ops.iter().map(|&o| Factor::new(o)).collect() }
    }

    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    /// Image under a signed operator permutation: the new factor sequence and
    /// whether the product picked up an overall minus sign.
    pub fn image(&self, g: &Permutation) -> (Vec<Factor>, bool) {
        let mut neg = false;
        let factors = self
            .factors
            .iter()
            .map(|f| {
                let (op, s) = g.apply_signed(f.op);
                neg ^= s;
                Factor { op, dagger: f.dagger }
            })
            .collect();
        (factors, neg)
    }

    pub fn label(&self, scenario: &Scenario) -> String {
        if self.factors.is_empty() {
            return "1".into();
        }
        self.factors
            .iter()
            .map(|f| {
                let base = match &scenario.operators[f.op].kind {
                    OperatorKind::State { label } => format!("rho{label:?}"),
                    OperatorKind::Projector { setting, outcome } => format!("M[{setting}]^{outcome}"),
                    OperatorKind::Observable { party, input } => format!("{}{}", if *party == 0 { 'A' } else { 'B' }, input),
                    OperatorKind::Unitary { party, input } => format!("U[{party},{input}]"),
                };
                if f.dagger {
                    format!("{base}+")
                } else {
                    base
                }
            })
            .collect::<Vec<_>>()
            .join("*")
    }
}

/// Total order used to pick representatives: degree first, then lexicographic.
fn canonical_cmp(a: &[Factor], b: &[Factor]) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

/// Level of the relaxation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    /// Every product of at most `L` operators (and adjoints of unitaries).
    Words(usize),
    /// An explicit candidate list; the identity is always added.
    Explicit(Vec<Monomial>),
}

/// All products `f_1 f_2 .. f_k` with `f_i` drawn from `classes[i]`.
pub fn products(classes: &[Vec<Factor>]) -> Vec<Monomial> {
    let mut acc = vec![Vec::<Factor>::new()];
    for class in classes {
        let mut next = Vec::with_capacity(acc.len() * class.len());
        for prefix in &acc {
            for &f in class {
                let mut v = prefix.clone();
                v.push(f);
                next.push(v);
            }
        }
        acc = next;
    }
    acc.into_iter().map(|factors| Monomial { factors }).collect()
}

/// Where a factor sequence lands in a [`MonomialSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resolution {
    Index { index: usize, negated: bool },
    Zero,
}

const DUPLICATE_TOL: f64 = 1e-8;

/// Groups up to this order contribute every element's image to the probe.
const FULL_ORBIT_ORDER: u128 = 64;

/// Numerical oracle deciding equality of operator products on a fixed family
/// of generic realizations.
#[derive(Clone)]
pub struct Probe {
    samples: Vec<Realization>,
    weights: Vec<CMat>,
    zero_scale: f64,
}

struct Evaluated {
    values: Vec<CMat>,
    norms: Vec<f64>,
    key: f64,
}

impl Probe {
    /// Two independent generic samples plus images of each under the
    /// generators and under further group elements (all of them for small
    /// groups), so duplicate classes are consistent over the rank-sequence orbit.
    pub fn new<R: Rng + ?Sized>(scenario: &Scenario, group: Option<&PermGroup>, rng: &mut R) -> Result<Self, ScenarioError> {
        let mut base = vec![sample_realization(scenario, rng)?, sample_realization(scenario, rng)?];
        // Random free ranks may all be extreme (a projector equal to 0 or 𝟙 on
        // every sample); balanced rank sequences rule out those false merges.
        if scenario.settings.iter().any(|s| s.ranks == SettingRanks::Free) {
            for shift in 0..2 {
                base.push(sample_realization(&scenario.with_balanced_ranks(shift), rng)?);
            }
        }
        let mut samples: Vec<Realization> = base.clone();
        if let Some(g) = group {
            if !g.generators.is_empty() {
                for s in &base {
                    for gen in &g.generators {
                        samples.push(s.permuted(gen));
                    }
                }
                let chain = match &g.chain {
                    Some(c) => c.clone(),
                    None => stabilizer_chain(g.degree, &g.generators, rng),
                };
                if chain.order() <= FULL_ORBIT_ORDER {
                    for e in chain.elements() {
                        for s in &base {
                            samples.push(s.permuted(&e));
                        }
                    }
                } else {
                    for k in 0..4 {
                        let e = chain.random_element(rng);
                        samples.push(base[k % base.len()].permuted(&e));
                    }
                }
            }
        }
        let dim = scenario.total_dim();
        let weights = samples.iter().map(|_| gaussian_complex(dim, dim, rng)).collect();
        Ok(Self { samples, weights, zero_scale: (dim as f64).sqrt() })
    }

    fn evaluate_from(&self, prefix: Option<&Evaluated>, factors: &[Factor]) -> Evaluated {
        let values: Vec<CMat> = self
            .samples
            .iter()
            .enumerate()
            .map(|(s, real)| match prefix {
                Some(p) => {
                    let last = factors.last().expect("non-empty extension");
                    &p.values[s] * real.factor_matrix(*last)
                }
                None => real.evaluate(factors),
            })
            .collect();
        self.finish(values)
    }

    fn finish(&self, values: Vec<CMat>) -> Evaluated {
        let norms: Vec<f64> = values.iter().map(|v| v.norm_l2()).collect();
        let mut f = 0.0;
        for (v, w) in values.iter().zip(&self.weights) {
            for j in 0..v.ncols() {
                for i in 0..v.nrows() {
                    f += (w[(i, j)] * v[(i, j)]).re;
                }
            }
        }
        Evaluated { values, norms, key: f.abs() }
    }

    fn is_zero(&self, e: &Evaluated) -> bool {
        e.norms.iter().all(|&n| n < DUPLICATE_TOL * self.zero_scale)
    }

    /// `Some(negated)` when `a = ±b` on every sample.
    fn equal_up_to_sign(a: &Evaluated, b: &Evaluated) -> Option<bool> {
        let mut sign: Option<bool> = None;
        for s in 0..a.values.len() {
            let scale = a.norms[s].max(b.norms[s]);
            let tol = DUPLICATE_TOL * scale.max(1e-300);
            let plus = (&a.values[s] - &b.values[s]).norm_l2();
            let minus = (&a.values[s] + &b.values[s]).norm_l2();
            let this = if plus <= tol {
                false
            } else if minus <= tol {
                true
            } else {
                return None;
            };
            if scale < tol {
                continue;
            }
            match sign {
                None => sign = Some(this),
                Some(prev) if prev != this => return None,
                _ => {}
            }
        }
        Some(sign.unwrap_or(false))
    }
}

/// Sorted fingerprint index over representatives.
struct FingerprintIndex {
    keys: Vec<(f64, usize)>,
}

impl FingerprintIndex {
    fn candidates(&self, key: f64) -> impl Iterator<Item = usize> + '_ {
        let w = 1e-6 * (1.0 + key);
        let lo = self.keys.partition_point(|&(k, _)| k < key - w);
        self.keys[lo..].iter().take_while(move |&&(k, _)| k <= key + w).map(|&(_, i)| i)
    }

    fn insert(&mut self, key: f64, idx: usize) {
        let pos = self.keys.partition_point(|&(k, _)| k < key);
        self.keys.insert(pos, (key, idx));
    }
}

/// Duplicate-free list of monomials indexing the moment matrix.
#[derive(Clone)]
pub struct MonomialSet {
    pub monomials: Vec<Monomial>,
    lookup: HashMap<Vec<Factor>, Resolution>,
    probe: Probe,
    rep_values: Vec<Vec<CMat>>,
    rep_keys: Vec<f64>,
}

impl std::fmt::Debug for MonomialSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MonomialSet").field("len", &self.monomials.len()).finish()
    }
}

struct Builder<'a> {
    probe: &'a Probe,
    reps: Vec<(Vec<Factor>, Evaluated)>,
    index: FingerprintIndex,
    lookup: HashMap<Vec<Factor>, Resolution>,
}

impl<'a> Builder<'a> {
    fn new(probe: &'a Probe) -> Self {
        let mut b = Self { probe, reps: Vec::new(), index: FingerprintIndex { keys: Vec::new() }, lookup: HashMap::new() };
        let id = probe.evaluate_from(None, &[]);
        b.add_rep(Vec::new(), id);
        b
    }

    fn add_rep(&mut self, factors: Vec<Factor>, e: Evaluated) -> usize {
        let idx = self.reps.len();
        self.index.insert(e.key, idx);
        self.lookup.insert(factors.clone(), Resolution::Index { index: idx, negated: false });
        self.reps.push((factors, e));
        idx
    }

    fn find(&self, e: &Evaluated) -> Option<Resolution> {
        if self.probe.is_zero(e) {
            return Some(Resolution::Zero);
        }
        for i in self.index.candidates(e.key) {
            if let Some(neg) = Probe::equal_up_to_sign(e, &self.reps[i].1) {
                return Some(Resolution::Index { index: i, negated: neg });
            }
        }
        None
    }

    /// Resolves a candidate, registering it as a new representative if needed.
    fn offer(&mut self, factors: Vec<Factor>, e: Evaluated) -> Resolution {
        if let Some(r) = self.lookup.get(&factors) {
            return *r;
        }
        match self.find(&e) {
            Some(r) => {
                self.lookup.insert(factors, r);
                r
            }
            None => {
                let idx = self.add_rep(factors, e);
                Resolution::Index { index: idx, negated: false }
            }
        }
    }
}

/// Operator letters available for word generation.
fn alphabet(scenario: &Scenario) -> Vec<Factor> {
    let mut out = Vec::new();
    for o in &scenario.operators {
        out.push(Factor::new(o.id));
        if !o.kind.is_hermitian() {
            out.push(Factor::adjoint(o.id));
        }
    }
    out
}

/// Builds the generating set: candidates of `level`, then `extra` closed under
/// `group`; duplicates (up to sign) and zero products are dropped.
pub fn monomial_set(scenario: &Scenario, level: &Level, extra: &[Monomial], group: Option<&PermGroup>, probe: Probe) -> Result<MonomialSet, ScenarioError> {
    let mut b = Builder::new(&probe);
    match level {
        Level::Words(max_degree) => {
            let letters = alphabet(scenario);
            let mut frontier: Vec<usize> = vec![0];
            for _ in 0..*max_degree {
                let mut cands: Vec<(Vec<Factor>, usize, Factor)> = Vec::new();
                for &r in &frontier {
                    for &l in &letters {
                        let mut f = b.reps[r].0.clone();
                        f.push(l);
                        cands.push((f, r, l));
                    }
                }
                cands.sort_by(|a, c| canonical_cmp(&a.0, &c.0));
                let before = b.reps.len();
                for (f, r, _) in cands {
                    if b.lookup.contains_key(&f) {
                        continue;
                    }
                    let e = probe.evaluate_from(Some(&b.reps[r].1), &f);
                    b.offer(f, e);
                }
                frontier = (before..b.reps.len()).collect();
            }
        }
        Level::Explicit(list) => {
            let mut cands: Vec<Vec<Factor>> = list.iter().map(|m| m.factors.clone()).collect();
            cands.sort_by(|a, c| canonical_cmp(a, c));
            for f in cands {
                if b.lookup.contains_key(&f) {
                    continue;
                }
                let e = probe.evaluate_from(None, &f);
                b.offer(f, e);
            }
        }
    }
    let mut extras: Vec<Vec<Factor>> = close_under(extra, group);
    extras.sort_by(|a, c| canonical_cmp(a, c));
    for f in extras {
        if b.lookup.contains_key(&f) {
            continue;
        }
        let e = probe.evaluate_from(None, &f);
        b.offer(f, e);
    }

    // Renumber representatives in canonical order.
    let mut order: Vec<usize> = (0..b.reps.len()).collect();
    order.sort_by(|&i, &j| canonical_cmp(&b.reps[i].0, &b.reps[j].0));
    let mut new_index = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        new_index[old] = new;
    }
    let lookup = b
        .lookup
        .into_iter()
        .map(|(k, r)| {
            let r = match r {
                Resolution::Index { index, negated } => Resolution::Index { index: new_index[index], negated },
                Resolution::Zero => Resolution::Zero,
            };
            (k, r)
        })
        .collect();
    let mut reps: Vec<Option<(Vec<Factor>, Evaluated)>> = b.reps.into_iter().map(Some).collect();
    let mut monomials = Vec::with_capacity(order.len());
    let mut rep_values = Vec::with_capacity(order.len());
    let mut rep_keys = Vec::with_capacity(order.len());
    for &old in &order {
        let (f, e) = reps[old].take().expect("each rep used once");
        monomials.push(Monomial { factors: f });
        rep_keys.push(e.key);
        rep_values.push(e.values);
    }
    Ok(MonomialSet { monomials, lookup, probe, rep_values, rep_keys })
}

/// Orbit closure of a list of monomials under the group generators.
fn close_under(extra: &[Monomial], group: Option<&PermGroup>) -> Vec<Vec<Factor>> {
    let mut seen: std::collections::HashSet<Vec<Factor>> = extra.iter().map(|m| m.factors.clone()).collect();
    let mut queue: Vec<Vec<Factor>> = seen.iter().cloned().collect();
    queue.sort();
    if let Some(g) = group {
        let mut i = 0;
        while i < queue.len() {
            let m = Monomial { factors: queue[i].clone() };
            for gen in &g.generators {
                let (img, _) = m.image(gen);
                if seen.insert(img.clone()) {
                    queue.push(img);
                }
            }
            i += 1;
        }
    }
    queue
}

impl MonomialSet {
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn probe(&self) -> &Probe {
        &self.probe
    }

    /// Index and sign of the generating-set element equal to `factors`;
    /// `None` when the product is nonzero and matches no element.
    pub fn resolve(&self, factors: &[Factor]) -> Option<Resolution> {
        if let Some(r) = self.lookup.get(factors) {
            return Some(*r);
        }
        let e = self.probe.evaluate_from(None, factors);
        if self.probe.is_zero(&e) {
            return Some(Resolution::Zero);
        }
        let w = 1e-6 * (1.0 + e.key);
        for (i, &k) in self.rep_keys.iter().enumerate() {
            if (k - e.key).abs() > w {
                continue;
            }
            let rep = Evaluated { values: self.rep_values[i].clone(), norms: self.rep_values[i].iter().map(|v| v.norm_l2()).collect(), key: k };
            if let Some(neg) = Probe::equal_up_to_sign(&e, &rep) {
                return Some(Resolution::Index { index: i, negated: neg });
            }
        }
        None
    }

    /// Signed permutation of `𝒥` induced by the operator permutation `g`.
    pub fn action(&self, g: &Permutation, scenario: &Scenario) -> Result<Permutation, ScenarioError> {
        let n = self.monomials.len();
        let mut images = Vec::with_capacity(n);
        for m in &self.monomials {
            let (f, neg) = m.image(g);
            match self.resolve(&f) {
                Some(Resolution::Index { index, negated }) => images.push((index, neg ^ negated)),
                _ => return Err(ScenarioError::ClosureViolation { monomial: m.label(scenario) }),
            }
        }
        Ok(Permutation::signed(&images)?)
    }
}

/// `π ↦ φ(π)` for each of `perms`.
pub fn monomial_action(perms: &[Permutation], mset: &MonomialSet, scenario: &Scenario) -> Result<Vec<Permutation>, ScenarioError> {
    perms.iter().map(|g| mset.action(g, scenario)).collect()
}

fn transposition_and_cycle(points: &[usize], degree: usize) -> Vec<Vec<usize>> {
    let k = points.len();
    let mut out = Vec::new();
    if k < 2 {
        return out;
    }
    let mut t: Vec<usize> = (0..degree).collect();
    t.swap(points[0], points[1]);
    out.push(t);
    if k > 2 {
        let mut c: Vec<usize> = (0..degree).collect();
        for i in 0..k {
            c[points[i]] = points[(i + 1) % k];
        }
        out.push(c);
    }
    out
}

/// Generators of the ambient group of a prepare-and-measure or Bell layout.
pub fn ambient_group(scenario: &Scenario) -> Result<PermGroup, ScenarioError> {
    let n = scenario.num_operators();
    let mut gens: Vec<Permutation> = Vec::new();
    let lift = |v: Vec<usize>| Permutation::from_images(v).map(|p| p.unsigned_lift());
    match scenario.variant {
        Variant::PrepareMeasure { states, settings, outcomes } => {
            let state_ids: Vec<usize> = (0..states).collect();
            for v in transposition_and_cycle(&state_ids, n) {
                gens.push(lift(v)?);
            }
            let block = |y: usize| -> Vec<usize> { (0..outcomes).map(|b| states + y * outcomes + b).collect() };
            let setting_perm = |src: &[usize]| -> Vec<usize> {
                let mut v: Vec<usize> = (0..n).collect();
                for (y, &ty) in src.iter().enumerate() {
                    for b in 0..outcomes {
                        v[states + y * outcomes + b] = states + ty * outcomes + b;
                    }
                }
                v
            };
            if settings >= 2 {
                let mut t: Vec<usize> = (0..settings).collect();
                t.swap(0, 1);
                gens.push(lift(setting_perm(&t))?);
                if settings > 2 {
                    let c: Vec<usize> = (0..settings).map(|y| (y + 1) % settings).collect();
                    gens.push(lift(setting_perm(&c))?);
                }
            }
            if settings >= 1 {
                for v in transposition_and_cycle(&block(0), n) {
                    gens.push(lift(v)?);
                }
            }
        }
        Variant::Bell { settings, outcomes } => {
            let dichotomic = scenario.operators.iter().any(|o| matches!(o.kind, OperatorKind::Observable { .. }));
            let per_party = if dichotomic { settings } else { settings * outcomes };
            let width = if dichotomic { 1 } else { outcomes };
            let swap: Vec<usize> = (0..n).map(|i| (i + per_party) % n).collect();
            gens.push(lift(swap)?);
            let setting_perm = |src: &[usize]| -> Vec<usize> {
                let mut v: Vec<usize> = (0..n).collect();
                for (x, &tx) in src.iter().enumerate() {
                    for b in 0..width {
                        v[x * width + b] = tx * width + b;
                    }
                }
                v
            };
            if settings >= 2 {
                let mut t: Vec<usize> = (0..settings).collect();
                t.swap(0, 1);
                gens.push(lift(setting_perm(&t))?);
                if settings > 2 {
                    let c: Vec<usize> = (0..settings).map(|y| (y + 1) % settings).collect();
                    gens.push(lift(setting_perm(&c))?);
                }
            }
            if dichotomic {
                let mut v: Vec<(usize, bool)> = (0..n).map(|i| (i, false)).collect();
                v[0].1 = true;
                gens.push(Permutation::signed(&v)?);
            } else {
                let block: Vec<usize> = (0..outcomes).collect();
                for v in transposition_and_cycle(&block, n) {
                    gens.push(lift(v)?);
                }
            }
        }
        Variant::Custom => return Err(ScenarioError::CustomVariant),
    }
    Ok(PermGroup::new(2 * n, gens)?)
}

/// Elements of the enumerable `ambient` group preserving `objective` on
/// generic samples, re-validated on an independent set of samples.
pub fn discover_symmetries<R: Rng + ?Sized>(
    scenario: &Scenario,
    ambient: &PermGroup,
    objective: &dyn Fn(&Realization) -> f64,
    cap: usize,
    rng: &mut R,
) -> Result<PermGroup, ScenarioError> {
    let all = if ambient.generators.is_empty() {
        vec![Permutation::identity(ambient.degree)]
    } else {
        enumerate(&ambient.generators, cap).map_err(ScenarioError::AmbientTooLarge)?.elements.expect("enumerated")
    };
    let preserves = |i: usize, sample: &Realization| -> bool {
        let f0 = objective(sample);
        (objective(&sample.permuted(&all[i])) - f0).abs() < 1e-9 * (1.0 + f0.abs())
    };
    // Each round pairs a random-rank sample with a balanced-rank one, so
    // coincidences on a degenerate rank profile cannot pass.
    let mut round = |shift: usize| -> Result<Vec<usize>, ScenarioError> {
        let pair = [sample_realization(scenario, rng)?, sample_realization(&scenario.with_balanced_ranks(shift), rng)?];
        Ok((0..all.len()).filter(|&i| pair.iter().all(|s| preserves(i, s))).collect())
    };
    let first = round(0)?;
    let second = round(1)?;
    if first != second {
        return Err(ScenarioError::ValidationMismatch { first: first.len(), second: second.len() });
    }
    let members: Vec<Permutation> = first.iter().map(|&i| all[i].clone()).collect();
    let mut gens: Vec<Permutation> = Vec::new();
    let mut chain = stabilizer_chain(ambient.degree, &gens, rng);
    for m in &members {
        if !chain.contains(m) {
            gens.push(m.clone());
            chain = stabilizer_chain(ambient.degree, &gens, rng);
        }
    }
    let mut members = members;
    members.sort();
    Ok(PermGroup { degree: ambient.degree, generators: gens, elements: Some(members), chain: Some(chain) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permgroup::compose;
    use crate::problems::rac;
    use crate::rng::engine_rng;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn ambient_order(s: &Scenario) -> u128 {
        ambient_group(s).unwrap().with_chain(&mut engine_rng(5)).order().unwrap()
    }

    #[test]
    fn ambient_orders_match_wreath_products() {
        assert_eq!(ambient_order(&Scenario::prepare_measure(4, 2, 2, 2)), 24 * 2 * 4);
        assert_eq!(ambient_order(&Scenario::prepare_measure(3, 3, 2, 2)), 6 * 6 * 8);
        assert_eq!(ambient_order(&Scenario::bell_dichotomic(3, 2)), 2 * 36 * 64);
        let trivial = ambient_group(&Scenario::prepare_measure(1, 1, 1, 2)).unwrap();
        assert!(trivial.generators.is_empty());
    }

    #[test]
    fn custom_scenarios_have_no_ambient_group() {
        let mut s = Scenario::prepare_measure(2, 1, 2, 2);
        s.variant = Variant::Custom;
        assert!(matches!(ambient_group(&s), Err(ScenarioError::CustomVariant)));
    }

    /// Both outcomes of a binary measurement stay distinct variables: `M¹ = 𝟙 − M⁰`
    /// is not equal to `±M⁰` as a matrix, so it is not merged.
    #[test]
    fn degree_one_set_keeps_both_outcomes() {
        let s = Scenario::prepare_measure(2, 1, 2, 2);
        let mut rng = engine_rng(3);
        let probe = Probe::new(&s, None, &mut rng).unwrap();
        let m = monomial_set(&s, &Level::Words(1), &[], None, probe).unwrap();
        let labels: Vec<String> = m.monomials.iter().map(|x| x.label(&s)).collect();
        assert_eq!(m.len(), 5, "{labels:?}");
        assert!(m.monomials[0].factors.is_empty());
    }

    #[test]
    fn duplicate_classes_do_not_depend_on_the_probe() {
        let p = rac(2, 2).unwrap();
        let g = p.group().unwrap();
        let sizes: Vec<usize> = (0..3)
            .map(|seed| {
                let probe = Probe::new(&p.scenario, Some(&g), &mut engine_rng(seed)).unwrap();
                monomial_set(&p.scenario, &p.level, &p.extra, Some(&g), probe).unwrap().len()
            })
            .collect();
        assert_eq!(sizes, vec![25; 3]);
    }

    struct RacFixture {
        scenario: Scenario,
        mset: MonomialSet,
        elements: Vec<Permutation>,
    }

    fn rac23() -> &'static RacFixture {
        static F: OnceLock<RacFixture> = OnceLock::new();
        F.get_or_init(|| {
            let p = rac(2, 3).unwrap();
            let mut rng = engine_rng(11);
            let g = p.group().unwrap().with_chain(&mut rng);
            let probe = Probe::new(&p.scenario, Some(&g), &mut rng).unwrap();
            let mset = monomial_set(&p.scenario, &p.level, &p.extra, Some(&g), probe).unwrap();
            let elements = g.chain.unwrap().elements();
            RacFixture { scenario: p.scenario, mset, elements }
        })
    }

    #[test]
    fn rac_generating_set_and_identity_action() {
        let f = rac23();
        assert_eq!(f.mset.len(), 70);
        assert_eq!(f.elements.len(), 72);
        let id = Permutation::identity(2 * f.scenario.num_operators());
        assert!(f.mset.action(&id, &f.scenario).unwrap().is_identity());
        for g in &f.elements {
            assert_eq!(f.mset.action(g, &f.scenario).unwrap().apply_signed(0), (0, false));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn monomial_action_is_a_homomorphism(i in 0usize..72, j in 0usize..72) {
            let f = rac23();
            let (a, b) = (&f.elements[i], &f.elements[j]);
            let ab = compose(a, b).unwrap();
            let lhs = f.mset.action(&ab, &f.scenario).unwrap();
            let rhs = compose(&f.mset.action(a, &f.scenario).unwrap(), &f.mset.action(b, &f.scenario).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
