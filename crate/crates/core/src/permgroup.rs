//! Permutations, finitely generated permutation groups and stabilizer chains.
//!
//! Composition follows `compose(p, q)(i) = p(q(i))`. Signed permutations of
//! `n` variables are encoded as ordinary permutations of `2n` points where
//! point `2i` stands for `+x_i` and `2i + 1` for `-x_i`; see [`Permutation::signed`].

use std::collections::{HashSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PermError {
    #[error("domain size mismatch: {left} vs {right}")]
    DomainMismatch { left: usize, right: usize },
    #[error("image list is not a bijection on 0..{0}")]
    NotBijection(usize),
    #[error("group order exceeds the enumeration cap of {0} elements")]
    OrderCapExceeded(usize),
    #[error("at least one generator is required")]
    NoGenerators,
    #[error("point {point} outside domain of size {degree}")]
    PointOutOfRange { point: usize, degree: usize },
    #[error("signed permutation does not commute with negation")]
    NotSigned,
}

/// A bijection of `{0, .., n-1}` stored by its images.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self { images: (0..n).collect() }
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self, PermError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(PermError::NotBijection(n));
            }
            seen[i] = true;
        }
        Ok(Self { images })
    }

    /// Builds a signed permutation of `images.len()` variables; `(j, true)` at
    /// position `i` means `x_i ↦ -x_j`.
    pub fn signed(images: &[(usize, bool)]) -> Result<Self, PermError> {
        let mut out = vec![0; 2 * images.len()];
        for (i, &(j, neg)) in images.iter().enumerate() {
            out[2 * i] = 2 * j + neg as usize;
            out[2 * i + 1] = 2 * j + (!neg) as usize;
        }
        Self::from_images(out)
    }

    /// Lifts an unsigned permutation of variables to the doubled encoding.
    pub fn unsigned_lift(&self) -> Self {
        let v: Vec<(usize, bool)> = self.images.iter().map(|&j| (j, false)).collect();
        Self::signed(&v).expect("lift of a bijection is a bijection")
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    /// Image of variable `i` under a signed permutation: `(j, negated)`.
    #[inline]
    pub fn apply_signed(&self, i: usize) -> (usize, bool) {
        let p = self.images[2 * i];
        (p / 2, p % 2 == 1)
    }

    pub fn is_signed(&self) -> bool {
        self.degree() % 2 == 0 && (0..self.degree()).all(|i| self.images[i ^ 1] == self.images[i] ^ 1)
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| i == j)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.images.len()];
        for (i, &j) in self.images.iter().enumerate() {
            inv[j] = i;
        }
        Self { images: inv }
    }

    /// Cycle notation with 0-based points, fixed points omitted.
    pub fn cycles(&self) -> String {
        let n = self.degree();
        let mut seen = vec![false; n];
        let mut out = String::new();
        for start in 0..n {
            if seen[start] || self.images[start] == start {
                continue;
            }
            let mut cyc = vec![start];
            seen[start] = true;
            let mut j = self.images[start];
            while j != start {
                seen[j] = true;
                cyc.push(j);
                j = self.images[j];
            }
            out.push('(');
            out.push_str(&cyc.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "));
            out.push(')');
        }
        if out.is_empty() {
            out.push_str("()");
        }
        out
    }

    fn mul_unchecked(&self, q: &Self) -> Self {
        Self { images: q.images.iter().map(|&i| self.images[i]).collect() }
    }
}

/// `result(i) = p(q(i))`.
pub fn compose(p: &Permutation, q: &Permutation) -> Result<Permutation, PermError> {
    if p.degree() != q.degree() {
        return Err(PermError::DomainMismatch { left: p.degree(), right: q.degree() });
    }
    Ok(p.mul_unchecked(q))
}

pub fn inverse(p: &Permutation) -> Permutation {
    p.inverse()
}

/// Transversals `U_1, .., U_C` of a stabilizer chain; every group element is
/// uniquely `u_1 u_2 .. u_C` with `u_c ∈ U_c`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProductDecomposition {
    pub degree: usize,
    pub base: Vec<usize>,
    /// `transversals[c][k]` maps `base[c]` to the `k`-th orbit point.
    pub transversals: Vec<Vec<Permutation>>,
}

impl ProductDecomposition {
    pub fn order(&self) -> u128 {
        self.transversals.iter().map(|t| t.len() as u128).product()
    }

    /// Total number of coset representatives, the cost of one chained average.
    pub fn transversal_total(&self) -> usize {
        self.transversals.iter().map(Vec::len).sum()
    }

    /// Uniformly random element.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> Permutation {
        let mut g = Permutation::identity(self.degree);
        for t in &self.transversals {
            let u = &t[rng.random_range(0..t.len())];
            g = g.mul_unchecked(u);
        }
        g
    }

    /// Every product `u_1 .. u_C`; only sensible for small groups.
    pub fn elements(&self) -> Vec<Permutation> {
        let mut acc = vec![Permutation::identity(self.degree)];
        for t in &self.transversals {
            let mut next = Vec::with_capacity(acc.len() * t.len());
            for g in &acc {
                for u in t {
                    next.push(g.mul_unchecked(u));
                }
            }
            acc = next;
        }
        acc
    }

    pub fn contains(&self, g: &Permutation) -> bool {
        if g.degree() != self.degree {
            return false;
        }
        let mut h = g.clone();
        for (c, t) in self.transversals.iter().enumerate() {
            let b = self.base[c];
            let target = h.apply(b);
            match t.iter().find(|u| u.apply(b) == target) {
                Some(u) => h = u.inverse().mul_unchecked(&h),
                None => return false,
            }
        }
        h.is_identity()
    }
}

/// Group given by generators, optionally with its full element list or a
/// stabilizer chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PermGroup {
    pub degree: usize,
    pub generators: Vec<Permutation>,
    pub elements: Option<Vec<Permutation>>,
    pub chain: Option<ProductDecomposition>,
}

impl PermGroup {
    pub fn new(degree: usize, generators: Vec<Permutation>) -> Result<Self, PermError> {
        for g in &generators {
            if g.degree() != degree {
                return Err(PermError::DomainMismatch { left: degree, right: g.degree() });
            }
        }
        Ok(Self { degree, generators, elements: None, chain: None })
    }

    pub fn trivial(degree: usize) -> Self {
        Self { degree, generators: Vec::new(), elements: None, chain: None }
    }

    pub fn order(&self) -> Option<u128> {
        if let Some(e) = &self.elements {
            return Some(e.len() as u128);
        }
        self.chain.as_ref().map(ProductDecomposition::order)
    }

    pub fn with_chain<R: Rng + ?Sized>(mut self, rng: &mut R) -> Self {
        if self.chain.is_none() {
            self.chain = Some(stabilizer_chain(self.degree, &self.generators, rng));
        }
        self
    }

    pub fn orbit(&self, point: usize) -> Result<Vec<usize>, PermError> {
        orbit(self, point)
    }
}

/// Closure of `generators` under composition, sorted lexicographically.
pub fn enumerate(generators: &[Permutation], cap: usize) -> Result<PermGroup, PermError> {
    let first = generators.first().ok_or(PermError::NoGenerators)?;
    let degree = first.degree();
    for g in generators {
        if g.degree() != degree {
            return Err(PermError::DomainMismatch { left: degree, right: g.degree() });
        }
    }
    let id = Permutation::identity(degree);
    let mut seen: HashSet<Permutation> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(id.clone());
    queue.push_back(id);
    while let Some(g) = queue.pop_front() {
        for s in generators {
            let h = s.mul_unchecked(&g);
            if !seen.contains(&h) {
                if seen.len() >= cap {
                    return Err(PermError::OrderCapExceeded(cap));
                }
                seen.insert(h.clone());
                queue.push_back(h);
            }
        }
    }
    let mut elements: Vec<Permutation> = seen.into_iter().collect();
    elements.sort();
    Ok(PermGroup { degree, generators: generators.to_vec(), elements: Some(elements), chain: None })
}

/// Smallest invariant set containing `point`, sorted.
pub fn orbit(group: &PermGroup, point: usize) -> Result<Vec<usize>, PermError> {
    if point >= group.degree {
        return Err(PermError::PointOutOfRange { point, degree: group.degree });
    }
    Ok(orbit_of(group.degree, &group.generators, point))
}

fn orbit_of(degree: usize, gens: &[Permutation], point: usize) -> Vec<usize> {
    let mut seen = vec![false; degree];
    seen[point] = true;
    let mut out = vec![point];
    let mut i = 0;
    while i < out.len() {
        let p = out[i];
        for g in gens {
            let q = g.apply(p);
            if !seen[q] {
                seen[q] = true;
                out.push(q);
            }
        }
        i += 1;
    }
    out.sort_unstable();
    out
}

struct Level {
    base_point: usize,
    gens: Vec<Permutation>,
    /// `reps[p]` maps the base point to `p`, for `p` in the basic orbit.
    reps: Vec<Option<Permutation>>,
    orbit: Vec<usize>,
}

impl Level {
    fn new(degree: usize, base_point: usize) -> Self {
        let mut reps = vec![None; degree];
        reps[base_point] = Some(Permutation::identity(degree));
        Self { base_point, gens: Vec::new(), reps, orbit: vec![base_point] }
    }

    fn rebuild(&mut self) {
        let degree = self.reps.len();
        self.reps = vec![None; degree];
        self.reps[self.base_point] = Some(Permutation::identity(degree));
        self.orbit = vec![self.base_point];
        let mut i = 0;
        while i < self.orbit.len() {
            let p = self.orbit[i];
            for g in &self.gens {
                let q = g.apply(p);
                if self.reps[q].is_none() {
                    let u = g.mul_unchecked(self.reps[p].as_ref().expect("orbit point has a rep"));
                    self.reps[q] = Some(u);
                    self.orbit.push(q);
                }
            }
            i += 1;
        }
    }
}

struct Chain {
    degree: usize,
    levels: Vec<Level>,
}

impl Chain {
    /// Strips `g` through the chain; returns the residue and the level where it stopped.
    fn sift(&self, g: &Permutation, from: usize) -> (Permutation, usize) {
        let mut h = g.clone();
        for c in from..self.levels.len() {
            let lvl = &self.levels[c];
            match &lvl.reps[h.apply(lvl.base_point)] {
                Some(u) => h = u.inverse().mul_unchecked(&h),
                None => return (h, c),
            }
        }
        (h, self.levels.len())
    }

    /// Adds a residue that fixes the first `level` base points.
    fn add_strong(&mut self, h: Permutation, level: usize) {
        if level == self.levels.len() {
            let moved = (0..self.degree).find(|&i| h.apply(i) != i).expect("non-identity residue");
            self.levels.push(Level::new(self.degree, moved));
        }
        for lvl in &mut self.levels[..=level] {
            lvl.gens.push(h.clone());
        }
        for lvl in &mut self.levels[..=level] {
            lvl.rebuild();
        }
    }

    /// First failing Schreier generator, if any.
    fn verify(&self) -> Option<(Permutation, usize)> {
        for c in (0..self.levels.len()).rev() {
            let lvl = &self.levels[c];
            for &p in &lvl.orbit {
                let up = lvl.reps[p].as_ref().expect("orbit rep");
                for s in &lvl.gens {
                    let q = s.apply(p);
                    let uq = lvl.reps[q].as_ref().expect("orbit closed");
                    let schreier = uq.inverse().mul_unchecked(&s.mul_unchecked(up));
                    let (h, stop) = self.sift(&schreier, c + 1);
                    if !h.is_identity() {
                        return Some((h, stop));
                    }
                }
            }
        }
        None
    }
}

/// Randomized Schreier–Sims followed by a deterministic Schreier-generator
/// verification; failures found by the verification are added as strong
/// generators, so the returned chain is always exact.
pub fn stabilizer_chain<R: Rng + ?Sized>(degree: usize, generators: &[Permutation], rng: &mut R) -> ProductDecomposition {
    let gens: Vec<Permutation> = generators.iter().filter(|g| !g.is_identity()).cloned().collect();
    let mut chain = Chain { degree, levels: Vec::new() };
    for g in &gens {
        let (h, lvl) = chain.sift(g, 0);
        if !h.is_identity() {
            chain.add_strong(h, lvl);
        }
    }
    if !gens.is_empty() {
        let mut replacer = ProductReplacement::new(&gens, rng);
        loop {
            let mut quiet = 0;
            while quiet < 24 {
                let g = replacer.next(rng);
                let (h, lvl) = chain.sift(&g, 0);
                if h.is_identity() {
                    quiet += 1;
                } else {
                    chain.add_strong(h, lvl);
                    quiet = 0;
                }
            }
            match chain.verify() {
                None => break,
                Some((h, lvl)) => chain.add_strong(h, lvl),
            }
        }
    }
    ProductDecomposition {
        degree,
        base: chain.levels.iter().map(|l| l.base_point).collect(),
        transversals: chain
            .levels
            .iter()
            .map(|l| l.orbit.iter().map(|&p| l.reps[p].clone().expect("orbit rep")).collect())
            .collect(),
    }
}

/// Product-replacement generator of pseudo-random group elements.
struct ProductReplacement {
    slots: Vec<Permutation>,
    acc: Permutation,
}

impl ProductReplacement {
    fn new<R: Rng + ?Sized>(gens: &[Permutation], rng: &mut R) -> Self {
        let degree = gens[0].degree();
        let mut slots: Vec<Permutation> = gens.to_vec();
        while slots.len() < 10 {
            slots.push(gens[slots.len() % gens.len()].clone());
        }
        let mut pr = Self { slots, acc: Permutation::identity(degree) };
        for _ in 0..50 {
            pr.next(rng);
        }
        pr
    }

    fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Permutation {
        let k = self.slots.len();
        let i = rng.random_range(0..k);
        let mut j = rng.random_range(0..k - 1);
        if j >= i {
            j += 1;
        }
        let sj = if rng.random_bool(0.5) { self.slots[j].clone() } else { self.slots[j].inverse() };
        self.slots[i] = if rng.random_bool(0.5) { self.slots[i].mul_unchecked(&sj) } else { sj.mul_unchecked(&self.slots[i]) };
        self.acc = self.acc.mul_unchecked(&self.slots[i]);
        self.acc.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::engine_rng;
    use proptest::prelude::*;

    fn p(v: &[usize]) -> Permutation {
        Permutation::from_images(v.to_vec()).unwrap()
    }

    fn sym_gens(n: usize) -> Vec<Permutation> {
        let mut t: Vec<usize> = (0..n).collect();
        t.swap(0, 1);
        let c: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
        vec![p(&t), p(&c)]
    }

    #[test]
    fn compose_convention() {
        let r = compose(&p(&[1, 0, 2]), &p(&[0, 2, 1])).unwrap();
        assert_eq!(r, p(&[1, 2, 0]));
        assert!(compose(&p(&[0, 1]), &p(&[0, 1, 2])).is_err());
    }

    #[test]
    fn rejects_non_bijection() {
        assert!(Permutation::from_images(vec![0, 0]).is_err());
        assert!(Permutation::from_images(vec![0, 2]).is_err());
    }

    #[test]
    fn symmetric_group_orders() {
        assert_eq!(enumerate(&sym_gens(3), 100).unwrap().order(), Some(6));
        let mut rng = engine_rng(1);
        for n in 2..=7 {
            let pd = stabilizer_chain(n, &sym_gens(n), &mut rng);
            assert_eq!(pd.order(), (1..=n as u128).product::<u128>());
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert_eq!(enumerate(&sym_gens(5), 100).unwrap_err(), PermError::OrderCapExceeded(100));
    }

    #[test]
    fn trivial_chain() {
        let mut rng = engine_rng(0);
        let pd = stabilizer_chain(4, &[Permutation::identity(4)], &mut rng);
        assert!(pd.transversals.is_empty());
        assert_eq!(pd.order(), 1);
        assert_eq!(pd.elements(), vec![Permutation::identity(4)]);
    }

    #[test]
    fn chain_products_are_distinct_and_match_enumeration() {
        let mut rng = engine_rng(3);
        let gens = sym_gens(4);
        let pd = stabilizer_chain(4, &gens, &mut rng);
        let mut els = pd.elements();
        let n = els.len();
        els.sort();
        els.dedup();
        assert_eq!(els.len(), n);
        assert_eq!(els, enumerate(&gens, 1000).unwrap().elements.unwrap());
        for e in &els {
            assert!(pd.contains(e));
        }
    }

    #[test]
    fn orbits() {
        let g = PermGroup::trivial(5);
        assert_eq!(orbit(&g, 3).unwrap(), vec![3]);
        let s5 = PermGroup::new(5, sym_gens(5)).unwrap();
        assert_eq!(orbit(&s5, 0).unwrap(), vec![0, 1, 2, 3, 4]);
        assert!(orbit(&s5, 5).is_err());
    }

    #[test]
    fn signed_encoding() {
        let s = Permutation::signed(&[(1, false), (0, true)]).unwrap();
        assert!(s.is_signed());
        assert_eq!(s.apply_signed(0), (1, false));
        assert_eq!(s.apply_signed(1), (0, true));
        let sq = compose(&s, &s).unwrap();
        assert_eq!(sq.apply_signed(0), (0, true));
        assert!(!p(&[1, 2, 0, 3]).is_signed());
    }

    #[test]
    fn cycle_notation() {
        assert_eq!(p(&[1, 2, 0, 3]).cycles(), "(0 1 2)");
        assert_eq!(Permutation::identity(3).cycles(), "()");
    }

    fn arb_perm(n: usize) -> impl Strategy<Value = Permutation> {
        Just((0..n).collect::<Vec<usize>>()).prop_shuffle().prop_map(|v| Permutation::from_images(v).unwrap())
    }

    proptest! {
        #[test]
        fn group_laws(a in arb_perm(9), b in arb_perm(9), c in arb_perm(9)) {
            let ab_c = compose(&compose(&a, &b).unwrap(), &c).unwrap();
            let a_bc = compose(&a, &compose(&b, &c).unwrap()).unwrap();
            prop_assert_eq!(ab_c, a_bc);
            prop_assert!(compose(&a, &a.inverse()).unwrap().is_identity());
            prop_assert!(compose(&a.inverse(), &a).unwrap().is_identity());
            prop_assert_eq!(compose(&Permutation::identity(9), &a).unwrap(), a.clone());
        }

        #[test]
        fn chain_order_matches_enumeration(a in arb_perm(6), b in arb_perm(6), seed in 0u64..1000) {
            let gens = vec![a, b];
            let mut rng = engine_rng(seed);
            let pd = stabilizer_chain(6, &gens, &mut rng);
            let g = enumerate(&gens, 1000).unwrap();
            prop_assert_eq!(pd.order(), g.order().unwrap());
            for e in g.elements.as_ref().unwrap() {
                prop_assert!(pd.contains(e));
            }
        }
    }
}
