//! Random feasible realizations, moment matrices and rank-saturated sample bases.

use faer::c64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blockdiag::BlockVector;
use crate::linalg::{column_projector, complex_identity, haar_unitary, haar_vector, kron, lstsq, CMat, RMat};
use crate::permgroup::{Permutation, ProductDecomposition};
use crate::rng::{stream_rng, RNG_ALGORITHM};
use crate::scenario::{Factor, KrausFamily, Locality, MonomialSet, OperatorKind, Scenario, SettingRanks};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("rank profile {ranks:?} does not fit dimension {dim}")]
    InfeasibleRanks { ranks: Vec<usize>, dim: usize },
    #[error("sample rank did not saturate within {0} samples")]
    RankNotSaturated(usize),
    #[error("malformed sample bundle: {0}")]
    Bundle(String),
}

/// Matrices assigned to every operator variable plus the Kraus operator `K`.
#[derive(Clone, Debug)]
pub struct Realization {
    pub operators: Vec<CMat>,
    pub kraus: CMat,
    adjoints: Vec<Option<CMat>>,
}

impl Realization {
    pub fn new(operators: Vec<CMat>, kraus: CMat, hermitian: &[bool]) -> Self {
        let adjoints = operators
            .iter()
            .zip(hermitian)
            .map(|(m, &h)| if h { None } else { Some(m.adjoint().to_owned()) })
            .collect();
        Self { operators, kraus, adjoints }
    }

    pub fn dim(&self) -> usize {
        self.kraus.nrows()
    }

    pub fn factor_matrix(&self, f: Factor) -> &CMat {
        if f.dagger {
            self.adjoints[f.op].as_ref().unwrap_or(&self.operators[f.op])
        } else {
            &self.operators[f.op]
        }
    }

    /// The operator product `X_{f_1} X_{f_2} ..`.
    pub fn evaluate(&self, factors: &[Factor]) -> CMat {
        let mut acc = complex_identity(self.dim());
        for &f in factors {
            acc = &acc * self.factor_matrix(f);
        }
        acc
    }

    /// `s(X) K`.
    pub fn apply(&self, factors: &[Factor]) -> CMat {
        let mut acc = self.kraus.clone();
        for &f in factors.iter().rev() {
            acc = self.factor_matrix(f) * &acc;
        }
        acc
    }

    /// `Re Tr(K† s(X) K)`.
    pub fn expectation(&self, factors: &[Factor]) -> f64 {
        let v = self.apply(factors);
        let mut t = c64::new(0.0, 0.0);
        for j in 0..v.ncols() {
            for i in 0..v.nrows() {
                t += self.kraus[(i, j)].conj() * v[(i, j)];
            }
        }
        t.re
    }

    /// Shorthand for `expectation` on Hermitian operator ids.
    pub fn expect(&self, ops: &[usize]) -> f64 {
        let f: Vec<Factor> = ops.iter().map(|&o| Factor::new(o)).collect();
        self.expectation(&f)
    }

    /// Realization `π(X)` with `π(X)_{π(i)} = ±X_i` for a signed operator permutation.
    pub fn permuted(&self, g: &Permutation) -> Self {
        let n = self.operators.len();
        let mut ops: Vec<Option<CMat>> = vec![None; n];
        let mut adj: Vec<Option<CMat>> = vec![None; n];
        for i in 0..n {
            let (j, neg) = g.apply_signed(i);
            let m = if neg { scale(&self.operators[i], -1.0) } else { self.operators[i].clone() };
            ops[j] = Some(m);
            adj[j] = self.adjoints[i].as_ref().map(|a| if neg { scale(a, -1.0) } else { a.clone() });
        }
        Self { operators: ops.into_iter().map(|m| m.expect("bijection")).collect(), kraus: self.kraus.clone(), adjoints: adj }
    }
}

fn scale(m: &CMat, s: f64) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

fn embed(local: CMat, locality: Locality, d: usize) -> CMat {
    match locality {
        Locality::Whole => local,
        Locality::Party(0) => kron(&local, &complex_identity(d)),
        Locality::Party(_) => kron(&complex_identity(d), &local),
    }
}

/// Generic feasible realization: Haar pure states, projectors spanned by
/// columns of Haar unitaries, Haar unitaries, and `K` per the Kraus family.
pub fn sample_realization<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<Realization, SamplerError> {
    let d = scenario.hilbert_dim;
    let total = scenario.total_dim();
    let n = scenario.num_operators();
    let mut ops: Vec<Option<CMat>> = vec![None; n];
    for o in &scenario.operators {
        match o.kind {
            OperatorKind::State { .. } => {
                let v = haar_vector(total, rng);
                ops[o.id] = Some(&v * v.adjoint());
            }
            OperatorKind::Unitary { .. } => ops[o.id] = Some(haar_unitary(total, rng)),
            _ => {}
        }
    }
    for s in &scenario.settings {
        let u = haar_unitary(d, rng);
        let k = s.elements.len();
        let observable = matches!(scenario.operators[s.elements[0]].kind, OperatorKind::Observable { .. });
        if observable {
            let r = match &s.ranks {
                SettingRanks::Fixed(r) => r[0],
                SettingRanks::Free => rng.random_range(0..=d),
            };
            if r > d {
                return Err(SamplerError::InfeasibleRanks { ranks: vec![r], dim: d });
            }
            let p = column_projector(&u, 0..r);
            let a = CMat::from_fn(d, d, |i, j| p[(i, j)] * 2.0 - if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
            ops[s.elements[0]] = Some(embed(a, s.locality, d));
            continue;
        }
        let ranks: Vec<usize> = match &s.ranks {
            SettingRanks::Fixed(r) => {
                let head: usize = r[..k - 1].iter().sum();
                if head > d || r.len() != k {
                    return Err(SamplerError::InfeasibleRanks { ranks: r.clone(), dim: d });
                }
                let mut r = r.clone();
                r[k - 1] = d - head;
                r
            }
            SettingRanks::Free => {
                let mut r = vec![0; k];
                for _ in 0..d {
                    r[rng.random_range(0..k)] += 1;
                }
                r
            }
        };
        let mut start = 0;
        for (&id, &r) in s.elements.iter().zip(&ranks) {
            let p = column_projector(&u, start..start + r);
            start += r;
            ops[id] = Some(embed(p, s.locality, d));
        }
    }
    let kraus = match scenario.kraus {
        KrausFamily::Tracial => complex_identity(total),
        KrausFamily::PureState => haar_vector(total, rng),
    };
    let hermitian: Vec<bool> = scenario.operators.iter().map(|o| o.kind.is_hermitian()).collect();
    Ok(Realization::new(ops.into_iter().map(|m| m.expect("every operator sampled")).collect(), kraus, &hermitian))
}

/// Real matrix whose column `j` stacks real and imaginary parts of `s_j(X) K`;
/// the moment matrix is its Gram matrix.
pub fn stacked_vectors(real: &Realization, mset: &MonomialSet) -> RMat {
    let (rows, cols) = (real.kraus.nrows(), real.kraus.ncols());
    let len = rows * cols;
    let mut a = RMat::zeros(2 * len, mset.len());
    for (j, m) in mset.monomials.iter().enumerate() {
        let v = real.apply(&m.factors);
        for c in 0..cols {
            for r in 0..rows {
                let z = v[(r, c)];
                a[(c * rows + r, j)] = z.re;
                a[(len + c * rows + r, j)] = z.im;
            }
        }
    }
    a
}

/// `Γ_jk = Re Tr[(s_j K)† (s_k K)]`, exactly symmetric.
pub fn moment_matrix(real: &Realization, mset: &MonomialSet) -> RMat {
    let a = stacked_vectors(real, mset);
    let mut g = a.transpose() * &a;
    crate::linalg::symmetrize_upper(&mut g);
    g
}

#[derive(Clone, Debug)]
pub struct MomentSample {
    pub gamma: RMat,
    pub objective: f64,
}

/// Draws realizations for a scenario, optionally moved by a uniformly random
/// element of a symmetry group so that rank sequences cover their orbit.
pub struct MomentOracle<'a> {
    pub scenario: &'a Scenario,
    pub mset: &'a MonomialSet,
    pub objective: &'a (dyn Fn(&Realization) -> f64 + Sync),
    pub orbit: Option<&'a ProductDecomposition>,
    pub seed: u64,
}

impl MomentOracle<'_> {
    /// Realization number `index`; pure in `(seed, index)`.
    pub fn realization(&self, index: u64) -> Result<Realization, SamplerError> {
        let mut rng = stream_rng(self.seed, index);
        let real = sample_realization(self.scenario, &mut rng)?;
        Ok(match self.orbit {
            Some(chain) => real.permuted(&chain.random_element(&mut rng)),
            None => real,
        })
    }

    pub fn sample(&self, index: u64) -> Result<MomentSample, SamplerError> {
        let real = self.realization(index)?;
        Ok(MomentSample { gamma: moment_matrix(&real, self.mset), objective: (self.objective)(&real) })
    }
}

/// Produces block-vector samples for [`build_basis`].
pub trait SampleSource {
    /// Multiplicity weight of each block (1 for unblocked matrices).
    fn weights(&self) -> Vec<usize>;
    fn draw(&self, index: u64) -> Result<(BlockVector, f64), SamplerError>;
}

/// Affine basis of sampled moment data: `rank` independent samples plus one
/// held out for the consistency check.
#[derive(Clone, Debug)]
pub struct SampleBasis {
    pub samples: Vec<BlockVector>,
    pub objectives: Vec<f64>,
    pub weights: Vec<usize>,
    pub rank: usize,
    /// Number of samples drawn.
    pub drawn: usize,
}

/// Isometric vectorization: upper triangles with off-diagonals scaled by √2,
/// each block scaled by the square root of its multiplicity weight.
pub fn vectorize(bv: &BlockVector, weights: &[usize]) -> Vec<f64> {
    let mut out = Vec::new();
    for (b, &w) in bv.blocks.iter().zip(weights) {
        let sw = (w as f64).sqrt();
        for j in 0..b.ncols() {
            for i in 0..=j {
                let s = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                out.push(b[(i, j)] * s * sw);
            }
        }
    }
    out
}

/// Samples drawn per batch while searching for the saturation point.
pub const BATCH_SIZE: usize = 100;

/// Draws samples until one lies numerically in the span of its predecessors,
/// keeping the independent samples plus that first dependent one.
///
/// Independence is decided by the norm left after projecting out the span
/// (block classical Gram-Schmidt, two passes) against
/// `max(count, len) · ‖S‖_F · 2⁻⁴⁰`, where `‖S‖_F` bounds the largest
/// singular value of the stacked samples. Samples are drawn in batches of
/// [`BATCH_SIZE`]; draws past the first dependent sample are discarded.
pub fn build_basis(source: &dyn SampleSource, max_samples: usize) -> Result<SampleBasis, SamplerError> {
    let weights = source.weights();
    let mut samples = Vec::new();
    let mut objectives = Vec::new();
    // Orthonormal columns spanning the accepted samples.
    let mut q = RMat::zeros(0, 0);
    let mut rank = 0;
    let mut frob2 = 0.0;
    let mut drawn = 0;
    while drawn < max_samples {
        let batch = BATCH_SIZE.min(max_samples - drawn);
        let drafts = (drawn..drawn + batch).map(|k| source.draw(k as u64)).collect::<Result<Vec<_>, _>>()?;
        drawn += batch;
        let vecs: Vec<Vec<f64>> = drafts.iter().map(|(bv, _)| vectorize(bv, &weights)).collect();
        let len = vecs[0].len();
        if q.nrows() != len {
            q = RMat::zeros(len, 0);
        }
        let mut v = RMat::from_fn(len, batch, |i, j| vecs[j][i]);
        for _ in 0..2 {
            let c = q.transpose() * &v;
            v -= &q * c;
        }
        let first = rank;
        q.resize_with(len, rank + batch, |_, _| 0.0);
        for (j, (bv, p)) in drafts.into_iter().enumerate() {
            frob2 += vecs[j].iter().map(|x| x * x).sum::<f64>();
            let mut r: Vec<f64> = v.col(j).iter().copied().collect();
            // Columns accepted earlier in this batch are not yet projected out.
            for _ in 0..2 {
                for c in first..rank {
                    let qc = q.col(c);
                    let dot: f64 = qc.iter().zip(&r).map(|(a, b)| a * b).sum();
                    r.iter_mut().zip(qc.iter()).for_each(|(x, qi)| *x -= dot * qi);
                }
            }
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            let tol = (samples.len() + 1).max(len) as f64 * frob2.sqrt() * (-40f64).exp2();
            samples.push(bv);
            objectives.push(p);
            if norm <= tol {
                return Ok(SampleBasis { samples, objectives, weights, rank, drawn });
            }
            q.col_mut(rank).iter_mut().zip(&r).for_each(|(x, ri)| *x = ri / norm);
            rank += 1;
        }
        q.truncate(len, rank);
    }
    Err(SamplerError::RankNotSaturated(max_samples))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Consistency {
    /// `‖Γ^(r+1) − Σ c_ℓ Γ^(ℓ)‖ / max(1, ‖Γ^(r+1)‖)` in the isometric vectorization.
    pub matrix_residual: f64,
    pub objective_residual: f64,
    pub passed: bool,
}

/// Expresses the held-out sample in the span of the first `rank` samples.
pub fn consistency_check(basis: &SampleBasis, tol: f64) -> Consistency {
    let r = basis.rank;
    let vecs: Vec<Vec<f64>> = basis.samples.iter().map(|s| vectorize(s, &basis.weights)).collect();
    let len = vecs[0].len();
    let a = RMat::from_fn(len, r, |i, j| vecs[j][i]);
    let target = &vecs[r];
    let c = lstsq(&a, target);
    let mut res2 = 0.0;
    let mut norm2 = 0.0;
    for i in 0..len {
        let fit: f64 = (0..r).map(|j| a[(i, j)] * c[j]).sum();
        res2 += (fit - target[i]).powi(2);
        norm2 += target[i].powi(2);
    }
    let matrix_residual = res2.sqrt() / norm2.sqrt().max(1.0);
    let p_fit: f64 = (0..r).map(|j| c[j] * basis.objectives[j]).sum();
    let objective_residual = (p_fit - basis.objectives[r]).abs();
    Consistency { matrix_residual, objective_residual, passed: matrix_residual < tol && objective_residual < tol }
}

/// JSON layout of an exported [`SampleBasis`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleBundle {
    pub format: String,
    pub version: u32,
    pub rng: String,
    pub seed: u64,
    pub rank: usize,
    pub drawn: usize,
    pub weights: Vec<usize>,
    pub block_dims: Vec<usize>,
    /// Per sample, per block, row-major upper triangle.
    pub samples: Vec<Vec<Vec<f64>>>,
    pub objectives: Vec<f64>,
}

const BUNDLE_FORMAT: &str = "symnv-sample-basis";

impl SampleBasis {
    pub fn to_bundle(&self, seed: u64) -> SampleBundle {
        let block_dims = self.samples[0].blocks.iter().map(RMat::nrows).collect();
        let samples = self
            .samples
            .iter()
            .map(|s| {
                s.blocks
                    .iter()
                    .map(|b| {
                        let mut v = Vec::new();
                        for i in 0..b.nrows() {
                            for j in i..b.ncols() {
                                v.push(b[(i, j)]);
                            }
                        }
                        v
                    })
                    .collect()
            })
            .collect();
        SampleBundle {
            format: BUNDLE_FORMAT.into(),
            version: 1,
            rng: RNG_ALGORITHM.into(),
            seed,
            rank: self.rank,
            drawn: self.drawn,
            weights: self.weights.clone(),
            block_dims,
            samples,
            objectives: self.objectives.clone(),
        }
    }

    pub fn from_bundle(b: &SampleBundle) -> Result<Self, SamplerError> {
        if b.format != BUNDLE_FORMAT || b.version != 1 {
            return Err(SamplerError::Bundle(format!("unsupported format {} v{}", b.format, b.version)));
        }
        if b.samples.len() != b.rank + 1 || b.objectives.len() != b.rank + 1 {
            return Err(SamplerError::Bundle("sample count must be rank + 1".into()));
        }
        let mut samples = Vec::new();
        for s in &b.samples {
            if s.len() != b.block_dims.len() {
                return Err(SamplerError::Bundle("block count mismatch".into()));
            }
            let mut blocks = Vec::new();
            for (v, &n) in s.iter().zip(&b.block_dims) {
                if v.len() != n * (n + 1) / 2 {
                    return Err(SamplerError::Bundle("block length mismatch".into()));
                }
                let mut m = RMat::zeros(n, n);
                let mut k = 0;
                for i in 0..n {
                    for j in i..n {
                        m[(i, j)] = v[k];
                        m[(j, i)] = v[k];
                        k += 1;
                    }
                }
                blocks.push(m);
            }
            samples.push(BlockVector { blocks });
        }
        Ok(Self { samples, objectives: b.objectives.clone(), weights: b.weights.clone(), rank: b.rank, drawn: b.drawn })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue;
    use crate::rng::engine_rng;
    use crate::scenario::{monomial_set, Level, Monomial, Probe};

    fn pm_set(s: &Scenario, extra: Vec<Monomial>, seed: u64) -> MonomialSet {
        let probe = Probe::new(s, None, &mut engine_rng(seed)).unwrap();
        monomial_set(s, &Level::Explicit(extra), &[], None, probe).unwrap()
    }

    fn max_abs(m: &CMat) -> f64 {
        let mut out = 0.0f64;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                out = out.max(m[(i, j)].norm());
            }
        }
        out
    }

    #[test]
    fn tracial_state_moments() {
        let s = Scenario::prepare_measure(1, 1, 2, 3);
        let m = pm_set(&s, vec![Monomial::of(&[0])], 1);
        let g = moment_matrix(&sample_realization(&s, &mut engine_rng(2)).unwrap(), &m);
        let expected = [[3.0, 1.0], [1.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((g[(i, j)] - expected[i][j]).abs() < 1e-12, "{i},{j}: {}", g[(i, j)]);
            }
        }
    }

    #[test]
    fn projective_measurements_are_complete_and_orthogonal() {
        let s = Scenario::prepare_measure(2, 2, 3, 4);
        let mut rng = engine_rng(3);
        for _ in 0..5 {
            let r = sample_realization(&s, &mut rng).unwrap();
            for set in &s.settings {
                let mut sum = CMat::zeros(4, 4);
                for &a in &set.elements {
                    let pa = &r.operators[a];
                    assert!(max_abs(&(pa * pa - pa)) < 1e-12);
                    for &b in set.elements.iter().filter(|&&b| b != a) {
                        assert!(max_abs(&(pa * &r.operators[b])) < 1e-12);
                    }
                    sum = sum + pa;
                }
                assert!(max_abs(&(sum - complex_identity(4))) < 1e-12);
            }
        }
    }

    #[test]
    fn one_dimensional_projectors_are_zero_or_one() {
        let s = Scenario::prepare_measure(1, 1, 2, 1);
        let mut rng = engine_rng(4);
        for _ in 0..10 {
            let r = sample_realization(&s, &mut rng).unwrap();
            let vals: Vec<f64> = r.operators[1..].iter().map(|m| m[(0, 0)].re).collect();
            assert!(vals.iter().all(|v| v.abs() < 1e-14 || (v - 1.0).abs() < 1e-14));
            assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn samples_are_reproducible_and_psd() {
        let s = Scenario::prepare_measure(3, 2, 2, 2);
        let mset = {
            let probe = Probe::new(&s, None, &mut engine_rng(5)).unwrap();
            monomial_set(&s, &Level::Words(2), &[], None, probe).unwrap()
        };
        let objective = |r: &Realization| r.expect(&[0, 3]);
        let oracle = MomentOracle { scenario: &s, mset: &mset, objective: &objective, orbit: None, seed: 9 };
        let a = oracle.sample(17).unwrap();
        let b = oracle.sample(17).unwrap();
        assert_eq!(a.gamma, b.gamma);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert!(a.gamma != oracle.sample(18).unwrap().gamma);
        for k in 0..5 {
            let g = oracle.sample(k).unwrap().gamma;
            assert!(min_eigenvalue(&g) > -1e-10 * g.norm_l2());
            assert!((g[(0, 0)] - 2.0).abs() < 1e-12);
        }
    }

    /// One-dimensional samples `t` with objective `f(t)`.
    struct Scalar(fn(f64) -> f64);

    impl SampleSource for Scalar {
        fn weights(&self) -> Vec<usize> {
            vec![1]
        }
        fn draw(&self, index: u64) -> Result<(BlockVector, f64), SamplerError> {
            let t = 1.0 + index as f64;
            Ok((BlockVector { blocks: vec![RMat::from_fn(1, 1, |_, _| t)] }, (self.0)(t)))
        }
    }

    #[test]
    fn linear_objective_is_consistent() {
        let basis = build_basis(&Scalar(|t| 3.0 * t), 10).unwrap();
        assert_eq!((basis.rank, basis.samples.len()), (1, 2));
        assert!(consistency_check(&basis, 1e-9).passed);
    }

    #[test]
    fn nonlinear_objective_is_rejected() {
        let basis = build_basis(&Scalar(|t| t * t), 10).unwrap();
        let c = consistency_check(&basis, 1e-6);
        assert!(c.matrix_residual < 1e-12);
        assert!(!c.passed);
    }

    #[test]
    fn bundle_roundtrip() {
        let s = Scenario::prepare_measure(2, 1, 2, 2);
        let mset = pm_set(&s, vec![Monomial::of(&[0]), Monomial::of(&[2]), Monomial::of(&[0, 2])], 6);
        let objective = |r: &Realization| r.expect(&[0, 2]);
        let oracle = MomentOracle { scenario: &s, mset: &mset, objective: &objective, orbit: None, seed: 2 };
        struct Plain<'a>(MomentOracle<'a>);
        impl SampleSource for Plain<'_> {
            fn weights(&self) -> Vec<usize> {
                vec![1]
            }
            fn draw(&self, index: u64) -> Result<(BlockVector, f64), SamplerError> {
                let m = self.0.sample(index)?;
                Ok((BlockVector { blocks: vec![m.gamma] }, m.objective))
            }
        }
        let basis = build_basis(&Plain(oracle), 1000).unwrap();
        let json = serde_json::to_string(&basis.to_bundle(2)).unwrap();
        let back = SampleBasis::from_bundle(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.rank, basis.rank);
        assert_eq!(back.objectives, basis.objectives);
        for (x, y) in back.samples.iter().zip(&basis.samples) {
            assert_eq!(x.blocks, y.blocks);
        }
        assert!(consistency_check(&back, 1e-6).passed);
    }
}
