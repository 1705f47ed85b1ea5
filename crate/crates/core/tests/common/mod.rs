//! Fixtures shared by the property suite and the acceptance runner.

#![allow(dead_code)]

pub mod seesaw;

use symnv::blockdiag::{extract_blocks, extract_blocks_checked, leakage, sample_invariant, Component, IrrepBasis};
use symnv::linalg::{goe, min_eigenvalue, sym_eigenvalues, RMat};
use symnv::permgroup::Permutation;
use symnv::pipeline::{Method, Setup};
use symnv::problems::{I3322Level, PairRanks, ProblemSpec};
use symnv::reynolds::Symmetrizer;
use symnv::rng::engine_rng;
use symnv::sampler::consistency_check;
use symnv::sdp::{assemble, emit_sdpa, parse_sdpa};

/// Small instance of every built-in family.
pub fn small_builtins() -> Vec<ProblemSpec> {
    vec![
        ProblemSpec::Rac { n: 2, d: 2 },
        ProblemSpec::Rac { n: 2, d: 3 },
        ProblemSpec::Rac { n: 3, d: 2 },
        ProblemSpec::I3322 { c: 1.0, d: 2, ranks: Some(vec![1; 6]), level: I3322Level::Small },
        ProblemSpec::Facet { d: 3 },
        ProblemSpec::Sic { d: 2, pair_ranks: PairRanks::RankOne },
        ProblemSpec::Multiparty { n: 1, d: 3 },
        ProblemSpec::Multiparty { n: 3, d: 2 },
    ]
}

pub fn setup(spec: &ProblemSpec, method: Method) -> Setup {
    Setup::new(spec.build().expect("built-in parameters are valid"), method, 1).expect("setup succeeds")
}

fn rel(a: &RMat, b: &RMat) -> f64 {
    (a - b).norm_l2() / b.norm_l2().max(1.0)
}

/// `(‖ℛ(ℛ(G)) − ℛ(G)‖, max_g ‖φ(g)(ℛ(G)) − ℛ(G)‖)` relative to `‖ℛ(G)‖`.
pub fn reynolds_errors(sym: &Symmetrizer, seed: u64) -> (f64, f64) {
    let r = sym.apply(&goe(sym.dim(), &mut engine_rng(seed)));
    let idem = rel(&sym.apply(&r), &r);
    let inv = sym.generators().iter().map(|g| rel(&g.apply(&r), &r)).fold(0.0, f64::max);
    (idem, inv)
}

/// Relative distance between the chained average and the naive one over `elements`.
pub fn chained_vs_naive(s: &Setup, seed: u64) -> f64 {
    let chain = s.group.chain.as_ref().expect("setup builds a chain");
    let elements: Vec<Permutation> =
        chain.elements().iter().map(|e| s.mset.action(e, &s.problem.scenario).expect("action")).collect();
    let naive = Symmetrizer::naive(s.mset.len(), &elements);
    let g = goe(s.mset.len(), &mut engine_rng(seed));
    rel(&s.symmetrizer.apply(&g), &naive.apply(&g))
}

/// Largest entry of `UᵀU − 𝟙`.
pub fn orthogonality_error(u: &RMat) -> f64 {
    let p = u.transpose() * u;
    let mut worst: f64 = 0.0;
    for j in 0..p.ncols() {
        for i in 0..p.nrows() {
            worst = worst.max((p[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    worst
}

pub struct BlockChecks {
    pub leakage: f64,
    pub form_residual: f64,
    pub spectrum: f64,
    /// `|λ_min(Γ̃) − min_r λ_min(L^r)|` relative to `‖Γ̃‖`.
    pub min_eigenvalue: f64,
}

/// Block-structure checks of an irrep basis on a fresh invariant matrix,
/// shifted so that it is indefinite.
pub fn block_checks(s: &Setup, seed: u64) -> BlockChecks {
    let basis: &IrrepBasis = s.decomposition.as_ref().expect("decomposition");
    let mut rng = engine_rng(seed);
    let mut inv = sample_invariant(&s.symmetrizer, &mut rng);
    let shift = 0.5 * sym_eigenvalues(&inv).iter().sum::<f64>() / inv.nrows() as f64;
    for i in 0..inv.nrows() {
        inv[(i, i)] -= shift;
    }
    let components: Vec<Component> =
        basis.irreps.iter().map(|b| Component { offset: b.offset, dim: b.dim * b.multiplicity }).collect();
    let (blocks, form_residual) = extract_blocks_checked(basis, &inv);
    let mut from_blocks: Vec<f64> = Vec::new();
    for (b, l) in basis.irreps.iter().zip(&blocks.blocks) {
        for v in sym_eigenvalues(l) {
            from_blocks.extend(std::iter::repeat_n(v, b.dim));
        }
    }
    from_blocks.sort_by(f64::total_cmp);
    let direct = sym_eigenvalues(&inv);
    let scale = inv.norm_l2();
    let spectrum = direct.iter().zip(&from_blocks).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    let block_min = blocks.blocks.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min);
    BlockChecks {
        leakage: leakage(&basis.u, &components, &inv),
        form_residual,
        spectrum,
        min_eigenvalue: (min_eigenvalue(&inv) - block_min).abs() / scale,
    }
}

/// `Γ ⪰ 0` agrees with `L^r ⪰ 0` for all `r` on a PSD invariant matrix and on
/// a shifted indefinite one.
pub fn positivity_agrees(s: &Setup, seed: u64) -> bool {
    let basis = s.decomposition.as_ref().expect("decomposition");
    let mut rng = engine_rng(seed);
    let g = goe(s.mset.len(), &mut rng);
    let psd = s.symmetrizer.apply(&(&g * g.transpose()));
    let scale = psd.norm_l2();
    let tol = 1e-9 * scale;
    let verdicts = |m: &RMat| {
        let whole = min_eigenvalue(m) >= -tol;
        let blocks = extract_blocks(basis, m).blocks.iter().all(|l| min_eigenvalue(l) >= -tol);
        whole == blocks
    };
    let mut shifted = psd.clone();
    let lam = sym_eigenvalues(&psd);
    let mid = 0.5 * (lam[0] + lam[lam.len() - 1]);
    for i in 0..shifted.nrows() {
        shifted[(i, i)] -= mid;
    }
    verdicts(&psd) && verdicts(&shifted)
}

/// `(matrix residual, objective residual)` of the held-out sample.
pub fn consistency(s: &Setup) -> (f64, f64) {
    let basis = s.sample_basis(20_000).expect("rank saturates");
    let c = consistency_check(&basis, 1e-6);
    (c.matrix_residual, c.objective_residual)
}

/// The SDPA text of an assembled problem survives parse and re-emit unchanged.
pub fn sdpa_roundtrip(s: &Setup) -> bool {
    let basis = s.sample_basis(20_000).expect("rank saturates");
    let p = assemble(&basis);
    let text = emit_sdpa(&p).expect("emit");
    let back = parse_sdpa(&text).expect("parse");
    emit_sdpa(&back).expect("re-emit") == text && back.block_dims == p.block_dims && back.m() == p.m()
}
