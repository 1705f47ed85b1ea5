mod common;

use std::sync::OnceLock;

use proptest::prelude::*;
use symnv::permgroup::{compose, enumerate, stabilizer_chain, Permutation};
use symnv::pipeline::{Method, Setup};
use symnv::rng::engine_rng;

fn setups() -> &'static [Setup] {
    static S: OnceLock<Vec<Setup>> = OnceLock::new();
    S.get_or_init(|| common::small_builtins().iter().map(|p| common::setup(p, Method::Irreps)).collect())
}

fn signed_perm(n: usize) -> impl Strategy<Value = Permutation> {
    (Just((0..n).collect::<Vec<usize>>()).prop_shuffle(), prop::collection::vec(any::<bool>(), n))
        .prop_map(|(p, s)| Permutation::signed(&p.into_iter().zip(s).collect::<Vec<_>>()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composition_is_associative(a in signed_perm(7), b in signed_perm(7), c in signed_perm(7)) {
        let left = compose(&compose(&a, &b).unwrap(), &c).unwrap();
        let right = compose(&a, &compose(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn identity_and_inverse(a in signed_perm(9)) {
        let id = Permutation::identity(18);
        prop_assert_eq!(compose(&a, &id).unwrap(), a.clone());
        prop_assert_eq!(compose(&id, &a).unwrap(), a.clone());
        prop_assert!(compose(&a, &a.inverse()).unwrap().is_identity());
        prop_assert!(compose(&a.inverse(), &a).unwrap().is_identity());
    }

    #[test]
    fn chain_order_matches_enumeration(a in signed_perm(4), b in signed_perm(4), seed in any::<u64>()) {
        let gens = vec![a, b];
        let chain = stabilizer_chain(8, &gens, &mut engine_rng(seed));
        let all = enumerate(&gens, 10_000).unwrap();
        prop_assert_eq!(chain.order(), all.elements.as_ref().unwrap().len() as u128);
        for g in all.elements.as_ref().unwrap() {
            prop_assert!(chain.contains(g));
        }
    }

    #[test]
    fn reynolds_is_an_invariant_projection(which in 0usize..8, seed in any::<u64>()) {
        let s = &setups()[which];
        let (idem, inv) = common::reynolds_errors(&s.symmetrizer, seed);
        prop_assert!(idem < 1e-12, "idempotency {idem:e}");
        prop_assert!(inv < 1e-12, "invariance {inv:e}");
    }

    #[test]
    fn chained_average_equals_naive(which in 0usize..8, seed in any::<u64>()) {
        let d = common::chained_vs_naive(&setups()[which], seed);
        prop_assert!(d < 1e-10, "{d:e}");
    }

    #[test]
    fn block_structure_of_invariant_matrices(which in 0usize..8, seed in any::<u64>()) {
        let s = &setups()[which];
        let c = common::block_checks(s, seed);
        prop_assert!(c.leakage < 1e-8, "leakage {:e}", c.leakage);
        prop_assert!(c.spectrum < 1e-8, "spectrum {:e}", c.spectrum);
        prop_assert!(c.min_eigenvalue < 1e-8, "min eigenvalue {:e}", c.min_eigenvalue);
        prop_assert!(common::positivity_agrees(s, seed));
    }
}

#[test]
fn irrep_bases_are_orthogonal() {
    for s in setups() {
        let u = &s.decomposition.as_ref().unwrap().u;
        let e = common::orthogonality_error(u);
        assert!(e < 1e-10, "{}: {e:e}", s.problem.spec.label());
    }
}

#[test]
fn builtins_pass_the_consistency_check() {
    for s in setups() {
        let (m, p) = common::consistency(s);
        assert!(m < 1e-6 && p < 1e-6, "{}: {m:e} {p:e}", s.problem.spec.label());
    }
}

#[test]
fn sdpa_text_roundtrips() {
    for s in setups() {
        assert!(common::sdpa_roundtrip(s), "{}", s.problem.spec.label());
    }
}
