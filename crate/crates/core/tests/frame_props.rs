use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tomography::frames::{
    completeness_check, dual_via_gram_inverse, dual_via_gram_schmidt, verify_spanning_definitions, Quorum,
};
use tomography::liouville::{hs_inner, hs_norm, random_op, superop_from_frame, Op, C64};
use tomography::Error;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_quorum(d: usize, n: usize, r: &mut ChaCha8Rng) -> Quorum {
    Quorum::new((0..n).map(|_| random_op(d, r)).collect()).unwrap()
}

fn combination(q: &Quorum, coeffs: &[C64]) -> Op {
    q.elements().iter().zip(coeffs).fold(Op::zeros(q.dim()), |acc, (e, k)| &acc + &e.scale(*k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dual_routes_agree(seed in any::<u64>(), d in 2usize..=3) {
        let q = random_quorum(d, d * d, &mut rng(seed));
        let gs = dual_via_gram_schmidt(&q, false).unwrap();
        let gram = dual_via_gram_inverse(&q).unwrap();
        for (a, b) in gs.elements().iter().zip(gram.elements()) {
            prop_assert!(hs_norm(&(a - b)) <= 1e-8);
        }
    }

    #[test]
    fn redundant_frame_identity(seed in any::<u64>(), d in 2usize..=3, extra in 0usize..4) {
        let q = random_quorum(d, d * d + extra, &mut rng(seed));
        prop_assert!(completeness_check(&q).unwrap().complete);
        let dual = dual_via_gram_schmidt(&q, false).unwrap();
        let s = superop_from_frame(q.elements(), dual.elements()).unwrap();
        prop_assert!(s.identity_residual() <= 1e-10);
    }

    #[test]
    fn parseval_and_reconstruction(seed in any::<u64>(), d in 2usize..=3, extra in 0usize..3) {
        let mut r = rng(seed);
        let q = random_quorum(d, d * d + extra, &mut r);
        let dual = dual_via_gram_schmidt(&q, false).unwrap();
        for _ in 0..100 {
            let a = random_op(d, &mut r);
            let norm2 = hs_norm(&a).powi(2);
            let sum: C64 = q
                .elements()
                .iter()
                .zip(dual.elements())
                .map(|(cn, bn)| hs_inner(&a, cn).unwrap() * hs_inner(bn, &a).unwrap())
                .sum();
            prop_assert!((sum - C64::new(norm2, 0.0)).norm() <= 1e-9 * (1.0 + norm2));
            let rec = dual.reconstruct(&q, &a).unwrap();
            prop_assert!(hs_norm(&(&a - &rec)) <= 1e-9 * (1.0 + hs_norm(&a)));
        }
    }

    #[test]
    fn definitions_agree(seed in any::<u64>(), d in 2usize..=3, n in 1usize..=12) {
        let q = random_quorum(d, n, &mut rng(seed));
        let dual = dual_via_gram_schmidt(&q, true).unwrap();
        let report = verify_spanning_definitions(&q, &dual, 20, seed).unwrap();
        let checks = report.checks.unwrap();
        let v = checks.verdicts();
        prop_assert!(checks.consistent);
        prop_assert!(v.iter().all(|&x| x == report.complete));
        prop_assert_eq!(report.complete, n >= d * d);
    }

    #[test]
    fn elimination_keeps_retained_duals(seed in any::<u64>(), d in 2usize..=3) {
        let mut r = rng(seed);
        let q = random_quorum(d, d * d, &mut r);
        let before = dual_via_gram_schmidt(&q, false).unwrap();
        let coeffs: Vec<C64> = random_op(d * d, &mut r).flatten().iter().take(q.len()).copied().collect();
        let extended = q.push(combination(&q, &coeffs), "dependent").unwrap();
        let after = dual_via_gram_schmidt(&extended, false).unwrap();
        prop_assert!(!after.kept_mask()[q.len()]);
        prop_assert!(hs_norm(&after.elements()[q.len()]) == 0.0);
        for (a, b) in before.elements().iter().zip(after.elements()) {
            prop_assert!(hs_norm(&(a - b)) <= 1e-9);
        }
    }
}

#[test]
fn dependent_quorum_refused_by_gram_route() {
    let mut r = rng(3);
    let q = random_quorum(2, 4, &mut r);
    let coeffs = [C64::new(1.0, 0.0), C64::new(0.5, -0.5), C64::new(0.0, 0.0), C64::new(2.0, 0.0)];
    let q = q.push(combination(&q, &coeffs), "dependent").unwrap();
    assert!(matches!(dual_via_gram_inverse(&q), Err(Error::IllConditioned { .. })));
    assert!(dual_via_gram_schmidt(&q, false).is_ok());
}
