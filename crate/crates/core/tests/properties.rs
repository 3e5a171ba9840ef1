use itertools::Itertools;
use proptest::prelude::*;

use lrrc::code::{choose_field, construct, invariant_check, reconstruct_check, repair_random, required_field_size};
use lrrc::connect::connect_run;
use lrrc::mfhs::{
    file_size_by_pattern, file_size_exhaustive, h_membership_with, majorizes, score_vectors, HSet, MembershipMode,
    Params, Perm,
};
use lrrc::sim::{simulate, FailurePolicy, HelperPolicy, SimConfig};

const SMALL: [(usize, usize, usize, usize); 5] = [(6, 4, 3, 1), (6, 3, 2, 1), (4, 2, 1, 1), (6, 2, 3, 1), (6, 6, 3, 1)];

fn params(t: (usize, usize, usize, usize)) -> Params {
    Params::new(t.0, t.1, t.2, t.3).unwrap()
}

#[test]
fn truncated_scores_sum_to_file_size() {
    for t in SMALL {
        let p = params(t);
        for order in (0..p.n()).permutations(p.n()) {
            let s = score_vectors(&p, &Perm::new(order).unwrap());
            assert_eq!(s.c.iter().sum::<usize>(), p.file_size(), "{t:?}");
            assert!(s.c[p.k()..].iter().all(|&x| x == 0), "{t:?}");
            assert!(s.b.iter().zip(&s.c).all(|(b, c)| c <= b));
        }
    }
}

#[test]
fn file_size_methods_agree() {
    for (n, k, d, r) in [(6, 4, 3, 1), (6, 3, 2, 1), (8, 4, 5, 1), (8, 5, 5, 1), (8, 6, 4, 2), (6, 6, 3, 1)] {
        let f = n - d - r;
        assert_eq!(file_size_exhaustive(n, k, d, f), file_size_by_pattern(n, k, d, f), "{:?}", (n, k, d, r));
    }
}

#[test]
fn known_h_sizes() {
    for (t, m, size) in [((6, 4, 3, 1), 7, 1128), ((6, 3, 2, 1), 4, 159), ((4, 2, 1, 1), 1, 5), ((6, 6, 3, 1), 7, 1128)] {
        let p = params(t);
        assert_eq!(p.file_size(), m);
        assert_eq!(HSet::cached(&p).unwrap().len(), size, "{t:?}");
    }
}

#[test]
fn canonical_membership_matches_exhaustive() {
    let p = params((6, 4, 3, 1));
    let mut members = 0;
    for h in (0..6).map(|_| 0..=3usize).multi_cartesian_product() {
        let a = h_membership_with(&p, &h, MembershipMode::Canonical).member;
        let b = h_membership_with(&p, &h, MembershipMode::Exhaustive).member;
        assert_eq!(a, b, "{h:?}");
        members += usize::from(a);
    }
    assert_eq!(members, 1128);
}

#[test]
fn members_respect_bounds() {
    for t in SMALL {
        let p = params(t);
        let hset = HSet::cached(&p).unwrap();
        for (h, w) in hset.iter() {
            assert!(h.weight() <= p.file_size());
            assert!(h.iter().all(|&x| x <= p.d()));
            let c = score_vectors(&p, w).c;
            let along: Vec<usize> = w.order().iter().map(|&i| h[i]).collect();
            assert!(majorizes(&c, &along).unwrap());
        }
    }
}

#[test]
fn connect_sweep_small_parameters() {
    for t in [(6, 3, 2, 1), (4, 2, 1, 1), (6, 2, 3, 1), (6, 6, 3, 1)] {
        let p = params(t);
        let hset = HSet::cached(&p).unwrap();
        for h in hset.members() {
            for failed in 0..p.n() {
                for helpers in p.helper_universe(failed).into_iter().combinations(p.d()) {
                    let out = connect_run(&p, h, &helpers, failed).unwrap();
                    assert!(hset.contains(&out.h_prime));
                    assert_eq!(out.h_prime[failed], 0);
                    assert_eq!(out.incremented.len(), h[failed]);
                }
            }
        }
    }
}

#[test]
fn invariant_implies_reconstruction() {
    let p = params((6, 3, 2, 1));
    let hset = HSet::cached(&p).unwrap();
    // a small field so that some draws fail the invariant
    let field = choose_field(&p, &hset, Some(31)).unwrap().field();
    let mut seen = 0;
    for seed in 0..200 {
        if let Ok(c) = construct(&p, field, &hset, seed, 1) {
            assert!(invariant_check(&c.state, &hset));
            assert!(reconstruct_check(&c.state));
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn repair_keeps_invariant_at_bound() {
    let p = params((6, 3, 2, 1));
    let hset = HSet::cached(&p).unwrap();
    let field = choose_field(&p, &hset, None).unwrap().field();
    let mut state = construct(&p, field, &hset, 3, 16).unwrap().state;
    for (round, failed) in (0..p.n()).cycle().take(24).enumerate() {
        let helpers = p.helper_universe(failed)[..p.d()].to_vec();
        let rep = repair_random(&state, &hset, failed, &helpers, round as u64, 16).unwrap();
        state = rep.state;
        assert!(invariant_check(&state, &hset));
        assert!(reconstruct_check(&state));
    }
}

#[test]
fn empirical_failure_rate_within_bound() {
    let p = params((6, 3, 2, 1));
    let hset = HSet::cached(&p).unwrap();
    let q = choose_field(&p, &hset, None).unwrap().q;
    let bound = (required_field_size(&p, &hset) - 1) as f64 / q as f64;
    assert!(bound < 1.0);
    let mut cfg = SimConfig::new(p, 17, 60);
    cfg.failure_policy = FailurePolicy::UniformRandom;
    cfg.helper_policy = HelperPolicy::UniformRandom;
    let report = simulate(&cfg).unwrap();
    assert!(report.pass());
    assert!(report.aggregate.empirical_repair_failure_rate <= bound);
}

fn vec6() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..5, 6)
}

proptest! {
    #[test]
    fn majorization_is_transitive(a in vec6(), b in vec6(), c in vec6()) {
        if majorizes(&a, &b).unwrap() && majorizes(&b, &c).unwrap() {
            prop_assert!(majorizes(&a, &c).unwrap());
        }
    }

    #[test]
    fn majorization_is_reflexive_and_permutation_invariant(a in vec6(), shift in 0usize..6) {
        let mut rotated = a.clone();
        rotated.rotate_left(shift);
        prop_assert!(majorizes(&a, &a).unwrap());
        prop_assert!(majorizes(&a, &rotated).unwrap());
        prop_assert!(majorizes(&rotated, &a).unwrap());
    }

    #[test]
    fn random_members_pass_membership(idx in 0usize..1128) {
        let p = params((6, 4, 3, 1));
        let hset = HSet::cached(&p).unwrap();
        let h = &hset.members()[idx];
        prop_assert!(h_membership_with(&p, h, MembershipMode::Auto).member);
    }
}
