use proptest::collection::vec;
use proptest::prelude::*;

use mechcheck::checker::{bic_margins, check_dist_preservation, CheckConfig, Verdict};
use mechcheck::ratio::{self, frac, int};
use mechcheck::scenario::{inverse_order, rotation_order};
use mechcheck::vcg::{
    brute_force_matching, buyer_utility, hungarian_matching, is_permutation, subset_matching, vcg_matching,
    PaymentRule, WeightMatrix,
};
use mechcheck::{dist_equal, insert_at, remove_at, AgentType, Algorithm, ExactDist, Outcome, Rational, Scenario, Valuation};

fn rational() -> impl Strategy<Value = Rational> {
    (-6i64..=6, 1i64..=4).prop_map(|(p, q)| frac(p, q))
}

/// Distribution over `0..k` from positive integer weights.
fn dist(k: usize) -> impl Strategy<Value = ExactDist<u8>> {
    vec(0i64..=4, k).prop_filter_map("some mass", |ws| {
        let total: i64 = ws.iter().sum();
        (total > 0).then(|| {
            ExactDist::from_weighted(ws.iter().enumerate().map(|(i, &w)| (i as u8, frac(w, total)))).unwrap()
        })
    })
}

fn matrix(max: usize) -> impl Strategy<Value = WeightMatrix> {
    (1..=max).prop_flat_map(|m| vec(vec(rational(), m), m).prop_map(|rows| WeightMatrix::new(rows).unwrap()))
}

fn kernel(x: u8) -> ExactDist<u8> {
    ExactDist::uniform([x, (x + 1) % 4, (x * 3) % 5]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bind_left_identity(x in 0u8..5) {
        prop_assert_eq!(ExactDist::point(x).bind(|&y| kernel(y)), kernel(x));
    }

    #[test]
    fn bind_right_identity(d in dist(4)) {
        prop_assert_eq!(d.bind(|&x| ExactDist::point(x)), d);
    }

    #[test]
    fn bind_associative(d in dist(4)) {
        let k2 = |x: &u8| ExactDist::uniform([x / 2, x + 1]).unwrap();
        let left = d.bind(|&x| kernel(x)).bind(k2);
        let right = d.bind(|&x| kernel(x).bind(k2));
        prop_assert!(dist_equal(&left, &right));
    }

    #[test]
    fn masses_sum_to_one(d in dist(5)) {
        let total = d.entries().iter().fold(ratio::zero(), |acc, (_, p)| acc + p);
        prop_assert_eq!(total, int(1));
        prop_assert!(d.entries().iter().all(|(_, p)| *p > ratio::zero()));
    }

    #[test]
    fn expectation_linear_and_monotone(d in dist(4), a in rational(), b in rational()) {
        let f = |x: &u8| int(*x as i64);
        let g = |x: &u8| int((*x as i64) * (*x as i64));
        let lhs = d.expectation(|x| &a * f(x) + &b * g(x));
        prop_assert_eq!(lhs, &a * d.expectation(f) + &b * d.expectation(g));
        // f <= g pointwise on naturals.
        prop_assert!(d.expectation(f) <= d.expectation(g));
    }

    #[test]
    fn product_is_iterated_bind(a in dist(3), b in dist(3)) {
        let via_bind = a.bind(|&x| b.map(|&y| vec![x, y]));
        prop_assert_eq!(ExactDist::product(&[a.clone(), b]), via_bind);
        prop_assert_eq!(a.power(2).len(), a.len() * a.len());
    }

    #[test]
    fn insert_then_remove(rest in vec(0u8..9, 0..6), x in 0u8..9, pick in 0usize..7) {
        let slot = pick % (rest.len() + 1) + 1;
        let full = insert_at(&rest, slot, x).unwrap();
        prop_assert_eq!(full.len(), rest.len() + 1);
        prop_assert_eq!(full[slot - 1], x);
        prop_assert_eq!(remove_at(&full, slot).unwrap(), rest);
    }

    #[test]
    fn rotation_round_trip(n in 1usize..7, j in 0usize..7) {
        let j = j % n + 1;
        let order = rotation_order(n, j);
        let inv = inverse_order(&order);
        let composed: Vec<usize> = (0..n).map(|k| order[inv[k] - 1]).collect();
        prop_assert_eq!(composed, (1..=n).collect::<Vec<_>>());
        prop_assert_eq!(order[0], j);
    }

    #[test]
    fn solvers_agree_and_are_optimal(w in matrix(6)) {
        let brute = brute_force_matching(&w);
        prop_assert!(is_permutation(&brute.0));
        prop_assert_eq!(w.weight_of(&brute.0), brute.1.clone());
        prop_assert_eq!(subset_matching(&w), brute.clone());
        prop_assert_eq!(hungarian_matching(&w), brute);
    }

    #[test]
    fn vcg_allocation_is_a_permutation(w in matrix(6)) {
        prop_assert!(is_permutation(&vcg_matching(&w).alloc));
    }

    #[test]
    fn clarke_payments_nonnegative_and_bounded(w in matrix(5)) {
        let res = vcg_matching(&w);
        for (j, pay) in res.pays.iter().enumerate() {
            prop_assert!(*pay >= ratio::zero());
            // Truthful utility is at least the buyer's worst weight.
            let truth = w.rows()[j].clone();
            let floor = truth.iter().cloned().min().unwrap();
            prop_assert!(buyer_utility(&truth, &res, j) >= floor);
        }
    }

    #[test]
    fn no_row_deviation_helps(w in matrix(4), j in 0usize..4, lie in vec(rational(), 4)) {
        let m = w.size();
        let j = j % m;
        let truth = w.rows()[j].clone();
        let honest = buyer_utility(&truth, &vcg_matching(&w), j);
        let deviated = w.with_row(j, lie[..m].to_vec());
        prop_assert!(honest >= buyer_utility(&truth, &vcg_matching(&deviated), j));
    }
}

/// Random table algorithm with random valuations over a small space.
fn small_scenario() -> impl Strategy<Value = Scenario> {
    (1usize..=2, 1usize..=2, 2usize..=3, 1usize..=3, 1usize..=3).prop_flat_map(|(n, m, k, no, skew)| {
        let rows = k.pow(n as u32);
        (
            vec(vec(0i64..=3, no), k),
            vec(0..no, rows),
            Just((n, m, k, no, skew)),
        )
            .prop_map(|(vals, table, (n, m, k, no, skew))| {
                let weights: Vec<i64> = (0..k as i64).map(|t| 1 + (t * (skew as i64 - 1))).collect();
                let total: i64 = weights.iter().sum();
                let prior = ExactDist::from_weighted(
                    weights.iter().enumerate().map(|(t, &w)| (AgentType(t), frac(w, total))),
                )
                .unwrap();
                Scenario::new(
                    n,
                    m,
                    (0..k).map(|t| format!("t{t}")).collect(),
                    (0..no).map(|o| format!("o{o}")).collect(),
                    prior,
                    Valuation::Shared(vals.into_iter().map(|r| r.into_iter().map(int).collect()).collect()),
                    Algorithm::Table(table.into_iter().map(Outcome).collect()),
                )
                .unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn surrogates_follow_the_prior(sc in small_scenario()) {
        let r = check_dist_preservation(&sc, &CheckConfig::exact()).unwrap();
        prop_assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn rsm_is_bic(sc in small_scenario()) {
        for b in bic_margins(&sc, PaymentRule::Clarke, &CheckConfig::exact()).unwrap() {
            prop_assert!(b.margin() >= ratio::zero(), "agent {} type {:?} bid {:?}", b.agent, b.truth, b.bid);
            if b.truth == b.bid {
                prop_assert_eq!(b.margin(), ratio::zero());
            }
        }
    }

    #[test]
    fn rotation_is_undone_by_its_inverse(sc in small_scenario(), j in 1usize..3) {
        let j = (j - 1) % sc.n + 1;
        let rotated = sc.rotate_to_front(j).unwrap();
        let back = rotated.permute_agents(&inverse_order(&rotation_order(sc.n, j))).unwrap();
        prop_assert_eq!(back, sc);
    }
}
