//! Randomized invariant checks for the library's algebra, metrics, and
//! scheme verification.

use proptest::prelude::*;

use pliable_shuffle::codec::{encode, verify_scheme, CodingScheme};
use pliable_shuffle::gf::{in_span, Field, GfMatrix};
use pliable_shuffle::model::{hamming, CacheState, PicInstance};
use pliable_shuffle::solvers::{chain_lower_bound, expected_patterns};

fn gf_matrix() -> impl Strategy<Value = GfMatrix> {
    prop::sample::select(vec![2u32, 3, 5, 7])
        .prop_flat_map(|q| {
            (1usize..5, 1usize..5).prop_flat_map(move |(r, c)| {
                prop::collection::vec(prop::collection::vec(0..q, c), r)
                    .prop_map(move |rows| (q, rows))
            })
        })
        .prop_map(|(q, rows)| GfMatrix::from_rows(Field::new(q).unwrap(), &rows).unwrap())
}

fn instance() -> impl Strategy<Value = PicInstance> {
    (2usize..6, 1usize..4)
        .prop_flat_map(|(m, c)| {
            let requests = prop::collection::vec(
                prop::collection::vec(0..m, 1..=m).prop_map(|mut v| {
                    v.sort_unstable();
                    v.dedup();
                    v
                }),
                1..5,
            );
            (Just(m), Just(c), requests)
        })
        .prop_map(|(m, c, requests)| PicInstance::new(m, c, requests).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_bounded_and_stable_under_row_swap(a in gf_matrix()) {
        let r = a.rank();
        prop_assert!(r <= a.rows().min(a.cols()));
        if a.rows() >= 2 {
            let mut rows: Vec<Vec<u32>> = (0..a.rows()).map(|i| a.row_slice(i).to_vec()).collect();
            rows.swap(0, a.rows() - 1);
            let b = GfMatrix::from_rows(a.field(), &rows).unwrap();
            prop_assert_eq!(b.rank(), r);
        }
    }

    #[test]
    fn rank_stable_under_row_scaling(a in gf_matrix(), scale in 1u32..7) {
        let f = a.field();
        let q = f.modulus();
        let s = 1 + scale % (q - 1);
        let mut rows: Vec<Vec<u32>> = (0..a.rows()).map(|i| a.row_slice(i).to_vec()).collect();
        for v in &mut rows[0] {
            *v = f.mul(*v, s);
        }
        let b = GfMatrix::from_rows(f, &rows).unwrap();
        prop_assert_eq!(b.rank(), a.rank());
    }

    #[test]
    fn rank_stable_under_row_addition(a in gf_matrix()) {
        if a.rows() >= 2 {
            let f = a.field();
            let mut rows: Vec<Vec<u32>> = (0..a.rows()).map(|i| a.row_slice(i).to_vec()).collect();
            let last = rows[a.rows() - 1].clone();
            for (v, &w) in rows[0].iter_mut().zip(&last) {
                *v = f.add(*v, w);
            }
            let b = GfMatrix::from_rows(f, &rows).unwrap();
            prop_assert_eq!(b.rank(), a.rank());
        }
    }

    #[test]
    fn in_span_matches_rank_probe(a in gf_matrix(), pick in 0usize..4) {
        let col = pick % a.cols();
        let v = a.column(col);
        let others: Vec<usize> = (0..a.cols()).filter(|&c| c != col).collect();
        let sub_rows: Vec<Vec<u32>> = (0..a.rows())
            .map(|r| others.iter().map(|&c| a.get(r, c)).collect())
            .collect();
        let sub = GfMatrix::from_rows(a.field(), &sub_rows).unwrap();
        let inside = in_span(&v, &sub).unwrap();
        // v lies in the span of the other columns iff appending it keeps rank.
        let full_rows: Vec<Vec<u32>> = (0..a.rows())
            .map(|r| {
                let mut row: Vec<u32> = others.iter().map(|&c| a.get(r, c)).collect();
                row.push(v[r]);
                row
            })
            .collect();
        let full = GfMatrix::from_rows(a.field(), &full_rows).unwrap();
        prop_assert_eq!(inside, full.rank() == sub.rank());
    }

    #[test]
    fn encode_is_linear(a in gf_matrix(), seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let f = a.field();
        let q = f.modulus();
        let scheme = CodingScheme::new(a);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let b1: Vec<u32> = (0..scheme.m()).map(|_| rng.gen_range(0..q)).collect();
        let b2: Vec<u32> = (0..scheme.m()).map(|_| rng.gen_range(0..q)).collect();
        let sum: Vec<u32> = b1.iter().zip(&b2).map(|(&x, &y)| f.add(x, y)).collect();
        let e1 = encode(&scheme, &b1).unwrap();
        let e2 = encode(&scheme, &b2).unwrap();
        let es = encode(&scheme, &sum).unwrap();
        let expect: Vec<u32> = e1.iter().zip(&e2).map(|(&x, &y)| f.add(x, y)).collect();
        prop_assert_eq!(es, expect);
    }

    #[test]
    fn hamming_is_a_metric(m in 1usize..20, xs in prop::collection::vec(any::<bool>(), 60)) {
        let take = |o: usize| {
            CacheState::from_bits(xs.iter().cycle().skip(o).take(m).copied().collect())
        };
        let (a, b, c) = (take(0), take(7), take(19));
        prop_assert_eq!(hamming(&a, &a).unwrap(), 0);
        prop_assert_eq!(hamming(&a, &b).unwrap(), hamming(&b, &a).unwrap());
        prop_assert!(
            hamming(&a, &c).unwrap() <= hamming(&a, &b).unwrap() + hamming(&b, &c).unwrap()
        );
    }

    #[test]
    fn satisfaction_is_monotone_in_c(inst in instance()) {
        if let Ok(sol) = pliable_shuffle::solvers::rand_trans(&inst, 0) {
            let relaxed = inst.with_c(inst.c() + 1).unwrap();
            let outcome = verify_scheme(&sol.scheme, &relaxed).unwrap();
            prop_assert!(outcome.is_satisfied());
        }
    }

    #[test]
    fn chain_bound_never_exceeds_heuristic(inst in instance()) {
        if let Ok(sol) = pliable_shuffle::solvers::rand_trans(&inst, 1) {
            prop_assert!(chain_lower_bound(&inst) <= sol.length());
        }
    }

    #[test]
    fn instance_json_round_trip(inst in instance()) {
        let back = PicInstance::from_json(&inst.to_json()).unwrap();
        prop_assert_eq!(back.m(), inst.m());
        prop_assert_eq!(back.c(), inst.c());
        prop_assert_eq!(back.requests(), inst.requests());
    }

    #[test]
    fn expected_patterns_increase_with_p_at_k1(m in 2usize..30, n in 2usize..30) {
        // At k = 1 the (1-p) collision correction vanishes, so denser random
        // graphs can only gain single-star patterns.
        let lo = expected_patterns(m, n, 0.3, 1, 1).unwrap();
        let hi = expected_patterns(m, n, 0.7, 1, 1).unwrap();
        prop_assert!(hi >= lo);
    }
}
