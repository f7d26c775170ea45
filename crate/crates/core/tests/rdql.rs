mod common;

use common::*;
use medquery_core::rdql::{evaluate, evaluate_with_stats, parse_rdql};
use medquery_core::triple_store::TripleStore;
use proptest::prelude::*;
use rand::seq::SliceRandom;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pattern_order_does_not_matter(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let store: TripleStore = random_store(&mut rng, 150).into_iter().collect();
        let q = parse_rdql(&random_rdql(&mut rng, &store)).unwrap();
        let expected = evaluate(&q, &store);
        let mut permuted = q.clone();
        permuted.patterns.shuffle(&mut rng);
        prop_assert_eq!(evaluate(&permuted, &store), expected);
    }

    #[test]
    fn adding_triples_never_removes_rows(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let triples = random_store(&mut rng, 150);
        let extra = random_store(&mut rng, 20);
        let small: TripleStore = triples.iter().cloned().collect();
        let large: TripleStore = triples.into_iter().chain(extra).collect();
        let q = parse_rdql(&random_rdql(&mut rng, &small)).unwrap();
        let before = evaluate(&q, &small).rows;
        let mut after = evaluate(&q, &large).rows;
        for row in before {
            let at = after.iter().position(|r| *r == row);
            prop_assert!(at.is_some(), "lost {:?}", row);
            after.remove(at.unwrap());
        }
    }

    #[test]
    fn printed_queries_parse_back(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let store: TripleStore = random_store(&mut rng, 50).into_iter().collect();
        let q = parse_rdql(&random_rdql(&mut rng, &store)).unwrap();
        prop_assert_eq!(parse_rdql(&q.to_string()).unwrap(), q);
    }

    #[test]
    fn small_cases_match_enumeration(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let store: TripleStore = random_store(&mut rng, 40).into_iter().collect();
        let q = parse_rdql(&random_rdql(&mut rng, &store)).unwrap();
        let (got, stats) = evaluate_with_stats(&q, &store);
        prop_assert_eq!(got.rows.clone(), canonical(enumeration_oracle(&q, &store)));
        prop_assert!(stats.solutions >= got.rows.len());
    }
}
