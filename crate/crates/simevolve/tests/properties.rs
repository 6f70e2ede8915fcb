//! Randomised invariants over the core data structures.

use proptest::collection::vec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use simevolve::cluster::Partition;
use simevolve::data::Dataset;
use simevolve::expr::{random_tree, ExprTree, GrowMethod, Individual};
use simevolve::fitness::{d_inv, D_INV_CAP};
use simevolve::metrics::ari;

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (2usize..20, 1usize..5).prop_flat_map(|(n, m)| {
        vec(vec(-100.0f64..100.0, m..=m), n..=n)
            .prop_map(|rows| Dataset::from_rows(rows, None).unwrap())
    })
}

proptest! {
    #[test]
    fn scaling_is_idempotent_and_bounded(ds in dataset_strategy()) {
        let scaled = ds.scale_unit();
        for i in 0..scaled.n() {
            for &v in scaled.row(i) {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
        prop_assert_eq!(scaled.scale_unit(), scaled);
    }

    #[test]
    fn euclidean_is_symmetric_and_zero_on_self(ds in dataset_strategy()) {
        for a in 0..ds.n() {
            prop_assert_eq!(ds.euclidean(a, a), 0.0);
            for b in 0..ds.n() {
                prop_assert_eq!(ds.euclidean(a, b), ds.euclidean(b, a));
            }
        }
    }

    #[test]
    fn expression_serialization_roundtrips(seed in any::<u64>(), m in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grow = random_tree(&mut rng, m, (2, 6), GrowMethod::Grow);
        let full = random_tree(&mut rng, m, (4, 4), GrowMethod::Full);
        for tree in [grow, full] {
            let text = tree.serialize();
            let parsed = ExprTree::parse(&text).unwrap();
            prop_assert_eq!(parsed.serialize(), text);
        }
    }

    #[test]
    fn model_string_roundtrips(seed in any::<u64>(), t in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..t).map(|_| random_tree(&mut rng, 3, (2, 5), GrowMethod::Grow)).collect();
        let ind = Individual::new(trees);
        let text = ind.to_model_string();
        let back = Individual::from_model_string(&text).unwrap();
        prop_assert_eq!(back.to_model_string(), text);
    }

    #[test]
    fn simplified_trees_evaluate_identically(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, 2, (2, 6), GrowMethod::Grow);
        let ds = Dataset::from_rows(vec![vec![0.3, 0.9], vec![0.7, 0.1]], None).unwrap();
        let simplified = tree.simplify();
        let (a, b) = (tree.eval(&ds, 0, 1), simplified.eval(&ds, 0, 1));
        prop_assert!(a == b || (a.is_nan() && b.is_nan()), "{a} vs {b}");
        prop_assert!(simplified.node_count() <= tree.node_count());
    }

    #[test]
    fn ari_is_relabel_invariant(labels_a in vec(0usize..5, 3..40), shift in 1usize..7) {
        let n = labels_a.len();
        let labels_b: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let p = Partition::from_labels(&labels_a);
        let relabeled: Vec<usize> = labels_a.iter().map(|&c| (c * 31 + shift) % 97).collect();
        let q = Partition::from_labels(&relabeled);
        let gold = Partition::from_labels(&labels_b);
        prop_assert_eq!(ari(&p, &gold).unwrap(), ari(&q, &gold).unwrap());
    }

    #[test]
    fn partition_csv_roundtrips(labels in vec(0usize..6, 1..50)) {
        let p = Partition::from_labels(&labels);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = Partition::parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn d_inv_is_positive_and_capped(d in 0.0f64..1e6) {
        let v = d_inv(d);
        prop_assert!(v > 0.0 && v <= D_INV_CAP);
    }
}
