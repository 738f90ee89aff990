use proptest::prelude::*;
use rtfqi::regression::{Dataset, ExtraTreesForest, ExtraTreesParams};

fn params(tree_count: usize, min_leaf_size: usize, seed: u64) -> ExtraTreesParams {
    ExtraTreesParams {
        tree_count,
        split_candidates: None,
        min_leaf_size,
        seed,
    }
}

fn dataset(rows: &[(f64, f64, f64)]) -> Dataset {
    Dataset::new(
        rows.iter().map(|&(a, b, _)| vec![a, b]).collect(),
        rows.iter().map(|&(_, _, y)| y).collect(),
    )
    .unwrap()
}

fn rows() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -100.0..100.0f64), 1..60)
}

fn probes() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn predictions_stay_in_target_range(
        rows in rows(),
        probes in probes(),
        min_leaf in 1usize..6,
        seed in any::<u64>(),
    ) {
        let data = dataset(&rows);
        let (lo, hi) = data.target_range();
        let forest = ExtraTreesForest::fit(&data, &params(5, min_leaf, seed)).unwrap();
        for (a, b) in probes {
            let y = forest.predict(&[a, b]).unwrap();
            prop_assert!(lo <= y && y <= hi, "{y} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn row_order_does_not_matter(
        rows in rows(),
        probes in probes(),
        seed in any::<u64>(),
        rotate in 0usize..60,
    ) {
        let mut shuffled = rows.clone();
        shuffled.reverse();
        let k = rotate % shuffled.len();
        shuffled.rotate_left(k);
        let p = params(4, 2, seed);
        let a = ExtraTreesForest::fit(&dataset(&rows), &p).unwrap();
        let b = ExtraTreesForest::fit(&dataset(&shuffled), &p).unwrap();
        prop_assert_eq!(&a, &b);
        for (x0, x1) in probes {
            prop_assert_eq!(a.predict(&[x0, x1]).unwrap().to_bits(), b.predict(&[x0, x1]).unwrap().to_bits());
        }
    }

    #[test]
    fn distinct_inputs_are_memorized(
        xs in prop::collection::btree_set(-1000i32..1000, 1..50),
        seed in any::<u64>(),
    ) {
        let rows: Vec<(f64, f64, f64)> = xs
            .iter()
            .map(|&x| (x as f64 * 0.01, 0.0, (x as f64).sin() * 10.0))
            .collect();
        let forest = ExtraTreesForest::fit(&dataset(&rows), &params(3, 1, seed)).unwrap();
        for &(a, b, y) in &rows {
            prop_assert_eq!(forest.predict(&[a, b]).unwrap(), y);
        }
    }

    #[test]
    fn constant_targets_collapse(
        rows in rows(),
        value in -50.0..50.0f64,
        seed in any::<u64>(),
    ) {
        let rows: Vec<_> = rows.into_iter().map(|(a, b, _)| (a, b, value)).collect();
        let forest = ExtraTreesForest::fit(&dataset(&rows), &params(4, 1, seed)).unwrap();
        for tree in forest.trees() {
            prop_assert_eq!(tree.node_count(), 1);
        }
        prop_assert_eq!(forest.predict(&[0.3, -0.7]).unwrap(), value);
    }
}

fn fit_with_threads(threads: usize, data: &Dataset, p: &ExtraTreesParams) -> ExtraTreesForest {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| ExtraTreesForest::fit(data, p).unwrap())
}

#[test]
fn worker_count_does_not_change_the_forest() {
    let rows: Vec<(f64, f64, f64)> = (0..400)
        .map(|i| {
            let x = i as f64 * 0.37 % 7.0;
            let z = (i * 13 % 17) as f64;
            (x, z, x.sin() * z + 0.1 * i as f64)
        })
        .collect();
    let data = dataset(&rows);
    let p = params(12, 2, 2024);
    let one = fit_with_threads(1, &data, &p);
    for threads in [2, 4] {
        let many = fit_with_threads(threads, &data, &p);
        assert_eq!(one.to_json().unwrap(), many.to_json().unwrap());
    }
}
