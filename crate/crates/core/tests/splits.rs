use std::collections::BTreeSet;

use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig, Strategy};
use subtyper_core::data::{batches, carve_validation, make_folds, make_split};
use subtyper_core::preprocess::Subtype;
use subtyper_core::Rng;

fn labels_from_counts(counts: &[usize]) -> Vec<Subtype> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat(Subtype::ALL[c]).take(n))
        .collect()
}

fn shuffled(counts: &[usize], seed: u64) -> Vec<Subtype> {
    let mut l = labels_from_counts(counts);
    Rng::new(seed).shuffle(&mut l);
    l
}

fn class_count(labels: &[Subtype], idx: &[usize], c: Subtype) -> usize {
    idx.iter().filter(|&&i| labels[i] == c).count()
}

fn counts_strategy() -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(3usize..60, 4)
}

#[test]
fn cohort_sized_folds() {
    let labels = shuffled(&[147, 67, 434, 189], 3);
    assert_eq!(labels.len(), 837);
    let plan = make_folds(&labels, 10, 5).unwrap();
    let sizes = plan.fold_sizes();
    assert!(sizes.iter().all(|&s| s == 83 || s == 84), "{sizes:?}");
    assert_eq!(sizes.iter().sum::<usize>(), 837);
    assert_eq!(sizes.iter().filter(|&&s| s == 84).count(), 7);
}

#[test]
fn split_is_seed_deterministic() {
    let labels = shuffled(&[30, 12, 50, 20], 1);
    assert_eq!(make_split(&labels, 0.1, 0.1, 9).unwrap(), make_split(&labels, 0.1, 0.1, 9).unwrap());
    assert_ne!(make_split(&labels, 0.1, 0.1, 9).unwrap(), make_split(&labels, 0.1, 0.1, 10).unwrap());
}

#[test]
fn one_class_is_rejected() {
    assert!(make_split(&[Subtype::LumA; 40], 0.1, 0.1, 0).is_err());
    assert!(make_split(&labels_from_counts(&[10, 2, 10, 10]), 0.1, 0.1, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_partitions_and_stratifies(counts in counts_strategy(), seed in 0u64..10_000) {
        let labels = shuffled(&counts, seed);
        let n = labels.len();
        let plan = make_split(&labels, 0.1, 0.1, seed).unwrap();
        let mut all: Vec<usize> = plan.train.iter().chain(&plan.val).chain(&plan.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let n_test = (n as f64 * 0.1).round() as usize;
        prop_assert_eq!(plan.test.len(), n_test);
        prop_assert_eq!(plan.val.len(), ((n - n_test) as f64 * 0.1).round() as usize);
        for part in [&plan.train, &plan.val, &plan.test] {
            if part.is_empty() {
                continue;
            }
            let p = part.len() as f64;
            for c in Subtype::ALL {
                let dev = (class_count(&labels, part, c) as f64 / p - counts[c.index()] as f64 / n as f64).abs();
                prop_assert!(dev <= 1.0 / p + 1e-12, "class {c} deviates by {dev}");
            }
        }
    }

    #[test]
    fn folds_partition_and_balance(counts in counts_strategy(), k in 2usize..11, seed in 0u64..10_000) {
        let labels = shuffled(&counts, seed);
        let n = labels.len();
        let plan = make_folds(&labels, k, seed).unwrap();
        let mut seen = BTreeSet::new();
        for f in 0..k {
            for i in plan.test_indices(f) {
                prop_assert!(seen.insert(i));
            }
            let rest: BTreeSet<usize> = plan.rest_indices(f).into_iter().collect();
            prop_assert_eq!(rest.len() + plan.test_indices(f).len(), n);
        }
        prop_assert_eq!(seen.len(), n);
        let sizes = plan.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for c in Subtype::ALL {
            let per: Vec<usize> = (0..k).map(|f| class_count(&labels, &plan.test_indices(f), c)).collect();
            prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1, "{c}: {per:?}");
        }
    }

    #[test]
    fn validation_carve_is_a_partition(counts in counts_strategy(), seed in 0u64..10_000) {
        let labels = shuffled(&counts, seed);
        let pool: Vec<usize> = (0..labels.len()).filter(|i| i % 3 != 0).collect();
        let (train, val) = carve_validation(&labels, &pool, 0.1, seed).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, pool.clone());
        prop_assert_eq!(val.len(), (pool.len() as f64 * 0.1).round() as usize);
    }

    #[test]
    fn batches_cover_without_singletons(n in 2usize..200, size in 2usize..40, seed in 0u64..1000) {
        let idx: Vec<usize> = (0..n).collect();
        let b = batches(&idx, size, &mut Rng::new(seed)).unwrap();
        let mut all: Vec<usize> = b.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, idx);
        prop_assert!(b.iter().all(|x| x.len() >= 2));
        prop_assert!(b.iter().all(|x| x.len() <= size + 1));
    }
}
