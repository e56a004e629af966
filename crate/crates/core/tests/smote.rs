use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};
use subtyper_core::preprocess::{balance_classes, nearest_neighbors, smote_traced};
use subtyper_core::{Matrix, Rng};

fn random_matrix(n: usize, d: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(n, d, (0..n * d).map(|_| rng.normal()).collect()).unwrap()
}

/// Sort every other row by (squared distance, index) and keep the first k.
fn brute_force_knn(x: &Matrix, k: usize) -> Vec<Vec<usize>> {
    (0..x.rows())
        .map(|i| {
            let mut all: Vec<(f64, usize)> = (0..x.rows())
                .filter(|&j| j != i)
                .map(|j| {
                    let d: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b).powi(2)).sum();
                    (d, j)
                })
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            all.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn check_against_oracle(n: usize, d: usize, seed: u64) {
    let mut rng = Rng::new(seed);
    let x = random_matrix(n, d, &mut rng);
    let oracle = brute_force_knn(&x, 5);
    assert_eq!(nearest_neighbors(&x, 5), oracle);

    let (synth, origins) = smote_traced(&x, 3 * n, 5, &mut rng).unwrap();
    for (s, o) in origins.iter().enumerate() {
        assert_eq!(o.base, s % n, "round-robin base");
        assert!(oracle[o.base].contains(&o.neighbor), "neighbor outside oracle k-NN");
        assert!((0.0..1.0).contains(&o.lambda));
        let (b, nb, p) = (x.row(o.base), x.row(o.neighbor), synth.row(s));
        for j in 0..d {
            let (lo, hi) = (b[j].min(nb[j]), b[j].max(nb[j]));
            assert!(p[j] >= lo && p[j] <= hi, "outside bounding box");
        }
        assert!(distance(p, b) <= distance(b, nb) + 1e-12);
    }
}

#[test]
fn neighbors_match_brute_force_on_fifty_samples() {
    check_against_oracle(50, 6, 1);
}

#[test]
fn neighbors_match_brute_force_on_hundred_samples() {
    for seed in 0..3 {
        check_against_oracle(100, 10, seed);
    }
}

#[test]
fn ties_prefer_lower_index() {
    // Points on a line at equal spacing: row 2's neighbours at distance 1 are
    // rows 1 and 3.
    let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0]]).unwrap();
    assert_eq!(nearest_neighbors(&x, 2)[2], vec![1, 3]);
    assert_eq!(nearest_neighbors(&x, 3)[2], vec![1, 3, 0]);
    assert_eq!(nearest_neighbors(&x, 3), brute_force_knn(&x, 3));
}

#[test]
fn ten_and_five_become_ten_and_ten() {
    let mut rng = Rng::new(4);
    let x = random_matrix(15, 3, &mut rng);
    let labels: Vec<usize> = (0..15).map(|i| usize::from(i >= 10)).collect();
    let (xb, yb) = balance_classes(&x, &labels, 3, &mut rng).unwrap();
    assert_eq!(xb.rows(), 20);
    assert_eq!(yb.iter().filter(|&&c| c == 0).count(), 10);
    assert_eq!(yb.iter().filter(|&&c| c == 1).count(), 10);
    assert!(yb[15..].iter().all(|&c| c == 1));
    assert_eq!(xb.select_rows(&(0..15).collect::<Vec<_>>()), x);

    // Every synthetic row lies on a segment between two minority rows that
    // are 3-NN of each other.
    let minority = x.select_rows(&(10..15).collect::<Vec<_>>());
    let oracle = brute_force_knn(&minority, 3);
    for s in 15..20 {
        let p = xb.row(s);
        let ok = (0..5).any(|b| {
            oracle[b].iter().any(|&nb| {
                let (xb_, xn) = (minority.row(b), minority.row(nb));
                let span = distance(xb_, xn);
                (distance(p, xb_) + distance(p, xn) - span).abs() < 1e-9
            })
        });
        assert!(ok, "synthetic row {s} is not on a neighbour segment");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn balanced_counts_and_originals_kept(counts in proptest::collection::vec(2usize..20, 2..5), seed in 0u64..1000) {
        let mut rng = Rng::new(seed);
        let n: usize = counts.iter().sum();
        let x = random_matrix(n, 3, &mut rng);
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &m)| std::iter::repeat(c).take(m)).collect();
        let (xb, yb) = balance_classes(&x, &labels, 5, &mut rng).unwrap();
        let max = *counts.iter().max().unwrap();
        for c in 0..counts.len() {
            prop_assert_eq!(yb.iter().filter(|&&l| l == c).count(), max);
        }
        prop_assert_eq!(&yb[..n], &labels[..]);
        prop_assert!(xb.as_slice()[..n * 3] == *x.as_slice());
    }
}
