//! Stratified hold-out splits, stratified k-fold assignment, and minibatching.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{Subtype, NUM_CLASSES};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold index of every sample.
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.indices(|f| f == fold)
    }

    pub fn rest_indices(&self, fold: usize) -> Vec<usize> {
        self.indices(|f| f != fold)
    }

    fn indices(&self, pred: impl Fn(usize) -> bool) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| pred(f))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.assignments {
            s[f] += 1;
        }
        s
    }
}

fn check_fraction(name: &str, f: f64) -> Result<()> {
    if !(0.0..1.0).contains(&f) {
        return Err(Error::Split(format!("{name} {f} outside [0, 1)")));
    }
    Ok(())
}

fn members_by_class(labels: &[Subtype], pool: &[usize]) -> [Vec<usize>; NUM_CLASSES] {
    let mut m: [Vec<usize>; NUM_CLASSES] = Default::default();
    for &i in pool {
        m[labels[i].index()].push(i);
    }
    m
}

/// Integer per-class, per-partition counts whose row sums are the class sizes,
/// whose column sums are the partition sizes, and where every cell is the floor
/// or ceiling of its proportional quota `class · part / total`.
///
/// The floors are fixed first; the remaining units are a bipartite
/// b-matching between classes and partitions over cells with a fractional
/// quota, solved by augmenting paths.
fn apportion(class_sizes: &[usize], part_sizes: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = class_sizes.iter().sum();
    let (nc, np) = (class_sizes.len(), part_sizes.len());
    let mut counts = vec![vec![0usize; np]; nc];
    if total == 0 {
        return counts;
    }
    let mut eligible = vec![vec![false; np]; nc];
    for c in 0..nc {
        for p in 0..np {
            let num = class_sizes[c] * part_sizes[p];
            counts[c][p] = num / total;
            eligible[c][p] = num % total != 0;
        }
    }
    let mut class_need: Vec<usize> = (0..nc)
        .map(|c| class_sizes[c] - counts[c].iter().sum::<usize>())
        .collect();
    let mut part_need: Vec<usize> = (0..np)
        .map(|p| part_sizes[p] - (0..nc).map(|c| counts[c][p]).sum::<usize>())
        .collect();
    let mut extra = vec![vec![false; np]; nc];

    // Depth-first search for an augmenting path from class `c` to a partition
    // with spare demand, re-routing existing extras where needed.
    fn augment(
        c: usize,
        eligible: &[Vec<bool>],
        extra: &mut [Vec<bool>],
        part_need: &mut [usize],
        seen: &mut [bool],
    ) -> bool {
        let np = part_need.len();
        for p in 0..np {
            if !eligible[c][p] || extra[c][p] || seen[p] {
                continue;
            }
            seen[p] = true;
            if part_need[p] > 0 {
                part_need[p] -= 1;
                extra[c][p] = true;
                return true;
            }
            for other in 0..extra.len() {
                if extra[other][p] {
                    extra[other][p] = false;
                    if augment(other, eligible, extra, part_need, seen) {
                        extra[c][p] = true;
                        return true;
                    }
                    extra[other][p] = true;
                }
            }
        }
        false
    }

    for c in 0..nc {
        while class_need[c] > 0 {
            let mut seen = vec![false; np];
            if !augment(c, &eligible, &mut extra, &mut part_need, &mut seen) {
                break;
            }
            class_need[c] -= 1;
        }
    }
    for c in 0..nc {
        for p in 0..np {
            if extra[c][p] {
                counts[c][p] += 1;
            }
        }
    }
    debug_assert!(class_need.iter().all(|&n| n == 0));
    counts
}

/// Splits `pool` into partitions of the given sizes, per-class proportional.
fn stratified_partition(labels: &[Subtype], pool: &[usize], sizes: &[usize], rng: &mut Rng) -> Vec<Vec<usize>> {
    let members = members_by_class(labels, pool);
    let class_sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let counts = apportion(&class_sizes, sizes);
    let mut parts = vec![Vec::new(); sizes.len()];
    for (c, idx) in members.into_iter().enumerate() {
        let mut idx = idx;
        rng.shuffle(&mut idx);
        let mut it = idx.into_iter();
        for (p, part) in parts.iter_mut().enumerate() {
            part.extend(it.by_ref().take(counts[c][p]));
        }
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    parts
}

/// Stratified train/validation/test split over all samples: `test_frac` of
/// the samples are held out for test, then `val_frac_of_train` of the rest
/// for validation.
pub fn make_split(labels: &[Subtype], test_frac: f64, val_frac_of_train: f64, seed: u64) -> Result<SplitPlan> {
    check_fraction("test fraction", test_frac)?;
    check_fraction("validation fraction", val_frac_of_train)?;
    let pool: Vec<usize> = (0..labels.len()).collect();
    let members = members_by_class(labels, &pool);
    let present = members.iter().filter(|m| !m.is_empty()).count();
    if present < 2 {
        return Err(Error::Split(format!(
            "need at least 2 classes to split, found {present}"
        )));
    }
    for (c, m) in members.iter().enumerate() {
        if !m.is_empty() && m.len() < 3 {
            return Err(Error::Split(format!(
                "class {} has {} samples; at least 3 are needed",
                Subtype::ALL[c],
                m.len()
            )));
        }
    }
    let n = labels.len();
    let n_test = (n as f64 * test_frac).round() as usize;
    let n_val = ((n - n_test) as f64 * val_frac_of_train).round() as usize;
    let n_train = n - n_test - n_val;
    let mut rng = Rng::new(seed);
    let mut parts = stratified_partition(labels, &pool, &[n_train, n_val, n_test], &mut rng);
    let test = parts.pop().unwrap_or_default();
    let val = parts.pop().unwrap_or_default();
    let train = parts.pop().unwrap_or_default();
    Ok(SplitPlan {
        train,
        val,
        test,
        seed,
    })
}

/// Stratified `(train, validation)` split of `pool`.
pub fn carve_validation(labels: &[Subtype], pool: &[usize], val_frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    check_fraction("validation fraction", val_frac)?;
    let n_val = (pool.len() as f64 * val_frac).round() as usize;
    let mut rng = Rng::new(seed);
    let mut parts = stratified_partition(labels, pool, &[pool.len() - n_val, n_val], &mut rng);
    let val = parts.pop().unwrap_or_default();
    let train = parts.pop().unwrap_or_default();
    Ok((train, val))
}

/// Stratified k-fold assignment: each class is shuffled, then dealt
/// round-robin, the dealing position carrying over from one class to the next.
pub fn make_folds(labels: &[Subtype], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Split(format!("cross-validation needs k >= 2, got {k}")));
    }
    if labels.len() < k {
        return Err(Error::Split(format!(
            "{} samples cannot fill {k} folds",
            labels.len()
        )));
    }
    let pool: Vec<usize> = (0..labels.len()).collect();
    let mut rng = Rng::new(seed);
    let mut assignments = vec![0; labels.len()];
    let mut next = 0;
    for (c, mut idx) in members_by_class(labels, &pool).into_iter().enumerate() {
        if !idx.is_empty() && idx.len() < k {
            log::warn!(
                "class {} has {} samples for {k} folds; some folds will not contain it",
                Subtype::ALL[c],
                idx.len()
            );
        }
        rng.shuffle(&mut idx);
        for i in idx {
            assignments[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}

/// Shuffled minibatches. A trailing single-row batch is merged into the
/// previous one so batch-norm never sees a batch of one.
pub fn batches(idx: &[usize], batch_size: usize, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    if batch_size < 2 {
        return Err(Error::Param(format!("batch size must be at least 2, got {batch_size}")));
    }
    let mut order = idx.to_vec();
    rng.shuffle(&mut order);
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if out.len() >= 2 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().unwrap_or_default();
        if let Some(prev) = out.last_mut() {
            prev.extend(last);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_from_counts(counts: &[usize]) -> Vec<Subtype> {
        counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat(Subtype::ALL[c]).take(n))
            .collect()
    }

    #[test]
    fn hundred_balanced_samples() {
        let labels = labels_from_counts(&[25, 25, 25, 25]);
        let s = make_split(&labels, 0.1, 0.1, 3).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (81, 9, 10));
        for part in [&s.train, &s.val, &s.test] {
            let mut c = [0usize; 4];
            for &i in part.iter() {
                c[labels[i].index()] += 1;
            }
            let lo = *c.iter().min().unwrap();
            let hi = *c.iter().max().unwrap();
            assert!(hi - lo <= 1, "{c:?}");
        }
        assert_eq!(make_split(&labels, 0.1, 0.1, 3).unwrap(), s);
    }

    #[test]
    fn split_errors() {
        let one_class = labels_from_counts(&[40]);
        assert!(matches!(make_split(&one_class, 0.1, 0.1, 0), Err(Error::Split(_))));
        let tiny = labels_from_counts(&[10, 2]);
        assert!(matches!(make_split(&tiny, 0.1, 0.1, 0), Err(Error::Split(_))));
        let ok = labels_from_counts(&[10, 10]);
        assert!(make_split(&ok, 1.0, 0.1, 0).is_err());
    }

    #[test]
    fn apportion_hits_margins() {
        let c = apportion(&[147, 67, 434, 194], &[681, 76, 85]);
        for (row, &n) in c.iter().zip(&[147, 67, 434, 194]) {
            assert_eq!(row.iter().sum::<usize>(), n);
        }
        for (p, &s) in [681, 76, 85].iter().enumerate() {
            assert_eq!(c.iter().map(|r| r[p]).sum::<usize>(), s);
        }
    }

    #[test]
    fn folds_one_per_class() {
        let labels = labels_from_counts(&[10, 10, 10, 10]);
        let f = make_folds(&labels, 10, 1).unwrap();
        for fold in 0..10 {
            let mut c = [0usize; 4];
            for i in f.test_indices(fold) {
                c[labels[i].index()] += 1;
            }
            assert_eq!(c, [1, 1, 1, 1]);
        }
    }

    #[test]
    fn fold_sizes_for_837() {
        let labels = labels_from_counts(&[142, 67, 434, 194]);
        assert_eq!(labels.len(), 837);
        let f = make_folds(&labels, 10, 5).unwrap();
        let sizes = f.fold_sizes();
        assert!(sizes.iter().all(|&s| s == 83 || s == 84), "{sizes:?}");
        assert_eq!(sizes.iter().filter(|&&s| s == 84).count(), 7);
        assert!(make_folds(&labels, 1, 5).is_err());
    }

    #[test]
    fn batching_rules() {
        let mut rng = Rng::new(0);
        let idx: Vec<usize> = (0..64).collect();
        let b = batches(&idx, 32, &mut rng).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), [32, 32]);

        let idx: Vec<usize> = (0..33).collect();
        let b = batches(&idx, 32, &mut rng).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), [33]);

        let idx: Vec<usize> = (0..70).collect();
        let b = batches(&idx, 32, &mut rng).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), [32, 32, 6]);

        let a = batches(&idx, 32, &mut Rng::new(9)).unwrap();
        let c = batches(&idx, 32, &mut Rng::new(9)).unwrap();
        assert_eq!(a, c);
        assert!(batches(&idx, 1, &mut rng).is_err());
    }
}
