use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A scalar loss and its gradient with respect to the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grad: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Mean squared error over every entry.
    Mse,
    /// Softmax cross-entropy on logits against one-hot targets, averaged over rows.
    SoftmaxCrossEntropy,
}

impl Loss {
    pub fn evaluate(self, pred: &Matrix, target: &Matrix) -> Result<LossValue> {
        match self {
            Loss::Mse => mse_loss(pred, target),
            Loss::SoftmaxCrossEntropy => softmax_xent(pred, target),
        }
    }
}

pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<LossValue> {
    let diff = pred.sub(target)?;
    let count = diff.as_slice().len().max(1) as f64;
    let value = diff.as_slice().iter().map(|d| d * d).sum::<f64>() / count;
    Ok(LossValue {
        value,
        grad: diff.scale(2.0 / count),
    })
}

/// Row-wise softmax with the max subtracted first.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

pub fn softmax_xent(logits: &Matrix, onehot: &Matrix) -> Result<LossValue> {
    if logits.shape() != onehot.shape() {
        return Err(Error::Shape {
            op: "softmax_xent",
            left: logits.shape(),
            right: onehot.shape(),
        });
    }
    for (i, row) in onehot.row_iter().enumerate() {
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::Label(format!("row {i} is not a one-hot vector: {row:?}")));
        }
    }
    let n = logits.rows().max(1) as f64;
    let mut value = 0.0;
    for (z, y) in logits.row_iter().zip(onehot.row_iter()) {
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for (zc, yc) in z.iter().zip(y) {
            if *yc != 0.0 {
                value += yc * (lse - zc);
            }
        }
    }
    let probs = softmax_rows(logits);
    let grad = probs.sub(onehot)?.scale(1.0 / n);
    Ok(LossValue {
        value: value / n,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random(rng: &mut Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.normal()).collect()).unwrap()
    }

    fn onehots(rng: &mut Rng, n: usize, k: usize) -> Matrix {
        let mut m = Matrix::zeros(n, k);
        for i in 0..n {
            m.set(i, rng.index(k), 1.0);
        }
        m
    }

    /// Central-difference gradient of a scalar function of a matrix.
    fn finite_diff(x: &Matrix, f: impl Fn(&Matrix) -> f64) -> Vec<f64> {
        let h = 1e-5;
        (0..x.as_slice().len())
            .map(|e| {
                let mut p = x.clone();
                p.as_mut_slice()[e] += h;
                let mut m = x.clone();
                m.as_mut_slice()[e] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn mse_small_cases() {
        let a = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert_eq!(mse_loss(&a, &a).unwrap().value, 0.0);
        let l = mse_loss(
            &Matrix::from_rows(&[[1.0]]).unwrap(),
            &Matrix::from_rows(&[[0.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(l.value, 1.0);
        assert_eq!(l.grad.into_vec(), vec![2.0]);
        assert!(mse_loss(&a, &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let mut rng = Rng::new(10);
        let pred = random(&mut rng, 5, 4);
        let target = random(&mut rng, 5, 4);
        let analytic = mse_loss(&pred, &target).unwrap().grad;
        let numeric = finite_diff(&pred, |p| mse_loss(p, &target).unwrap().value);
        for (a, n) in analytic.as_slice().iter().zip(&numeric) {
            assert!((a - n).abs() < 1e-8, "{a} vs {n}");
        }
    }

    #[test]
    fn uniform_logits_give_ln4() {
        let logits = Matrix::filled(3, 4, 0.7);
        let mut y = Matrix::zeros(3, 4);
        for i in 0..3 {
            y.set(i, i, 1.0);
        }
        let l = softmax_xent(&logits, &y).unwrap();
        assert!((l.value - 4f64.ln()).abs() < 1e-12);
        assert!((l.value - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn large_logit_is_stable() {
        let logits = Matrix::from_rows(&[[1000.0, 0.0, 0.0, 0.0]]).unwrap();
        let y = Matrix::from_rows(&[[1.0, 0.0, 0.0, 0.0]]).unwrap();
        let l = softmax_xent(&logits, &y).unwrap();
        assert!(l.value.is_finite() && l.value.abs() < 1e-12);
        assert!(l.grad.is_finite());
    }

    #[test]
    fn malformed_onehot_is_a_label_error() {
        let logits = Matrix::zeros(1, 4);
        let bad = Matrix::from_rows(&[[0.5, 0.5, 0.0, 0.0]]).unwrap();
        assert!(matches!(softmax_xent(&logits, &bad), Err(Error::Label(_))));
        let two = Matrix::from_rows(&[[1.0, 1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(softmax_xent(&logits, &two), Err(Error::Label(_))));
    }

    #[test]
    fn xent_gradient_matches_finite_differences() {
        let mut rng = Rng::new(11);
        let logits = random(&mut rng, 8, 4);
        let y = onehots(&mut rng, 8, 4);
        let analytic = softmax_xent(&logits, &y).unwrap().grad;
        let numeric = finite_diff(&logits, |z| softmax_xent(z, &y).unwrap().value);
        for (a, n) in analytic.as_slice().iter().zip(&numeric) {
            assert!((a - n).abs() < 1e-8, "{a} vs {n}");
        }
    }

    mod props {
        use super::{onehots, random};
        use crate::optim::loss::{softmax_rows, softmax_xent};
        use crate::rng::Rng;
        use proptest::prelude::{any, prop_assert, proptest};

        proptest! {
            #[test]
            fn softmax_rows_are_distributions(seed in any::<u64>(), n in 1usize..10) {
                let mut rng = Rng::new(seed);
                let p = softmax_rows(&random(&mut rng, n, 4).scale(5.0));
                for row in p.row_iter() {
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    prop_assert!(row.iter().all(|&v| v > 0.0 && v < 1.0));
                }
            }

            #[test]
            fn xent_is_shift_invariant(seed in any::<u64>(), n in 1usize..10, c in -50.0f64..50.0) {
                let mut rng = Rng::new(seed);
                let z = random(&mut rng, n, 4);
                let y = onehots(&mut rng, n, 4);
                let a = softmax_xent(&z, &y).unwrap().value;
                let b = softmax_xent(&z.map(|v| v + c), &y).unwrap().value;
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
