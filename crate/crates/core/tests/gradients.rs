//! Backprop against central finite differences for every layer kind and for
//! toy-width versions of both stage networks.

use subtyper_core::nn::gradcheck::{analytic_gradients, compare, numeric_gradients};
use subtyper_core::nn::{grad_check, Activation, HiddenStyle, LayerSpec, Network, NetworkSpec};
use subtyper_core::optim::Loss;
use subtyper_core::{Matrix, Rng};

const TOL: f64 = 1e-6;

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

fn check(spec: NetworkSpec, batch: usize, loss: Loss, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let net = Network::init(&spec, &mut rng).unwrap();
    let x = random(&mut rng, batch, spec.input);
    let target = match loss {
        Loss::Mse => random(&mut rng, batch, spec.output()),
        Loss::SoftmaxCrossEntropy => onehots(&mut rng, batch, spec.output()),
    };
    let report = grad_check(&net, &x, &target, loss, &mut rng).unwrap();
    for t in &report.tensors {
        assert!(
            t.max_relative_error < TOL,
            "{}: {:e}",
            t.name,
            t.max_relative_error
        );
    }
    report.max_relative_error
}

#[test]
fn dense_linear() {
    let spec = NetworkSpec::new(5, vec![LayerSpec::new(3, Activation::Linear)]);
    check(spec, 4, Loss::Mse, 1);
}

#[test]
fn dense_relu() {
    let spec = NetworkSpec::new(
        5,
        vec![
            LayerSpec::new(6, Activation::Relu),
            LayerSpec::new(3, Activation::Linear),
        ],
    );
    check(spec, 4, Loss::Mse, 2);
}

#[test]
fn batch_norm() {
    let spec = NetworkSpec::new(
        6,
        vec![
            LayerSpec::new(5, Activation::Linear).with_batch_norm(true),
            LayerSpec::new(3, Activation::Linear),
        ],
    );
    check(spec, 4, Loss::Mse, 3);
}

#[test]
fn dropout_with_frozen_mask() {
    let spec = NetworkSpec::new(
        6,
        vec![
            LayerSpec::new(8, Activation::Linear).with_dropout(0.5),
            LayerSpec::new(3, Activation::Linear),
        ],
    );
    check(spec, 4, Loss::Mse, 4);
}

#[test]
fn softmax_cross_entropy() {
    let spec = NetworkSpec::new(6, vec![LayerSpec::new(4, Activation::Softmax)]);
    check(spec, 8, Loss::SoftmaxCrossEntropy, 5);
}

#[test]
fn full_block_dense_bn_relu_dropout() {
    let spec = NetworkSpec::new(
        6,
        vec![
            LayerSpec::new(7, Activation::Relu)
                .with_batch_norm(true)
                .with_dropout(0.3),
            LayerSpec::new(4, Activation::Linear),
        ],
    );
    check(spec, 4, Loss::Mse, 6);
}

#[test]
fn toy_autoencoder_stack() {
    let style = HiddenStyle {
        batch_norm: true,
        dropout: 0.2,
    };
    let encoder = NetworkSpec::mlp(12, &[10, 8], 4, Activation::Relu, style);
    let decoder = NetworkSpec::mlp(4, &[8, 10], 12, Activation::Linear, style);
    check(encoder.then(&decoder).unwrap(), 8, Loss::Mse, 7);
}

#[test]
fn toy_classifier_stack() {
    let style = HiddenStyle {
        batch_norm: true,
        dropout: 0.5,
    };
    let spec = NetworkSpec::mlp(8, &[16, 8], 4, Activation::Softmax, style);
    check(spec, 8, Loss::SoftmaxCrossEntropy, 8);
}

#[test]
fn sign_flip_is_caught() {
    let mut rng = Rng::new(9);
    let spec = NetworkSpec::new(5, vec![LayerSpec::new(3, Activation::Linear)]);
    let net = Network::init(&spec, &mut rng).unwrap();
    let x = random(&mut rng, 4, 5);
    let t = random(&mut rng, 4, 3);
    let (mut analytic, masks) = analytic_gradients(&net, &x, &t, Loss::Mse, &mut rng).unwrap();
    let numeric = numeric_gradients(&net, &x, &t, Loss::Mse, &masks).unwrap();
    for g in analytic.tensors.iter_mut().flatten() {
        *g = -*g;
    }
    let report = compare(&net.param_names(), &analytic, &numeric);
    assert!((report.max_relative_error - 2.0).abs() < 1e-6);
}

#[test]
fn frozen_parameters_are_absent() {
    let mut rng = Rng::new(10);
    let spec = NetworkSpec::new(
        5,
        vec![
            LayerSpec::new(4, Activation::Relu).with_batch_norm(true),
            LayerSpec::new(3, Activation::Linear),
        ],
    );
    let mut net = Network::init(&spec, &mut rng).unwrap();
    net.set_frozen(0..1, true);
    let x = random(&mut rng, 6, 5);
    let t = random(&mut rng, 6, 3);
    let report = grad_check(&net, &x, &t, Loss::Mse, &mut rng).unwrap();
    let names: Vec<&str> = report.tensors.iter().map(|t| t.name.as_str()).collect();
    assert_eq!(names, ["block1.weights", "block1.bias"]);
    assert!(report.max_relative_error < TOL);
}
