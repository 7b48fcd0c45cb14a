//! Central finite differences against `ModelParams::backward`.

use genrenet::nn::{Architecture, BnMode, Head, ModelParams, Tensor2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DELTA: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

pub fn tiny_arch(head: Head, bidirectional: bool) -> Architecture {
    Architecture {
        input_dim: 6,
        hidden: 5,
        layers: 2,
        dense_hidden: 4,
        classes: 3,
        head,
        bidirectional,
    }
}

fn loss(model: &ModelParams, x: &Tensor2, batch: usize, targets: &[usize]) -> f64 {
    let trace = model.forward(x, batch, BnMode::Train).unwrap();
    model.loss(&trace, targets).unwrap()
}

pub struct CheckResult {
    pub max_rel_err: f64,
    pub worst: String,
    pub entries: usize,
}

/// Compare every trainable entry; relative error uses max(|a|, |n|, 1e-8).
pub fn check(seed: u64, arch: Architecture, t_len: usize, batch: usize) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = ModelParams::init(arch, &mut rng).unwrap();
    // move BN affine parameters off their defaults so their gradients are generic
    for layer in model.layers.iter_mut() {
        for v in layer.bn.gamma.data_mut() {
            *v = rng.random_range(0.5..1.5);
        }
        for v in layer.bn.beta.data_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
    }
    let x = Tensor2::from_vec(
        t_len * batch,
        arch.input_dim,
        (0..t_len * batch * arch.input_dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    );
    let targets: Vec<usize> = (0..batch).map(|_| rng.random_range(0..arch.classes)).collect();

    let trace = model.forward(&x, batch, BnMode::Train).unwrap();
    let grads = model.backward(&trace, &targets).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads
        .named_trainable()
        .into_iter()
        .map(|(n, t)| (n, t.data().to_vec()))
        .collect();

    let mut result = CheckResult {
        max_rel_err: 0.0,
        worst: String::new(),
        entries: 0,
    };
    for (ti, (name, a)) in analytic.iter().enumerate() {
        for (k, &av) in a.iter().enumerate() {
            let orig = model.trainable_mut()[ti].data()[k];
            model.trainable_mut()[ti].data_mut()[k] = orig + DELTA;
            let plus = loss(&model, &x, batch, &targets);
            model.trainable_mut()[ti].data_mut()[k] = orig - DELTA;
            let minus = loss(&model, &x, batch, &targets);
            model.trainable_mut()[ti].data_mut()[k] = orig;
            let nv = (plus - minus) / (2.0 * DELTA);
            let rel = (av - nv).abs() / av.abs().max(nv.abs()).max(1e-8);
            result.entries += 1;
            if rel > result.max_rel_err {
                result.max_rel_err = rel;
                result.worst = format!("{name}[{k}] analytic {av:e} numeric {nv:e}");
            }
        }
    }
    result
}
