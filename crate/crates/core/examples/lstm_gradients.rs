//! Forward/backward through a small bidirectional LSTM classifier, a
//! finite-difference spot check, and a few Adam steps.
//!
//! ```bash
//! cargo run --release --example lstm_gradients
//! ```

use genrenet::nn::{
    adam_step_model, gradient_clip, AdamConfig, AdamState, Architecture, BnMode, Head, ModelParams, Tensor2,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let arch = Architecture {
        input_dim: 6,
        hidden: 5,
        layers: 2,
        dense_hidden: 8,
        classes: 3,
        head: Head::Sequence,
        bidirectional: true,
    };
    let mut model = ModelParams::init(arch, &mut rng)?;
    println!("{} trainable parameters", model.parameter_count());

    // batch of 4 sequences, 10 frames each, time-major rows
    let (t_len, batch) = (10, 4);
    let x = Tensor2::from_vec(
        t_len * batch,
        6,
        (0..t_len * batch * 6).map(|_| rng.random_range(-1.0..1.0)).collect(),
    );
    let targets = [0, 1, 2, 1];

    let trace = model.forward(&x, batch, BnMode::Train)?;
    let grads = model.backward(&trace, &targets)?;
    let loss = model.loss(&trace, &targets)?;
    println!("initial loss {loss:.5} (ln 3 = {:.5})", 3f64.ln());

    // compare one entry of the output bias against central differences
    let delta = 1e-5;
    let analytic = grads.dense_out.b.get(0, 1);
    let mut probe = model.clone();
    probe.dense_out.b.data_mut()[1] += delta;
    let plus = probe.loss(&probe.forward(&x, batch, BnMode::Train)?, &targets)?;
    probe.dense_out.b.data_mut()[1] -= 2.0 * delta;
    let minus = probe.loss(&probe.forward(&x, batch, BnMode::Train)?, &targets)?;
    println!("d loss / d b_out[1]: analytic {analytic:.8}, numeric {:.8}", (plus - minus) / (2.0 * delta));

    let mut adam = AdamState::for_model(&model);
    let cfg = AdamConfig {
        lr: 0.01,
        ..AdamConfig::default()
    };
    for step in 1..=50 {
        let trace = model.forward(&x, batch, BnMode::Train)?;
        let mut g = model.backward(&trace, &targets)?;
        gradient_clip(&mut g.trainable_mut(), 5.0);
        adam_step_model(&mut model, &g, &mut adam, &cfg);
        model.update_bn_running(&trace);
        if step % 10 == 0 {
            println!("step {step:>2}: loss {:.5}", model.loss(&trace, &targets)?);
        }
    }
    Ok(())
}
