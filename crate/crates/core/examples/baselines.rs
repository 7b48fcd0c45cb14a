//! Pooled-feature baselines: multinomial logistic regression and k-NN.
//!
//! ```bash
//! cargo run --release --example baselines
//! ```

use genrenet::audio_io::segment;
use genrenet::baselines::{fit_standardizer, knn_predict, logreg_predict, logreg_train, pool, standardize};
use genrenet::cli::synth::synth_clip;
use genrenet::features::{FeatureConfig, FeatureExtractor};

fn main() -> anyhow::Result<()> {
    let extractor = FeatureExtractor::new(FeatureConfig::default())?;
    let (mut train_x, mut train_y, mut test_x, mut test_y) = (vec![], vec![], vec![], vec![]);
    for class in 0..5 {
        for clip_idx in 0..4u64 {
            let clip = synth_clip(class, 7, class as u64 * 100 + clip_idx);
            for seg in segment(&clip, 5.0)? {
                let ex = extractor.extract(&seg)?;
                let pooled = pool(&ex.sequence, &ex.aux)?;
                if clip_idx < 3 {
                    train_x.push(pooled);
                    train_y.push(class);
                } else {
                    test_x.push(pooled);
                    test_y.push(class);
                }
            }
        }
    }
    println!("pooled vectors of length {}", train_x[0].len());

    let stats = fit_standardizer(&train_x);
    let train_x = standardize(&train_x, &stats);
    let test_x = standardize(&test_x, &stats);

    let (model, losses) = logreg_train(&train_x, &train_y, 5, 300, 0.1)?;
    println!("logistic regression loss {:.4} -> {:.4}", losses[0], losses[losses.len() - 1]);
    let acc = |pred: Vec<usize>| pred.iter().zip(&test_y).filter(|(a, b)| a == b).count() as f64 / test_y.len() as f64;
    let lr_acc = acc(test_x.iter().map(|x| logreg_predict(&model, x)).collect());
    let knn_acc = acc(test_x
        .iter()
        .map(|q| knn_predict(&train_x, &train_y, q, 10))
        .collect::<Result<_, _>>()?);
    println!("test accuracy: logistic regression {lr_acc:.3}, 10-NN {knn_acc:.3}");
    Ok(())
}
