//! Train a tiny model, save it as `BMGC1`, reload it and classify a
//! multi-segment clip by majority vote.
//!
//! ```bash
//! cargo run --release --example predict_clip
//! ```

use std::collections::BTreeMap;

use genrenet::audio_io::segment;
use genrenet::cli::synth::synth_clip;
use genrenet::features::{apply_normalizer, fit_normalizer, FeatureConfig, FeatureExtractor};
use genrenet::nn::{load_model, save_model, Architecture, SavedModel};
use genrenet::train_eval::{fit, predict, ClipPrediction, Example, TrainConfig};

fn main() -> anyhow::Result<()> {
    let classes = 3;
    let extractor = FeatureExtractor::new(FeatureConfig::default())?;
    let mut seqs = vec![];
    for class in 0..classes {
        for k in 0..4u64 {
            for seg in segment(&synth_clip(class, 1, class as u64 * 10 + k), 5.0)? {
                seqs.push((extractor.assemble(&seg)?, class));
            }
        }
    }
    let raw: Vec<_> = seqs.iter().map(|(s, _)| s.clone()).collect();
    let norm = fit_normalizer(&raw)?;
    let examples: Vec<Example> = seqs
        .iter()
        .map(|(s, l)| Ok(Example { x: apply_normalizer(s, &norm)?.x, label: *l }))
        .collect::<anyhow::Result<_>>()?;
    let (train, val): (Vec<_>, Vec<_>) = examples.into_iter().enumerate().partition(|(i, _)| i % 4 != 0);
    let strip = |v: Vec<(usize, Example)>| v.into_iter().map(|(_, e)| e).collect::<Vec<_>>();

    let cfg = TrainConfig {
        arch: Architecture {
            hidden: 12,
            dense_hidden: 12,
            classes,
            ..Architecture::default()
        },
        max_epochs: 10,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let (params, history, best) = fit(&strip(train), &strip(val), &cfg)?;
    println!("trained {} epochs, kept {best}", history.len());

    let genres: Vec<String> = ["low", "mid", "high"].iter().map(|s| s.to_string()).collect();
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.bmgc");
    save_model(
        &SavedModel { params, norm, genres, config: BTreeMap::new() },
        &path,
    )?;
    let model = load_model(&path)?;

    let clip = synth_clip(2, 99, 0);
    let p = predict(&model.params, &model.norm, &extractor, &clip, 5.0)?;
    for (i, dist) in p.segments.iter().enumerate() {
        let top = ClipPrediction::ranked(dist)[0];
        println!("segment {i}: {} ({:.3})", model.genres[top], dist[top]);
    }
    println!("clip label: {} (votes {:?})", model.genres[p.label], p.votes);
    Ok(())
}
