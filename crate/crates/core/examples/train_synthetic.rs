//! Generate a small synthetic corpus in memory, extract features, train the
//! Bi-LSTM and print the test-set report.
//!
//! ```bash
//! cargo run --release --example train_synthetic
//! ```

use genrenet::audio_io::segment;
use genrenet::cli::synth::synth_clip;
use genrenet::features::{FeatureConfig, FeatureExtractor};
use genrenet::nn::{Architecture, Head};
use genrenet::train_eval::dataset::{select, SegmentRecord};
use genrenet::train_eval::{evaluate, stratified_split, train, DatasetManifest, Split, TrainConfig, DEFAULT_FRACTIONS};

fn main() -> anyhow::Result<()> {
    let classes = 4;
    let per_class = 6;
    let labels: Vec<String> = (0..classes).map(|c| format!("class{c}")).collect();

    let mut text = String::from("path,genre\n");
    for (c, label) in labels.iter().enumerate() {
        for i in 0..per_class {
            text.push_str(&format!("{c}_{i}.wav,{label}\n"));
        }
    }
    let manifest = DatasetManifest::parse(&text, labels.clone(), ".")?;

    let extractor = FeatureExtractor::new(FeatureConfig::default())?;
    let mut records = Vec::new();
    for (entry_idx, entry) in manifest.entries.iter().enumerate() {
        let clip = synth_clip(entry.genre, 42, entry_idx as u64);
        for (s, seg) in segment(&clip, 5.0)?.iter().enumerate() {
            let ex = extractor.extract(seg)?;
            records.push(SegmentRecord {
                aux_mean: ex.aux_mean(),
                seq: ex.sequence,
                genre: entry.genre,
                entry: entry_idx,
                segment: s,
            });
        }
    }
    println!("{} segments from {} clips", records.len(), manifest.len());

    let split = stratified_split(&manifest, 42, DEFAULT_FRACTIONS)?;
    let cfg = TrainConfig {
        arch: Architecture {
            hidden: 16,
            dense_hidden: 16,
            classes,
            head: Head::Sequence,
            ..Architecture::default()
        },
        max_epochs: 40,
        batch_size: 8,
        verbose: true,
        ..TrainConfig::default()
    };
    let outcome = train(&records, &split, &cfg)?;
    println!("kept epoch {} of {}", outcome.best_epoch, outcome.history.len());

    let test: Vec<_> = select(&records, &split, Split::Test)
        .into_iter()
        .map(|r| (&r.seq, r.genre))
        .collect();
    let report = evaluate(&outcome.params, &outcome.norm, &test, &labels)?;
    print!("{}", report.table());
    Ok(())
}
