//! Command-line front end: `extract`, `train`, `eval`, `predict`, `compare`
//! and `synth`.
//!
//! Exit codes: 0 success, 1 partial or runtime failure, 2 invalid input or
//! configuration.

pub mod config;
pub mod plot;
pub mod synth;

use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use crate::audio_io::{decode_wav_file, load_segments};
use crate::baselines::compare;
use crate::features::{write_features, write_norm_stats, FeatureExtractor};
use crate::nn::{load_model, save_model, SavedModel};
use crate::train_eval::dataset::{select, FeatureIndexRow, SegmentRecord};
use crate::train_eval::{
    evaluate, load_feature_dir, load_manifest, predict, stratified_split, train_with, ClipPrediction,
    DatasetManifest, Split, SplitAssignment, TrainHistory, INDEX_FILE,
};

pub use config::{RunConfig, RESOLVED_FILE};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const SPLIT_FILE: &str = "split.csv";
pub const MODEL_FILE: &str = "model.bmgc";
pub const NORMALIZER_FILE: &str = "normalizer.bmfx";
pub const HISTORY_FILE: &str = "history.csv";

#[derive(Debug, Parser)]
#[command(name = "genrenet", version, about = "Music genre classification from WAV audio")]
pub struct Cli {
    /// key = value configuration file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Reproducible mode: single-threaded, zero wall times, fixed timestamps
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Override one configuration key; repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode, segment and extract features for every manifest entry
    Extract { manifest: PathBuf },
    /// Train the recurrent classifier on an extracted feature directory
    Train { features: PathBuf },
    /// Score a trained model on one split of a feature directory
    Eval {
        model: PathBuf,
        features: PathBuf,
        /// Split assignment (defaults to split.csv next to the model)
        #[arg(long, value_name = "PATH")]
        split_file: Option<PathBuf>,
        /// train, val, test or all
        #[arg(long, default_value = "test")]
        subset: String,
    },
    /// Classify one audio file
    Predict {
        model: PathBuf,
        audio: PathBuf,
        /// Machine-readable output
        #[arg(long)]
        json: bool,
    },
    /// Logistic regression, k-NN, LSTM and Bi-LSTM on one shared split
    Compare { features: PathBuf },
    /// Generate the seeded synthetic corpus
    Synth {
        #[arg(long, default_value_t = 20)]
        per_class: usize,
    },
}

/// A failed command: exit code plus message.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn invalid(e: impl Display) -> Failure {
    Failure {
        code: 2,
        message: e.to_string(),
    }
}

fn runtime(e: impl Display) -> Failure {
    Failure {
        code: 1,
        message: e.to_string(),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))
}

fn created_stamp(cfg: &RunConfig) -> String {
    if cfg.deterministic {
        "0".into()
    } else {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
            .to_string()
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path).map_err(invalid)?;
    }
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| invalid(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k, v).map_err(invalid)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.deterministic {
        cfg.deterministic = true;
    }
    cfg.validate().map_err(invalid)?;
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> Result<PathBuf, Failure> {
    cli.out.clone().ok_or_else(|| invalid("--out <DIR> is required for this command"))
}

fn write_resolved(dir: &Path, cfg: &RunConfig) -> Result<(), Failure> {
    write_file(&dir.join(RESOLVED_FILE), cfg.resolved_text())
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let cfg = resolve_config(cli)?;
    if cfg.deterministic {
        // the global pool can only be built once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
    }
    match &cli.command {
        Command::Extract { manifest } => cmd_extract(manifest, &out_dir(cli)?, &cfg),
        Command::Train { features } => cmd_train(features, &out_dir(cli)?, &cfg),
        Command::Eval {
            model,
            features,
            split_file,
            subset,
        } => cmd_eval(model, features, split_file.as_deref(), subset, &out_dir(cli)?, &cfg),
        Command::Predict { model, audio, json } => cmd_predict(model, audio, *json, cli.out.as_deref(), &cfg),
        Command::Compare { features } => cmd_compare(features, &out_dir(cli)?, &cfg),
        Command::Synth { per_class } => cmd_synth(&out_dir(cli)?, *per_class, &cfg),
    }
}

/// One feature file per segment, `index.csv`, a manifest copy and `extract.log`.
pub fn cmd_extract(manifest_path: &Path, out: &Path, cfg: &RunConfig) -> Result<(), Failure> {
    let manifest = load_manifest(manifest_path, cfg.labels.clone()).map_err(invalid)?;
    let extractor = FeatureExtractor::new(cfg.feature_config()).map_err(invalid)?;
    create_dir(out)?;
    write_resolved(out, cfg)?;
    let created = created_stamp(cfg);

    let results: Vec<Result<Vec<FeatureIndexRow>, String>> = manifest
        .entries
        .par_iter()
        .enumerate()
        .map(|(idx, entry)| {
            let genre = manifest.genre_name(entry.genre).to_string();
            let segments = load_segments(manifest.resolve(entry), cfg.sample_rate, cfg.segment_seconds)
                .map_err(|e| e.to_string())?;
            let mut rows = Vec::with_capacity(segments.len());
            for (s, clip) in segments.iter().enumerate() {
                let extracted = extractor.extract(clip).map_err(|e| e.to_string())?;
                let mut seq = extracted.sequence.clone();
                seq.label = Some(genre.clone());
                seq.source = entry.path.clone();
                let file = format!("{idx:05}_{s:03}.bmfx");
                write_features(out.join(&file), &seq, Some(s), Some(extracted.aux_mean()), &created)
                    .map_err(|e| e.to_string())?;
                rows.push(FeatureIndexRow {
                    file,
                    source: entry.path.clone(),
                    genre: genre.clone(),
                    segment: s,
                });
            }
            Ok(rows)
        })
        .collect();

    let mut index = format!("{}\n", FeatureIndexRow::HEADER);
    let mut log = String::new();
    let (mut ok, mut segments) = (0usize, 0usize);
    for (entry, result) in manifest.entries.iter().zip(&results) {
        match result {
            Ok(rows) => {
                ok += 1;
                segments += rows.len();
                log.push_str(&format!("ok {} {} segments\n", entry.path, rows.len()));
                for r in rows {
                    index.push_str(&r.to_line());
                    index.push('\n');
                }
            }
            Err(e) => log.push_str(&format!("skip {}: {e}\n", entry.path)),
        }
    }
    let summary = format!(
        "extracted {segments} segments from {ok} of {} files",
        manifest.len()
    );
    log.push_str(&summary);
    log.push('\n');
    write_file(&out.join(INDEX_FILE), index)?;
    write_file(&out.join(MANIFEST_FILE), manifest.to_csv())?;
    write_file(&out.join("extract.log"), &log)?;
    println!("{summary}");
    if ok == 0 {
        return Err(runtime("no file could be extracted; see extract.log"));
    }
    Ok(())
}

struct LoadedFeatures {
    manifest: DatasetManifest,
    records: Vec<SegmentRecord>,
}

fn load_features(dir: &Path, labels: Vec<String>, input_dim: usize) -> Result<LoadedFeatures, Failure> {
    if !dir.is_dir() {
        return Err(invalid(format!("feature directory {} does not exist", dir.display())));
    }
    let manifest = load_manifest(dir.join(MANIFEST_FILE), labels).map_err(invalid)?;
    let records = load_feature_dir(dir, &manifest).map_err(invalid)?;
    if records.is_empty() {
        return Err(invalid(format!("no features listed in {}", dir.join(INDEX_FILE).display())));
    }
    if let Some(r) = records.iter().find(|r| r.seq.dim() != input_dim) {
        return Err(invalid(format!(
            "{} has {} feature columns, configuration expects {input_dim}",
            r.seq.source,
            r.seq.dim()
        )));
    }
    Ok(LoadedFeatures { manifest, records })
}

/// Model, normalizer, history, curves and the split used.
pub fn cmd_train(features: &Path, out: &Path, cfg: &RunConfig) -> Result<(), Failure> {
    let data = load_features(features, cfg.labels.clone(), cfg.architecture().input_dim)?;
    let split = stratified_split(&data.manifest, cfg.seed, cfg.fractions).map_err(invalid)?;
    create_dir(out)?;
    write_resolved(out, cfg)?;
    write_file(&out.join(SPLIT_FILE), split.to_csv(&data.manifest))?;

    let history_path = out.join(HISTORY_FILE);
    let mut history_file = std::fs::File::create(&history_path)
        .map_err(|e| runtime(format!("{}: {e}", history_path.display())))?;
    let _ = writeln!(history_file, "{}", TrainHistory::HEADER);
    let mut on_epoch = |r: &crate::train_eval::EpochRecord| {
        let _ = writeln!(history_file, "{}", TrainHistory::csv_row(r));
        let _ = history_file.flush();
        println!(
            "epoch {:>3}  loss {:.4}  acc {:.4}  val_loss {:.4}  val_acc {:.4}",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
        );
    };
    let outcome = train_with(&data.records, &split, &cfg.train_config(), &mut on_epoch).map_err(runtime)?;
    drop(history_file);

    let saved = SavedModel {
        params: outcome.params,
        norm: outcome.norm,
        genres: cfg.labels.clone(),
        config: cfg.to_map(),
    };
    save_model(&saved, out.join(MODEL_FILE)).map_err(runtime)?;
    write_norm_stats(out.join(NORMALIZER_FILE), &saved.norm, &created_stamp(cfg)).map_err(runtime)?;
    write_file(&history_path, outcome.history.to_csv())?;
    write_file(&out.join("curves.svg"), plot::curves_svg(&outcome.history))?;
    let best = &outcome.history.records[outcome.best_epoch - 1];
    println!(
        "kept epoch {} of {}: val_loss {:.4} val_acc {:.4}",
        outcome.best_epoch,
        outcome.history.len(),
        best.val_loss,
        best.val_acc
    );
    Ok(())
}

fn model_config(model: &SavedModel) -> Result<RunConfig, Failure> {
    RunConfig::from_map(&model.config).map_err(|e| invalid(format!("model configuration: {e}")))
}

/// `report.csv`, `confusion.csv` and `confusion.svg`; the table goes to stdout.
pub fn cmd_eval(
    model_path: &Path,
    features: &Path,
    split_file: Option<&Path>,
    subset: &str,
    out: &Path,
    cfg: &RunConfig,
) -> Result<(), Failure> {
    let model = load_model(model_path).map_err(invalid)?;
    let mcfg = model_config(&model)?;
    let data = load_features(features, model.genres.clone(), model.params.arch.input_dim).map_err(|f| Failure {
        message: format!("{} (model genres: {})", f.message, model.genres.join(",")),
        ..f
    })?;
    let split_path = split_file
        .map(Path::to_path_buf)
        .unwrap_or_else(|| model_path.with_file_name(SPLIT_FILE));
    let split = if split_path.exists() {
        let text = std::fs::read_to_string(&split_path).map_err(|e| invalid(format!("{}: {e}", split_path.display())))?;
        SplitAssignment::from_csv(&text, &data.manifest, mcfg.seed).map_err(invalid)?
    } else {
        stratified_split(&data.manifest, mcfg.seed, mcfg.fractions).map_err(invalid)?
    };
    let chosen: Vec<&SegmentRecord> = match subset {
        "all" => data.records.iter().collect(),
        s => select(&data.records, &split, s.parse::<Split>().map_err(invalid)?),
    };
    if chosen.is_empty() {
        return Err(invalid(format!("no segments in subset '{subset}'")));
    }
    let segments: Vec<_> = chosen.iter().map(|r| (&r.seq, r.genre)).collect();
    let report = evaluate(&model.params, &model.norm, &segments, &model.genres).map_err(invalid)?;

    create_dir(out)?;
    write_resolved(out, cfg)?;
    write_file(&out.join("report.csv"), report.report_csv())?;
    write_file(&out.join("confusion.csv"), report.confusion_csv())?;
    write_file(&out.join("confusion.svg"), plot::confusion_svg(&report))?;
    print!("{}", report.table());
    Ok(())
}

fn prediction_json(audio: &Path, genres: &[String], p: &ClipPrediction) -> serde_json::Value {
    let segments: Vec<_> = p
        .segments
        .iter()
        .enumerate()
        .map(|(i, dist)| {
            let ranked: Vec<_> = ClipPrediction::ranked(dist)
                .into_iter()
                .map(|c| json!({"genre": genres[c], "probability": dist[c]}))
                .collect();
            json!({"segment": i, "ranked": ranked})
        })
        .collect();
    let votes: serde_json::Map<String, serde_json::Value> = genres
        .iter()
        .zip(&p.votes)
        .map(|(g, v)| (g.clone(), json!(v)))
        .collect();
    json!({
        "file": audio.display().to_string(),
        "label": genres[p.label],
        "votes": votes,
        "segments": segments,
    })
}

/// Ranked distributions per segment and the majority-vote label.
pub fn cmd_predict(model_path: &Path, audio: &Path, as_json: bool, out: Option<&Path>, cfg: &RunConfig) -> Result<(), Failure> {
    let model = load_model(model_path).map_err(invalid)?;
    let mcfg = model_config(&model)?;
    let extractor = FeatureExtractor::new(mcfg.feature_config()).map_err(invalid)?;
    let clip = decode_wav_file(audio).map_err(invalid)?;
    let p = predict(&model.params, &model.norm, &extractor, &clip, mcfg.segment_seconds).map_err(invalid)?;
    let doc = prediction_json(audio, &model.genres, &p);

    if as_json {
        println!("{}", serde_json::to_string_pretty(&doc).map_err(runtime)?);
    } else {
        for (i, dist) in p.segments.iter().enumerate() {
            let ranked: Vec<String> = ClipPrediction::ranked(dist)
                .into_iter()
                .map(|c| format!("{} {:.3}", model.genres[c], dist[c]))
                .collect();
            println!("segment {i}: {}", ranked.join(", "));
        }
        println!("label: {}", model.genres[p.label]);
    }
    if let Some(out) = out {
        create_dir(out)?;
        write_resolved(out, cfg)?;
        write_file(&out.join("prediction.json"), serde_json::to_string_pretty(&doc).map_err(runtime)?)?;
    }
    Ok(())
}

/// `comparison.csv` plus the text table on stdout.
pub fn cmd_compare(features: &Path, out: &Path, cfg: &RunConfig) -> Result<(), Failure> {
    let data = load_features(features, cfg.labels.clone(), cfg.architecture().input_dim)?;
    let split = stratified_split(&data.manifest, cfg.seed, cfg.fractions).map_err(invalid)?;
    create_dir(out)?;
    write_resolved(out, cfg)?;
    write_file(&out.join(SPLIT_FILE), split.to_csv(&data.manifest))?;
    let table = compare(&data.records, &split, &cfg.labels, &cfg.compare_config()).map_err(runtime)?;
    write_file(&out.join("comparison.csv"), table.to_csv())?;
    print!("{}", table.table());
    Ok(())
}

pub fn cmd_synth(out: &Path, per_class: usize, cfg: &RunConfig) -> Result<(), Failure> {
    if per_class < 5 {
        return Err(invalid(format!("--per-class must be >= 5, got {per_class}")));
    }
    let manifest = synth::generate_synthetic(out, cfg.seed, per_class, &cfg.labels).map_err(runtime)?;
    write_resolved(out, cfg)?;
    println!(
        "wrote {} clips and {}",
        per_class * cfg.labels.len(),
        manifest.display()
    );
    Ok(())
}
