//! Mini-batch Adam training with early stopping on validation loss.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{select, to_examples, Example, SegmentRecord};
use super::evaluate::argmax;
use super::split::{Split, SplitAssignment};
use super::TrainEvalError;
use crate::features::{fit_normalizer, FeatureSequence, NormStats};
use crate::nn::{
    adam_step_model, gradient_clip, stack_time_major, AdamConfig, AdamState, Architecture, BnMode, ModelParams,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub arch: Architecture,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub adam: AdamConfig,
    pub clip_norm: f64,
    pub seed: u64,
    /// Report zero wall time so that histories are byte-identical across runs.
    pub deterministic: bool,
    /// Print one line per epoch to stderr.
    pub verbose: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: Architecture::default(),
            batch_size: 32,
            max_epochs: 100,
            patience: 8,
            adam: AdamConfig::default(),
            clip_norm: 5.0,
            seed: 42,
            deterministic: false,
            verbose: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainEvalError> {
        self.arch.validate()?;
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(TrainEvalError::InvalidConfig(
                "batch size, epochs and patience must be >= 1".into(),
            ));
        }
        if !(self.adam.lr > 0.0) || !(self.clip_norm > 0.0) {
            return Err(TrainEvalError::InvalidConfig(
                "learning rate and clip norm must be > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub const HEADER: &'static str = "epoch,train_loss,train_acc,val_loss,val_acc,wall_seconds";

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn csv_row(r: &EpochRecord) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.3}",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.wall_seconds
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for r in &self.records {
            out.push_str(&Self::csv_row(r));
            out.push('\n');
        }
        out
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.records
            .iter()
            .fold(None, |best: Option<&EpochRecord>, r| match best {
                Some(b) if b.val_loss <= r.val_loss => Some(b),
                _ => Some(r),
            })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub norm: NormStats,
    pub history: TrainHistory,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

/// Mean per-example loss and accuracy in inference mode.
pub fn score(params: &ModelParams, data: &[Example], chunk: usize) -> Result<(f64, f64), TrainEvalError> {
    let (mut loss, mut correct) = (0.0, 0usize);
    for part in data.chunks(chunk.max(1)) {
        let xs: Vec<_> = part.iter().map(|e| &e.x).collect();
        let labels: Vec<usize> = part.iter().map(|e| e.label).collect();
        let trace = params.forward(&stack_time_major(&xs)?, part.len(), BnMode::Infer)?;
        loss += params.loss(&trace, &labels)? * part.len() as f64;
        correct += (0..part.len())
            .filter(|&b| argmax(&trace.sequence_probs(b)) == labels[b])
            .count();
    }
    let n = data.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Train on already-normalized examples. Returns the parameters of the epoch
/// with the lowest validation loss, the full history and that epoch's number.
pub fn fit(
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainHistory, usize), TrainEvalError> {
    fit_with(train, val, cfg, &mut |_| {})
}

/// [`fit`] with a callback invoked after every epoch.
pub fn fit_with(
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<(ModelParams, TrainHistory, usize), TrainEvalError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainEvalError::EmptySplit("training"));
    }
    if val.is_empty() {
        return Err(TrainEvalError::EmptySplit("validation"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(cfg.arch, &mut rng)?;
    let mut adam = AdamState::for_model(&params);
    let mut history = TrainHistory::default();
    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        shuffle_rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut shuffle_rng);

        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<_> = batch.iter().map(|&i| &train[i].x).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| train[i].label).collect();
            let trace = params.forward(&stack_time_major(&xs)?, batch.len(), BnMode::Train)?;
            let loss = params.loss(&trace, &labels)?;
            if !loss.is_finite() {
                return Err(TrainEvalError::Diverged { epoch });
            }
            loss_sum += loss * batch.len() as f64;
            correct += (0..batch.len())
                .filter(|&b| argmax(&trace.sequence_probs(b)) == labels[b])
                .count();

            let mut grads = params.backward(&trace, &labels)?;
            gradient_clip(&mut grads.trainable_mut(), cfg.clip_norm);
            adam_step_model(&mut params, &grads, &mut adam, &cfg.adam);
            params.update_bn_running(&trace);
        }

        let (val_loss, val_acc) = score(&params, val, 64)?;
        if !val_loss.is_finite() {
            return Err(TrainEvalError::Diverged { epoch });
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_acc: correct as f64 / train.len() as f64,
            val_loss,
            val_acc,
            wall_seconds: if cfg.deterministic {
                0.0
            } else {
                started.elapsed().as_secs_f64()
            },
        };
        if cfg.verbose {
            eprintln!("{}", TrainHistory::csv_row(&record));
        }
        on_epoch(&record);
        history.records.push(record);

        if val_loss < best.0 {
            best = (val_loss, params.clone(), epoch);
        } else if epoch - best.2 >= cfg.patience {
            break;
        }
    }
    Ok((best.1, history, best.2))
}

/// Fit the normalizer on the training split, then [`fit`].
pub fn train(records: &[SegmentRecord], split: &SplitAssignment, cfg: &TrainConfig) -> Result<TrainOutcome, TrainEvalError> {
    train_with(records, split, cfg, &mut |_| {})
}

/// [`train`] with a per-epoch callback.
pub fn train_with(
    records: &[SegmentRecord],
    split: &SplitAssignment,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainEvalError> {
    let train_recs = select(records, split, Split::Train);
    let val_recs = select(records, split, Split::Val);
    if train_recs.is_empty() {
        return Err(TrainEvalError::EmptySplit("training"));
    }
    let seqs: Vec<FeatureSequence> = train_recs.iter().map(|r| r.seq.clone()).collect();
    let norm = fit_normalizer(&seqs)?;
    let train_set = to_examples(&train_recs, &norm)?;
    let val_set = to_examples(&val_recs, &norm)?;
    let (params, history, best_epoch) = fit_with(&train_set, &val_set, cfg, on_epoch)?;
    Ok(TrainOutcome {
        params,
        norm,
        history,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Head, Tensor2};
    use rand::RngExt;

    /// Two classes separated by the sign of the first feature.
    fn toy(n: usize, seed: u64) -> Vec<Example> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = i % 2;
                let sign = if label == 0 { -1.0 } else { 1.0 };
                let data = (0..5 * 3)
                    .map(|k| if k % 3 == 0 { sign } else { 0.0 } + rng.random_range(-0.3..0.3))
                    .collect();
                Example {
                    x: Tensor2::from_vec(5, 3, data),
                    label,
                }
            })
            .collect()
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            arch: Architecture {
                input_dim: 3,
                hidden: 4,
                layers: 1,
                dense_hidden: 4,
                classes: 2,
                head: Head::Sequence,
                bidirectional: true,
            },
            batch_size: 4,
            max_epochs: 40,
            patience: 8,
            adam: AdamConfig {
                lr: 0.02,
                ..AdamConfig::default()
            },
            deterministic: true,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn learns_a_separable_toy_problem() {
        let (params, history, best) = fit(&toy(16, 1), &toy(8, 2), &cfg()).unwrap();
        assert!(best >= 1 && best <= history.len());
        let (_, acc) = score(&params, &toy(8, 3), 8).unwrap();
        assert!(acc >= 0.99, "accuracy {acc}");
        assert!(history.records.iter().all(|r| r.wall_seconds == 0.0));
        let epochs: Vec<usize> = history.records.iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, (1..=history.len()).collect::<Vec<_>>());
    }

    #[test]
    fn best_epoch_parameters_are_returned() {
        let mut c = cfg();
        c.patience = 2;
        c.max_epochs = 60;
        let (params, history, best) = fit(&toy(16, 1), &toy(8, 2), &c).unwrap();
        let (val_loss, _) = score(&params, &toy(8, 2), 8).unwrap();
        assert!((val_loss - history.records[best - 1].val_loss).abs() < 1e-12);
        assert_eq!(history.best().unwrap().epoch, best);
        // stopped early: the last `patience` epochs brought no improvement
        if history.len() < c.max_epochs {
            assert_eq!(history.len() - best, c.patience);
        }
    }

    #[test]
    fn reproducible() {
        let a = fit(&toy(12, 1), &toy(4, 2), &cfg()).unwrap();
        let b = fit(&toy(12, 1), &toy(4, 2), &cfg()).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.to_csv(), b.1.to_csv());
    }

    #[test]
    fn empty_validation_is_rejected() {
        assert!(matches!(fit(&toy(4, 1), &[], &cfg()), Err(TrainEvalError::EmptySplit(_))));
    }
}
