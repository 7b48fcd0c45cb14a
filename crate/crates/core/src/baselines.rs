//! Classical comparators over pooled features (multinomial logistic
//! regression, k-NN) plus a unidirectional LSTM, and the comparison table
//! that runs them all on one split.

use rayon::prelude::*;
use thiserror::Error;

use crate::features::{FeatureSequence, NormStats, SIGMA_FLOOR};
use crate::nn::loss::{nll, softmax};
use crate::nn::Tensor2;
use crate::train_eval::dataset::{select, SegmentRecord};
use crate::train_eval::{argmax, evaluate, train, Split, SplitAssignment, TrainConfig, TrainEvalError, TrainOutcome};

/// L2 penalty of the logistic regression.
pub const LOGREG_L2: f64 = 1e-4;
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("k = {k} exceeds the {n} training points")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    TrainEval(#[from] TrainEvalError),
}

/// Column means, population standard deviations, then aux means.
pub fn pool(seq: &FeatureSequence, aux: &Tensor2) -> Result<Vec<f64>, BaselineError> {
    if aux.rows() == 0 {
        return Err(BaselineError::InvalidArgument("aux descriptors have no frames".into()));
    }
    let aux_mean: Vec<f64> = aux
        .column_sums()
        .data()
        .iter()
        .map(|s| s / aux.rows() as f64)
        .collect();
    pool_with_aux_mean(seq, &aux_mean)
}

/// [`pool`] when only the per-segment aux means were kept.
pub fn pool_with_aux_mean(seq: &FeatureSequence, aux_mean: &[f64]) -> Result<Vec<f64>, BaselineError> {
    let t = seq.frames();
    if t < 2 {
        return Err(BaselineError::InvalidArgument(format!(
            "pooling needs at least 2 frames, got {t}"
        )));
    }
    let d = seq.dim();
    let n = t as f64;
    let mut mean = vec![0.0; d];
    for r in 0..t {
        mean.iter_mut().zip(seq.x.row(r)).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for r in 0..t {
        for ((acc, v), m) in var.iter_mut().zip(seq.x.row(r)).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|v| (v / n).sqrt());
    Ok(mean.iter().cloned().chain(std).chain(aux_mean.iter().cloned()).collect())
}

/// Per-column standardization of pooled vectors.
pub fn fit_standardizer(xs: &[Vec<f64>]) -> NormStats {
    let d = xs.first().map_or(0, Vec::len);
    let n = xs.len().max(1) as f64;
    let mut mu = vec![0.0; d];
    for x in xs {
        mu.iter_mut().zip(x).for_each(|(m, v)| *m += v);
    }
    mu.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for x in xs {
        for ((acc, v), m) in var.iter_mut().zip(x).zip(&mu) {
            *acc += (v - m) * (v - m);
        }
    }
    NormStats {
        mu,
        sigma: var.into_iter().map(|v| (v / n).sqrt()).collect(),
    }
}

pub fn standardize(xs: &[Vec<f64>], stats: &NormStats) -> Vec<Vec<f64>> {
    xs.iter()
        .map(|x| {
            x.iter()
                .zip(&stats.mu)
                .zip(&stats.sigma)
                .map(|((v, m), s)| (v - m) / s.max(SIGMA_FLOOR))
                .collect()
        })
        .collect()
}

/// Multinomial softmax regression, `classes x dim` weights plus biases.
#[derive(Debug, Clone, PartialEq)]
pub struct LogReg {
    pub w: Tensor2,
    pub b: Vec<f64>,
}

impl LogReg {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self {
            w: Tensor2::zeros(classes, dim),
            b: vec![0.0; classes],
        }
    }

    pub fn proba(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = (0..self.w.rows())
            .map(|c| self.b[c] + self.w.row(c).iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        softmax(&logits)
    }

    /// Mean cross-entropy plus `l2/2 * ||W||^2`.
    pub fn loss(&self, xs: &[Vec<f64>], ys: &[usize], l2: f64) -> f64 {
        let ce: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, &y)| nll(&self.proba(x), y).expect("label within class range"))
            .sum::<f64>()
            / xs.len() as f64;
        ce + 0.5 * l2 * self.w.sq_norm()
    }
}

/// Full-batch gradient descent; returns the model and the loss before each step.
pub fn logreg_train(
    xs: &[Vec<f64>],
    ys: &[usize],
    classes: usize,
    epochs: usize,
    lr: f64,
) -> Result<(LogReg, Vec<f64>), BaselineError> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(BaselineError::InvalidArgument(
            "need matching, non-empty features and labels".into(),
        ));
    }
    if let Some(&y) = ys.iter().find(|&&y| y >= classes) {
        return Err(BaselineError::InvalidArgument(format!("label {y} >= {classes} classes")));
    }
    let d = xs[0].len();
    let n = xs.len() as f64;
    let mut model = LogReg::zeros(classes, d);
    let mut losses = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        losses.push(model.loss(xs, ys, LOGREG_L2));
        let mut gw = Tensor2::zeros(classes, d);
        let mut gb = vec![0.0; classes];
        for (x, &y) in xs.iter().zip(ys) {
            let mut p = model.proba(x);
            p[y] -= 1.0;
            for c in 0..classes {
                gb[c] += p[c] / n;
                gw.row_mut(c)
                    .iter_mut()
                    .zip(x)
                    .for_each(|(g, v)| *g += p[c] * v / n);
            }
        }
        for (w, g) in model.w.data_mut().iter_mut().zip(gw.data()) {
            *w -= lr * (g + LOGREG_L2 * *w);
        }
        model.b.iter_mut().zip(&gb).for_each(|(b, g)| *b -= lr * g);
    }
    Ok((model, losses))
}

pub fn logreg_predict(model: &LogReg, x: &[f64]) -> usize {
    argmax(&model.proba(x))
}

/// Majority label of the `k` nearest training points (Euclidean). Equal
/// distances keep dataset order; equal votes go to the lowest class.
pub fn knn_predict(
    train_x: &[Vec<f64>],
    train_y: &[usize],
    query: &[f64],
    k: usize,
) -> Result<usize, BaselineError> {
    if k == 0 {
        return Err(BaselineError::InvalidArgument("k must be >= 1".into()));
    }
    if k > train_x.len() {
        return Err(BaselineError::KTooLarge { k, n: train_x.len() });
    }
    let dist: Vec<f64> = train_x
        .par_iter()
        .map(|x| x.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    let classes = train_y.iter().max().map_or(0, |m| m + 1);
    let mut votes = vec![0usize; classes];
    for &i in &order[..k] {
        votes[train_y[i]] += 1;
    }
    let mut best = 0;
    for c in 1..classes {
        if votes[c] > votes[best] {
            best = c;
        }
    }
    Ok(best)
}

/// The recurrent trainer with the backward direction removed.
pub fn unilstm_train(
    records: &[SegmentRecord],
    split: &SplitAssignment,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainEvalError> {
    let mut cfg = cfg.clone();
    cfg.arch.bidirectional = false;
    train(records, split, &cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub train: TrainConfig,
    pub k: usize,
    pub logreg_epochs: usize,
    pub logreg_lr: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            k: DEFAULT_K,
            logreg_epochs: 500,
            logreg_lr: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: String,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub split_hash: String,
    pub seed: u64,
}

impl ComparisonTable {
    pub fn accuracy(&self, model: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.model == model).map(|r| r.test_accuracy)
    }

    /// `model,test_accuracy,split_hash,seed`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,test_accuracy,split_hash,seed\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:.6},{},{}\n", r.model, r.test_accuracy, self.split_hash, self.seed));
        }
        out
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<22} {:>13}\n", "model", "test accuracy");
        for r in &self.rows {
            out.push_str(&format!("{:<22} {:>12.2}%\n", r.model, 100.0 * r.test_accuracy));
        }
        out.push_str(&format!("split {} seed {}\n", &self.split_hash[..12], self.seed));
        out
    }
}

fn pooled(records: &[&SegmentRecord]) -> Result<(Vec<Vec<f64>>, Vec<usize>), BaselineError> {
    let xs = records
        .iter()
        .map(|r| pool_with_aux_mean(&r.seq, &r.aux_mean))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((xs, records.iter().map(|r| r.genre).collect()))
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len().max(1) as f64
}

/// Train and test all four models on one shared split.
pub fn compare(
    records: &[SegmentRecord],
    split: &SplitAssignment,
    genres: &[String],
    cfg: &CompareConfig,
) -> Result<ComparisonTable, BaselineError> {
    let train_recs = select(records, split, Split::Train);
    let test_recs = select(records, split, Split::Test);
    if test_recs.is_empty() {
        return Err(TrainEvalError::EmptySplit("test").into());
    }
    let (train_x, train_y) = pooled(&train_recs)?;
    let (test_x, test_y) = pooled(&test_recs)?;
    let stats = fit_standardizer(&train_x);
    let train_x = standardize(&train_x, &stats);
    let test_x = standardize(&test_x, &stats);

    let (lr_model, _) = logreg_train(&train_x, &train_y, genres.len(), cfg.logreg_epochs, cfg.logreg_lr)?;
    let lr_pred: Vec<usize> = test_x.iter().map(|x| logreg_predict(&lr_model, x)).collect();

    let knn_pred = test_x
        .iter()
        .map(|q| knn_predict(&train_x, &train_y, q, cfg.k))
        .collect::<Result<Vec<_>, _>>()?;

    let test_segments: Vec<(&FeatureSequence, usize)> = test_recs.iter().map(|r| (&r.seq, r.genre)).collect();
    let recurrent = |bidirectional: bool| -> Result<f64, BaselineError> {
        let outcome = if bidirectional {
            let mut c = cfg.train.clone();
            c.arch.bidirectional = true;
            train(records, split, &c)?
        } else {
            unilstm_train(records, split, &cfg.train)?
        };
        Ok(evaluate(&outcome.params, &outcome.norm, &test_segments, genres)?.accuracy)
    };
    let uni = recurrent(false)?;
    let bi = recurrent(true)?;

    let rows = vec![
        ("logistic_regression", accuracy(&lr_pred, &test_y)),
        (&*format!("knn_{}", cfg.k), accuracy(&knn_pred, &test_y)),
        ("lstm", uni),
        ("bilstm", bi),
    ]
    .into_iter()
    .map(|(m, a)| ComparisonRow {
        model: m.to_string(),
        test_accuracy: a,
    })
    .collect();
    Ok(ComparisonTable {
        rows,
        split_hash: split.hash(),
        seed: cfg.train.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooling_shapes_and_values() {
        let seq = FeatureSequence::new(Tensor2::from_rows(&[vec![0.0, 5.0], vec![2.0, 5.0]]), None, "s");
        let aux = Tensor2::from_rows(&[vec![1.0; 5], vec![3.0; 5]]);
        let p = pool(&seq, &aux).unwrap();
        assert_eq!(p, vec![1.0, 5.0, 1.0, 0.0, 2.0, 2.0, 2.0, 2.0, 2.0]);

        let seq = FeatureSequence::new(Tensor2::filled(4, 38, 0.5), None, "s");
        let p = pool(&seq, &Tensor2::zeros(4, 5)).unwrap();
        assert_eq!(p.len(), 81);
        assert!(p[38..76].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn logreg_separates_two_points() {
        let xs = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let ys = vec![0, 1];
        let (m, losses) = logreg_train(&xs, &ys, 2, 200, 0.5).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            assert_eq!(logreg_predict(&m, x), y);
        }
        // brute-force check: decision boundary separates the whole segment between them
        for i in 1..20 {
            let v = i as f64 / 20.0;
            assert_eq!(logreg_predict(&m, &[v, 0.0]), 0);
            assert_eq!(logreg_predict(&m, &[-v, 0.0]), 1);
        }
        assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn logreg_initial_state() {
        let m = LogReg::zeros(10, 3);
        assert!(m.proba(&[1.0, 2.0, 3.0]).iter().all(|&p| (p - 0.1).abs() < 1e-15));
        assert_eq!(logreg_predict(&m, &[1.0, 2.0, 3.0]), 0);
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0, 1.0]).collect();
        let ys: Vec<usize> = (0..10).collect();
        assert!((m.loss(&xs, &ys, LOGREG_L2) - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn logreg_loss_non_increasing_at_small_lr() {
        let xs: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos(), (i % 3) as f64])
            .collect();
        let ys: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let (_, losses) = logreg_train(&xs, &ys, 3, 100, 1e-3).unwrap();
        assert!(losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn knn_rules() {
        let xs = vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0]];
        let ys = vec![0, 0, 1, 1];
        assert_eq!(knn_predict(&xs, &ys, &[2.0], 1).unwrap(), 1);
        assert_eq!(knn_predict(&xs, &ys, &[1.4], 3).unwrap(), 0);
        // k = n with a 2-2 vote tie
        assert_eq!(knn_predict(&xs, &ys, &[9.0], 4).unwrap(), 0);
        assert!(matches!(knn_predict(&xs, &ys, &[0.0], 5), Err(BaselineError::KTooLarge { k: 5, n: 4 })));
        // k = 1 reproduces training labels
        for (x, &y) in xs.iter().zip(&ys) {
            assert_eq!(knn_predict(&xs, &ys, x, 1).unwrap(), y);
        }
    }

    #[test]
    fn knn_distance_ties_keep_dataset_order() {
        let xs = vec![vec![1.0], vec![-1.0]];
        assert_eq!(knn_predict(&xs, &[1, 0], &[0.0], 1).unwrap(), 1);
        assert_eq!(knn_predict(&xs, &[0, 1], &[0.0], 1).unwrap(), 0);
    }
}
