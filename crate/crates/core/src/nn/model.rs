//! Stacked (bi)directional LSTM classifier.
//!
//! Each recurrent layer emits `[→h_t ; ←h_t]` for every frame and is
//! followed by batch normalization over all frames of the batch. A ReLU
//! dense layer and a softmax output layer form the head, applied either to
//! every frame (frame-level) or once per sequence to `[→h_T ; ←h_1]`
//! (sequence-level).

use rand::Rng;

use super::batchnorm::{BatchNormParams, BnCache, BnMode};
use super::loss::{nll, softmax_rows};
use super::lstm::{backward_direction, concat_directions, run_direction, stack_time_major, DirectionCache, LstmCellParams};
use super::tensor::Tensor2;
use super::NnError;

/// Which softmax head produces the class distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// One distribution per sequence from the final states of both directions.
    Sequence,
    /// One distribution per frame.
    Frame,
}

impl Head {
    pub fn as_str(&self) -> &'static str {
        match self {
            Head::Sequence => "sequence",
            Head::Frame => "frame",
        }
    }
}

impl std::str::FromStr for Head {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequence" => Ok(Head::Sequence),
            "frame" => Ok(Head::Frame),
            other => Err(format!("unknown head '{other}' (expected sequence|frame)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub dense_hidden: usize,
    pub classes: usize,
    pub head: Head,
    pub bidirectional: bool,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            input_dim: 38,
            hidden: 64,
            layers: 2,
            dense_hidden: 64,
            classes: 10,
            head: Head::Sequence,
            bidirectional: true,
        }
    }
}

impl Architecture {
    pub fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }

    /// Width of each recurrent layer's output.
    pub fn layer_output(&self) -> usize {
        self.directions() * self.hidden
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.input_dim == 0
            || self.hidden == 0
            || self.layers == 0
            || self.dense_hidden == 0
            || self.classes < 2
        {
            return Err(NnError::DimensionMismatch(format!(
                "invalid architecture {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// `out x in`.
    pub w: Tensor2,
    /// `1 x out`.
    pub b: Tensor2,
}

impl DenseParams {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            w: Tensor2::zeros(output, input),
            b: Tensor2::zeros(1, output),
        }
    }

    fn init<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        use rand::RngExt;
        let mut p = Self::zeros(input, output);
        let limit = (6.0 / (input + output) as f64).sqrt();
        p.w.data_mut()
            .iter_mut()
            .for_each(|v| *v = rng.random_range(-limit..limit));
        p
    }

    fn forward(&self, x: &Tensor2) -> Tensor2 {
        let mut out = Tensor2::zeros(x.rows(), self.w.rows());
        out.gemm(1.0, x.view(), self.w.view().t(), 0.0);
        let b = self.b.data();
        for r in 0..out.rows() {
            out.row_mut(r).iter_mut().zip(b).for_each(|(o, b)| *o += b);
        }
        out
    }

    /// Accumulate parameter gradients and return the input gradient.
    fn backward(&self, x: &Tensor2, dy: &Tensor2, grad: &mut DenseParams) -> Tensor2 {
        grad.w.gemm(1.0, dy.view().t(), x.view(), 1.0);
        grad.b.add_assign(&dy.column_sums());
        Tensor2::matmul(dy.view(), self.w.view())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub fwd: LstmCellParams,
    pub bwd: Option<LstmCellParams>,
    pub bn: BatchNormParams,
}

/// Every tensor of the network.
///
/// Gradients reuse this type; their BN running statistics are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: Architecture,
    pub layers: Vec<LayerParams>,
    pub dense_hidden: DenseParams,
    pub dense_out: DenseParams,
}

#[derive(Debug, Clone)]
struct LayerTrace {
    input: Tensor2,
    fwd: DirectionCache,
    bwd: Option<DirectionCache>,
    bn: BnCache,
}

/// Cached intermediates of one batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub batch: usize,
    pub t_len: usize,
    layers: Vec<LayerTrace>,
    /// Output of the last BN layer, `TB x layer_output`.
    top: Tensor2,
    head_in: Tensor2,
    z1: Tensor2,
    a1: Tensor2,
    /// Softmax output: `B x G` (sequence) or `TB x G` time-major (frame).
    pub probs: Tensor2,
    shape_tag: (usize, usize, usize, usize),
}

impl ForwardTrace {
    /// Class distribution(s) of batch element `b`: one row for the sequence
    /// head, `T` rows for the frame head.
    pub fn probs_for(&self, b: usize) -> Tensor2 {
        if self.probs.rows() == self.batch {
            Tensor2::from_vec(1, self.probs.cols(), self.probs.row(b).to_vec())
        } else {
            let mut out = Tensor2::zeros(self.t_len, self.probs.cols());
            for t in 0..self.t_len {
                out.row_mut(t).copy_from_slice(self.probs.row(t * self.batch + b));
            }
            out
        }
    }

    /// Per-element distribution; frame outputs are averaged over time.
    pub fn sequence_probs(&self, b: usize) -> Vec<f64> {
        let p = self.probs_for(b);
        let n = p.rows() as f64;
        p.column_sums().data().iter().map(|v| v / n).collect()
    }

    pub fn bn_caches(&self) -> impl Iterator<Item = &BnCache> {
        self.layers.iter().map(|l| &l.bn)
    }
}

impl ModelParams {
    pub fn init<R: Rng>(arch: Architecture, rng: &mut R) -> Result<Self, NnError> {
        arch.validate()?;
        let mut layers = Vec::with_capacity(arch.layers);
        for l in 0..arch.layers {
            let input = if l == 0 { arch.input_dim } else { arch.layer_output() };
            let fwd = LstmCellParams::init(input, arch.hidden, rng);
            let bwd = arch
                .bidirectional
                .then(|| LstmCellParams::init(input, arch.hidden, rng));
            layers.push(LayerParams {
                fwd,
                bwd,
                bn: BatchNormParams::new(arch.layer_output()),
            });
        }
        let dense_hidden = DenseParams::init(arch.layer_output(), arch.dense_hidden, rng);
        let dense_out = DenseParams::init(arch.dense_hidden, arch.classes, rng);
        Ok(Self {
            arch,
            layers,
            dense_hidden,
            dense_out,
        })
    }

    /// Same shapes, every value zero (running variance included).
    pub fn zeros_like(&self) -> Self {
        let zero = |t: &Tensor2| Tensor2::zeros(t.rows(), t.cols());
        Self {
            arch: self.arch,
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    fwd: LstmCellParams::from_tensors(zero(&l.fwd.w), zero(&l.fwd.b)).unwrap(),
                    bwd: l
                        .bwd
                        .as_ref()
                        .map(|c| LstmCellParams::from_tensors(zero(&c.w), zero(&c.b)).unwrap()),
                    bn: BatchNormParams {
                        gamma: zero(&l.bn.gamma),
                        beta: zero(&l.bn.beta),
                        running_mean: zero(&l.bn.running_mean),
                        running_var: zero(&l.bn.running_var),
                    },
                })
                .collect(),
            dense_hidden: DenseParams::zeros(self.dense_hidden.w.cols(), self.dense_hidden.w.rows()),
            dense_out: DenseParams::zeros(self.dense_out.w.cols(), self.dense_out.w.rows()),
        }
    }

    /// Trainable tensors in a fixed order, with stable names.
    pub fn named_trainable(&self) -> Vec<(String, &Tensor2)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("layer{l}.fwd.w"), &layer.fwd.w));
            out.push((format!("layer{l}.fwd.b"), &layer.fwd.b));
            if let Some(bwd) = &layer.bwd {
                out.push((format!("layer{l}.bwd.w"), &bwd.w));
                out.push((format!("layer{l}.bwd.b"), &bwd.b));
            }
            out.push((format!("layer{l}.bn.gamma"), &layer.bn.gamma));
            out.push((format!("layer{l}.bn.beta"), &layer.bn.beta));
        }
        out.push(("dense_hidden.w".into(), &self.dense_hidden.w));
        out.push(("dense_hidden.b".into(), &self.dense_hidden.b));
        out.push(("dense_out.w".into(), &self.dense_out.w));
        out.push(("dense_out.b".into(), &self.dense_out.b));
        out
    }

    pub fn trainable(&self) -> Vec<&Tensor2> {
        self.named_trainable().into_iter().map(|(_, t)| t).collect()
    }

    /// Mutable trainable tensors, same order as [`ModelParams::trainable`].
    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut out = Vec::new();
        for layer in self.layers.iter_mut() {
            out.push(&mut layer.fwd.w);
            out.push(&mut layer.fwd.b);
            if let Some(bwd) = layer.bwd.as_mut() {
                out.push(&mut bwd.w);
                out.push(&mut bwd.b);
            }
            out.push(&mut layer.bn.gamma);
            out.push(&mut layer.bn.beta);
        }
        out.push(&mut self.dense_hidden.w);
        out.push(&mut self.dense_hidden.b);
        out.push(&mut self.dense_out.w);
        out.push(&mut self.dense_out.b);
        out
    }

    /// Every stored tensor: trainable ones followed by BN running statistics.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut out = self.named_trainable();
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("layer{l}.bn.running_mean"), &layer.bn.running_mean));
            out.push((format!("layer{l}.bn.running_var"), &layer.bn.running_var));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.trainable().iter().map(|t| t.rows() * t.cols()).sum()
    }

    fn shape_tag(&self, batch: usize, t_len: usize) -> (usize, usize, usize, usize) {
        (batch, t_len, self.arch.layer_output(), self.arch.classes)
    }

    /// Forward pass over a time-major batch (`T*B x d`).
    pub fn forward(&self, x: &Tensor2, batch: usize, mode: BnMode) -> Result<ForwardTrace, NnError> {
        if batch == 0 || !x.rows().is_multiple_of(batch) || x.rows() == 0 {
            return Err(NnError::DimensionMismatch(format!(
                "{} rows cannot hold a batch of {batch}",
                x.rows()
            )));
        }
        if x.cols() != self.arch.input_dim {
            return Err(NnError::DimensionMismatch(format!(
                "input has {} features, model expects {}",
                x.cols(),
                self.arch.input_dim
            )));
        }
        if !x.is_finite() {
            return Err(NnError::NonFinite("model input".into()));
        }
        let t_len = x.rows() / batch;
        let h = self.arch.hidden;

        let mut layers = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for layer in &self.layers {
            let fwd = run_direction(&layer.fwd, &current, t_len, batch, false);
            let bwd = layer
                .bwd
                .as_ref()
                .map(|p| run_direction(p, &current, t_len, batch, true));
            let raw = match &bwd {
                Some(b) => concat_directions(&fwd.h, &b.h),
                None => fwd.h.clone(),
            };
            let (normed, bn) = layer.bn.forward(&raw, mode)?;
            layers.push(LayerTrace {
                input: std::mem::replace(&mut current, normed),
                fwd,
                bwd,
                bn,
            });
        }
        let top = current;

        let head_in = match self.arch.head {
            Head::Frame => top.clone(),
            Head::Sequence => {
                let width = self.arch.layer_output();
                let mut s = Tensor2::zeros(batch, width);
                for b in 0..batch {
                    let row = s.row_mut(b);
                    // →h_T from the last frame, ←h_1 from the first
                    row[..h].copy_from_slice(&top.row((t_len - 1) * batch + b)[..h]);
                    if self.arch.bidirectional {
                        row[h..].copy_from_slice(&top.row(b)[h..2 * h]);
                    }
                }
                s
            }
        };
        let z1 = self.dense_hidden.forward(&head_in);
        let mut a1 = z1.clone();
        a1.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        let logits = self.dense_out.forward(&a1);
        let probs = softmax_rows(&logits);

        Ok(ForwardTrace {
            batch,
            t_len,
            layers,
            top,
            head_in,
            z1,
            a1,
            probs,
            shape_tag: self.shape_tag(batch, t_len),
        })
    }

    /// Convenience: time-major stacking then [`ModelParams::forward`].
    pub fn forward_sequences(&self, seqs: &[&Tensor2], mode: BnMode) -> Result<ForwardTrace, NnError> {
        let x = stack_time_major(seqs)?;
        self.forward(&x, seqs.len(), mode)
    }

    /// Mean per-example cross-entropy of a trace (frame head sums over frames).
    pub fn loss(&self, trace: &ForwardTrace, targets: &[usize]) -> Result<f64, NnError> {
        self.check_targets(trace, targets)?;
        let mut total = 0.0;
        for r in 0..trace.probs.rows() {
            total += nll(trace.probs.row(r), targets[r % trace.batch])?;
        }
        Ok(total / trace.batch as f64)
    }

    fn check_targets(&self, trace: &ForwardTrace, targets: &[usize]) -> Result<(), NnError> {
        if targets.len() != trace.batch {
            return Err(NnError::DimensionMismatch(format!(
                "{} targets for batch of {}",
                targets.len(),
                trace.batch
            )));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= self.arch.classes) {
            return Err(NnError::TargetOutOfRange {
                target: t,
                classes: self.arch.classes,
            });
        }
        Ok(())
    }

    /// Exact gradients of [`ModelParams::loss`] w.r.t. every trainable tensor.
    pub fn backward(&self, trace: &ForwardTrace, targets: &[usize]) -> Result<ModelParams, NnError> {
        if trace.shape_tag != self.shape_tag(trace.batch, trace.t_len)
            || trace.layers.len() != self.layers.len()
        {
            return Err(NnError::StaleTrace);
        }
        self.check_targets(trace, targets)?;
        let (batch, t_len) = (trace.batch, trace.t_len);
        let h = self.arch.hidden;
        let mut grad = self.zeros_like();

        // softmax + cross-entropy: dlogits = (p - y) / B
        let mut dlogits = trace.probs.clone();
        for r in 0..dlogits.rows() {
            let row = dlogits.row_mut(r);
            row[targets[r % batch]] -= 1.0;
            row.iter_mut().for_each(|v| *v /= batch as f64);
        }
        let mut da1 = self.dense_out.backward(&trace.a1, &dlogits, &mut grad.dense_out);
        for (d, z) in da1.data_mut().iter_mut().zip(trace.z1.data()) {
            if *z <= 0.0 {
                *d = 0.0;
            }
        }
        let dhead = self
            .dense_hidden
            .backward(&trace.head_in, &da1, &mut grad.dense_hidden);

        let mut dtop = match self.arch.head {
            Head::Frame => dhead,
            Head::Sequence => {
                let mut d = Tensor2::zeros(trace.top.rows(), trace.top.cols());
                for b in 0..batch {
                    let src = dhead.row(b);
                    let last = (t_len - 1) * batch + b;
                    for j in 0..h {
                        let v = d.get(last, j) + src[j];
                        d.set(last, j, v);
                    }
                    if self.arch.bidirectional {
                        for j in h..2 * h {
                            let v = d.get(b, j) + src[j];
                            d.set(b, j, v);
                        }
                    }
                }
                d
            }
        };

        for (l, (layer, lt)) in self.layers.iter().zip(&trace.layers).enumerate().rev() {
            let g = &mut grad.layers[l];
            let draw = layer.bn.backward(&lt.bn, &dtop, &mut g.bn);
            let mut dh_f = Tensor2::zeros(draw.rows(), h);
            for r in 0..draw.rows() {
                dh_f.row_mut(r).copy_from_slice(&draw.row(r)[..h]);
            }
            let mut dx = backward_direction(&layer.fwd, &lt.input, &lt.fwd, &dh_f, t_len, batch, &mut g.fwd);
            if let (Some(p), Some(cache), Some(gb)) = (&layer.bwd, &lt.bwd, g.bwd.as_mut()) {
                let mut dh_b = Tensor2::zeros(draw.rows(), h);
                for r in 0..draw.rows() {
                    dh_b.row_mut(r).copy_from_slice(&draw.row(r)[h..2 * h]);
                }
                dx.add_assign(&backward_direction(p, &lt.input, cache, &dh_b, t_len, batch, gb));
            }
            dtop = dx;
        }
        Ok(grad)
    }

    /// Fold a training pass's BN batch statistics into the running estimates.
    pub fn update_bn_running(&mut self, trace: &ForwardTrace) {
        for (layer, lt) in self.layers.iter_mut().zip(&trace.layers) {
            if lt.bn.mode == BnMode::Train {
                layer.bn.update_running(&lt.bn);
            }
        }
    }

    /// Inference-mode class distribution(s) for one `T x d` sequence.
    pub fn predict(&self, seq: &Tensor2) -> Result<Tensor2, NnError> {
        Ok(self.forward_sequences(&[seq], BnMode::Infer)?.probs_for(0))
    }

    /// Inference over many sequences in chunks; one averaged distribution each.
    pub fn predict_many(&self, seqs: &[&Tensor2], chunk: usize) -> Result<Vec<Vec<f64>>, NnError> {
        let mut out = Vec::with_capacity(seqs.len());
        for part in seqs.chunks(chunk.max(1)) {
            let trace = self.forward_sequences(part, BnMode::Infer)?;
            out.extend((0..part.len()).map(|b| trace.sequence_probs(b)));
        }
        Ok(out)
    }
}

/// Class distribution(s) for one normalized sequence: `1 x G` for the
/// sequence head, `T x G` for the frame head.
pub fn model_forward(seq: &Tensor2, params: &ModelParams, mode: BnMode) -> Result<Tensor2, NnError> {
    Ok(params.forward_sequences(&[seq], mode)?.probs_for(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny(head: Head, bidirectional: bool, rng: &mut ChaCha8Rng) -> ModelParams {
        ModelParams::init(
            Architecture {
                input_dim: 3,
                hidden: 2,
                layers: 2,
                dense_hidden: 4,
                classes: 3,
                head,
                bidirectional,
            },
            rng,
        )
        .unwrap()
    }

    fn random_seq(rng: &mut ChaCha8Rng, t: usize, d: usize) -> Tensor2 {
        Tensor2::from_vec(t, d, (0..t * d).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn zero_output_layer_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = ModelParams::init(Architecture { input_dim: 3, hidden: 4, ..Default::default() }, &mut rng).unwrap();
        m.dense_out.w.fill(0.0);
        m.dense_out.b.fill(0.0);
        let p = model_forward(&random_seq(&mut rng, 5, 3), &m, BnMode::Infer).unwrap();
        assert_eq!(p.shape(), (1, 10));
        assert!(p.data().iter().all(|&v| (v - 0.1).abs() < 1e-15));
    }

    #[test]
    fn outputs_are_distributions_in_both_heads() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for head in [Head::Sequence, Head::Frame] {
            let m = tiny(head, true, &mut rng);
            let seqs: Vec<Tensor2> = (0..3).map(|_| random_seq(&mut rng, 6, 3)).collect();
            let refs: Vec<&Tensor2> = seqs.iter().collect();
            let tr = m.forward_sequences(&refs, BnMode::Train).unwrap();
            let rows = if head == Head::Sequence { 3 } else { 18 };
            assert_eq!(tr.probs.rows(), rows);
            for r in 0..rows {
                let s: f64 = tr.probs.row(r).iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
                assert!(tr.probs.row(r).iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn uniform_output_bias_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut m = tiny(Head::Sequence, true, &mut rng);
        m.dense_out.w.fill(0.0);
        m.dense_out.b.fill(0.0);
        let seqs = [random_seq(&mut rng, 4, 3), random_seq(&mut rng, 4, 3)];
        let tr = m.forward_sequences(&[&seqs[0], &seqs[1]], BnMode::Train).unwrap();
        let g = m.backward(&tr, &[0, 2]).unwrap();
        // mean over the batch of (1/3 - y)
        let expected = [(1.0 / 3.0 - 1.0 + 1.0 / 3.0) / 2.0, 1.0 / 3.0, (1.0 / 3.0 + 1.0 / 3.0 - 1.0) / 2.0];
        for (got, want) in g.dense_out.b.data().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_prediction_has_no_output_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = tiny(Head::Sequence, true, &mut rng);
        m.dense_out.w.fill(0.0);
        m.dense_out.b.data_mut().copy_from_slice(&[60.0, 0.0, 0.0]);
        let seqs = [random_seq(&mut rng, 4, 3), random_seq(&mut rng, 4, 3)];
        let tr = m.forward_sequences(&[&seqs[0], &seqs[1]], BnMode::Train).unwrap();
        assert!(m.loss(&tr, &[0, 0]).unwrap() < 1e-20);
        let g = m.backward(&tr, &[0, 0]).unwrap();
        assert!(g.dense_out.w.data().iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn stale_trace_and_bad_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = tiny(Head::Sequence, true, &mut rng);
        let other = tiny(Head::Sequence, false, &mut rng);
        let seqs = [random_seq(&mut rng, 4, 3), random_seq(&mut rng, 4, 3)];
        let tr = m.forward_sequences(&[&seqs[0], &seqs[1]], BnMode::Train).unwrap();
        assert!(matches!(other.backward(&tr, &[0, 1]), Err(NnError::StaleTrace)));
        assert!(matches!(m.backward(&tr, &[0, 3]), Err(NnError::TargetOutOfRange { .. })));
    }

    #[test]
    fn unidirectional_has_fewer_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bi = ModelParams::init(Architecture::default(), &mut rng).unwrap();
        let uni = ModelParams::init(Architecture { bidirectional: false, ..Default::default() }, &mut rng).unwrap();
        assert!(uni.parameter_count() < bi.parameter_count());
    }

    #[test]
    fn forward_rejects_non_finite_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = tiny(Head::Frame, true, &mut rng);
        let mut s = random_seq(&mut rng, 3, 3);
        s.set(1, 1, f64::NAN);
        assert!(matches!(model_forward(&s, &m, BnMode::Infer), Err(NnError::NonFinite(_))));
    }
}
