//! LSTM cell and batched, time-major recurrent passes with exact BPTT.
//!
//! Gate weights act on the concatenation `[h_{t-1}; x_t]` and are stored as
//! one `4h x (h+d)` matrix whose row blocks are, in order, the forget,
//! input, output and candidate gates:
//!
//! ```text
//! f = σ(W_f [h;x] + b_f)     i = σ(W_i [h;x] + b_i)
//! o = σ(W_o [h;x] + b_o)     g = tanh(W_g [h;x] + b_g)
//! c_t = f ⊙ c_{t-1} + i ⊙ g  h_t = o ⊙ tanh(c_t)
//! ```
//!
//! Batched sequences are laid out time-major: row `t*B + b` holds step `t`
//! of batch element `b`.

use rand::{Rng, RngExt};

use super::tensor::{gemm_into, Tensor2, View};
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Output = 2,
    Candidate = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    /// `4h x (h+d)`, columns `0..h` act on `h_{t-1}`, `h..h+d` on `x_t`.
    pub w: Tensor2,
    /// `1 x 4h`.
    pub b: Tensor2,
    hidden: usize,
    input: usize,
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmCellParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Tensor2::zeros(4 * hidden, hidden + input),
            b: Tensor2::zeros(1, 4 * hidden),
            hidden,
            input,
        }
    }

    /// Glorot-uniform gate weights, forget bias 1, other biases 0.
    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input, hidden);
        let limit = (6.0 / (hidden + input + hidden) as f64).sqrt();
        p.w.data_mut()
            .iter_mut()
            .for_each(|v| *v = rng.random_range(-limit..limit));
        p.b.data_mut()[..hidden].iter_mut().for_each(|v| *v = 1.0);
        p
    }

    /// Rebuild from stored tensors, checking their shapes.
    pub fn from_tensors(w: Tensor2, b: Tensor2) -> Result<Self, NnError> {
        let (rows, cols) = w.shape();
        if rows % 4 != 0 || rows == 0 || cols < rows / 4 || b.shape() != (1, rows) {
            return Err(NnError::DimensionMismatch(format!(
                "LSTM weights {rows}x{cols} with bias {:?}",
                b.shape()
            )));
        }
        let hidden = rows / 4;
        Ok(Self {
            w,
            b,
            hidden,
            input: cols - hidden,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input(&self) -> usize {
        self.input
    }

    /// `h x (h+d)` weight block of one gate.
    pub fn gate_weights(&self, gate: Gate) -> &[f64] {
        self.w.rows_slice(gate as usize * self.hidden, self.hidden)
    }

    pub fn gate_bias(&self, gate: Gate) -> &[f64] {
        let h = self.hidden;
        &self.b.data()[gate as usize * h..(gate as usize + 1) * h]
    }

    fn recurrent(&self) -> View<'_> {
        self.w.view_cols(0, self.hidden)
    }

    fn input_weights(&self) -> View<'_> {
        self.w.view_cols(self.hidden, self.input)
    }
}

/// One unbatched LSTM step, returning `(h_t, c_t)`.
pub fn lstm_cell_step(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    p: &LstmCellParams,
) -> Result<(Vec<f64>, Vec<f64>), NnError> {
    let (h, d) = (p.hidden, p.input);
    if x.len() != d || h_prev.len() != h || c_prev.len() != h {
        return Err(NnError::DimensionMismatch(format!(
            "cell expects x[{d}], h[{h}], c[{h}]; got x[{}], h[{}], c[{}]",
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    if x.iter().chain(h_prev).chain(c_prev).any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("LSTM step input".into()));
    }
    let pre = |gate: Gate, j: usize| -> f64 {
        let row = &p.gate_weights(gate)[j * (h + d)..(j + 1) * (h + d)];
        let mut z = p.gate_bias(gate)[j];
        for (w, v) in row.iter().zip(h_prev.iter().chain(x)) {
            z += w * v;
        }
        z
    };
    let mut h_t = vec![0.0; h];
    let mut c_t = vec![0.0; h];
    for j in 0..h {
        let f = sigmoid(pre(Gate::Forget, j));
        let i = sigmoid(pre(Gate::Input, j));
        let o = sigmoid(pre(Gate::Output, j));
        let g = pre(Gate::Candidate, j).tanh();
        c_t[j] = f * c_prev[j] + i * g;
        h_t[j] = o * c_t[j].tanh();
    }
    Ok((h_t, c_t))
}

/// Activations kept from one directional pass.
#[derive(Debug, Clone)]
pub struct DirectionCache {
    /// Activated gates `[f | i | o | g]`, `TB x 4h`.
    pub gates: Tensor2,
    pub c: Tensor2,
    pub tanh_c: Tensor2,
    /// Hidden states, `TB x h`.
    pub h: Tensor2,
    pub reverse: bool,
}

/// Time step processed immediately before `t` in the given direction.
#[inline]
fn prev_step(t: usize, t_len: usize, reverse: bool) -> Option<usize> {
    if reverse {
        (t + 1 < t_len).then_some(t + 1)
    } else {
        t.checked_sub(1)
    }
}

/// Run one direction over a time-major batch from zero initial states.
pub fn run_direction(
    p: &LstmCellParams,
    x: &Tensor2,
    t_len: usize,
    batch: usize,
    reverse: bool,
) -> DirectionCache {
    let h = p.hidden;
    let g4 = 4 * h;
    debug_assert_eq!(x.rows(), t_len * batch);
    debug_assert_eq!(x.cols(), p.input);

    let mut gates = Tensor2::zeros(t_len * batch, g4);
    // input projection for every step at once
    gates.gemm(1.0, x.view(), p.input_weights().t(), 0.0);
    let bias = p.b.data();
    for r in 0..gates.rows() {
        gates.row_mut(r).iter_mut().zip(bias).for_each(|(z, b)| *z += b);
    }

    let mut c = Tensor2::zeros(t_len * batch, h);
    let mut tanh_c = Tensor2::zeros(t_len * batch, h);
    let mut hs = Tensor2::zeros(t_len * batch, h);
    let order: Vec<usize> = if reverse {
        (0..t_len).rev().collect()
    } else {
        (0..t_len).collect()
    };
    for &t in &order {
        let prev = prev_step(t, t_len, reverse);
        if let Some(tp) = prev {
            let hp = View::from_slice(hs.rows_slice(tp * batch, batch), batch, h);
            gemm_into(1.0, hp, p.recurrent().t(), 1.0, gates.data_mut(), t * batch * g4, batch, g4, g4);
        }
        for b in 0..batch {
            let r = t * batch + b;
            let rp = prev.map(|tp| tp * batch + b);
            for j in 0..h {
                let z = gates.row_mut(r);
                let f = sigmoid(z[j]);
                let i = sigmoid(z[h + j]);
                let o = sigmoid(z[2 * h + j]);
                let g = z[3 * h + j].tanh();
                z[j] = f;
                z[h + j] = i;
                z[2 * h + j] = o;
                z[3 * h + j] = g;
                let cp = rp.map_or(0.0, |rp| c.get(rp, j));
                let ct = f * cp + i * g;
                let tc = ct.tanh();
                c.set(r, j, ct);
                tanh_c.set(r, j, tc);
                hs.set(r, j, o * tc);
            }
        }
    }
    DirectionCache {
        gates,
        c,
        tanh_c,
        h: hs,
        reverse,
    }
}

/// Backpropagate through one direction.
///
/// `dh_out` is the loss gradient w.r.t. every emitted hidden state (`TB x h`).
/// Weight and bias gradients are accumulated into `grad`; the gradient w.r.t.
/// the direction's input (`TB x d`) is returned.
pub fn backward_direction(
    p: &LstmCellParams,
    x: &Tensor2,
    cache: &DirectionCache,
    dh_out: &Tensor2,
    t_len: usize,
    batch: usize,
    grad: &mut LstmCellParams,
) -> Tensor2 {
    let h = p.hidden;
    let g4 = 4 * h;
    let reverse = cache.reverse;
    let mut dz = Tensor2::zeros(t_len * batch, g4);
    let mut dh_next = Tensor2::zeros(batch, h);
    let mut dc_next = Tensor2::zeros(batch, h);

    let order: Vec<usize> = if reverse {
        (0..t_len).collect()
    } else {
        (0..t_len).rev().collect()
    };
    for &t in &order {
        let prev = prev_step(t, t_len, reverse);
        for b in 0..batch {
            let r = t * batch + b;
            let rp = prev.map(|tp| tp * batch + b);
            let gates = cache.gates.row(r);
            let dzr = dz.row_mut(r);
            for j in 0..h {
                let (f, i, o, g) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let tc = cache.tanh_c.get(r, j);
                let dh = dh_out.get(r, j) + dh_next.get(b, j);
                let dc = dc_next.get(b, j) + dh * o * (1.0 - tc * tc);
                let cp = rp.map_or(0.0, |rp| cache.c.get(rp, j));
                dzr[j] = dc * cp * f * (1.0 - f);
                dzr[h + j] = dc * g * i * (1.0 - i);
                dzr[2 * h + j] = dh * tc * o * (1.0 - o);
                dzr[3 * h + j] = dc * i * (1.0 - g * g);
                dc_next.set(b, j, dc * f);
            }
        }
        if prev.is_some() {
            let dzt = View::from_slice(dz.rows_slice(t * batch, batch), batch, g4);
            dh_next.gemm(1.0, dzt, p.recurrent(), 0.0);
        }
    }

    // h_{t-1} for every row, zero where the direction starts
    let mut h_prev = Tensor2::zeros(t_len * batch, h);
    for t in 0..t_len {
        if let Some(tp) = prev_step(t, t_len, reverse) {
            h_prev
                .rows_slice_mut(t * batch, batch)
                .copy_from_slice(cache.h.rows_slice(tp * batch, batch));
        }
    }
    let ld = h + p.input;
    gemm_into(1.0, dz.view().t(), h_prev.view(), 1.0, grad.w.data_mut(), 0, g4, h, ld);
    gemm_into(1.0, dz.view().t(), x.view(), 1.0, grad.w.data_mut(), h, g4, p.input, ld);
    grad.b.add_assign(&dz.column_sums());

    Tensor2::matmul(dz.view(), p.input_weights())
}

/// Interleave equal-length sequences into a time-major batch.
pub fn stack_time_major(seqs: &[&Tensor2]) -> Result<Tensor2, NnError> {
    let first = seqs
        .first()
        .ok_or_else(|| NnError::DimensionMismatch("empty batch".into()))?;
    let (t_len, d) = first.shape();
    let batch = seqs.len();
    let mut out = Tensor2::zeros(t_len * batch, d);
    for (b, s) in seqs.iter().enumerate() {
        if s.shape() != (t_len, d) {
            return Err(NnError::DimensionMismatch(format!(
                "batch element {b} is {:?}, expected {:?}",
                s.shape(),
                (t_len, d)
            )));
        }
        if !s.is_finite() {
            return Err(NnError::NonFinite(format!("batch element {b}")));
        }
        for t in 0..t_len {
            out.row_mut(t * batch + b).copy_from_slice(s.row(t));
        }
    }
    Ok(out)
}

/// Bidirectional pass over a single `T x d` sequence, giving `T x 2h` rows
/// `[→h_t ; ←h_t]`.
pub fn bilstm_layer(
    seq: &Tensor2,
    fwd: &LstmCellParams,
    bwd: &LstmCellParams,
) -> Result<Tensor2, NnError> {
    if seq.cols() != fwd.input || seq.cols() != bwd.input || fwd.hidden != bwd.hidden {
        return Err(NnError::DimensionMismatch(format!(
            "sequence has {} columns; cells expect {} / {}",
            seq.cols(),
            fwd.input,
            bwd.input
        )));
    }
    if !seq.is_finite() {
        return Err(NnError::NonFinite("sequence".into()));
    }
    let t_len = seq.rows();
    let f = run_direction(fwd, seq, t_len, 1, false);
    let b = run_direction(bwd, seq, t_len, 1, true);
    Ok(concat_directions(&f.h, &b.h))
}

pub(crate) fn concat_directions(f: &Tensor2, b: &Tensor2) -> Tensor2 {
    let h = f.cols();
    let mut out = Tensor2::zeros(f.rows(), 2 * h);
    for r in 0..f.rows() {
        let row = out.row_mut(r);
        row[..h].copy_from_slice(f.row(r));
        row[h..].copy_from_slice(b.row(r));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_step() {
        let p = LstmCellParams::zeros(3, 2);
        let (h, c) = lstm_cell_step(&[1.0, -2.0, 0.5], &[0.3, 0.1], &[2.0, -1.0], &p).unwrap();
        assert_eq!(c, vec![1.0, -0.5]);
        assert_eq!(h, vec![0.5 * 1f64.tanh(), 0.5 * (-0.5f64).tanh()]);
    }

    #[test]
    fn saturated_forget_gate_scalar_case() {
        let mut p = LstmCellParams::zeros(1, 1);
        p.b.data_mut()[0] = 10.0; // b_f
        let (h, c) = lstm_cell_step(&[0.7], &[0.0], &[2.0], &p).unwrap();
        // scripted: c = sigma(10)*2 + 0.5*tanh(0); h = 0.5*tanh(c)
        let expected_c = 2.0 / (1.0 + (-10f64).exp());
        assert!((c[0] - expected_c).abs() < 1e-15);
        assert!((c[0] - 1.99991).abs() < 1e-5);
        assert!((h[0] - 0.48201).abs() < 1e-5);
    }

    #[test]
    fn non_finite_input_rejected() {
        let p = LstmCellParams::zeros(1, 1);
        assert!(matches!(
            lstm_cell_step(&[f64::NAN], &[0.0], &[0.0], &p),
            Err(NnError::NonFinite(_))
        ));
        assert!(matches!(
            lstm_cell_step(&[0.0, 1.0], &[0.0], &[0.0], &p),
            Err(NnError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn batched_pass_matches_stepwise_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (d, h, t_len, batch) = (4, 3, 5, 2);
        let p = LstmCellParams::init(d, h, &mut rng);
        let seqs: Vec<Tensor2> = (0..batch)
            .map(|_| {
                Tensor2::from_vec(t_len, d, (0..t_len * d).map(|_| rng.random_range(-1.0..1.0)).collect())
            })
            .collect();
        let refs: Vec<&Tensor2> = seqs.iter().collect();
        let x = stack_time_major(&refs).unwrap();
        for reverse in [false, true] {
            let cache = run_direction(&p, &x, t_len, batch, reverse);
            for (b, s) in seqs.iter().enumerate() {
                let (mut hp, mut cp) = (vec![0.0; h], vec![0.0; h]);
                let steps: Vec<usize> = if reverse { (0..t_len).rev().collect() } else { (0..t_len).collect() };
                for t in steps {
                    let (hn, cn) = lstm_cell_step(s.row(t), &hp, &cp, &p).unwrap();
                    let got = cache.h.row(t * batch + b);
                    for j in 0..h {
                        assert!((got[j] - hn[j]).abs() < 1e-14);
                    }
                    hp = hn;
                    cp = cn;
                }
            }
        }
    }

    #[test]
    fn single_step_bilstm_uses_zero_state_both_ways() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = LstmCellParams::init(3, 2, &mut rng);
        let b = LstmCellParams::init(3, 2, &mut rng);
        let x = Tensor2::from_vec(1, 3, vec![0.2, -0.4, 0.9]);
        let out = bilstm_layer(&x, &f, &b).unwrap();
        let (hf, _) = lstm_cell_step(x.row(0), &[0.0; 2], &[0.0; 2], &f).unwrap();
        let (hb, _) = lstm_cell_step(x.row(0), &[0.0; 2], &[0.0; 2], &b).unwrap();
        for (a, e) in out.row(0).iter().zip([hf, hb].concat()) {
            assert!((a - e).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_weights_give_zero_hidden_states() {
        // c_t = 0.5 c_{t-1} + 0.5 * tanh(0) = 0 from a zero start, so h_t = 0
        let p = LstmCellParams::zeros(2, 3);
        let x = Tensor2::from_vec(4, 2, vec![1.0, 2.0, -3.0, 0.5, 0.0, 1.0, 7.0, -7.0]);
        let out = bilstm_layer(&x, &p, &p).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }
}
