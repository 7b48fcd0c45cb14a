//! Softmax and cross-entropy.

use super::tensor::Tensor2;
use super::NnError;

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Numerically stable softmax of one row of logits.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn softmax_rows(logits: &Tensor2) -> Tensor2 {
    let mut out = Tensor2::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        out.row_mut(r).copy_from_slice(&softmax(logits.row(r)));
    }
    out
}

/// `-log p[target]`, with `p` floored at [`PROB_FLOOR`].
pub fn nll(probs: &[f64], target: usize) -> Result<f64, NnError> {
    let p = probs.get(target).ok_or(NnError::TargetOutOfRange {
        target,
        classes: probs.len(),
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Cross-entropy summed over every row of `probs`, each row scored against
/// the same class. A sequence-level output has one row; frame-level has `T`.
pub fn cross_entropy(probs: &Tensor2, target: usize) -> Result<f64, NnError> {
    (0..probs.rows()).map(|r| nll(probs.row(r), target)).sum()
}

/// Frame-wise cross-entropy with a target per row.
pub fn cross_entropy_frames(probs: &Tensor2, targets: &[usize]) -> Result<f64, NnError> {
    if targets.len() != probs.rows() {
        return Err(NnError::DimensionMismatch(format!(
            "{} targets for {} frames",
            targets.len(),
            probs.rows()
        )));
    }
    targets
        .iter()
        .enumerate()
        .map(|(r, &t)| nll(probs.row(r), t))
        .sum()
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_ten_classes() {
        let probs = Tensor2::filled(1, 10, 0.1);
        assert!((cross_entropy(&probs, 3).unwrap() - 10f64.ln()).abs() < 1e-12);
        assert!((10f64.ln() - 2.302585).abs() < 1e-6);
    }

    #[test]
    fn certain_prediction_costs_nothing() {
        let mut probs = Tensor2::zeros(1, 4);
        probs.set(0, 2, 1.0);
        assert_eq!(cross_entropy(&probs, 2).unwrap(), 0.0);
        // floored, not infinite
        assert!((cross_entropy(&probs, 0).unwrap() + PROB_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn frame_mode_sums_over_time() {
        let probs = Tensor2::filled(3, 10, 0.1);
        let total = cross_entropy_frames(&probs, &[1, 1, 1]).unwrap();
        assert!((total - 3.0 * 10f64.ln()).abs() < 1e-12);
        assert!((total / 3.0 - 2.302585).abs() < 1e-6);
    }

    #[test]
    fn out_of_range_target() {
        let probs = Tensor2::filled(1, 3, 1.0 / 3.0);
        assert!(matches!(
            cross_entropy(&probs, 3),
            Err(NnError::TargetOutOfRange { target: 3, classes: 3 })
        ));
    }

    #[test]
    fn softmax_edge_cases() {
        assert!(softmax(&[0.0; 10]).iter().all(|&p| (p - 0.1).abs() < 1e-15));
        let mut big = vec![0.0; 10];
        big[0] = 1000.0;
        let p = softmax(&big);
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    proptest! {
        #[test]
        fn softmax_is_a_simplex_point(logits in proptest::collection::vec(-500.0f64..500.0, 1..12)) {
            let p = softmax(&logits);
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
