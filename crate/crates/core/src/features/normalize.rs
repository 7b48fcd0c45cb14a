//! Per-dimension standardization fitted on the training split.

use super::{FeatureError, FeatureSequence};

/// Lower bound on the divisor in [`apply_normalizer`].
pub const SIGMA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl NormStats {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Standardize a raw row in place.
    pub fn apply_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mu).zip(&self.sigma) {
            *v = (*v - m) / s.max(SIGMA_FLOOR);
        }
    }
}

/// Mean and population standard deviation over every frame of every sequence.
///
/// Two passes, summed in input order, so the result is reproducible.
pub fn fit_normalizer(train: &[FeatureSequence]) -> Result<NormStats, FeatureError> {
    let first = train
        .first()
        .ok_or_else(|| FeatureError::InvalidArgument("cannot fit normalizer on no data".into()))?;
    let d = first.dim();
    if let Some(bad) = train.iter().find(|s| s.dim() != d) {
        return Err(FeatureError::ShapeMismatch(format!(
            "sequence {} has {} columns, expected {}",
            bad.source,
            bad.dim(),
            d
        )));
    }
    let count: usize = train.iter().map(|s| s.frames()).sum();
    if count == 0 {
        return Err(FeatureError::InvalidArgument("training sequences have no frames".into()));
    }
    let n = count as f64;

    let mut mu = vec![0.0; d];
    for s in train {
        for t in 0..s.frames() {
            mu.iter_mut().zip(s.x.row(t)).for_each(|(m, v)| *m += v);
        }
    }
    mu.iter_mut().for_each(|m| *m /= n);

    let mut var = vec![0.0; d];
    for s in train {
        for t in 0..s.frames() {
            for ((acc, v), m) in var.iter_mut().zip(s.x.row(t)).zip(&mu) {
                *acc += (v - m) * (v - m);
            }
        }
    }
    let sigma = var.into_iter().map(|v| (v / n).sqrt()).collect();
    Ok(NormStats { mu, sigma })
}

pub fn apply_normalizer(
    seq: &FeatureSequence,
    stats: &NormStats,
) -> Result<FeatureSequence, FeatureError> {
    if seq.dim() != stats.dim() {
        return Err(FeatureError::ShapeMismatch(format!(
            "sequence has {} columns, normalizer {}",
            seq.dim(),
            stats.dim()
        )));
    }
    let mut out = seq.clone();
    for t in 0..out.frames() {
        stats.apply_row(out.x.row_mut(t));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor2;

    fn seq(rows: &[Vec<f64>]) -> FeatureSequence {
        FeatureSequence::new(Tensor2::from_rows(rows), None, "s")
    }

    #[test]
    fn constant_data_normalizes_to_zero() {
        let data = vec![seq(&[vec![3.0, -2.0], vec![3.0, -2.0]])];
        let stats = fit_normalizer(&data).unwrap();
        let out = apply_normalizer(&data[0], &stats).unwrap();
        assert!(out.x.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_point_dimension() {
        let data = vec![seq(&[vec![0.0]]), seq(&[vec![2.0]])];
        let stats = fit_normalizer(&data).unwrap();
        assert_eq!(stats.mu, vec![1.0]);
        assert_eq!(stats.sigma, vec![1.0]);
        assert_eq!(apply_normalizer(&data[0], &stats).unwrap().x.get(0, 0), -1.0);
        assert_eq!(apply_normalizer(&data[1], &stats).unwrap().x.get(0, 0), 1.0);
    }

    #[test]
    fn refit_after_normalization_is_standard() {
        let data: Vec<FeatureSequence> = (0..4)
            .map(|i| {
                seq(&(0..9)
                    .map(|t| vec![(i * 9 + t) as f64 * 0.37 + 5.0, ((i * t) as f64).sin() * 40.0])
                    .collect::<Vec<_>>())
            })
            .collect();
        let stats = fit_normalizer(&data).unwrap();
        let normed: Vec<_> = data.iter().map(|s| apply_normalizer(s, &stats).unwrap()).collect();
        let again = fit_normalizer(&normed).unwrap();
        for j in 0..2 {
            assert!(again.mu[j].abs() < 1e-6);
            assert!((again.sigma[j] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_training_set_is_rejected() {
        assert!(fit_normalizer(&[]).is_err());
    }
}
