//! Whole-clip prediction by majority vote over segments.

use crate::audio_io::{resample, segment, AudioClip};
use crate::features::{apply_normalizer, FeatureExtractor, NormStats};
use crate::nn::ModelParams;

use super::evaluate::argmax;
use super::TrainEvalError;

#[derive(Debug, Clone, PartialEq)]
pub struct ClipPrediction {
    /// One class distribution per segment.
    pub segments: Vec<Vec<f64>>,
    /// Majority-vote class index.
    pub label: usize,
    /// Segment votes per class.
    pub votes: Vec<usize>,
    /// Mean distribution over segments.
    pub mean: Vec<f64>,
}

impl ClipPrediction {
    /// Class indices of one segment's distribution, most probable first.
    pub fn ranked(dist: &[f64]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..dist.len()).collect();
        order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
        order
    }
}

/// Most frequent segment argmax; ties go to the highest mean probability,
/// then to the lowest class index.
pub fn majority_vote(dists: &[Vec<f64>]) -> (usize, Vec<usize>, Vec<f64>) {
    assert!(!dists.is_empty(), "majority vote over zero segments");
    let g = dists[0].len();
    let mut votes = vec![0usize; g];
    let mut mean = vec![0.0; g];
    for d in dists {
        votes[argmax(d)] += 1;
        mean.iter_mut().zip(d).for_each(|(m, p)| *m += p);
    }
    mean.iter_mut().for_each(|m| *m /= dists.len() as f64);
    let mut best = 0;
    for c in 1..g {
        if votes[c] > votes[best] || (votes[c] == votes[best] && mean[c] > mean[best]) {
            best = c;
        }
    }
    (best, votes, mean)
}

/// Resample, segment, extract, normalize and classify one clip.
pub fn predict(
    params: &ModelParams,
    stats: &NormStats,
    extractor: &FeatureExtractor,
    clip: &AudioClip,
    seg_seconds: f64,
) -> Result<ClipPrediction, TrainEvalError> {
    let clip = resample(clip, extractor.config().sample_rate)?;
    let segments = segment(&clip, seg_seconds)?;
    let normed = segments
        .iter()
        .map(|s| Ok(apply_normalizer(&extractor.assemble(s)?, stats)?.x))
        .collect::<Result<Vec<_>, TrainEvalError>>()?;
    let refs: Vec<_> = normed.iter().collect();
    let dists = params.predict_many(&refs, 16)?;
    let (label, votes, mean) = majority_vote(&dists);
    Ok(ClipPrediction {
        segments: dists,
        label,
        votes,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_segment() {
        assert_eq!(majority_vote(&[vec![0.1, 0.7, 0.2]]).0, 1);
    }

    #[test]
    fn plain_majority() {
        let a = vec![0.6, 0.4];
        let b = vec![0.1, 0.9];
        assert_eq!(majority_vote(&[a.clone(), a, b]).0, 0);
    }

    #[test]
    fn vote_tie_uses_mean_probability() {
        // votes 1-1; mean A = 0.6, mean B = 0.5 (third class absorbs the rest)
        let s1 = vec![0.9, 0.1, 0.0];
        let s2 = vec![0.3, 0.4, 0.3];
        let (label, votes, mean) = majority_vote(&[s2, s1]);
        assert_eq!(votes, vec![1, 1, 0]);
        assert!((mean[0] - 0.6).abs() < 1e-12 && (mean[1] - 0.25).abs() < 1e-12);
        assert_eq!(label, 0);

        let s1 = vec![0.8, 0.2];
        let s2 = vec![0.2, 0.8];
        assert_eq!(majority_vote(&[s2, s1]).0, 0);
    }

    #[test]
    fn ranking() {
        assert_eq!(ClipPrediction::ranked(&[0.2, 0.5, 0.2, 0.1]), vec![1, 0, 2, 3]);
    }
}
