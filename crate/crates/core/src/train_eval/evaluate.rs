//! Confusion matrix and per-genre precision/recall/F1.

use crate::features::{apply_normalizer, FeatureSequence, NormStats};
use crate::nn::ModelParams;

use super::TrainEvalError;

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub genres: Vec<String>,
    /// Rows are true genres, columns predicted.
    pub confusion: Vec<Vec<usize>>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub support: Vec<usize>,
    pub accuracy: f64,
}

impl EvalReport {
    pub fn from_predictions(genres: &[String], truth: &[usize], predicted: &[usize]) -> Self {
        assert_eq!(truth.len(), predicted.len());
        let g = genres.len();
        let mut confusion = vec![vec![0usize; g]; g];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let support: Vec<usize> = confusion.iter().map(|row| row.iter().sum()).collect();
        let col = |c: usize| confusion.iter().map(|row| row[c]).sum::<usize>();
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision: Vec<f64> = (0..g).map(|c| ratio(confusion[c][c], col(c))).collect();
        let recall: Vec<f64> = (0..g).map(|c| ratio(confusion[c][c], support[c])).collect();
        let f1 = precision.iter().zip(&recall).map(|(&p, &r)| f1_score(p, r)).collect();
        let trace: usize = (0..g).map(|c| confusion[c][c]).sum();
        Self {
            genres: genres.to_vec(),
            accuracy: ratio(trace, truth.len()),
            confusion,
            precision,
            recall,
            f1,
            support,
        }
    }

    pub fn total(&self) -> usize {
        self.support.iter().sum()
    }

    pub fn macro_f1(&self) -> f64 {
        self.f1.iter().sum::<f64>() / self.f1.len() as f64
    }

    /// `genre,precision,recall,f1,support`
    pub fn report_csv(&self) -> String {
        let mut out = String::from("genre,precision,recall,f1,support\n");
        for c in 0..self.genres.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.genres[c], self.precision[c], self.recall[c], self.f1[c], self.support[c]
            ));
        }
        out
    }

    /// Genre names label the header row and the first column.
    pub fn confusion_csv(&self) -> String {
        let mut out = format!("true\\predicted,{}\n", self.genres.join(","));
        for (name, row) in self.genres.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{name},{}\n", cells.join(",")));
        }
        out
    }

    pub fn table(&self) -> String {
        let width = self.genres.iter().map(|g| g.len()).max().unwrap_or(5).max(12);
        let mut out = format!(
            "{:<width$} {:>9} {:>9} {:>9} {:>8}\n",
            "genre", "precision", "recall", "f1-score", "support"
        );
        for c in 0..self.genres.len() {
            out.push_str(&format!(
                "{:<width$} {:>9.2} {:>9.2} {:>9.2} {:>8}\n",
                self.genres[c], self.precision[c], self.recall[c], self.f1[c], self.support[c]
            ));
        }
        let n = self.genres.len() as f64;
        out.push('\n');
        out.push_str(&format!(
            "{:<width$} {:>9} {:>9} {:>9.2} {:>8}\n",
            "accuracy",
            "",
            "",
            self.accuracy,
            self.total()
        ));
        out.push_str(&format!(
            "{:<width$} {:>9.2} {:>9.2} {:>9.2} {:>8}\n",
            "macro avg",
            self.precision.iter().sum::<f64>() / n,
            self.recall.iter().sum::<f64>() / n,
            self.macro_f1(),
            self.total()
        ));
        out
    }
}

/// Argmax prediction for every labelled segment.
pub fn evaluate(
    params: &ModelParams,
    stats: &NormStats,
    segments: &[(&FeatureSequence, usize)],
    genres: &[String],
) -> Result<EvalReport, TrainEvalError> {
    if genres.len() != params.arch.classes {
        return Err(TrainEvalError::LabelMismatch(format!(
            "model has {} classes, {} genre names given",
            params.arch.classes,
            genres.len()
        )));
    }
    let normed = segments
        .iter()
        .map(|(s, _)| apply_normalizer(s, stats).map(|n| n.x))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<_> = normed.iter().collect();
    let probs = params.predict_many(&refs, 64)?;
    let predicted: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
    let truth: Vec<usize> = segments.iter().map(|(_, l)| *l).collect();
    Ok(EvalReport::from_predictions(genres, &truth, &predicted))
}
