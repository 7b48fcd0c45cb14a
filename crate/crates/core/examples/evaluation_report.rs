//! Confusion matrix and per-class precision/recall/F1 from raw predictions.
//!
//! ```bash
//! cargo run --example evaluation_report
//! ```

use genrenet::train_eval::{f1_score, EvalReport};

fn main() {
    let genres: Vec<String> = ["rock", "folk", "metal"].iter().map(|s| s.to_string()).collect();
    let truth = [0, 0, 0, 0, 1, 1, 1, 2, 2, 2, 2, 2];
    let predicted = [0, 0, 2, 0, 0, 0, 1, 2, 2, 2, 0, 2];
    let report = EvalReport::from_predictions(&genres, &truth, &predicted);

    print!("{}", report.table());
    println!();
    print!("{}", report.confusion_csv());
    println!();
    println!("f1 at P=0.85, R=0.98: {:.2}", f1_score(0.85, 0.98));
}
