//! ROC curve and AUC from detector scores, with tied scores.
//!
//! ```bash
//! cargo run --example roc_auc
//! ```

use adjacency::dataset::Label::{DomainAdjacent as A, InDomain as I};
use adjacency::harness::compute_roc_auc;

pub fn run_example() -> adjacency::Result<()> {
    let scores = [
        (0.9, A),
        (0.8, A),
        (0.8, I),
        (0.6, A),
        (0.4, I),
        (0.4, A),
        (0.2, I),
        (0.1, I),
    ];
    let roc = compute_roc_auc(&scores)?;
    println!("threshold   fpr    tpr");
    for p in &roc.points {
        println!(
            "{:>9.2}  {:.3}  {:.3}",
            p.threshold, p.false_positive_rate, p.true_positive_rate
        );
    }
    println!("AUC {:.4}", roc.auc);

    // AUC needs both classes.
    if let Err(e) = compute_roc_auc(&[(0.5, I), (0.7, I)]) {
        println!("rejected: {e}");
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
