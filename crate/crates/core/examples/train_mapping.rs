//! Training a domain mapping on a corpus whose middle token is fully
//! determined by its neighbours, then checking what it learned.
//!
//! ```bash
//! cargo run --release --example train_mapping
//! ```

use adjacency::domain_mapping::{train_mapping, DomainMapping, Hyperparams};
use adjacency::synthetic::deterministic_context_corpus;

pub fn run_example() -> adjacency::Result<()> {
    let (corpus, pretrained) = deterministic_context_corpus(500, 10, 16, 7);
    let hp = Hyperparams {
        window: 1,
        epochs: 20,
        learning_rate: 0.1,
        seed: 7,
        ..Hyperparams::default()
    };
    let mapping = train_mapping(&corpus, &pretrained, &hp)?;
    for (epoch, loss) in mapping.epoch_losses().iter().enumerate() {
        println!("epoch {:>2}  loss {loss:.4}", epoch + 1);
    }

    let mut hits = 0;
    for inst in &corpus {
        let probs = mapping
            .predict_center(&pretrained, &inst.tokens, 1)
            .expect("context present");
        let best = (0..probs.len())
            .max_by(|&a, &b| probs[a].total_cmp(&probs[b]))
            .expect("non-empty vocabulary");
        hits += usize::from(mapping.vocab()[best] == inst.tokens[1]);
    }
    println!(
        "middle token recovered for {hits}/{} sentences",
        corpus.len()
    );

    // Domain vectors for the whole pre-trained vocabulary.
    let domain = mapping.materialize(&pretrained)?;
    println!(
        "domain table: {} vectors, dimension {}",
        domain.len(),
        domain.dimension()
    );

    let restored = DomainMapping::from_bytes(&mapping.to_bytes())?;
    assert_eq!(restored.to_bytes(), mapping.to_bytes());
    println!(
        "model file round-trips ({} bytes)",
        mapping.to_bytes().len()
    );
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
