//! The four sentence weighting schemes side by side on one in-domain and
//! one domain-adjacent sentence. The adjacent sentence carries a token that
//! never co-occurs with its neighbours in training, so surprise weighting
//! leans on it.
//!
//! ```bash
//! cargo run --release --example sentence_encoders
//! ```

use adjacency::dataset::{exclude_predicates, Instance};
use adjacency::domain_mapping::{train_mapping, Hyperparams};
use adjacency::encoders::{
    encode_cbow, encode_frequency, encode_pretrained_weights, encode_surprise, IdfTable,
};
use adjacency::synthetic::{planted_surprise_domain, PlantedConfig};

pub fn run_example() -> adjacency::Result<()> {
    let (data, pretrained) = planted_surprise_domain("demo", &PlantedConfig::default(), 3);
    let splits = exclude_predicates(&data.corpus, &data.spec);
    let mapping = train_mapping(&splits.train, &pretrained, &Hyperparams::default())?;
    let domain = mapping.materialize(&pretrained)?;
    let idf = IdfTable::from_instances(&splits.train)?;

    let pick = |adjacent: bool| -> &Instance {
        splits
            .test
            .iter()
            .find(|i| i.is_adjacent() == adjacent)
            .expect("both labels present")
    };
    for inst in [pick(false), pick(true)] {
        println!(
            "{} [{}]",
            inst.raw_text,
            inst.label.expect("test instances are labeled")
        );
        let schemes = [
            encode_surprise(&inst.tokens, &pretrained, &domain, 2)?,
            encode_pretrained_weights(&inst.tokens, &pretrained, 2)?,
            encode_frequency(&inst.tokens, &pretrained, &idf)?,
            encode_cbow(&inst.tokens, &pretrained)?,
        ];
        for emb in &schemes {
            let total: f64 = emb.weights.iter().sum();
            let shares: Vec<String> = emb
                .weights
                .iter()
                .map(|w| format!("{:.2}", w / total))
                .collect();
            println!("  {:<20} {}", emb.scheme.name(), shares.join(" "));
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
