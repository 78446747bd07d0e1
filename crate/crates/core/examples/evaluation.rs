//! Direct (AUC) and downstream (parser accuracy) evaluation on the
//! eight-domain synthetic benchmark, entirely in memory.
//!
//! ```bash
//! cargo run --release --example evaluation
//! ```

use adjacency::encoders::Scheme;
use adjacency::harness::{run_direct_eval, run_downstream_eval, Settings};
use adjacency::synthetic::{synthetic_benchmark, PlantedConfig};

pub fn run_example() -> adjacency::Result<()> {
    let config = PlantedConfig {
        train: 300,
        test_in_domain: 60,
        test_adjacent: 60,
        ..PlantedConfig::default()
    };
    let (domains, pretrained) = synthetic_benchmark(&config, 5);
    let settings = Settings::default();

    let auc = run_direct_eval(
        &domains,
        &pretrained,
        &settings,
        &[Scheme::Surprise, Scheme::Cbow],
    )?;
    print!("{}", auc.render());
    println!();
    let downstream = run_downstream_eval(
        &domains,
        &pretrained,
        &settings,
        &[Scheme::Surprise, Scheme::Cbow],
    )?;
    print!("{}", downstream.render());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
