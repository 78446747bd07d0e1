//! The staged, file-backed pipeline that the `adjacency` binary drives:
//! write inputs, train mappings, encode, score, evaluate, ablate.
//!
//! ```bash
//! cargo run --release --example file_pipeline -- /tmp/adjacency-demo
//! cargo run --release --bin adjacency -- --config /tmp/adjacency-demo/config.toml evaluate --mode downstream
//! ```

use std::path::PathBuf;

use adjacency::config::RunConfig;
use adjacency::encoders::Scheme;
use adjacency::pipeline::{EvalMode, Pipeline};
use adjacency::synthetic::{synthetic_benchmark, write_inputs, PlantedConfig};

pub fn run_in(dir: PathBuf) -> adjacency::Result<()> {
    let planted = PlantedConfig {
        train: 200,
        test_in_domain: 40,
        test_adjacent: 40,
        ..PlantedConfig::default()
    };
    let (domains, pretrained) = synthetic_benchmark(&planted, 1);
    let config_path = write_inputs(&dir, &domains[..2], &pretrained, 1)?;
    println!("inputs and config written to {}", config_path.display());

    let pipeline = Pipeline::load(RunConfig::load(&config_path)?)?;
    for (domain, losses) in pipeline.train_mappings()? {
        println!(
            "{domain}: final training loss {:.4}",
            losses.last().copied().unwrap_or(f64::NAN)
        );
    }
    for scheme in [Scheme::Surprise, Scheme::Cbow] {
        pipeline.encode(scheme)?;
        pipeline.score(scheme)?;
    }
    print!(
        "{}",
        pipeline
            .evaluate(EvalMode::Auc, &[Scheme::Surprise, Scheme::Cbow], false)?
            .render()
    );
    print!("{}", pipeline.ablate()?.render());
    println!(
        "artifacts under {}",
        pipeline.config().paths.output_dir.display()
    );
    Ok(())
}

pub fn run_example() -> adjacency::Result<()> {
    let tmp = tempfile::tempdir().map_err(|e| adjacency::Error::io(std::env::temp_dir(), e))?;
    run_in(tmp.path().to_owned())
}

fn main() {
    let result = match std::env::args_os().nth(1) {
        Some(dir) => run_in(dir.into()),
        None => run_example(),
    };
    if let Err(e) = result {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
