//! Mean-distance-to-k-nearest-neighbours scoring with a threshold
//! calibrated to flag 3% of held-out in-domain data.
//!
//! ```bash
//! cargo run --example knn_detector
//! ```

use adjacency::detector::{calibrate_threshold, classify, NeighborIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn cluster(rng: &mut ChaCha8Rng, n: usize, centre: [f64; 8], spread: f64) -> Vec<Vec<f64>> {
    let noise = Normal::new(0.0, spread).expect("positive spread");
    (0..n)
        .map(|_| centre.iter().map(|c| c + noise.sample(rng)).collect())
        .collect()
}

pub fn run_example() -> adjacency::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let home = [1.0, 1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.2];
    let away = [1.0, -0.4, 0.8, 0.0, 0.5, 0.0, 0.3, 0.2];

    let train = cluster(&mut rng, 400, home, 0.15);
    let index = NeighborIndex::build(
        train
            .into_iter()
            .enumerate()
            .map(|(i, v)| (format!("t{i}"), v)),
        5,
    )?;

    let dev = cluster(&mut rng, 200, home, 0.15);
    let threshold = calibrate_threshold(&index.score_batch(&dev)?, 0.03, "dev")?;
    println!(
        "threshold {:.4} flags {:.0}% of dev",
        threshold.value,
        threshold.calibration_fraction * 100.0
    );

    let near = cluster(&mut rng, 50, home, 0.15);
    let far = cluster(&mut rng, 50, away, 0.15);
    for (name, set) in [("in-domain", &near), ("adjacent", &far)] {
        let mut flagged = 0;
        for q in set {
            flagged += usize::from(classify(&index, &threshold, q)?.label.is_adjacent());
        }
        println!("{name:<10} flagged {flagged}/{}", set.len());
    }

    let (nearest, d) = index.neighbors(&far[0], 1)?[0];
    println!(
        "nearest training point to an adjacent query: {} at distance {d:.4}",
        index.id(nearest)
    );
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
