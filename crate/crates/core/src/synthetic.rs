//! Seeded synthetic corpora with known structure.
//!
//! These stand in for real benchmark data in examples and tests: every
//! generator is a pure function of its seed.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use std::fs;
use std::path::{Path, PathBuf};

use crate::dataset::{default_split_specs, save_corpus, Instance, Split};
use crate::embeddings::{EmbeddingTable, TableKind};
use crate::error::{Error, Result};
use crate::harness::{save_outcomes, DomainData, Outcomes};

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    let s = scale / (dim as f64).sqrt();
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * s
        })
        .collect()
}

/// Random pre-trained table with one roughly unit-norm Gaussian vector per
/// token.
pub fn random_table<S: AsRef<str>>(tokens: &[S], dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = tokens
        .iter()
        .map(|t| (t.as_ref().to_owned(), gaussian(&mut rng, dim, 1.0)))
        .collect::<Vec<_>>();
    EmbeddingTable::from_entries(TableKind::Pretrained, dim, entries)
        .expect("positive dimension")
        .0
}

/// Three-token sentences `l{f} m{f} r{f}`: the middle token is fully
/// determined by its neighbours. Returns the corpus and a random
/// pre-trained table covering its vocabulary.
pub fn deterministic_context_corpus(
    sentences: usize,
    families: usize,
    dim: usize,
    seed: u64,
) -> (Vec<Instance>, EmbeddingTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus = (0..sentences)
        .map(|i| {
            let f = rng.random_range(0..families);
            Instance::new(
                format!("s{i}"),
                &format!("l{f} m{f} r{f}"),
                &[&format!("family{f}")],
                Split::Train,
            )
        })
        .collect();
    let vocab: Vec<String> = (0..families)
        .flat_map(|f| [format!("l{f}"), format!("m{f}"), format!("r{f}")])
        .collect();
    (corpus, random_table(&vocab, dim, seed.wrapping_add(1)))
}

/// Shape of a planted-surprise domain.
#[derive(Clone, Debug)]
pub struct PlantedConfig {
    pub dim: usize,
    /// Number of sentence templates, one in-domain predicate each.
    pub templates: usize,
    /// Tokens per sentence.
    pub slots: usize,
    /// Candidate tokens per slot.
    pub pool: usize,
    pub train: usize,
    pub test_in_domain: usize,
    pub test_adjacent: usize,
    /// Norm of the component every token shares.
    pub topic: f64,
    /// Norm of the component shared within a template.
    pub template: f64,
    /// Norm of each token's own component.
    pub word: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            dim: 32,
            templates: 8,
            slots: 5,
            pool: 4,
            train: 600,
            test_in_domain: 120,
            test_adjacent: 120,
            topic: 1.0,
            template: 0.35,
            word: 0.5,
        }
    }
}

/// Predicate carried by every domain-adjacent instance of a planted domain.
pub const PLANTED_PREDICATE: &str = "plantedAction";

/// A domain where adjacent sentences are in-domain sentences with one token
/// swapped for a token that, in training, only ever occurs in a different
/// template. In- and adjacent sentences share `slots - 1` of `slots`
/// tokens, and all tokens sit close together in pre-trained space, so only
/// the broken co-occurrence separates them.
///
/// A few adjacent instances are also placed in the train split; predicate
/// exclusion has to remove them.
pub fn planted_surprise_domain(
    name: &str,
    config: &PlantedConfig,
    seed: u64,
) -> (DomainData, EmbeddingTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = config;
    let word = |t: usize, s: usize, j: usize| format!("{name}t{t}s{s}w{j}");

    let topic = gaussian(&mut rng, c.dim, c.topic);
    let mut entries = Vec::new();
    for t in 0..c.templates {
        let template = gaussian(&mut rng, c.dim, c.template);
        for s in 0..c.slots {
            for j in 0..c.pool {
                let own = gaussian(&mut rng, c.dim, c.word);
                let v: Vec<f64> = (0..c.dim)
                    .map(|d| topic[d] + template[d] + own[d])
                    .collect();
                entries.push((word(t, s, j), v));
            }
        }
    }
    let pretrained = EmbeddingTable::from_entries(TableKind::Pretrained, c.dim, entries)
        .expect("positive dimension")
        .0;

    let sentence = |rng: &mut ChaCha8Rng, t: usize| -> Vec<String> {
        (0..c.slots)
            .map(|s| word(t, s, rng.random_range(0..c.pool)))
            .collect()
    };
    let planted = |rng: &mut ChaCha8Rng, t: usize| -> Vec<String> {
        let mut tokens = sentence(rng, t);
        let other = (t + rng.random_range(1..c.templates)) % c.templates;
        let s = rng.random_range(0..c.slots);
        tokens[s] = word(
            other,
            rng.random_range(0..c.slots),
            rng.random_range(0..c.pool),
        );
        tokens
    };

    let mut corpus = Vec::new();
    let mut outcomes = Outcomes::new();
    let push = |corpus: &mut Vec<Instance>,
                id: String,
                tokens: &[String],
                preds: &[&str],
                split: Split| {
        corpus.push(Instance::new(id, &tokens.join(" "), preds, split));
    };
    for i in 0..c.train {
        let t = i % c.templates;
        let tokens = sentence(&mut rng, t);
        push(
            &mut corpus,
            format!("{name}-train-{i}"),
            &tokens,
            &[&format!("pred{t}")],
            Split::Train,
        );
    }
    for i in 0..c.train / 20 {
        let t = rng.random_range(0..c.templates);
        let tokens = planted(&mut rng, t);
        let pred = format!("pred{t}");
        push(
            &mut corpus,
            format!("{name}-train-adj-{i}"),
            &tokens,
            &[&pred, PLANTED_PREDICATE],
            Split::Train,
        );
    }
    for i in 0..c.test_in_domain {
        let t = rng.random_range(0..c.templates);
        let tokens = sentence(&mut rng, t);
        let id = format!("{name}-test-{i}");
        outcomes.insert(id.clone(), rng.random_bool(0.6));
        push(
            &mut corpus,
            id,
            &tokens,
            &[&format!("pred{t}")],
            Split::Test,
        );
    }
    for i in 0..c.test_adjacent {
        let t = rng.random_range(0..c.templates);
        let tokens = planted(&mut rng, t);
        let pred = format!("pred{t}");
        push(
            &mut corpus,
            format!("{name}-test-adj-{i}"),
            &tokens,
            &[&pred, PLANTED_PREDICATE],
            Split::Test,
        );
    }

    let spec = crate::dataset::SplitSpec::new(name, [PLANTED_PREDICATE]).expect("non-empty");
    (
        DomainData {
            spec,
            corpus,
            outcomes: Some(outcomes),
        },
        pretrained,
    )
}

/// Eight planted domains named and keyed like the public benchmark, each
/// excluding that benchmark's predicates, sharing one pre-trained table.
pub fn synthetic_benchmark(config: &PlantedConfig, seed: u64) -> (Vec<DomainData>, EmbeddingTable) {
    let mut all_entries: Vec<(String, Vec<f64>)> = Vec::new();
    let mut domains = Vec::new();
    for (i, spec) in default_split_specs().into_iter().enumerate() {
        let (mut data, table) =
            planted_surprise_domain(spec.domain(), config, seed.wrapping_add(i as u64 * 7919));
        let excluded: Vec<&str> = spec.excluded().iter().map(String::as_str).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
        for inst in &mut data.corpus {
            if inst.predicates.remove(PLANTED_PREDICATE) {
                inst.predicates
                    .insert((*excluded.choose(&mut rng).expect("non-empty")).to_owned());
            }
        }
        data.spec = spec;
        all_entries.extend(table.iter().map(|(t, v)| (t.to_owned(), v.to_vec())));
        domains.push(data);
    }
    let table = EmbeddingTable::from_entries(TableKind::Pretrained, config.dim, all_entries)
        .expect("consistent dimension")
        .0;
    (domains, table)
}

/// Writes `domains` and `pretrained` as input files plus a `config.toml`
/// that points at them, and returns the config path. Reports go to
/// `dir/out`.
pub fn write_inputs(
    dir: &Path,
    domains: &[DomainData],
    pretrained: &EmbeddingTable,
    seed: u64,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    pretrained.save(&dir.join("vectors.txt"))?;
    let mut config =
        format!("seed = {seed}\n\n[paths]\npretrained = \"vectors.txt\"\noutput_dir = \"out\"\n");
    for d in domains {
        let name = d.spec.domain();
        save_corpus(&dir.join(format!("{name}.jsonl")), &d.corpus)?;
        let preds: Vec<String> = d.spec.excluded().iter().map(|p| format!("{p:?}")).collect();
        config.push_str(&format!(
            "\n[[domains]]\nname = \"{name}\"\ncorpus = \"{name}.jsonl\"\nexcluded_predicates = [{}]\n",
            preds.join(", ")
        ));
        if let Some(o) = &d.outcomes {
            save_outcomes(&dir.join(format!("{name}.outcomes.jsonl")), o)?;
            config.push_str(&format!("outcomes = \"{name}.outcomes.jsonl\"\n"));
        }
    }
    let path = dir.join("config.toml");
    fs::write(&path, config).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
