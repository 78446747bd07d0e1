use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::downstream::{downstream_accuracy, DownstreamRow, Outcomes, NO_FILTER, ORACLE};
use super::report::ResultTable;
use super::roc::{compute_roc_auc, RocCurve};
use crate::dataset::{exclude_predicates, mix_test_set, Instance, Label, Split, SplitSpec, Splits};
use crate::detector::{calibrate_threshold, NeighborIndex, Threshold};
use crate::domain_mapping::{train_mapping, DomainMapping, Hyperparams};
use crate::embeddings::EmbeddingTable;
use crate::encoders::{encode_batch, Encoder, IdfTable, Scheme, SentenceEmbedding};
use crate::error::{Error, Result};
use crate::seed;

/// Everything that shapes an experiment besides the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// Context half-width for surprise weighting.
    pub surprise_window: usize,
    /// CBOW training parameters. The seed here is ignored: each domain gets
    /// one derived from `seed`.
    pub mapping: Hyperparams,
    pub k: usize,
    pub flag_fraction: f64,
    pub adjacent_fraction: f64,
    /// Share of train moved to dev when the corpus has no dev split.
    pub dev_fraction: f64,
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            surprise_window: 2,
            mapping: Hyperparams::default(),
            k: 5,
            flag_fraction: 0.03,
            adjacent_fraction: 0.2,
            dev_fraction: 0.2,
            seed: 0,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{name} = {v} is not in (0, 1)"
                )))
            }
        };
        frac("flag_fraction", self.flag_fraction)?;
        frac("adjacent_fraction", self.adjacent_fraction)?;
        frac("dev_fraction", self.dev_fraction)?;
        if self.k == 0 || self.surprise_window == 0 || self.mapping.window == 0 {
            return Err(Error::InvalidArgument(
                "k and window sizes must be positive".into(),
            ));
        }
        if !(self.mapping.learning_rate > 0.0 && self.mapping.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(
                "learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One domain's corpus, excluded predicates and (optionally) parser
/// outcomes.
#[derive(Clone, Debug)]
pub struct DomainData {
    pub spec: SplitSpec,
    pub corpus: Vec<Instance>,
    pub outcomes: Option<Outcomes>,
}

/// A domain with its splits prepared.
#[derive(Debug)]
pub struct DomainRun<'a> {
    pub splits: Splits,
    name: String,
    pretrained: &'a EmbeddingTable,
    settings: &'a Settings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedRecord {
    pub id: String,
    pub split: Split,
    pub label: Label,
    #[serde(flatten)]
    pub embedding: SentenceEmbedding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedRecord {
    pub id: String,
    pub split: Split,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSplits {
    pub scheme: Scheme,
    pub records: Vec<EncodedRecord>,
    pub skipped: Vec<SkippedRecord>,
}

impl<'a> DomainRun<'a> {
    pub fn prepare(
        data: &DomainData,
        pretrained: &'a EmbeddingTable,
        settings: &'a Settings,
    ) -> Result<Self> {
        settings.validate()?;
        let name = data.spec.domain().to_owned();
        let mut splits = exclude_predicates(&data.corpus, &data.spec);
        if splits.train.is_empty() {
            return Err(Error::Empty(format!(
                "domain {name}: no in-domain training instances"
            )));
        }
        if splits.test.is_empty() {
            return Err(Error::Empty(format!("domain {name}: no test instances")));
        }
        splits.carve_dev(
            settings.dev_fraction,
            seed::derive(settings.seed, "dev", &name),
        )?;
        Ok(DomainRun {
            splits,
            name,
            pretrained,
            settings,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mapping_hyperparams(&self) -> Hyperparams {
        Hyperparams {
            seed: seed::derive(self.settings.seed, "mapping", &self.name),
            ..self.settings.mapping.clone()
        }
    }

    pub fn train_mapping(&self) -> Result<DomainMapping> {
        train_mapping(
            &self.splits.train,
            self.pretrained,
            &self.mapping_hyperparams(),
        )
    }

    pub fn mix_seed(&self) -> u64 {
        seed::derive(self.settings.seed, "mix", &self.name)
    }

    /// Encodes train, dev and test with `scheme`. Surprise needs `mapping`.
    pub fn encode(&self, scheme: Scheme, mapping: Option<&DomainMapping>) -> Result<EncodedSplits> {
        let pretrained = self.pretrained;
        let window = self.settings.surprise_window;
        let idf;
        let domain;
        let encoder = match scheme {
            Scheme::Cbow => Encoder::Cbow { pretrained },
            Scheme::Frequency => {
                idf = IdfTable::from_instances(&self.splits.train)?;
                Encoder::Frequency {
                    pretrained,
                    idf: &idf,
                }
            }
            Scheme::PretrainedWeights => Encoder::PretrainedWeights { pretrained, window },
            Scheme::Surprise => {
                let mapping = mapping.ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "domain {}: surprise encoding needs a trained mapping",
                        self.name
                    ))
                })?;
                if mapping.pretrained_dim() != pretrained.dimension() {
                    return Err(Error::DimensionMismatch {
                        expected: pretrained.dimension(),
                        found: mapping.pretrained_dim(),
                    });
                }
                domain = mapping.materialize(pretrained)?;
                Encoder::Surprise {
                    pretrained,
                    domain: &domain,
                    window,
                }
            }
        };

        let mut out = EncodedSplits {
            scheme,
            records: Vec::new(),
            skipped: Vec::new(),
        };
        for (split, instances) in [
            (Split::Train, &self.splits.train),
            (Split::Dev, &self.splits.dev),
            (Split::Test, &self.splits.test),
        ] {
            let labels: HashMap<&str, Label> = instances
                .iter()
                .map(|i| (i.id.as_str(), i.label.unwrap_or(Label::InDomain)))
                .collect();
            let batch = encode_batch(&encoder, instances)?;
            out.records.extend(
                batch
                    .embeddings
                    .into_iter()
                    .map(|(id, embedding)| EncodedRecord {
                        label: labels[id.as_str()],
                        id,
                        split,
                        embedding,
                    }),
            );
            out.skipped
                .extend(batch.skipped.into_iter().map(|id| SkippedRecord {
                    id,
                    split,
                    reason: "no token has a pre-trained vector".into(),
                }));
        }
        if !out.skipped.is_empty() {
            log::warn!(
                "domain {}: {} sentences skipped by {scheme}",
                self.name,
                out.skipped.len()
            );
        }
        Ok(out)
    }

    /// Encodes with `scheme` and scores the test split.
    pub fn score(&self, scheme: Scheme, mapping: Option<&DomainMapping>) -> Result<ScoredSplit> {
        let encoded = self.encode(scheme, mapping)?;
        score_encoded(
            &encoded,
            self.settings.k,
            self.settings.flag_fraction,
            &format!("{}/dev", self.name),
        )
    }
}

/// Detector output for one test sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub score: f64,
    pub flagged: bool,
    pub gold: Label,
    pub threshold: f64,
    pub calibration_fraction: f64,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredSplit {
    pub scheme: Scheme,
    pub threshold: Threshold,
    pub dev_flagged_fraction: f64,
    pub test: Vec<ScoreRecord>,
}

/// Builds the kNN index from the train records, calibrates on dev and
/// scores test.
pub fn score_encoded(
    encoded: &EncodedSplits,
    k: usize,
    flag_fraction: f64,
    source: &str,
) -> Result<ScoredSplit> {
    let of = |split: Split| encoded.records.iter().filter(move |r| r.split == split);
    let index = NeighborIndex::build(
        of(Split::Train).map(|r| (r.id.clone(), r.embedding.vector.clone())),
        k,
    )?;
    let dev: Vec<&[f64]> = of(Split::Dev)
        .map(|r| r.embedding.vector.as_slice())
        .collect();
    let dev_scores = index.score_batch(&dev)?;
    let threshold = calibrate_threshold(&dev_scores, flag_fraction, source)?;
    let dev_flagged_fraction =
        dev_scores.iter().filter(|&&s| threshold.flags(s)).count() as f64 / dev_scores.len() as f64;

    let test: Vec<&EncodedRecord> = of(Split::Test).collect();
    let vectors: Vec<&[f64]> = test.iter().map(|r| r.embedding.vector.as_slice()).collect();
    let scores = index.score_batch(&vectors)?;
    let test = test
        .iter()
        .zip(scores)
        .map(|(r, score)| ScoreRecord {
            id: r.id.clone(),
            score,
            flagged: threshold.flags(score),
            gold: r.label,
            threshold: threshold.value,
            calibration_fraction: flag_fraction,
            k,
        })
        .collect();
    Ok(ScoredSplit {
        scheme: encoded.scheme,
        threshold,
        dev_flagged_fraction,
        test,
    })
}

pub fn auc_from_scores(scores: &[ScoreRecord]) -> Result<RocCurve> {
    let pairs: Vec<(f64, Label)> = scores.iter().map(|r| (r.score, r.gold)).collect();
    compute_roc_auc(&pairs)
}

/// NoFilter, Oracle and one row per scored method on a test set mixed to
/// `adjacent_fraction`. Test sentences a method could not encode are
/// treated as unflagged.
pub fn downstream_rows(
    test: &[Instance],
    methods: &[(String, &[ScoreRecord])],
    outcomes: &Outcomes,
    adjacent_fraction: f64,
    mix_seed: u64,
) -> Result<Vec<DownstreamRow>> {
    let mixed = mix_test_set(test, adjacent_fraction, mix_seed)?;
    let n = mixed.instances.len();
    let mut rows = vec![
        DownstreamRow {
            method: NO_FILTER.into(),
            accuracy: downstream_accuracy(&mixed.instances, &vec![false; n], outcomes)?,
        },
        DownstreamRow {
            method: ORACLE.into(),
            accuracy: downstream_accuracy(
                &mixed.instances,
                &mixed
                    .instances
                    .iter()
                    .map(Instance::is_adjacent)
                    .collect::<Vec<_>>(),
                outcomes,
            )?,
        },
    ];
    for (name, scores) in methods {
        let flagged: HashMap<&str, bool> =
            scores.iter().map(|r| (r.id.as_str(), r.flagged)).collect();
        let flags: Vec<bool> = mixed
            .instances
            .iter()
            .map(|i| flagged.get(i.id.as_str()).copied().unwrap_or(false))
            .collect();
        rows.push(DownstreamRow {
            method: name.clone(),
            accuracy: downstream_accuracy(&mixed.instances, &flags, outcomes)?,
        });
    }
    Ok(rows)
}

fn scored_methods<'a>(run: &DomainRun<'a>, methods: &[Scheme]) -> Result<Vec<ScoredSplit>> {
    let mapping = if methods.contains(&Scheme::Surprise) {
        Some(
            run.train_mapping()
                .map_err(|e| e.in_cell("surprise", run.name()))?,
        )
    } else {
        None
    };
    methods
        .iter()
        .map(|&m| {
            run.score(m, mapping.as_ref())
                .map_err(|e| e.in_cell(m.name(), run.name()))
        })
        .collect()
}

/// AUC per (method, domain).
pub fn run_direct_eval(
    domains: &[DomainData],
    pretrained: &EmbeddingTable,
    settings: &Settings,
    methods: &[Scheme],
) -> Result<ResultTable> {
    let mut table = ResultTable::new("AUC for domain-adjacent detection (kNN)");
    for data in domains {
        let run = DomainRun::prepare(data, pretrained, settings)?;
        for scored in scored_methods(&run, methods)? {
            let auc = auc_from_scores(&scored.test)
                .map_err(|e| e.in_cell(scored.scheme.name(), run.name()))?;
            table.set(scored.scheme.name(), run.name(), auc.auc);
        }
    }
    Ok(table)
}

/// Parser accuracy per (method, domain), with NoFilter and Oracle rows.
pub fn run_downstream_eval(
    domains: &[DomainData],
    pretrained: &EmbeddingTable,
    settings: &Settings,
    methods: &[Scheme],
) -> Result<ResultTable> {
    let mut table = ResultTable::new(format!(
        "Parser accuracy, {:.0}% domain-adjacent test data",
        settings.adjacent_fraction * 100.0
    ));
    for data in domains {
        let outcomes = data.outcomes.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "domain {}: downstream evaluation needs a parse outcome file",
                data.spec.domain()
            ))
        })?;
        let run = DomainRun::prepare(data, pretrained, settings)?;
        let scored = scored_methods(&run, methods)?;
        let named: Vec<(String, &[ScoreRecord])> = scored
            .iter()
            .map(|s| (s.scheme.name().to_owned(), s.test.as_slice()))
            .collect();
        let rows = downstream_rows(
            &run.splits.test,
            &named,
            outcomes,
            settings.adjacent_fraction,
            run.mix_seed(),
        )?;
        for row in rows {
            table.set(&row.method, run.name(), row.accuracy);
        }
    }
    Ok(table)
}
