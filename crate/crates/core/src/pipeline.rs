//! File-backed stages behind the `adjacency` binary.
//!
//! Artifacts live under the configured output directory:
//!
//! ```text
//! <out>/<domain>/model.bin                  trained mapping (format in domain_mapping.rs)
//! <out>/<domain>/encoded-<scheme>.jsonl     one EncodedRecord per sentence
//! <out>/<domain>/encoded-<scheme>.skipped.jsonl
//! <out>/<domain>/scores-<scheme>.jsonl      one ScoreRecord per scored test sentence
//! <out>/auc.{jsonl,txt}                     evaluate --mode auc
//! <out>/downstream.{jsonl,txt}              evaluate --mode downstream
//! <out>/ablation.{jsonl,txt}                ablate
//! ```
//!
//! Every stage is a deterministic function of the config, so rerunning
//! it rewrites byte-identical files.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use crate::config::RunConfig;
use crate::dataset::load_corpus;
use crate::domain_mapping::DomainMapping;
use crate::embeddings::{load_embeddings_filtered, EmbeddingTable};
use crate::encoders::Scheme;
use crate::error::{Error, Result};
use crate::harness::{
    auc_from_scores, downstream_rows, load_outcomes, score_encoded, to_jsonl, DomainData,
    DomainRun, EncodedRecord, EncodedSplits, ResultTable, ScoreRecord, Settings,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    Auc,
    Downstream,
}

/// Loaded inputs for a configured run.
pub struct Pipeline {
    config: RunConfig,
    settings: Settings,
    pretrained: EmbeddingTable,
    domains: Vec<DomainData>,
}

impl Pipeline {
    /// Validates the config and loads corpora, outcomes and the pre-trained
    /// vectors for tokens that occur in any corpus.
    pub fn load(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let mut domains = Vec::new();
        for d in &config.domains {
            let outcomes = d.outcomes.as_deref().map(load_outcomes).transpose()?;
            domains.push(DomainData {
                spec: d.split_spec()?,
                corpus: load_corpus(&d.corpus)?,
                outcomes,
            });
        }
        let vocab: HashSet<String> = domains
            .iter()
            .flat_map(|d| d.corpus.iter().flat_map(|i| i.tokens.iter().cloned()))
            .collect();
        let (pretrained, report) = load_embeddings_filtered(
            &config.paths.pretrained,
            config.paths.pretrained_dim,
            Some(&vocab),
        )?;
        log::info!(
            "loaded {} pre-trained vectors of dimension {} ({} not in any corpus)",
            pretrained.len(),
            pretrained.dimension(),
            report.filtered
        );
        Ok(Pipeline {
            settings: config.settings(),
            config,
            pretrained,
            domains,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn pretrained(&self) -> &EmbeddingTable {
        &self.pretrained
    }

    pub fn domains(&self) -> &[DomainData] {
        &self.domains
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    fn out(&self) -> &Path {
        &self.config.paths.output_dir
    }

    pub fn domain_dir(&self, domain: &str) -> PathBuf {
        self.out().join(domain)
    }

    pub fn model_path(&self, domain: &str) -> PathBuf {
        self.domain_dir(domain).join("model.bin")
    }

    pub fn encoded_path(&self, domain: &str, scheme: Scheme) -> PathBuf {
        self.domain_dir(domain)
            .join(format!("encoded-{scheme}.jsonl"))
    }

    pub fn skipped_path(&self, domain: &str, scheme: Scheme) -> PathBuf {
        self.domain_dir(domain)
            .join(format!("encoded-{scheme}.skipped.jsonl"))
    }

    pub fn scores_path(&self, domain: &str, scheme: Scheme) -> PathBuf {
        self.domain_dir(domain)
            .join(format!("scores-{scheme}.jsonl"))
    }

    fn runs(&self) -> Result<Vec<DomainRun<'_>>> {
        self.domains
            .iter()
            .map(|d| DomainRun::prepare(d, &self.pretrained, &self.settings))
            .collect()
    }

    /// Trains and saves one mapping per domain. Returns per-epoch losses.
    pub fn train_mappings(&self) -> Result<Vec<(String, Vec<f64>)>> {
        let mut out = Vec::new();
        for run in self.runs()? {
            let mapping = run
                .train_mapping()
                .map_err(|e| e.in_cell("train-mapping", run.name()))?;
            let path = self.model_path(run.name());
            create_parent(&path)?;
            mapping.save(&path)?;
            out.push((run.name().to_owned(), mapping.epoch_losses().to_vec()));
        }
        Ok(out)
    }

    fn load_mapping(&self, domain: &str) -> Result<DomainMapping> {
        let path = self.model_path(domain);
        if !path.is_file() {
            return Err(Error::MissingArtifact {
                path,
                hint: "surprise encoding needs a model; run `train-mapping` first".into(),
            });
        }
        DomainMapping::load(&path)
    }

    /// Encodes every split of every domain. Returns `(domain, records,
    /// skipped)` counts.
    pub fn encode(&self, scheme: Scheme) -> Result<Vec<(String, usize, usize)>> {
        let mut out = Vec::new();
        for run in self.runs()? {
            let mapping = match scheme {
                Scheme::Surprise => Some(self.load_mapping(run.name())?),
                _ => None,
            };
            let encoded = run
                .encode(scheme, mapping.as_ref())
                .map_err(|e| e.in_cell(scheme.name(), run.name()))?;
            let path = self.encoded_path(run.name(), scheme);
            create_parent(&path)?;
            write(&path, &to_jsonl(&encoded.records))?;
            write(
                &self.skipped_path(run.name(), scheme),
                &to_jsonl(&encoded.skipped),
            )?;
            out.push((
                run.name().to_owned(),
                encoded.records.len(),
                encoded.skipped.len(),
            ));
        }
        Ok(out)
    }

    /// Scores the test split from the encoded file. Returns `(domain,
    /// threshold, dev flagged fraction)`.
    pub fn score(&self, scheme: Scheme) -> Result<Vec<(String, f64, f64)>> {
        let mut out = Vec::new();
        for d in &self.domains {
            let domain = d.spec.domain();
            let path = self.encoded_path(domain, scheme);
            let records: Vec<EncodedRecord> = read_jsonl(&path, "run `encode` first")?;
            let encoded = EncodedSplits {
                scheme,
                records,
                skipped: Vec::new(),
            };
            let scored = score_encoded(
                &encoded,
                self.settings.k,
                self.settings.flag_fraction,
                &format!("{domain}/dev"),
            )
            .map_err(|e| e.in_cell(scheme.name(), domain))?;
            write(&self.scores_path(domain, scheme), &to_jsonl(&scored.test))?;
            out.push((
                domain.to_owned(),
                scored.threshold.value,
                scored.dev_flagged_fraction,
            ));
        }
        Ok(out)
    }

    fn read_scores(&self, domain: &str, scheme: Scheme) -> Result<Vec<ScoreRecord>> {
        read_jsonl(
            &self.scores_path(domain, scheme),
            "run `score` or pass --end-to-end",
        )
    }

    /// Runs train-mapping (when surprise is selected), encode and score for
    /// every configured method.
    pub fn build_all(&self, methods: &[Scheme]) -> Result<()> {
        if methods.contains(&Scheme::Surprise) {
            self.train_mappings()?;
        }
        for &m in methods {
            self.encode(m)?;
            self.score(m)?;
        }
        Ok(())
    }

    /// Builds the report table from the score files and writes it.
    pub fn evaluate(
        &self,
        mode: EvalMode,
        methods: &[Scheme],
        end_to_end: bool,
    ) -> Result<ResultTable> {
        if mode == EvalMode::Downstream {
            if let Some(d) = self.domains.iter().find(|d| d.outcomes.is_none()) {
                return Err(Error::Config(format!(
                    "domain {}: downstream evaluation needs a parse outcome file",
                    d.spec.domain()
                )));
            }
        }
        if end_to_end {
            self.build_all(methods)?;
        }
        let table = match mode {
            EvalMode::Auc => self.auc_table(methods, "AUC for domain-adjacent detection (kNN)")?,
            EvalMode::Downstream => self.downstream_table(methods)?,
        };
        let (stem, metric) = match mode {
            EvalMode::Auc => ("auc", "auc"),
            EvalMode::Downstream => ("downstream", "accuracy"),
        };
        table.write(self.out(), stem, metric)?;
        Ok(table)
    }

    /// All four weighting schemes end to end, one AUC row each.
    pub fn ablate(&self) -> Result<ResultTable> {
        let methods = Scheme::ALL;
        self.build_all(&methods)?;
        let table = self.auc_table(&methods, "AUC by weighting scheme (kNN)")?;
        table.write(self.out(), "ablation", "auc")?;
        Ok(table)
    }

    fn auc_table(&self, methods: &[Scheme], title: &str) -> Result<ResultTable> {
        let mut table = ResultTable::new(title);
        for &m in methods {
            for d in &self.domains {
                let domain = d.spec.domain();
                let scores = self.read_scores(domain, m)?;
                let roc = auc_from_scores(&scores).map_err(|e| e.in_cell(m.name(), domain))?;
                table.set(m.name(), domain, roc.auc);
            }
        }
        Ok(table)
    }

    fn downstream_table(&self, methods: &[Scheme]) -> Result<ResultTable> {
        let mut table = ResultTable::new(format!(
            "Parser accuracy, {:.0}% domain-adjacent test data",
            self.settings.adjacent_fraction * 100.0
        ));
        for (run, data) in self.runs()?.iter().zip(&self.domains) {
            let Some(outcomes) = data.outcomes.as_ref() else {
                unreachable!("checked in evaluate")
            };
            let scores: Vec<(String, Vec<ScoreRecord>)> = methods
                .iter()
                .map(|&m| Ok((m.name().to_owned(), self.read_scores(run.name(), m)?)))
                .collect::<Result<_>>()?;
            let named: Vec<(String, &[ScoreRecord])> = scores
                .iter()
                .map(|(n, s)| (n.clone(), s.as_slice()))
                .collect();
            let rows = downstream_rows(
                &run.splits.test,
                &named,
                outcomes,
                self.settings.adjacent_fraction,
                run.mix_seed(),
            )
            .map_err(|e| e.in_cell("downstream", run.name()))?;
            for row in rows {
                table.set(&row.method, run.name(), row.accuracy);
            }
        }
        Ok(table)
    }

    /// Writes the materialized domain-specific table of one domain as text.
    pub fn export_domain_table(&self, domain: &str, path: &Path) -> Result<usize> {
        let mapping = self.load_mapping(domain)?;
        let table = mapping.materialize(&self.pretrained)?;
        table.save(path)?;
        Ok(table.len())
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

fn write(path: &Path, contents: &str) -> Result<()> {
    create_parent(path)?;
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path, hint: &str) -> Result<Vec<T>> {
    if !path.is_file() {
        return Err(Error::MissingArtifact {
            path: path.to_owned(),
            hint: hint.to_owned(),
        });
    }
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
