//! Run configuration: a TOML file plus command-line overrides.
//!
//! ```toml
//! seed = 13
//! methods = ["surprise", "cbow", "frequency", "pretrained-weights"]
//!
//! [paths]
//! pretrained = "vectors/glove.300d.txt"
//! output_dir = "runs/default"
//!
//! [hyperparams]
//! window = 2           # surprise context half-width
//! train_window = 2     # CBOW training context half-width
//! epochs = 10
//! learning_rate = 0.05
//! k = 5
//! flag_fraction = 0.03
//! adjacent_fraction = 0.2
//! dev_fraction = 0.2
//!
//! [[domains]]
//! name = "basketball"
//! corpus = "data/basketball.jsonl"
//! outcomes = "data/basketball.outcomes.jsonl"
//! # excluded_predicates defaults to the built-in table for known names
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{default_split_specs, SplitSpec};
use crate::domain_mapping::Hyperparams;
use crate::encoders::Scheme;
use crate::error::{Error, Result};
use crate::harness::Settings;

/// Environment variable naming the config file when `--config` is absent.
pub const CONFIG_ENV: &str = "ADJACENCY_CONFIG";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "all_methods")]
    pub methods: Vec<Scheme>,
    /// Worker threads; all cores when absent.
    #[serde(default)]
    pub jobs: Option<usize>,
    pub paths: Paths,
    #[serde(default)]
    pub hyperparams: HyperparamConfig,
    #[serde(default)]
    pub domains: Vec<DomainConfig>,
}

fn all_methods() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub pretrained: PathBuf,
    #[serde(default)]
    pub pretrained_dim: Option<usize>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("adjacency-out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperparamConfig {
    pub window: usize,
    pub train_window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub domain_dim: Option<usize>,
    pub k: usize,
    pub flag_fraction: f64,
    pub adjacent_fraction: f64,
    pub dev_fraction: f64,
}

impl Default for HyperparamConfig {
    fn default() -> Self {
        let s = Settings::default();
        HyperparamConfig {
            window: s.surprise_window,
            train_window: s.mapping.window,
            epochs: s.mapping.epochs,
            learning_rate: s.mapping.learning_rate,
            domain_dim: None,
            k: s.k,
            flag_fraction: s.flag_fraction,
            adjacent_fraction: s.adjacent_fraction,
            dev_fraction: s.dev_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub name: String,
    pub corpus: PathBuf,
    #[serde(default)]
    pub excluded_predicates: Vec<String>,
    #[serde(default)]
    pub outcomes: Option<PathBuf>,
}

impl DomainConfig {
    /// Configured predicates, or the built-in defaults for a known domain.
    pub fn split_spec(&self) -> Result<SplitSpec> {
        if !self.excluded_predicates.is_empty() {
            return SplitSpec::new(&self.name, self.excluded_predicates.iter().cloned());
        }
        default_split_specs()
            .into_iter()
            .find(|s| s.domain() == self.name)
            .ok_or_else(|| {
                Error::Config(format!(
                    "domain {:?} lists no excluded_predicates and has no built-in default",
                    self.name
                ))
            })
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.resolve_paths(base_dir);
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.pretrained);
        fix(&mut self.paths.output_dir);
        for d in &mut self.domains {
            fix(&mut d.corpus);
            if let Some(o) = &mut d.outcomes {
                fix(o);
            }
        }
    }

    pub fn settings(&self) -> Settings {
        let h = &self.hyperparams;
        Settings {
            surprise_window: h.window,
            mapping: Hyperparams {
                window: h.train_window,
                epochs: h.epochs,
                learning_rate: h.learning_rate,
                seed: self.seed,
                domain_dim: h.domain_dim,
            },
            k: h.k,
            flag_fraction: h.flag_fraction,
            adjacent_fraction: h.adjacent_fraction,
            dev_fraction: h.dev_fraction,
            seed: self.seed,
        }
    }

    /// Checks values and that every referenced input file exists, before
    /// any stage runs.
    pub fn validate(&self) -> Result<()> {
        self.settings()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.hyperparams.domain_dim == Some(0) || self.paths.pretrained_dim == Some(0) {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.domains.is_empty() {
            return Err(Error::Config("no domains configured".into()));
        }
        let exists = |what: &str, p: &Path| {
            if p.is_file() {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{what} {} does not exist",
                    p.display()
                )))
            }
        };
        exists("pre-trained vector file", &self.paths.pretrained)?;
        let mut names = std::collections::HashSet::new();
        for d in &self.domains {
            if !names.insert(&d.name) {
                return Err(Error::Config(format!(
                    "domain {:?} configured twice",
                    d.name
                )));
            }
            if d.name.is_empty() || d.name.contains(['/', '\\']) {
                return Err(Error::Config(format!("invalid domain name {:?}", d.name)));
            }
            d.split_spec()?;
            exists("corpus", &d.corpus)?;
            if let Some(o) = &d.outcomes {
                exists("outcome file", o)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[paths]
pretrained = "v.txt"

[[domains]]
name = "blocks"
corpus = "blocks.jsonl"
"#;

    #[test]
    fn defaults_and_resolution() {
        let c = RunConfig::from_toml(MINIMAL, Path::new("/tmp/cfg")).unwrap();
        assert_eq!(c.paths.pretrained, Path::new("/tmp/cfg/v.txt"));
        assert_eq!(c.methods.len(), 4);
        assert_eq!(c.hyperparams.k, 5);
        assert_eq!(c.hyperparams.flag_fraction, 0.03);
        let spec = c.domains[0].split_spec().unwrap();
        assert!(spec.excluded().contains("length"));
        assert_eq!(c.settings().mapping.window, 2);
    }

    #[test]
    fn unknown_keys_and_bad_values() {
        let bad = format!("{MINIMAL}\n[extra]\nx = 1\n");
        assert!(matches!(
            RunConfig::from_toml(&bad, Path::new(".")),
            Err(Error::Config(_))
        ));
        let mut c = RunConfig::from_toml(MINIMAL, Path::new("/nonexistent")).unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(m)) if m.contains("pre-trained")));
        c.hyperparams.flag_fraction = 1.5;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_domain_needs_predicates() {
        let d = DomainConfig {
            name: "airline".into(),
            corpus: "x".into(),
            excluded_predicates: vec![],
            outcomes: None,
        };
        assert!(d.split_spec().is_err());
    }
}
