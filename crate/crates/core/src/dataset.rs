//! Labeled corpora and the predicate-exclusion splits.
//!
//! A corpus is a JSON-lines file, one record per utterance:
//!
//! ```text
//! {"id": "b-17", "text": "cancel my flight to SFO", "predicates": ["cancelFlight"], "split": "train"}
//! ```
//!
//! `id` is optional and defaults to the 1-based line number. Removing every
//! instance that mentions an excluded predicate from train/dev manufactures
//! domain-adjacent test data: the parser's schema no longer covers it.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!(
                "unknown split {other:?} (expected train, dev or test)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    InDomain,
    DomainAdjacent,
}

impl Label {
    pub fn is_adjacent(self) -> bool {
        self == Label::DomainAdjacent
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::InDomain => "in-domain",
            Label::DomainAdjacent => "domain-adjacent",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub id: String,
    pub raw_text: String,
    pub tokens: Vec<String>,
    pub predicates: BTreeSet<String>,
    pub split: Split,
    /// Unset until [`exclude_predicates`] has run.
    pub label: Option<Label>,
}

impl Instance {
    pub fn new(id: impl Into<String>, text: &str, predicates: &[&str], split: Split) -> Self {
        Instance {
            id: id.into(),
            raw_text: text.to_owned(),
            tokens: tokenize(text),
            predicates: predicates.iter().map(|p| (*p).to_owned()).collect(),
            split,
            label: None,
        }
    }

    pub fn is_adjacent(&self) -> bool {
        self.label.is_some_and(Label::is_adjacent)
    }
}

/// Lowercases, splits on whitespace and trims punctuation from both ends of
/// every token. Internal punctuation such as apostrophes is kept.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(is_punctuation).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation() || matches!(c, '“' | '”' | '‘' | '’' | '«' | '»' | '…' | '¿' | '¡')
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<serde_json::Value>,
    text: Option<String>,
    predicates: Option<Vec<String>>,
    split: Option<String>,
}

pub fn parse_corpus<R: BufRead>(reader: R, source: &str) -> Result<Vec<Instance>> {
    let err = |line: usize, message: String| Error::Parse {
        path: source.to_owned(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| err(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| err(line_no, e.to_string()))?;
        let missing = |field: &str| err(line_no, format!("missing field `{field}`"));
        let text = raw.text.ok_or_else(|| missing("text"))?;
        let predicates = raw.predicates.ok_or_else(|| missing("predicates"))?;
        let split: Split = raw
            .split
            .ok_or_else(|| missing("split"))?
            .parse()
            .map_err(|m| err(line_no, m))?;
        let id = match raw.id {
            None => line_no.to_string(),
            Some(serde_json::Value::String(s)) => s,
            Some(serde_json::Value::Number(n)) => n.to_string(),
            Some(other) => {
                return Err(err(
                    line_no,
                    format!("id must be a string or number, got {other}"),
                ))
            }
        };
        out.push(Instance {
            id,
            tokens: tokenize(&text),
            raw_text: text,
            predicates: predicates.into_iter().collect(),
            split,
            label: None,
        });
    }
    if out.is_empty() {
        log::warn!("{source}: corpus is empty");
    }
    Ok(out)
}

pub fn load_corpus(path: &Path) -> Result<Vec<Instance>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file), &path.display().to_string())
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    text: &'a str,
    predicates: &'a BTreeSet<String>,
    split: Split,
}

/// Writes instances in the corpus format read by [`parse_corpus`].
pub fn write_corpus<W: Write>(mut writer: W, instances: &[Instance]) -> std::io::Result<()> {
    for i in instances {
        let rec = OutRecord {
            id: &i.id,
            text: &i.raw_text,
            predicates: &i.predicates,
            split: i.split,
        };
        serde_json::to_writer(&mut writer, &rec)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_corpus(path: &Path, instances: &[Instance]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(BufWriter::new(file), instances).map_err(|e| Error::io(path, e))
}

/// The predicates removed from the parser's schema for one domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    domain: String,
    excluded: BTreeSet<String>,
}

impl SplitSpec {
    pub fn new<I, S>(domain: impl Into<String>, excluded: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let domain = domain.into();
        let excluded: BTreeSet<String> = excluded.into_iter().map(Into::into).collect();
        if excluded.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "domain {domain:?}: at least one excluded predicate is required"
            )));
        }
        Ok(SplitSpec { domain, excluded })
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn excluded(&self) -> &BTreeSet<String> {
        &self.excluded
    }

    /// Label is a pure function of the predicate set.
    pub fn label_for(&self, predicates: &BTreeSet<String>) -> Label {
        if predicates.iter().any(|p| self.excluded.contains(p)) {
            Label::DomainAdjacent
        } else {
            Label::InDomain
        }
    }
}

/// Excluded predicates for the eight public semantic parsing benchmark
/// domains (basketball through social).
pub fn default_split_specs() -> Vec<SplitSpec> {
    let table: [(&str, &[&str]); 8] = [
        ("basketball", &["numGamesPlayed"]),
        ("blocks", &["length"]),
        ("calendar", &["startTime"]),
        ("housing", &["size"]),
        ("publications", &["venue"]),
        ("recipes", &["preparationTime"]),
        ("restaurants", &["starRating"]),
        ("social", &["educationStartDate", "employmentEndDate"]),
    ];
    table
        .iter()
        .map(|(d, p)| SplitSpec::new(*d, p.iter().copied()).expect("non-empty"))
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct Splits {
    pub train: Vec<Instance>,
    pub dev: Vec<Instance>,
    pub test: Vec<Instance>,
    /// Excluded predicates that never occur in the corpus.
    pub unused_predicates: Vec<String>,
    /// Domain-adjacent instances dropped from train and dev.
    pub removed: usize,
    /// Instances with no tokens, never admitted to a split.
    pub empty: usize,
    /// Seed used to carve dev out of train, when the corpus had no dev split.
    pub dev_seed: Option<u64>,
}

/// Labels every instance and removes domain-adjacent ones from train and
/// dev. Test keeps both labels.
pub fn exclude_predicates(corpus: &[Instance], spec: &SplitSpec) -> Splits {
    let mut splits = Splits::default();
    let mut seen: HashSet<&str> = HashSet::new();
    for inst in corpus {
        seen.extend(inst.predicates.iter().map(String::as_str));
        if inst.tokens.is_empty() {
            splits.empty += 1;
            continue;
        }
        let mut inst = inst.clone();
        let label = spec.label_for(&inst.predicates);
        inst.label = Some(label);
        match (inst.split, label) {
            (Split::Train | Split::Dev, Label::DomainAdjacent) => splits.removed += 1,
            (Split::Train, _) => splits.train.push(inst),
            (Split::Dev, _) => splits.dev.push(inst),
            (Split::Test, _) => splits.test.push(inst),
        }
    }
    splits.unused_predicates = spec
        .excluded
        .iter()
        .filter(|p| !seen.contains(p.as_str()))
        .cloned()
        .collect();
    for p in &splits.unused_predicates {
        log::warn!(
            "domain {}: excluded predicate {p:?} never occurs in the corpus",
            spec.domain
        );
    }
    if splits.empty > 0 {
        log::warn!(
            "domain {}: {} instances have no tokens and were skipped",
            spec.domain,
            splits.empty
        );
    }
    splits
}

impl Splits {
    /// Moves a seeded `fraction` of train into dev when dev is empty. Both
    /// parts keep the corpus order.
    pub fn carve_dev(&mut self, fraction: f64, seed: u64) -> Result<()> {
        if !self.dev.is_empty() {
            return Ok(());
        }
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "dev fraction {fraction} not in (0, 1)"
            )));
        }
        let n = self.train.len();
        if n < 2 {
            return Err(Error::Empty(
                "need at least two training instances to carve a dev set".into(),
            ));
        }
        let n_dev = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = vec![false; n];
        for i in index::sample(&mut rng, n, n_dev) {
            picked[i] = true;
        }
        let (dev, train): (Vec<_>, Vec<_>) = std::mem::take(&mut self.train)
            .into_iter()
            .zip(picked)
            .partition(|(_, p)| *p);
        self.train = train.into_iter().map(|(i, _)| i).collect();
        self.dev = dev
            .into_iter()
            .map(|(mut i, _)| {
                i.split = Split::Dev;
                i
            })
            .collect();
        self.dev_seed = Some(seed);
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MixedTestSet {
    pub instances: Vec<Instance>,
    pub in_domain: usize,
    pub adjacent: usize,
    /// Set when there were too few adjacent instances and sampling had to
    /// draw with replacement.
    pub with_replacement: bool,
}

impl MixedTestSet {
    pub fn adjacent_fraction(&self) -> f64 {
        self.adjacent as f64 / (self.in_domain + self.adjacent) as f64
    }
}

/// Resamples the domain-adjacent part of `test` so that it makes up
/// `adjacent_fraction` of the result. In-domain instances are all kept.
/// The output order is a seeded shuffle.
pub fn mix_test_set(test: &[Instance], adjacent_fraction: f64, seed: u64) -> Result<MixedTestSet> {
    if !(adjacent_fraction > 0.0 && adjacent_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "adjacent fraction {adjacent_fraction} not in (0, 1)"
        )));
    }
    let (adjacent, in_domain): (Vec<&Instance>, Vec<&Instance>) =
        test.iter().partition(|i| i.is_adjacent());
    if in_domain.is_empty() {
        return Err(Error::SingleLabel("domain-adjacent"));
    }
    if adjacent.is_empty() {
        return Err(Error::SingleLabel("in-domain"));
    }
    let n_id = in_domain.len();
    let wanted = (adjacent_fraction * n_id as f64 / (1.0 - adjacent_fraction)).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let with_replacement = wanted > adjacent.len();
    let chosen: Vec<&Instance> = if with_replacement {
        (0..wanted)
            .map(|_| adjacent[rng.random_range(0..adjacent.len())])
            .collect()
    } else {
        let mut idx = index::sample(&mut rng, adjacent.len(), wanted).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| adjacent[i]).collect()
    };
    if with_replacement {
        log::warn!(
            "only {} domain-adjacent test instances for {wanted} slots; sampling with replacement",
            adjacent.len()
        );
    }

    let mut instances: Vec<Instance> = in_domain.into_iter().chain(chosen).cloned().collect();
    instances.shuffle(&mut rng);
    Ok(MixedTestSet {
        instances,
        in_domain: n_id,
        adjacent: wanted,
        with_replacement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(id: usize, label: Label) -> Instance {
        let mut i = Instance::new(id.to_string(), &format!("word{id} x"), &["p"], Split::Test);
        i.label = Some(label);
        i
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("Change it to the 8am SFO flight"),
            ["change", "it", "to", "the", "8am", "sfo", "flight"]
        );
        assert_eq!(
            tokenize("What's my miles status"),
            ["what's", "my", "miles", "status"]
        );
        assert!(tokenize("   ").is_empty());
        assert_eq!(tokenize("\"hello,\" (world)! ..."), ["hello", "world"]);
    }

    #[test]
    fn parses_records() {
        let text = r#"{"text": "cancel my flight to SFO", "predicates": ["cancelFlight"], "split": "train"}
{"id": 7, "text": "x", "predicates": [], "split": "test"}
"#;
        let corpus = parse_corpus(text.as_bytes(), "mem").unwrap();
        assert_eq!(corpus[0].tokens, ["cancel", "my", "flight", "to", "sfo"]);
        assert_eq!(corpus[0].id, "1");
        assert_eq!(corpus[0].label, None);
        assert_eq!(corpus[1].id, "7");
        assert_eq!(corpus[1].split, Split::Test);
    }

    #[test]
    fn record_errors_name_line() {
        let text = "{\"text\": \"a\", \"predicates\": [], \"split\": \"train\"}\n{\"text\": \"b\", \"split\": \"train\"}\n";
        match parse_corpus(text.as_bytes(), "mem").unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("predicates"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = "{\"text\": \"a\", \"predicates\": [], \"split\": \"validation\"}\n";
        assert!(matches!(
            parse_corpus(text.as_bytes(), "mem"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse_corpus("".as_bytes(), "mem").unwrap().is_empty());
    }

    #[test]
    fn exclusion_removes_adjacent_training_data() {
        let mut corpus: Vec<Instance> = (0..10)
            .map(|i| {
                let p = if i < 3 { "changeSeat" } else { "cancelFlight" };
                Instance::new(i.to_string(), "some words", &[p], Split::Train)
            })
            .collect();
        corpus.push(Instance::new(
            "t",
            "status and seat",
            &["flightStatus", "changeSeat"],
            Split::Test,
        ));
        let spec = SplitSpec::new("air", ["changeSeat"]).unwrap();
        let splits = exclude_predicates(&corpus, &spec);
        assert_eq!(splits.train.len(), 7);
        assert!(splits
            .train
            .iter()
            .all(|i| i.label == Some(Label::InDomain)));
        assert_eq!(splits.removed, 3);
        assert_eq!(splits.test[0].label, Some(Label::DomainAdjacent));
        assert!(splits.unused_predicates.is_empty());
    }

    #[test]
    fn unused_predicate_is_reported_not_fatal() {
        let corpus = vec![Instance::new("a", "hi", &["x"], Split::Train)];
        let spec = SplitSpec::new("d", ["never"]).unwrap();
        let splits = exclude_predicates(&corpus, &spec);
        assert_eq!(splits.unused_predicates, ["never"]);
        assert_eq!(splits.train.len(), 1);
    }

    #[test]
    fn empty_exclusion_rejected() {
        assert!(SplitSpec::new("d", Vec::<String>::new()).is_err());
    }

    #[test]
    fn defaults_cover_eight_domains() {
        let specs = default_split_specs();
        assert_eq!(specs.len(), 8);
        assert_eq!(specs[7].excluded().len(), 2);
    }

    #[test]
    fn carve_dev_is_seeded() {
        let corpus: Vec<Instance> = (0..50)
            .map(|i| Instance::new(i.to_string(), "w", &["a"], Split::Train))
            .collect();
        let spec = SplitSpec::new("d", ["b"]).unwrap();
        let mut a = exclude_predicates(&corpus, &spec);
        let mut b = a.clone();
        a.carve_dev(0.2, 9).unwrap();
        b.carve_dev(0.2, 9).unwrap();
        assert_eq!(a.dev.len(), 10);
        assert_eq!(a.train.len(), 40);
        assert_eq!(a.dev, b.dev);
        assert!(a.dev.iter().all(|i| i.split == Split::Dev));
        assert_eq!(a.dev_seed, Some(9));
    }

    #[test]
    fn mix_to_twenty_percent() {
        let test: Vec<Instance> = (0..160)
            .map(|i| {
                labeled(
                    i,
                    if i < 80 {
                        Label::InDomain
                    } else {
                        Label::DomainAdjacent
                    },
                )
            })
            .collect();
        let mixed = mix_test_set(&test, 0.2, 3).unwrap();
        assert_eq!(mixed.in_domain, 80);
        assert_eq!(mixed.adjacent, 20);
        assert_eq!(
            mixed.instances.iter().filter(|i| i.is_adjacent()).count(),
            20
        );
        assert!(!mixed.with_replacement);

        let again = mix_test_set(&test, 0.2, 3).unwrap();
        assert_eq!(mixed.instances, again.instances);
    }

    #[test]
    fn mix_half_is_identity_multiset() {
        let test: Vec<Instance> = (0..40)
            .map(|i| {
                labeled(
                    i,
                    if i % 2 == 0 {
                        Label::InDomain
                    } else {
                        Label::DomainAdjacent
                    },
                )
            })
            .collect();
        let mixed = mix_test_set(&test, 0.5, 11).unwrap();
        let mut ids: Vec<_> = mixed.instances.iter().map(|i| i.id.clone()).collect();
        let mut want: Vec<_> = test.iter().map(|i| i.id.clone()).collect();
        ids.sort();
        want.sort();
        assert_eq!(ids, want);
    }

    #[test]
    fn mix_upsamples_with_replacement() {
        let test: Vec<Instance> = (0..12)
            .map(|i| {
                labeled(
                    i,
                    if i < 10 {
                        Label::InDomain
                    } else {
                        Label::DomainAdjacent
                    },
                )
            })
            .collect();
        let mixed = mix_test_set(&test, 0.5, 1).unwrap();
        assert!(mixed.with_replacement);
        assert_eq!(mixed.adjacent, 10);
    }

    #[test]
    fn mix_rejects_single_label() {
        let test: Vec<Instance> = (0..5).map(|i| labeled(i, Label::InDomain)).collect();
        assert!(matches!(
            mix_test_set(&test, 0.2, 0),
            Err(Error::SingleLabel(_))
        ));
    }

    proptest::proptest! {
        #[test]
        fn mixed_fraction_within_one_instance(
            n_id in 1usize..200,
            n_adj in 1usize..200,
            p in 0.01..0.99f64,
            seed in 0u64..1000,
        ) {
            let test: Vec<Instance> = (0..n_id + n_adj)
                .map(|i| labeled(i, if i < n_id { Label::InDomain } else { Label::DomainAdjacent }))
                .collect();
            let mixed = mix_test_set(&test, p, seed).unwrap();
            let total = mixed.instances.len() as f64;
            let got = mixed.instances.iter().filter(|i| i.is_adjacent()).count() as f64 / total;
            proptest::prop_assert!((got - p).abs() <= 1.0 / total + 1e-12);
        }

        #[test]
        fn train_and_dev_never_adjacent(
            preds in proptest::collection::vec((0usize..4, 0usize..3), 1..60),
        ) {
            let names = ["a", "b", "c", "d"];
            let corpus: Vec<Instance> = preds
                .iter()
                .enumerate()
                .map(|(i, (p, s))| {
                    let split = [Split::Train, Split::Dev, Split::Test][*s];
                    Instance::new(i.to_string(), "w", &[names[*p]], split)
                })
                .collect();
            let spec = SplitSpec::new("d", ["b", "c"]).unwrap();
            let splits = exclude_predicates(&corpus, &spec);
            proptest::prop_assert!(splits.train.iter().chain(&splits.dev).all(|i| !i.is_adjacent()));
            for i in &splits.test {
                proptest::prop_assert_eq!(i.label, Some(spec.label_for(&i.predicates)));
            }
        }
    }
}
