use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Instance;
use crate::error::{Error, Result};

/// Whether the external parser got an instance right.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub id: String,
    pub correct: bool,
}

pub type Outcomes = HashMap<String, bool>;

/// Reads `{"id": ..., "correct": ...}` lines. Ids must be unique.
pub fn parse_outcomes<R: BufRead>(reader: R, source: &str) -> Result<Outcomes> {
    let mut out = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let err = |message: String| Error::Parse {
            path: source.to_owned(),
            line: i + 1,
            message,
        };
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ParseOutcome = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if out.insert(rec.id.clone(), rec.correct).is_some() {
            return Err(err(format!("duplicate outcome for id {:?}", rec.id)));
        }
    }
    Ok(out)
}

pub fn load_outcomes(path: &Path) -> Result<Outcomes> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_outcomes(BufReader::new(file), &path.display().to_string())
}

/// Writes outcomes sorted by id.
pub fn save_outcomes(path: &Path, outcomes: &Outcomes) -> Result<()> {
    let mut ids: Vec<&String> = outcomes.keys().collect();
    ids.sort();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        for id in ids {
            let rec = ParseOutcome {
                id: id.clone(),
                correct: outcomes[id],
            };
            serde_json::to_writer(&mut *w, &rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

/// Parser accuracy once flagged instances receive the empty parse.
///
/// The gold parse of a domain-adjacent instance is the empty parse, so it
/// counts as correct only when flagged. An in-domain instance counts as
/// correct only when it is not flagged and the parser got it right.
/// Domain-adjacent instances need no outcome entry.
pub fn downstream_accuracy(test: &[Instance], flags: &[bool], outcomes: &Outcomes) -> Result<f64> {
    if test.len() != flags.len() {
        return Err(Error::InvalidArgument(format!(
            "{} flags for {} test instances",
            flags.len(),
            test.len()
        )));
    }
    if test.is_empty() {
        return Err(Error::Empty("test set".into()));
    }
    let mut correct = 0usize;
    for (inst, &flagged) in test.iter().zip(flags) {
        let ok = match (inst.is_adjacent(), flagged) {
            (true, flagged) => flagged,
            (false, true) => false,
            (false, false) => *outcomes
                .get(&inst.id)
                .ok_or_else(|| Error::MissingOutcome {
                    id: inst.id.clone(),
                })?,
        };
        correct += usize::from(ok);
    }
    Ok(correct as f64 / test.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DownstreamRow {
    pub method: String,
    pub accuracy: f64,
}

pub const NO_FILTER: &str = "no-filter";
pub const ORACLE: &str = "oracle";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Label, Split};

    /// 8 in-domain (parser right on the even ones) and 2 adjacent.
    fn setup() -> (Vec<Instance>, Outcomes) {
        let mut test = Vec::new();
        let mut outcomes = Outcomes::new();
        for i in 0..10 {
            let mut inst = Instance::new(i.to_string(), "w", &["p"], Split::Test);
            inst.label = Some(if i < 8 {
                Label::InDomain
            } else {
                Label::DomainAdjacent
            });
            if i < 8 {
                outcomes.insert(i.to_string(), i % 2 == 0);
            }
            test.push(inst);
        }
        (test, outcomes)
    }

    #[test]
    fn oracle_and_no_filter() {
        let (test, outcomes) = setup();
        let oracle: Vec<bool> = test.iter().map(Instance::is_adjacent).collect();
        let none = vec![false; 10];
        let all = vec![true; 10];
        assert_eq!(downstream_accuracy(&test, &oracle, &outcomes).unwrap(), 0.6);
        assert_eq!(downstream_accuracy(&test, &none, &outcomes).unwrap(), 0.4);
        assert_eq!(downstream_accuracy(&test, &all, &outcomes).unwrap(), 0.2);
    }

    #[test]
    fn missing_outcome_only_matters_when_unflagged_in_domain() {
        let (test, mut outcomes) = setup();
        outcomes.remove("3");
        let mut flags = vec![false; 10];
        assert!(matches!(
            downstream_accuracy(&test, &flags, &outcomes),
            Err(Error::MissingOutcome { .. })
        ));
        flags[3] = true;
        assert!(downstream_accuracy(&test, &flags, &outcomes).is_ok());
    }

    #[test]
    fn outcome_file_parsing() {
        let text = "{\"id\": \"a\", \"correct\": true}\n\n{\"id\": \"b\", \"correct\": false}\n";
        let o = parse_outcomes(text.as_bytes(), "mem").unwrap();
        assert_eq!(o.len(), 2);
        assert!(o["a"] && !o["b"]);
        let dup = "{\"id\": \"a\", \"correct\": true}\n{\"id\": \"a\", \"correct\": true}\n";
        assert!(matches!(
            parse_outcomes(dup.as_bytes(), "mem"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    proptest::proptest! {
        #[test]
        fn oracle_dominates_when_parser_is_perfect(flags in proptest::collection::vec(proptest::bool::ANY, 10)) {
            let (test, mut outcomes) = setup();
            outcomes.values_mut().for_each(|c| *c = true);
            let oracle: Vec<bool> = test.iter().map(Instance::is_adjacent).collect();
            let best = downstream_accuracy(&test, &oracle, &outcomes).unwrap();
            proptest::prop_assert!(downstream_accuracy(&test, &flags, &outcomes).unwrap() <= best);
        }

        #[test]
        fn oracle_gap_is_adjacent_fraction(
            correct in proptest::collection::vec(proptest::bool::ANY, 8),
        ) {
            let (test, mut outcomes) = setup();
            for (i, c) in correct.iter().enumerate() {
                outcomes.insert(i.to_string(), *c);
            }
            let oracle: Vec<bool> = test.iter().map(Instance::is_adjacent).collect();
            let gap = downstream_accuracy(&test, &oracle, &outcomes).unwrap()
                - downstream_accuracy(&test, &[false; 10], &outcomes).unwrap();
            proptest::prop_assert!((gap - 0.2).abs() <= 1e-12);
        }
    }
}
