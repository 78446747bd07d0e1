//! Word vector tables and the cosine primitives used by every other module.
//!
//! Vector files are plain text, one `token c1 c2 ... cd` record per line.
//! A leading `count dimension` header line (word2vec text output) is
//! detected and skipped. Tables never normalize tokens; callers are expected
//! to look up tokens produced by [`crate::dataset::tokenize`].

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    Pretrained,
    DomainSpecific,
}

/// An immutable token to vector map with a fixed dimension.
///
/// Vectors are stored contiguously in insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    kind: TableKind,
    dimension: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

/// Bookkeeping produced while reading a vector file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub header_skipped: bool,
    pub duplicates: usize,
    pub filtered: usize,
}

impl EmbeddingTable {
    /// Builds a table from `(token, vector)` pairs. Later duplicates are
    /// dropped; the number dropped is returned alongside the table.
    pub fn from_entries<I, S>(
        kind: TableKind,
        dimension: usize,
        entries: I,
    ) -> Result<(Self, usize)>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        if dimension == 0 {
            return Err(Error::InvalidArgument(
                "embedding dimension must be positive".into(),
            ));
        }
        let mut table = EmbeddingTable {
            kind,
            dimension,
            tokens: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        };
        let mut duplicates = 0;
        for (token, vector) in entries {
            if vector.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: vector.len(),
                });
            }
            if !table.push(token.into(), &vector) {
                duplicates += 1;
            }
        }
        Ok((table, duplicates))
    }

    fn push(&mut self, token: String, vector: &[f64]) -> bool {
        if self.index.contains_key(&token) {
            return false;
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.data.extend_from_slice(vector);
        true
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Looks up a token. Absent tokens yield `None`, never a default vector.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.row(i))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }

    /// Tokens in insertion order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.tokens
            .iter()
            .enumerate()
            .map(move |(i, t)| (t.as_str(), self.row(i)))
    }

    /// Returns a copy with every vector transformed by `f`, keeping token
    /// order. `f` must return vectors of a single length.
    pub fn map_vectors<F>(&self, kind: TableKind, mut f: F) -> Result<EmbeddingTable>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let mut out: Option<EmbeddingTable> = None;
        for (token, v) in self.iter() {
            let mapped = f(v)?;
            let table = out.get_or_insert_with(|| EmbeddingTable {
                kind,
                dimension: mapped.len(),
                tokens: Vec::with_capacity(self.len()),
                index: HashMap::with_capacity(self.len()),
                data: Vec::with_capacity(self.len() * mapped.len()),
            });
            if mapped.len() != table.dimension {
                return Err(Error::DimensionMismatch {
                    expected: table.dimension,
                    found: mapped.len(),
                });
            }
            table.push(token.to_owned(), &mapped);
        }
        Ok(out.unwrap_or_else(|| EmbeddingTable {
            kind,
            dimension: self.dimension,
            tokens: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }))
    }

    /// Reads a text vector file. When `keep` is given, only tokens in the set
    /// are stored; the rest are checked for component count but not parsed.
    pub fn read_text<R: BufRead>(
        reader: R,
        source: &str,
        kind: TableKind,
        expected_dimension: Option<usize>,
        keep: Option<&HashSet<String>>,
    ) -> Result<(Self, LoadReport)> {
        if expected_dimension == Some(0) {
            return Err(Error::InvalidArgument(
                "expected dimension must be positive".into(),
            ));
        }
        let parse_err = |line: usize, message: String| Error::Parse {
            path: source.to_owned(),
            line,
            message,
        };

        let mut report = LoadReport::default();
        let mut dimension = expected_dimension;
        let mut tokens = Vec::new();
        let mut index = HashMap::new();
        let mut data = Vec::new();
        let mut seen_first = false;
        let mut buf = Vec::new();

        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| parse_err(line_no, e.to_string()))?;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else {
                continue;
            };
            let rest: Vec<&str> = fields.collect();

            if !seen_first {
                seen_first = true;
                if is_header(token, &rest) && expected_dimension != Some(1) {
                    report.header_skipped = true;
                    continue;
                }
            }

            let dim = *dimension.get_or_insert(rest.len());
            if rest.len() != dim {
                return Err(parse_err(
                    line_no,
                    format!("expected {dim} components, found {}", rest.len()),
                ));
            }
            if dim == 0 {
                return Err(parse_err(line_no, "token without components".into()));
            }
            if keep.is_some_and(|k| !k.contains(token)) {
                report.filtered += 1;
                continue;
            }
            if index.contains_key(token) {
                report.duplicates += 1;
                continue;
            }
            buf.clear();
            for field in &rest {
                let value: f64 = field
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("unparseable component {field:?}")))?;
                buf.push(value);
            }
            index.insert(token.to_owned(), tokens.len());
            tokens.push(token.to_owned());
            data.extend_from_slice(&buf);
        }

        let Some(dimension) =
            dimension.filter(|_| seen_first && (!tokens.is_empty() || report.filtered > 0))
        else {
            return Err(Error::Empty(format!("{source}: no vectors")));
        };
        if report.duplicates > 0 {
            log::warn!(
                "{source}: {} duplicate tokens ignored (first occurrence kept)",
                report.duplicates
            );
        }
        Ok((
            EmbeddingTable {
                kind,
                dimension,
                tokens,
                index,
                data,
            },
            report,
        ))
    }

    /// Writes the table as text with a `count dimension` header. Components
    /// use the shortest representation that parses back to the same value.
    pub fn write_text<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writeln!(writer, "{} {}", self.len(), self.dimension)?;
        for (token, v) in self.iter() {
            write!(writer, "{token}")?;
            for x in v {
                write!(writer, " {x:?}")?;
            }
            writeln!(writer)?;
        }
        writer.flush()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_text(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

fn is_header(first: &str, rest: &[&str]) -> bool {
    rest.len() == 1 && first.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok()
}

/// Loads a pre-trained vector file.
pub fn load_embeddings(path: &Path, expected_dimension: Option<usize>) -> Result<EmbeddingTable> {
    load_embeddings_filtered(path, expected_dimension, None).map(|(t, _)| t)
}

/// Like [`load_embeddings`], keeping only tokens in `keep`. Useful for large
/// public vector files when only a corpus vocabulary matters.
pub fn load_embeddings_filtered(
    path: &Path,
    expected_dimension: Option<usize>,
    keep: Option<&HashSet<String>>,
) -> Result<(EmbeddingTable, LoadReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::read_text(
        BufReader::new(file),
        &path.display().to_string(),
        TableKind::Pretrained,
        expected_dimension,
        keep,
    )
}

pub(crate) fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine from a dot product and the two norms. Zero norms give 0.
#[inline]
pub(crate) fn cosine_from_parts(dot: f64, norm_a: f64, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    (dot / (norm_a * norm_b)).clamp(-1.0, 1.0)
}

/// `a·b / (‖a‖‖b‖)`, or 0 when either vector has zero norm.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(cosine_from_parts(dot(a, b), norm(a), norm(b)))
}

/// `1 - cosine_similarity(a, b)`, in `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    cosine_similarity(a, b).map(|c| 1.0 - c)
}
