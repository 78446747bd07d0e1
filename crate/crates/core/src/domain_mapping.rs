//! CBOW training where the input layer consumes pre-trained vectors.
//!
//! The input layer is a linear map `M` (domain_dim x pretrained_dim). For a
//! centre position the hidden state is the mean of `M v_j` over the context,
//! and a full softmax over the training vocabulary predicts the centre token.
//! After training, `M v` gives a domain-specific vector for any token that
//! has a pre-trained vector, including tokens never seen in training.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Instance;
use crate::embeddings::{EmbeddingTable, TableKind};
use crate::error::{Error, Result};

const INIT_STDDEV: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Context half-width used during training.
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Defaults to the pre-trained dimension.
    pub domain_dim: Option<usize>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            window: 2,
            epochs: 10,
            learning_rate: 0.05,
            seed: 0,
            domain_dim: None,
        }
    }
}

impl Hyperparams {
    fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidArgument(
                "training window must be at least 1".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.domain_dim == Some(0) {
            return Err(Error::InvalidArgument(
                "domain dimension must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = crate::embeddings::dot(self.row(r), x);
        }
    }

    /// `out = self^T y`
    fn mul_t_vec_into(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.row(r)) {
                *o += yr * m;
            }
        }
    }

    /// `self -= scale * a b^T`
    fn sub_outer(&mut self, scale: f64, a: &[f64], b: &[f64]) {
        for (r, &ar) in a.iter().enumerate() {
            let s = scale * ar;
            if s == 0.0 {
                continue;
            }
            for (m, &bc) in self.row_mut(r).iter_mut().zip(b) {
                *m -= s * bc;
            }
        }
    }
}

/// A fitted pre-trained to domain-specific mapping plus the CBOW output
/// layer it was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainMapping {
    input_map: Matrix,
    output_layer: Matrix,
    vocab: Vec<String>,
    hyperparams: Hyperparams,
    epoch_losses: Vec<f64>,
}

impl DomainMapping {
    /// Square identity map with an empty vocabulary.
    pub fn identity(dim: usize) -> Self {
        let mut input_map = Matrix::zeros(dim, dim);
        for i in 0..dim {
            input_map.data[i * dim + i] = 1.0;
        }
        DomainMapping {
            input_map,
            output_layer: Matrix::zeros(0, dim),
            vocab: Vec::new(),
            hyperparams: Hyperparams {
                domain_dim: Some(dim),
                epochs: 0,
                ..Hyperparams::default()
            },
            epoch_losses: Vec::new(),
        }
    }

    pub fn input_map(&self) -> &Matrix {
        &self.input_map
    }

    pub fn output_layer(&self) -> &Matrix {
        &self.output_layer
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyperparams
    }

    /// Mean cross-entropy per epoch.
    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }

    pub fn pretrained_dim(&self) -> usize {
        self.input_map.cols
    }

    pub fn domain_dim(&self) -> usize {
        self.input_map.rows
    }

    /// `M v` for a pre-trained vector `v`.
    pub fn apply(&self, word_vector: &[f64]) -> Result<Vec<f64>> {
        if word_vector.len() != self.pretrained_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.pretrained_dim(),
                found: word_vector.len(),
            });
        }
        let mut out = vec![0.0; self.domain_dim()];
        self.input_map.mul_vec_into(word_vector, &mut out);
        Ok(out)
    }

    /// Domain-specific table holding `M v` for every pre-trained token.
    pub fn materialize(&self, pretrained: &EmbeddingTable) -> Result<EmbeddingTable> {
        pretrained.map_vectors(TableKind::DomainSpecific, |v| self.apply(v))
    }

    /// Softmax over the vocabulary for the centre at `position`, using
    /// in-vocabulary context tokens within the training window. `None` when
    /// the context is empty.
    pub fn predict_center(
        &self,
        pretrained: &EmbeddingTable,
        tokens: &[String],
        position: usize,
    ) -> Option<Vec<f64>> {
        let ids: Vec<Option<&[f64]>> = tokens.iter().map(|t| pretrained.get(t)).collect();
        let x = context_mean(
            &ids,
            position,
            self.hyperparams.window,
            self.pretrained_dim(),
        )?;
        let mut h = vec![0.0; self.domain_dim()];
        self.input_map.mul_vec_into(&x, &mut h);
        let mut z = vec![0.0; self.vocab.len()];
        self.output_layer.mul_vec_into(&h, &mut z);
        softmax_in_place(&mut z);
        Some(z)
    }

    pub fn vocab_index(&self, token: &str) -> Option<usize> {
        self.vocab.iter().position(|t| t == token)
    }
}

/// Mean of the present vectors within `±window` of `position`, centre
/// excluded, clipped at the sentence edges.
fn context_mean(
    vectors: &[Option<&[f64]>],
    position: usize,
    window: usize,
    dim: usize,
) -> Option<Vec<f64>> {
    let lo = position.saturating_sub(window);
    let mut acc = vec![0.0; dim];
    let mut n = 0usize;
    for (j, slot) in vectors
        .iter()
        .enumerate()
        .skip(lo)
        .take(position + window + 1 - lo)
    {
        if j == position {
            continue;
        }
        if let Some(v) = *slot {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    let inv = 1.0 / n as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Some(acc)
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

/// Fits a [`DomainMapping`] on the training split.
///
/// Every position whose token has a pre-trained vector and whose window
/// holds at least one such token is a training example. Tokens without a
/// pre-trained vector are ignored.
pub fn train_mapping(
    train: &[Instance],
    pretrained: &EmbeddingTable,
    hp: &Hyperparams,
) -> Result<DomainMapping> {
    hp.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training split".into()));
    }
    let p_dim = pretrained.dimension();
    let d_dim = hp.domain_dim.unwrap_or(p_dim);

    let mut vocab: Vec<String> = Vec::new();
    let mut vocab_ids: HashMap<&str, usize> = HashMap::new();
    let sentences: Vec<Vec<Option<usize>>> = train
        .iter()
        .map(|inst| {
            inst.tokens
                .iter()
                .map(|t| {
                    if !pretrained.contains(t) {
                        return None;
                    }
                    Some(*vocab_ids.entry(t.as_str()).or_insert_with(|| {
                        vocab.push(t.clone());
                        vocab.len() - 1
                    }))
                })
                .collect()
        })
        .collect();
    let vectors: Vec<&[f64]> = vocab
        .iter()
        .map(|t| pretrained.get(t).expect("in table"))
        .collect();

    let trainable = sentences
        .iter()
        .map(|s| {
            (0..s.len())
                .filter(|&i| {
                    s[i].is_some() && {
                        let lo = i.saturating_sub(hp.window);
                        let hi = (i + hp.window).min(s.len() - 1);
                        (lo..=hi).any(|j| j != i && s[j].is_some())
                    }
                })
                .count()
        })
        .sum::<usize>();
    if trainable == 0 {
        return Err(Error::NoTrainablePositions);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let noise = Normal::new(0.0, INIT_STDDEV).expect("valid stddev");
    let mut input_map = Matrix::zeros(d_dim, p_dim);
    for r in 0..d_dim {
        for c in 0..p_dim {
            let base = if r == c { 1.0 } else { 0.0 };
            input_map.data[r * p_dim + c] = base + noise.sample(&mut rng);
        }
    }
    let mut output_layer = Matrix::zeros(vocab.len(), d_dim);
    output_layer
        .data
        .iter_mut()
        .for_each(|x| *x = noise.sample(&mut rng));

    let mut order: Vec<usize> = (0..sentences.len()).collect();
    let mut epoch_losses = Vec::with_capacity(hp.epochs);
    let mut ctx: Vec<Option<&[f64]>> = Vec::new();
    let mut h = vec![0.0; d_dim];
    let mut z = vec![0.0; vocab.len()];
    let mut dh = vec![0.0; d_dim];
    let lr = hp.learning_rate;

    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut count = 0usize;
        for &s in &order {
            let sentence = &sentences[s];
            ctx.clear();
            ctx.extend(sentence.iter().map(|id| id.map(|i| vectors[i])));
            for (pos, target) in sentence.iter().enumerate() {
                let Some(target) = *target else { continue };
                let Some(x) = context_mean(&ctx, pos, hp.window, p_dim) else {
                    continue;
                };
                input_map.mul_vec_into(&x, &mut h);
                output_layer.mul_vec_into(&h, &mut z);
                softmax_in_place(&mut z);
                let loss = -z[target].ln();
                total += loss;
                count += 1;
                // z becomes dL/dlogits
                z[target] -= 1.0;
                output_layer.mul_t_vec_into(&z, &mut dh);
                output_layer.sub_outer(lr, &z, &h);
                input_map.sub_outer(lr, &dh, &x);
            }
        }
        let mean = total / count as f64;
        if !mean.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: epoch + 1 });
        }
        log::info!("epoch {}: mean loss {mean:.6}", epoch + 1);
        epoch_losses.push(mean);
    }

    Ok(DomainMapping {
        input_map,
        output_layer,
        vocab,
        hyperparams: Hyperparams {
            domain_dim: Some(d_dim),
            ..hp.clone()
        },
        epoch_losses,
    })
}

/// `M v`; see [`DomainMapping::apply`].
pub fn apply_mapping(mapping: &DomainMapping, word_vector: &[f64]) -> Result<Vec<f64>> {
    mapping.apply(word_vector)
}

pub fn materialize_domain_table(
    mapping: &DomainMapping,
    pretrained: &EmbeddingTable,
) -> Result<EmbeddingTable> {
    mapping.materialize(pretrained)
}

// Model file layout (all integers and floats little-endian):
//
//   8 bytes   magic "ADJMAP\0" followed by format version byte 0x01
//   8 bytes   u64 length H of the JSON header
//   H bytes   UTF-8 JSON header, see `ModelHeader`
//   f64 x (domain_dim * pretrained_dim)   input map, row-major
//   f64 x (vocab_size * domain_dim)       output layer, row-major
const MAGIC: &[u8; 8] = b"ADJMAP\0\x01";

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    pretrained_dim: usize,
    domain_dim: usize,
    vocab_size: usize,
    hyperparams: Hyperparams,
    epoch_losses: Vec<f64>,
    vocab: Vec<String>,
}

impl DomainMapping {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = ModelHeader {
            pretrained_dim: self.pretrained_dim(),
            domain_dim: self.domain_dim(),
            vocab_size: self.vocab.len(),
            hyperparams: self.hyperparams.clone(),
            epoch_losses: self.epoch_losses.clone(),
            vocab: self.vocab.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(
            16 + json.len() + 8 * (self.input_map.data.len() + self.output_layer.data.len()),
        );
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for x in self.input_map.data.iter().chain(&self.output_layer.data) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::ModelFormat(m.to_owned());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("bad magic or unsupported version"));
        }
        let h_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(16..).ok_or_else(|| bad("truncated"))?;
        let json = body.get(..h_len).ok_or_else(|| bad("truncated header"))?;
        let header: ModelHeader =
            serde_json::from_slice(json).map_err(|e| Error::ModelFormat(format!("header: {e}")))?;
        if header.vocab.len() != header.vocab_size {
            return Err(bad("vocab size does not match header"));
        }
        let n_in = header.domain_dim * header.pretrained_dim;
        let n_out = header.vocab_size * header.domain_dim;
        let floats = &body[h_len..];
        if floats.len() != 8 * (n_in + n_out) {
            return Err(bad("matrix payload has the wrong length"));
        }
        let mut values = floats
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let input = values.by_ref().take(n_in).collect();
        let output = values.collect();
        Ok(DomainMapping {
            input_map: Matrix::from_vec(header.domain_dim, header.pretrained_dim, input)?,
            output_layer: Matrix::from_vec(header.vocab_size, header.domain_dim, output)?,
            vocab: header.vocab,
            hyperparams: header.hyperparams,
            epoch_losses: header.epoch_losses,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&self.to_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
