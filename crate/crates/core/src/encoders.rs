//! Sentence embeddings as weighted averages of pre-trained word vectors.
//!
//! Four weighting schemes are provided:
//!
//! * `surprise`: a token's weight is the cosine distance between its
//!   domain-specific vector and the sum of the domain-specific vectors of
//!   its context (`±window`, clipped at the sentence edges). Tokens the
//!   training data makes predictable get weights near 0.
//! * `pretrained-weights`: the same weighting computed from the pre-trained
//!   vectors directly, without the learned mapping.
//! * `frequency`: inverse document frequency over the training split.
//! * `cbow`: all weights 1.
//!
//! In every scheme the averaged vectors are the pre-trained ones. Tokens
//! without a pre-trained vector are dropped before anything else happens;
//! window positions still refer to the original token positions.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Instance;
use crate::embeddings::{cosine_from_parts, dot, norm, EmbeddingTable};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Surprise,
    Cbow,
    Frequency,
    PretrainedWeights,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Cbow,
        Scheme::Frequency,
        Scheme::PretrainedWeights,
        Scheme::Surprise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Surprise => "surprise",
            Scheme::Cbow => "cbow",
            Scheme::Frequency => "frequency",
            Scheme::PretrainedWeights => "pretrained-weights",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scheme {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceEmbedding {
    pub scheme: Scheme,
    pub vector: Vec<f64>,
    /// The tokens that contributed, in sentence order.
    pub tokens: Vec<String>,
    /// One weight per entry of `tokens`.
    pub weights: Vec<f64>,
    /// Tokens whose window held no usable context and got weight 1.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub empty_contexts: usize,
    /// All weights were 0, so the unweighted mean was used instead.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub zero_weight_fallback: bool,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

// Parallel vectors come out of the cosine a few ulps short of 1.
const ROUND_OFF: f64 = 1e-12;

/// Surprise weights for the tokens that have a vector, in sentence order.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenWeights {
    /// Position of each weighted token in the input.
    pub positions: Vec<usize>,
    pub weights: Vec<f64>,
    pub empty_contexts: usize,
}

/// Surprise weights `1 - cos(sum of context vectors, own vector)` over
/// `table`. Tokens missing from the table are skipped and never count as
/// context. A token with no context gets weight 1.
pub fn surprise_weights(tokens: &[String], table: &EmbeddingTable, window: usize) -> TokenWeights {
    surprise_weights_with(tokens, window, |t| table.get(t))
}

fn surprise_weights_with<'a, F>(tokens: &[String], window: usize, lookup: F) -> TokenWeights
where
    F: Fn(&str) -> Option<&'a [f64]>,
{
    let vectors: Vec<Option<&[f64]>> = tokens.iter().map(|t| lookup(t)).collect();
    let norms: Vec<f64> = vectors.iter().map(|v| v.map_or(0.0, norm)).collect();
    let mut out = TokenWeights {
        positions: Vec::new(),
        weights: Vec::new(),
        empty_contexts: 0,
    };
    let Some(dim) = vectors.iter().flatten().map(|v| v.len()).next() else {
        return out;
    };
    let mut expected = vec![0.0; dim];
    for (i, own) in vectors.iter().enumerate() {
        let Some(own) = own else { continue };
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(tokens.len() - 1);
        expected.iter_mut().for_each(|x| *x = 0.0);
        let mut n = 0;
        for (j, v) in vectors.iter().enumerate().take(hi + 1).skip(lo) {
            if j == i {
                continue;
            }
            if let Some(v) = v {
                expected.iter_mut().zip(*v).for_each(|(e, x)| *e += x);
                n += 1;
            }
        }
        let w = if n == 0 {
            out.empty_contexts += 1;
            1.0
        } else {
            let w = 1.0 - cosine_from_parts(dot(&expected, own), norm(&expected), norms[i]);
            if w < ROUND_OFF {
                0.0
            } else {
                w
            }
        };
        out.positions.push(i);
        out.weights.push(w);
    }
    out
}

/// Inverse document frequency over a set of documents, `ln(N / df) + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct IdfTable {
    idf: HashMap<String, f64>,
    documents: usize,
    max_idf: f64,
}

impl IdfTable {
    pub fn from_documents<'a, I, D>(documents: I) -> Result<Self>
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = &'a String>,
    {
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut n = 0usize;
        for doc in documents {
            n += 1;
            let unique: HashSet<&String> = doc.into_iter().collect();
            for t in unique {
                *df.entry(t.clone()).or_default() += 1;
            }
        }
        if n == 0 {
            return Err(Error::Empty("no documents for idf".into()));
        }
        let total = n as f64;
        let idf: HashMap<String, f64> = df
            .into_iter()
            .map(|(t, d)| (t, (total / d.max(1) as f64).ln() + 1.0))
            .collect();
        // with no tokens at all, unseen tokens fall back to the value of a
        // single-document token
        let max_idf = idf.values().copied().fold(f64::NAN, f64::max);
        let max_idf = if max_idf.is_nan() {
            total.ln() + 1.0
        } else {
            max_idf
        };
        Ok(IdfTable {
            idf,
            documents: n,
            max_idf,
        })
    }

    /// Document = instance.
    pub fn from_instances(train: &[Instance]) -> Result<Self> {
        Self::from_documents(train.iter().map(|i| i.tokens.iter()))
    }

    /// Unseen tokens get the largest observed idf.
    pub fn idf(&self, token: &str) -> f64 {
        self.idf.get(token).copied().unwrap_or(self.max_idf)
    }

    pub fn documents(&self) -> usize {
        self.documents
    }

    pub fn max_idf(&self) -> f64 {
        self.max_idf
    }
}

fn weighted_average(
    scheme: Scheme,
    tokens: &[String],
    pretrained: &EmbeddingTable,
    positions: &[usize],
    weights: Vec<f64>,
    empty_contexts: usize,
) -> Result<SentenceEmbedding> {
    if positions.is_empty() {
        return Err(Error::AllOutOfVocabulary {
            sentence: tokens.join(" "),
        });
    }
    let vectors: Vec<&[f64]> = positions
        .iter()
        .map(|&p| {
            pretrained
                .get(&tokens[p])
                .expect("position has a pre-trained vector")
        })
        .collect();
    let mut total: f64 = weights.iter().sum();
    let zero_weight_fallback = total == 0.0;
    let effective: Vec<f64> = if zero_weight_fallback {
        total = vectors.len() as f64;
        vec![1.0; vectors.len()]
    } else {
        weights.clone()
    };
    let mut vector = vec![0.0; pretrained.dimension()];
    for (v, w) in vectors.iter().zip(&effective) {
        vector.iter_mut().zip(*v).for_each(|(s, x)| *s += w * x);
    }
    vector.iter_mut().for_each(|s| *s /= total);
    Ok(SentenceEmbedding {
        scheme,
        vector,
        tokens: positions.iter().map(|&p| tokens[p].clone()).collect(),
        weights,
        empty_contexts,
        zero_weight_fallback,
    })
}

fn in_vocab_positions(tokens: &[String], pretrained: &EmbeddingTable) -> Vec<usize> {
    (0..tokens.len())
        .filter(|&i| pretrained.contains(&tokens[i]))
        .collect()
}

/// Surprise-weighted average of pre-trained vectors. Weights come from the
/// domain-specific table; a token must be in both tables to contribute.
pub fn encode_surprise(
    tokens: &[String],
    pretrained: &EmbeddingTable,
    domain: &EmbeddingTable,
    window: usize,
) -> Result<SentenceEmbedding> {
    let w = surprise_weights_with(tokens, window, |t| {
        if pretrained.contains(t) {
            domain.get(t)
        } else {
            None
        }
    });
    weighted_average(
        Scheme::Surprise,
        tokens,
        pretrained,
        &w.positions,
        w.weights,
        w.empty_contexts,
    )
}

/// Unweighted mean of the pre-trained vectors.
pub fn encode_cbow(tokens: &[String], pretrained: &EmbeddingTable) -> Result<SentenceEmbedding> {
    let positions = in_vocab_positions(tokens, pretrained);
    let weights = vec![1.0; positions.len()];
    weighted_average(Scheme::Cbow, tokens, pretrained, &positions, weights, 0)
}

pub fn encode_frequency(
    tokens: &[String],
    pretrained: &EmbeddingTable,
    idf: &IdfTable,
) -> Result<SentenceEmbedding> {
    let positions = in_vocab_positions(tokens, pretrained);
    let weights = positions.iter().map(|&p| idf.idf(&tokens[p])).collect();
    weighted_average(
        Scheme::Frequency,
        tokens,
        pretrained,
        &positions,
        weights,
        0,
    )
}

/// Surprise weighting with the pre-trained table standing in for the
/// domain-specific one.
pub fn encode_pretrained_weights(
    tokens: &[String],
    pretrained: &EmbeddingTable,
    window: usize,
) -> Result<SentenceEmbedding> {
    let w = surprise_weights(tokens, pretrained, window);
    weighted_average(
        Scheme::PretrainedWeights,
        tokens,
        pretrained,
        &w.positions,
        w.weights,
        w.empty_contexts,
    )
}

/// A scheme bound to the tables it needs.
#[derive(Clone, Copy, Debug)]
pub enum Encoder<'a> {
    Surprise {
        pretrained: &'a EmbeddingTable,
        domain: &'a EmbeddingTable,
        window: usize,
    },
    Cbow {
        pretrained: &'a EmbeddingTable,
    },
    Frequency {
        pretrained: &'a EmbeddingTable,
        idf: &'a IdfTable,
    },
    PretrainedWeights {
        pretrained: &'a EmbeddingTable,
        window: usize,
    },
}

impl Encoder<'_> {
    pub fn scheme(&self) -> Scheme {
        match self {
            Encoder::Surprise { .. } => Scheme::Surprise,
            Encoder::Cbow { .. } => Scheme::Cbow,
            Encoder::Frequency { .. } => Scheme::Frequency,
            Encoder::PretrainedWeights { .. } => Scheme::PretrainedWeights,
        }
    }

    pub fn encode(&self, tokens: &[String]) -> Result<SentenceEmbedding> {
        match *self {
            Encoder::Surprise {
                pretrained,
                domain,
                window,
            } => encode_surprise(tokens, pretrained, domain, window),
            Encoder::Cbow { pretrained } => encode_cbow(tokens, pretrained),
            Encoder::Frequency { pretrained, idf } => encode_frequency(tokens, pretrained, idf),
            Encoder::PretrainedWeights { pretrained, window } => {
                encode_pretrained_weights(tokens, pretrained, window)
            }
        }
    }
}

/// Result of encoding a batch of instances; all-OOV sentences are listed
/// in `skipped` rather than dropped silently.
#[derive(Clone, Debug, Default)]
pub struct EncodedBatch {
    pub embeddings: Vec<(String, SentenceEmbedding)>,
    pub skipped: Vec<String>,
}

/// Encodes instances in parallel; output order follows input order.
pub fn encode_batch(encoder: &Encoder<'_>, instances: &[Instance]) -> Result<EncodedBatch> {
    use rayon::prelude::*;
    let results: Vec<Result<SentenceEmbedding>> = instances
        .par_iter()
        .map(|i| encoder.encode(&i.tokens))
        .collect();
    let mut batch = EncodedBatch::default();
    for (inst, r) in instances.iter().zip(results) {
        match r {
            Ok(e) => batch.embeddings.push((inst.id.clone(), e)),
            Err(Error::AllOutOfVocabulary { .. }) => batch.skipped.push(inst.id.clone()),
            Err(e) => return Err(e),
        }
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tokenize;
    use crate::embeddings::TableKind;
    use proptest::prelude::*;

    fn table(entries: &[(&str, &[f64])]) -> EmbeddingTable {
        EmbeddingTable::from_entries(
            TableKind::Pretrained,
            entries[0].1.len(),
            entries.iter().map(|(t, v)| (*t, v.to_vec())),
        )
        .unwrap()
        .0
    }

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn single_token_weight_is_one() {
        let t = table(&[("a", &[1.0, 2.0])]);
        let w = surprise_weights(&toks("a"), &t, 2);
        assert_eq!(w.weights, [1.0]);
        assert_eq!(w.empty_contexts, 1);
    }

    #[test]
    fn predictable_token_weight_is_zero() {
        let t = table(&[("a", &[1.0, 0.0]), ("b", &[1.0, 1.0]), ("c", &[0.0, 1.0])]);
        let w = surprise_weights(&toks("a b c"), &t, 1);
        // b == a + c
        assert_eq!(w.weights[1], 0.0);
    }

    #[test]
    fn orthogonal_tokens_weight_one() {
        let t = table(&[
            ("a", &[1.0, 0.0, 0.0]),
            ("b", &[0.0, 1.0, 0.0]),
            ("c", &[0.0, 0.0, 1.0]),
        ]);
        let w = surprise_weights(&toks("a b c"), &t, 2);
        assert_eq!(w.weights, [1.0, 1.0, 1.0]);
        let s = encode_pretrained_weights(&toks("a b c"), &t, 2).unwrap();
        assert!(close(&s.vector, &[1.0 / 3.0; 3], 1e-15));
    }

    #[test]
    fn missing_tokens_are_not_context() {
        let t = table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let w = surprise_weights(&toks("a zz b"), &t, 1);
        assert_eq!(w.positions, [0, 2]);
        assert_eq!(w.weights, [1.0, 1.0]);
        assert_eq!(w.empty_contexts, 2);
    }

    #[test]
    fn weighted_average_arithmetic() {
        let pre = table(&[("a", &[2.0, 0.0]), ("b", &[0.0, 2.0])]);
        let s =
            weighted_average(Scheme::Cbow, &toks("a b"), &pre, &[0, 1], vec![1.0, 0.0], 0).unwrap();
        assert_eq!(s.vector, [2.0, 0.0]);
        let pre = table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let s =
            weighted_average(Scheme::Cbow, &toks("a b"), &pre, &[0, 1], vec![1.0, 3.0], 0).unwrap();
        assert!(close(&s.vector, &[0.25, 0.75], 1e-15));
    }

    #[test]
    fn zero_weights_fall_back_to_mean() {
        let pre = table(&[("a", &[2.0, 0.0]), ("b", &[0.0, 2.0])]);
        let s = weighted_average(
            Scheme::Surprise,
            &toks("a b"),
            &pre,
            &[0, 1],
            vec![0.0, 0.0],
            0,
        )
        .unwrap();
        assert!(s.zero_weight_fallback);
        assert_eq!(s.vector, [1.0, 1.0]);
    }

    #[test]
    fn cbow_examples() {
        let pre = table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0]), ("c", &[2.0, 2.0])]);
        assert_eq!(encode_cbow(&toks("a b"), &pre).unwrap().vector, [0.5, 0.5]);
        assert_eq!(encode_cbow(&toks("c"), &pre).unwrap().vector, [2.0, 2.0]);
        let s = encode_cbow(&toks("oov c"), &pre).unwrap();
        assert_eq!(s.vector, [2.0, 2.0]);
        assert_eq!(s.tokens, ["c"]);
        assert!(matches!(
            encode_cbow(&toks("x y"), &pre),
            Err(Error::AllOutOfVocabulary { .. })
        ));
    }

    #[test]
    fn idf_values() {
        let docs: Vec<Vec<String>> = vec![
            toks("the cat"),
            toks("the dog"),
            toks("the the"),
            toks("the end"),
        ];
        let idf = IdfTable::from_documents(docs.iter().map(|d| d.iter())).unwrap();
        assert_eq!(idf.idf("the"), 1.0);
        assert!((idf.idf("cat") - (4f64.ln() + 1.0)).abs() < 1e-15);
        assert!((idf.idf("cat") - 2.386).abs() < 5e-4);
        assert_eq!(idf.idf("unseen"), idf.max_idf());
        assert_eq!(idf.documents(), 4);
    }

    #[test]
    fn equal_idf_reduces_to_cbow() {
        let pre = table(&[("a", &[1.0, 0.0]), ("b", &[0.3, 1.0])]);
        let docs = [toks("a b")];
        let idf = IdfTable::from_documents(docs.iter().map(|d| d.iter())).unwrap();
        let f = encode_frequency(&toks("a b"), &pre, &idf).unwrap();
        let c = encode_cbow(&toks("a b"), &pre).unwrap();
        assert!(close(&f.vector, &c.vector, 1e-15));
    }

    #[test]
    fn pretrained_weights_match_surprise_under_identity() {
        let pre = table(&[("a", &[1.0, 0.2]), ("b", &[0.1, 1.0]), ("c", &[-0.5, 0.4])]);
        let s = encode_surprise(&toks("a b c a"), &pre, &pre, 2).unwrap();
        let p = encode_pretrained_weights(&toks("a b c a"), &pre, 2).unwrap();
        assert_eq!(s.vector, p.vector);
        assert_eq!(s.weights, p.weights);
        let single = encode_pretrained_weights(&toks("b"), &pre, 2).unwrap();
        assert_eq!(single.weights, [1.0]);
        assert_eq!(single.vector, [0.1, 1.0]);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("lstm".parse::<Scheme>().is_err());
    }

    fn random_tables(
        n: usize,
        dim: usize,
        seed: u64,
    ) -> (EmbeddingTable, EmbeddingTable, Vec<String>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let names: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let mut gen = |names: &[String]| {
            EmbeddingTable::from_entries(
                TableKind::Pretrained,
                dim,
                names.iter().map(|t| {
                    (
                        t.clone(),
                        (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    )
                }),
            )
            .unwrap()
            .0
        };
        let pre = gen(&names);
        let dom = gen(&names);
        (pre, dom, names)
    }

    proptest! {
        #[test]
        fn output_in_convex_hull_and_weights_bounded(
            seed in 0u64..500,
            picks in prop::collection::vec(0usize..8, 1..12),
            window in 1usize..4,
        ) {
            let (pre, dom, names) = random_tables(8, 3, seed);
            let tokens: Vec<String> = picks.iter().map(|&i| names[i].clone()).collect();
            let docs = [tokens.clone()];
            let idf = IdfTable::from_documents(docs.iter().map(|d| d.iter())).unwrap();
            let encoders = [
                Encoder::Surprise { pretrained: &pre, domain: &dom, window },
                Encoder::Cbow { pretrained: &pre },
                Encoder::Frequency { pretrained: &pre, idf: &idf },
                Encoder::PretrainedWeights { pretrained: &pre, window },
            ];
            for enc in encoders {
                let s = enc.encode(&tokens).unwrap();
                prop_assert_eq!(s.weights.len(), s.tokens.len());
                prop_assert!(s.weights.iter().all(|&w| w >= 0.0));
                if matches!(enc.scheme(), Scheme::Surprise | Scheme::PretrainedWeights) {
                    prop_assert!(s.weights.iter().all(|&w| w <= 2.0));
                }
                // per-coordinate bounds are implied by hull membership
                for d in 0..3 {
                    let lo = s.tokens.iter().map(|t| pre.get(t).unwrap()[d]).fold(f64::INFINITY, f64::min);
                    let hi = s.tokens.iter().map(|t| pre.get(t).unwrap()[d]).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(s.vector[d] >= lo - 1e-12 && s.vector[d] <= hi + 1e-12);
                }
            }
        }

        #[test]
        fn surprise_weights_scale_invariant(
            seed in 0u64..500,
            picks in prop::collection::vec(0usize..8, 1..12),
            scale in 0.001..1000.0f64,
        ) {
            let (_, dom, names) = random_tables(8, 4, seed);
            let tokens: Vec<String> = picks.iter().map(|&i| names[i].clone()).collect();
            let scaled = dom.map_vectors(TableKind::DomainSpecific, |v| Ok(v.iter().map(|x| x * scale).collect())).unwrap();
            let a = surprise_weights(&tokens, &dom, 2);
            let b = surprise_weights(&tokens, &scaled, 2);
            prop_assert!(close(&a.weights, &b.weights, 1e-9));
        }

        #[test]
        fn parallel_domain_geometry_gives_cbow(
            seed in 0u64..500,
            picks in prop::collection::vec(0usize..8, 2..12),
            scales in prop::collection::vec(0.1..10.0f64, 8),
        ) {
            let (pre, _, names) = random_tables(8, 3, seed);
            // every domain vector points the same way: all surprise weights are 0
            // or the sentence falls back to the mean
            let dom = EmbeddingTable::from_entries(
                TableKind::DomainSpecific,
                3,
                names.iter().zip(&scales).map(|(t, s)| (t.clone(), vec![*s, 2.0 * s, -s])),
            ).unwrap().0;
            let tokens: Vec<String> = picks.iter().map(|&i| names[i].clone()).collect();
            let s = encode_surprise(&tokens, &pre, &dom, 2).unwrap();
            let c = encode_cbow(&tokens, &pre).unwrap();
            prop_assert!(close(&s.vector, &c.vector, 1e-9));
        }

        #[test]
        fn far_permutations_keep_weight(
            seed in 0u64..500,
            picks in prop::collection::vec(0usize..8, 8..16),
            shuffle_seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let (_, dom, names) = random_tables(8, 4, seed);
            let tokens: Vec<String> = picks.iter().map(|&i| names[i].clone()).collect();
            let window = 2;
            let centre = 2;
            let mut permuted = tokens.clone();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(shuffle_seed);
            permuted[centre + window + 1..].shuffle(&mut rng);
            let a = surprise_weights(&tokens, &dom, window);
            let b = surprise_weights(&permuted, &dom, window);
            prop_assert_eq!(a.weights[centre], b.weights[centre]);
        }
    }
}
