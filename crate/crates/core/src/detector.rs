//! Exact kNN adjacency scoring and dev-set threshold calibration.
//!
//! A sentence's adjacency score is its mean cosine distance to the `k`
//! closest training embeddings. Scores strictly above the calibrated
//! threshold are flagged domain-adjacent.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::embeddings::{cosine_from_parts, dot, norm};
use crate::error::{Error, Result};

/// Linear-scan index over training sentence embeddings.
#[derive(Clone, Debug)]
pub struct NeighborIndex {
    dim: usize,
    k: usize,
    ids: Vec<String>,
    data: Vec<f64>,
    norms: Vec<f64>,
}

impl NeighborIndex {
    pub fn build<I, S>(embeddings: I, k: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut ids = Vec::new();
        let mut data = Vec::new();
        let mut norms = Vec::new();
        let mut dim = None;
        for (id, v) in embeddings {
            let d = *dim.get_or_insert(v.len());
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
            ids.push(id.into());
            norms.push(norm(&v));
            data.extend(v);
        }
        let Some(dim) = dim.filter(|&d| d > 0) else {
            return Err(Error::Empty("no training embeddings to index".into()));
        };
        let index = NeighborIndex {
            dim,
            k: 1,
            ids,
            data,
            norms,
        };
        index.with_k(k)
    }

    /// Same vectors, different neighbour count.
    pub fn with_k(mut self, k: usize) -> Result<Self> {
        self.check_k(k)?;
        self.k = k;
        Ok(self)
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.len() {
            return Err(Error::InvalidArgument(format!(
                "k = {k} but the index holds {} vectors",
                self.len()
            )));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// The `k` closest stored vectors as `(insertion index, distance)`,
    /// nearest first. Equal distances keep insertion order.
    pub fn neighbors(&self, query: &[f64], k: usize) -> Result<Vec<(usize, f64)>> {
        self.check_k(k)?;
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: query.len(),
            });
        }
        let qn = norm(query);
        let mut dists: Vec<(usize, f64)> = self
            .data
            .chunks_exact(self.dim)
            .zip(&self.norms)
            .enumerate()
            .map(|(i, (v, &vn))| (i, 1.0 - cosine_from_parts(dot(query, v), qn, vn)))
            .collect();
        let key = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, key);
            dists.truncate(k);
        }
        dists.sort_by(key);
        Ok(dists)
    }

    pub fn score_with_k(&self, query: &[f64], k: usize) -> Result<f64> {
        let nn = self.neighbors(query, k)?;
        Ok(nn.iter().map(|(_, d)| d).sum::<f64>() / k as f64)
    }

    /// Mean cosine distance to the `k` nearest stored vectors, in `[0, 2]`.
    pub fn adjacency_score(&self, query: &[f64]) -> Result<f64> {
        self.score_with_k(query, self.k)
    }

    /// Scores every query in parallel; results are in query order.
    pub fn score_batch<Q: AsRef<[f64]> + Sync>(&self, queries: &[Q]) -> Result<Vec<f64>> {
        queries
            .par_iter()
            .map(|q| self.adjacency_score(q.as_ref()))
            .collect()
    }
}

pub fn build_index<I, S>(train_embeddings: I, k: usize) -> Result<NeighborIndex>
where
    I: IntoIterator<Item = (S, Vec<f64>)>,
    S: Into<String>,
{
    NeighborIndex::build(train_embeddings, k)
}

pub fn adjacency_score(index: &NeighborIndex, embedding: &[f64]) -> Result<f64> {
    index.adjacency_score(embedding)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    pub calibration_fraction: f64,
    /// Where the calibration scores came from, e.g. `"basketball/dev"`.
    pub source: String,
}

impl Threshold {
    pub fn flags(&self, score: f64) -> bool {
        score > self.value
    }
}

/// Sets the threshold at the `1 - flag_fraction` quantile of the dev
/// scores (linear interpolation between order statistics), so roughly
/// `flag_fraction` of dev strictly exceeds it.
pub fn calibrate_threshold(
    dev_scores: &[f64],
    flag_fraction: f64,
    source: &str,
) -> Result<Threshold> {
    if dev_scores.is_empty() {
        return Err(Error::Empty("no dev scores to calibrate on".into()));
    }
    if !(flag_fraction > 0.0 && flag_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "flag fraction {flag_fraction} not in (0, 1)"
        )));
    }
    if dev_scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("dev scores must be finite".into()));
    }
    let mut sorted = dev_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * (1.0 - flag_fraction);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let value = sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]);
    Ok(Threshold {
        value,
        calibration_fraction: flag_fraction,
        source: source.to_owned(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub score: f64,
    pub label: Label,
}

/// Domain-adjacent iff the score is strictly greater than the threshold.
pub fn classify(
    index: &NeighborIndex,
    threshold: &Threshold,
    embedding: &[f64],
) -> Result<Decision> {
    let score = index.adjacency_score(embedding)?;
    Ok(decide(score, threshold))
}

pub fn decide(score: f64, threshold: &Threshold) -> Decision {
    let label = if threshold.flags(score) {
        Label::DomainAdjacent
    } else {
        Label::InDomain
    };
    Decision { score, label }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::cosine_distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn index(vectors: &[Vec<f64>], k: usize) -> Result<NeighborIndex> {
        NeighborIndex::build(
            vectors
                .iter()
                .enumerate()
                .map(|(i, v)| (i.to_string(), v.clone())),
            k,
        )
    }

    fn brute_force(vectors: &[Vec<f64>], q: &[f64], k: usize) -> f64 {
        let mut d: Vec<f64> = vectors
            .iter()
            .map(|v| cosine_distance(q, v).unwrap())
            .collect();
        d.sort_by(f64::total_cmp);
        d[..k].iter().sum::<f64>() / k as f64
    }

    #[test]
    fn build_checks_k() {
        let vs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 1.0]).collect();
        assert!(index(&vs, 3).is_ok());
        assert!(index(&vs[..2], 5).is_err());
        assert!(index(&vs, 0).is_err());
        let dup = vec![vec![1.0, 0.0]; 4];
        assert_eq!(index(&dup, 4).unwrap().len(), 4);
    }

    #[test]
    fn score_examples() {
        let vs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(
            index(&vs, 1).unwrap().adjacency_score(&[1.0, 0.0]).unwrap(),
            0.0
        );
        assert_eq!(
            index(&vs, 2).unwrap().adjacency_score(&[1.0, 0.0]).unwrap(),
            0.5
        );
        assert!(matches!(
            index(&vs, 1).unwrap().adjacency_score(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ties_keep_insertion_order() {
        let vs = vec![
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![2.0, 0.0],
            vec![3.0, 0.0],
        ];
        let idx = index(&vs, 2).unwrap();
        let nn = idx.neighbors(&[1.0, 0.0], 2).unwrap();
        assert_eq!(nn.iter().map(|n| n.0).collect::<Vec<_>>(), [1, 2]);
    }

    #[test]
    fn matches_brute_force_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vs: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let idx = index(&vs, 5).unwrap();
        for _ in 0..20 {
            let q: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            for k in [1, 5, 200] {
                let got = idx.score_with_k(&q, k).unwrap();
                assert!((got - brute_force(&vs, &q, k)).abs() <= 1e-12);
            }
        }
        let q = vec![0.3; 8];
        let full = idx.score_with_k(&q, 200).unwrap();
        let direct: f64 = vs
            .iter()
            .map(|v| cosine_distance(&q, v).unwrap())
            .sum::<f64>()
            / 200.0;
        assert!((full - direct).abs() < 1e-12);
    }

    #[test]
    fn batch_matches_single() {
        let vs: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64).sin(), (i as f64).cos(), 0.5])
            .collect();
        let idx = index(&vs, 3).unwrap();
        let qs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 1.0, -1.0]).collect();
        let batch = idx.score_batch(&qs).unwrap();
        for (q, s) in qs.iter().zip(batch) {
            assert_eq!(s, idx.adjacency_score(q).unwrap());
        }
    }

    #[test]
    fn calibration_order_statistics() {
        let scores: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let t = calibrate_threshold(&scores, 0.10, "dev").unwrap();
        assert!(t.value > 0.9 && t.value < 1.0);
        assert_eq!(scores.iter().filter(|&&s| t.flags(s)).count(), 1);

        // limit of a vanishing fraction
        let t = calibrate_threshold(&scores, f64::MIN_POSITIVE, "dev").unwrap();
        assert!(t.value >= 1.0);
        assert_eq!(scores.iter().filter(|&&s| t.flags(s)).count(), 0);

        let same = [0.4; 20];
        let t = calibrate_threshold(&same, 0.3, "dev").unwrap();
        assert_eq!(same.iter().filter(|&&s| t.flags(s)).count(), 0);

        assert!(calibrate_threshold(&[], 0.03, "dev").is_err());
        assert!(calibrate_threshold(&scores, 0.0, "dev").is_err());
        assert!(calibrate_threshold(&scores, 1.0, "dev").is_err());
    }

    #[test]
    fn classify_is_strict() {
        let t = Threshold {
            value: 0.5,
            calibration_fraction: 0.03,
            source: "x".into(),
        };
        assert_eq!(decide(0.0, &t).label, Label::InDomain);
        assert_eq!(decide(0.5, &t).label, Label::InDomain);
        assert_eq!(decide(0.6, &t).label, Label::DomainAdjacent);
        let idx = index(&[vec![1.0, 0.0]], 1).unwrap();
        let d = classify(&idx, &t, &[0.0, 1.0]).unwrap();
        assert_eq!(d.score, 1.0);
        assert_eq!(d.label, Label::DomainAdjacent);
    }

    proptest::proptest! {
        #[test]
        fn calibrated_rate_within_one_instance(
            raw in proptest::collection::hash_set(0u32..1_000_000, 1..300),
            fraction in 0.005..0.995f64,
        ) {
            let scores: Vec<f64> = raw.into_iter().map(|x| x as f64 / 1e6).collect();
            let n = scores.len() as f64;
            let t = calibrate_threshold(&scores, fraction, "dev").unwrap();
            let flagged = scores.iter().filter(|&&s| t.flags(s)).count() as f64 / n;
            proptest::prop_assert!((flagged - fraction).abs() <= 1.0 / n + 1e-12);
        }
    }
}
