use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>= threshold` are predicted domain-adjacent.
    pub threshold: f64,
    pub false_positive_rate: f64,
    pub true_positive_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve over every distinct score, domain-adjacent being the positive
/// class. Tied scores form one step, so the trapezoidal area counts each
/// tied (adjacent, in-domain) pair as one half.
pub fn compute_roc_auc(scores: &[(f64, Label)]) -> Result<RocCurve> {
    if scores.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let positives = scores.iter().filter(|(_, l)| l.is_adjacent()).count() as u64;
    let negatives = scores.len() as u64 - positives;
    if positives == 0 {
        return Err(Error::SingleLabel("in-domain"));
    }
    if negatives == 0 {
        return Err(Error::SingleLabel("domain-adjacent"));
    }

    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        false_positive_rate: 0.0,
        true_positive_rate: 0.0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area in (fp count, tp count) units
    let mut doubled: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].0;
        let (mut gtp, mut gfp) = (0u64, 0u64);
        while i < sorted.len() && sorted[i].0 == threshold {
            if sorted[i].1.is_adjacent() {
                gtp += 1;
            } else {
                gfp += 1;
            }
            i += 1;
        }
        doubled += u128::from(gfp) * u128::from(2 * tp + gtp);
        tp += gtp;
        fp += gfp;
        points.push(RocPoint {
            threshold,
            false_positive_rate: fp as f64 / n,
            true_positive_rate: tp as f64 / p,
        });
    }
    Ok(RocCurve {
        points,
        auc: doubled as f64 / (2.0 * p * n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{DomainAdjacent as A, InDomain as I};

    #[test]
    fn perfect_separation() {
        let s = [(0.9, A), (0.8, A), (0.1, I), (0.2, I)];
        let roc = compute_roc_auc(&s).unwrap();
        assert_eq!(roc.auc, 1.0);
        let first = roc.points.first().unwrap();
        let last = roc.points.last().unwrap();
        assert_eq!(
            (first.false_positive_rate, first.true_positive_rate),
            (0.0, 0.0)
        );
        assert_eq!(
            (last.false_positive_rate, last.true_positive_rate),
            (1.0, 1.0)
        );
    }

    #[test]
    fn all_ties_is_half() {
        let s = [(0.3, A), (0.3, I), (0.3, I), (0.3, A), (0.3, A)];
        assert_eq!(compute_roc_auc(&s).unwrap().auc, 0.5);
    }

    #[test]
    fn small_hand_example() {
        // pairs: (0.9 vs 0.4) 1, (0.9 vs 0.2) 1, (0.4 vs 0.4) 0.5, (0.4 vs 0.2) 1
        let s = [(0.9, A), (0.4, A), (0.4, I), (0.2, I)];
        assert_eq!(compute_roc_auc(&s).unwrap().auc, 3.5 / 4.0);
    }

    #[test]
    fn single_label_rejected() {
        assert!(compute_roc_auc(&[(0.1, A), (0.2, A)]).is_err());
        assert!(compute_roc_auc(&[(0.1, I)]).is_err());
        assert!(compute_roc_auc(&[(f64::NAN, I), (0.1, A)]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn monotone_transform_invariance_and_monotone_points(
            raw in proptest::collection::vec((0u8..20, proptest::bool::ANY), 2..80)
        ) {
            let mut s: Vec<(f64, Label)> = raw.iter().map(|&(x, a)| (x as f64 / 7.0, if a { A } else { I })).collect();
            s[0].1 = A;
            s[1].1 = I;
            let roc = compute_roc_auc(&s).unwrap();
            let t: Vec<(f64, Label)> = s.iter().map(|&(x, l)| ((3.0 * x).exp() - 4.0, l)).collect();
            proptest::prop_assert_eq!(roc.auc, compute_roc_auc(&t).unwrap().auc);
            for w in roc.points.windows(2) {
                proptest::prop_assert!(w[1].false_positive_rate >= w[0].false_positive_rate);
                proptest::prop_assert!(w[1].true_positive_rate >= w[0].true_positive_rate);
            }
            proptest::prop_assert!((0.0..=1.0).contains(&roc.auc));
        }
    }
}
