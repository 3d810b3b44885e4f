use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scored test pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub score: f64,
    pub label: bool,
    pub theme_true: usize,
    pub system: String,
}

/// ROC-AUC as the Mann-Whitney statistic, ties counted as one half.
///
/// Runs in `O(n log n)`: scores are sorted once and each tied block is
/// given its mid-rank.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Evaluation(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Evaluation(format!("non-finite score {s}")));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Evaluation(format!(
            "AUC needs both classes, got {positives} positives and {negatives} negatives"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks are 1-based; the block covers ranks start+1 ..= end.
        let mid = (start + 1 + end) as f64 / 2.0;
        let in_block = order[start..end].iter().filter(|&&i| labels[i]).count();
        rank_sum += mid * in_block as f64;
        start = end;
    }
    let p = positives as f64;
    let n = negatives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// [`roc_auc`] over scored pairs.
pub fn pairs_auc(pairs: &[ScoredPair]) -> Result<f64> {
    let scores: Vec<f64> = pairs.iter().map(|p| p.score).collect();
    let labels: Vec<bool> = pairs.iter().map(|p| p.label).collect();
    roc_auc(&scores, &labels)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThemeAuc {
    pub theme: usize,
    /// `None` when the theme lacks one of the two classes.
    pub auc: Option<f64>,
    pub n_pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerThemeReport {
    pub themes: Vec<ThemeAuc>,
    /// Pooled AUC of the reference system, when one was supplied.
    pub baseline1_auc: Option<f64>,
}

impl PerThemeReport {
    pub fn total_pairs(&self) -> usize {
        self.themes.iter().map(|t| t.n_pairs).sum()
    }

    pub fn skipped(&self) -> impl Iterator<Item = usize> + '_ {
        self.themes
            .iter()
            .filter(|t| t.auc.is_none())
            .map(|t| t.theme)
    }
}

/// AUC per visual-side theme. Themes with a single class are logged and
/// reported with no AUC.
pub fn per_theme_auc(pairs: &[ScoredPair]) -> PerThemeReport {
    let mut groups: BTreeMap<usize, Vec<&ScoredPair>> = BTreeMap::new();
    for p in pairs {
        groups.entry(p.theme_true).or_default().push(p);
    }
    let themes = groups
        .into_iter()
        .map(|(theme, group)| {
            let scores: Vec<f64> = group.iter().map(|p| p.score).collect();
            let labels: Vec<bool> = group.iter().map(|p| p.label).collect();
            let auc = match roc_auc(&scores, &labels) {
                Ok(a) => Some(a),
                Err(e) => {
                    log::warn!("skipping theme {theme}: {e}");
                    None
                }
            };
            ThemeAuc {
                theme,
                auc,
                n_pairs: group.len(),
            }
        })
        .collect();
    PerThemeReport {
        themes,
        baseline1_auc: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] && !labels[j] {
                    den += 1.0;
                    if si > sj {
                        num += 1.0;
                    } else if si == sj {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn hand_examples() {
        let auc = roc_auc(&[0.9, 0.4, 0.5, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(auc, 0.75);
        assert_eq!(
            roc_auc(&[0.9, 0.8, 0.2], &[true, true, false]).unwrap(),
            1.0
        );
        assert_eq!(
            roc_auc(&[0.3; 6], &[true, false, true, false, true, true]).unwrap(),
            0.5
        );
    }

    #[test]
    fn matches_brute_force_on_random_instances_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.random_range(2..=200);
            let levels = rng.random_range(1..=20);
            let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            labels[0] = true;
            labels[1] = false;
            let scores: Vec<f64> = (0..n)
                .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
                .collect();
            let fast = roc_auc(&scores, &labels).unwrap();
            assert!((fast - brute_force(&scores, &labels)).abs() < 1e-12);
            let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
            assert_eq!(fast + roc_auc(&scores, &flipped).unwrap(), 1.0);
        }
    }

    #[test]
    fn single_class_and_bad_input_are_errors() {
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(roc_auc(&[0.1], &[true, false]).is_err());
        assert!(roc_auc(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn per_theme_counts_partition_and_single_class_is_skipped() {
        let mk = |score, label, theme_true| ScoredPair {
            score,
            label,
            theme_true,
            system: "x".into(),
        };
        let pairs = vec![
            mk(0.9, true, 0),
            mk(0.1, false, 0),
            mk(0.2, true, 1),
            mk(0.8, false, 1),
            mk(0.5, true, 2),
        ];
        let report = per_theme_auc(&pairs);
        assert_eq!(report.total_pairs(), pairs.len());
        assert_eq!(report.themes[0].auc, Some(1.0));
        assert_eq!(report.themes[1].auc, Some(0.0));
        assert_eq!(report.skipped().collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn single_theme_reduces_to_pooled_auc() {
        let pairs: Vec<ScoredPair> = (0..10)
            .map(|i| ScoredPair {
                score: (i * 7 % 10) as f64,
                label: i % 2 == 0,
                theme_true: 4,
                system: "x".into(),
            })
            .collect();
        let report = per_theme_auc(&pairs);
        assert_eq!(report.themes.len(), 1);
        assert_eq!(report.themes[0].auc.unwrap(), pairs_auc(&pairs).unwrap());
    }

    proptest! {
        #[test]
        fn auc_is_invariant_under_monotone_maps(
            scores in prop::collection::vec(-5.0f64..5.0, 4..40),
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut labels: Vec<bool> = scores.iter().map(|_| rng.random_bool(0.5)).collect();
            labels[0] = true;
            labels[1] = false;
            let mapped: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
            let a = roc_auc(&scores, &labels).unwrap();
            let b = roc_auc(&mapped, &labels).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
