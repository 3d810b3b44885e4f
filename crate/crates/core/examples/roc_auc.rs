//! Rank-based AUC with ties, pooled and per theme.

use ti_avc::eval::{per_theme_auc, roc_auc, ScoredPair};

fn main() -> ti_avc::Result<()> {
    let scores = [0.9, 0.8, 0.8, 0.4, 0.3, 0.8];
    let labels = [true, true, false, true, false, false];
    // 9 positive-negative pairs: 6 wins and 2 ties.
    println!("pooled AUC {:.4}", roc_auc(&scores, &labels)?);

    let pairs: Vec<ScoredPair> = scores
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (&score, label))| ScoredPair {
            score,
            label,
            theme_true: i % 2,
            system: "demo".into(),
        })
        .collect();
    for t in per_theme_auc(&pairs).themes {
        match t.auc {
            Some(auc) => println!("theme {}: {auc:.4} over {} pairs", t.theme, t.n_pairs),
            None => println!("theme {}: single class, skipped", t.theme),
        }
    }
    Ok(())
}
