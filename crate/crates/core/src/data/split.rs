use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::format::{EmbeddingRecord, Split, SplitCounts};
use crate::error::{Error, Result};

/// Train, validation and test fractions.
pub const DEFAULT_FRACTIONS: [f64; 3] = [0.8, 0.1, 0.1];

/// Distributes `target` items over groups of the given sizes in proportion
/// to size, by largest remainder, giving every group at least `min`.
fn allocate(target: usize, sizes: &[usize], min: usize) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let quotas: Vec<f64> = sizes
        .iter()
        .map(|&n| target as f64 * n as f64 / total as f64)
        .collect();
    let mut alloc: Vec<usize> = quotas
        .iter()
        .map(|q| (q.floor() as usize).max(min))
        .collect();
    let remainder = |i: usize| quotas[i] - quotas[i].floor();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    let mut assigned: usize = alloc.iter().sum();
    if assigned < target {
        order.sort_by(|&a, &b| remainder(b).total_cmp(&remainder(a)).then(a.cmp(&b)));
        for &i in order.iter().cycle().take(target - assigned) {
            alloc[i] += 1;
        }
    } else {
        order.sort_by(|&a, &b| remainder(a).total_cmp(&remainder(b)).then(a.cmp(&b)));
        while assigned > target {
            match order.iter().find(|&&i| alloc[i] > min) {
                Some(&i) => {
                    alloc[i] -= 1;
                    assigned -= 1;
                    order.retain(|&j| j != i);
                }
                None => break,
            }
        }
    }
    alloc
}

/// Splits each group's held-out count `held[g]` into validation and test
/// so that the validation counts total `val_target` and both parts stay
/// within one item of their proportional quota.
fn divide_held_out(
    held: &[usize],
    sizes: &[usize],
    val_target: usize,
    test_target: usize,
) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let quota = |target: usize, n: usize| target as f64 * n as f64 / total as f64;
    let bounds: Vec<(usize, usize)> = held
        .iter()
        .zip(sizes)
        .map(|(&h, &n)| {
            let (qv, qt) = (quota(val_target, n), quota(test_target, n));
            let lo = (qv.floor() as usize)
                .max(h.saturating_sub(qt.ceil() as usize))
                .max(1);
            let hi = (qv.ceil() as usize)
                .min(h.saturating_sub(qt.floor() as usize))
                .min(h - 1);
            if lo <= hi {
                (lo, hi)
            } else {
                let v = (qv.round() as usize).clamp(1, h - 1);
                (v, v)
            }
        })
        .collect();
    let mut val: Vec<usize> = bounds.iter().map(|b| b.0).collect();
    let mut order: Vec<usize> = (0..held.len())
        .filter(|&g| bounds[g].1 > bounds[g].0)
        .collect();
    let excess = |g: usize| quota(val_target, sizes[g]) - bounds[g].0 as f64;
    order.sort_by(|&a, &b| excess(b).total_cmp(&excess(a)).then(a.cmp(&b)));
    let missing = val_target.saturating_sub(val.iter().sum());
    for &g in order.iter().take(missing) {
        val[g] += 1;
    }
    val
}

/// Assigns every record a split, stratified by theme, and returns the
/// resulting counts.
///
/// Validation and test sizes are the fractions of the total rounded half
/// up; training takes the rest. Every theme's share of each split is
/// within one record of its proportional quota. Within each theme the
/// records are shuffled with `seed` before being cut.
pub fn split_dataset(
    records: &mut [EmbeddingRecord],
    fractions: [f64; 3],
    seed: u64,
) -> Result<SplitCounts> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f))
        || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::Config(format!(
            "split fractions {fractions:?} must be in [0, 1] and sum to 1"
        )));
    }
    let themes = records.iter().map(|r| r.theme_id + 1).max().unwrap_or(0);
    let mut by_theme: Vec<Vec<usize>> = vec![Vec::new(); themes];
    for (i, r) in records.iter().enumerate() {
        by_theme[r.theme_id].push(i);
    }
    by_theme.retain(|g| !g.is_empty());
    if let Some(g) = by_theme.iter().find(|g| g.len() < 3) {
        return Err(Error::Dataset(format!(
            "theme {} has {} records; stratified splitting needs at least 3",
            records[g[0]].theme_id,
            g.len()
        )));
    }
    let n = records.len();
    let round = |f: f64| (f * n as f64 + 0.5).floor() as usize;
    let sizes: Vec<usize> = by_theme.iter().map(Vec::len).collect();
    let (val_target, test_target) = (round(fractions[1]), round(fractions[2]));
    let held = allocate(val_target + test_target, &sizes, 2);
    let val = divide_held_out(&held, &sizes, val_target, test_target);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = SplitCounts::default();
    for (g, members) in by_theme.iter_mut().enumerate() {
        members.shuffle(&mut rng);
        let (v, t) = (val[g], held[g] - val[g]);
        if v + t >= members.len() {
            return Err(Error::Dataset(format!(
                "theme {} is too small to keep a training record",
                records[members[0]].theme_id
            )));
        }
        for (k, &i) in members.iter().enumerate() {
            let split = if k < v {
                Split::Val
            } else if k < v + t {
                Split::Test
            } else {
                Split::Train
            };
            records[i].split = split;
            *counts.get_mut(split) += 1;
        }
    }
    Ok(counts)
}
