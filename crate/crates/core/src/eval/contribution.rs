use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ClBatch, ClExample, ClModel, InputGroup};
use crate::nn::{Conv1d, Scalar, Tensor};

/// Which pairs of a test set enter the contribution batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Composition {
    #[default]
    Positive,
    Negative,
    Both,
}

impl Composition {
    pub fn admits(self, label: bool) -> bool {
        match self {
            Composition::Positive => label,
            Composition::Negative => !label,
            Composition::Both => true,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Composition::Positive => "positive",
            Composition::Negative => "negative",
            Composition::Both => "both",
        }
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Composition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Composition::Positive,
            Composition::Negative,
            Composition::Both,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown composition `{s}` (expected positive, negative or both)"
            ))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupContribution {
    pub group: InputGroup,
    pub raw_mass: f64,
    pub proportion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContributionReport {
    pub groups: Vec<GroupContribution>,
    pub composition: Composition,
    pub n_pairs: usize,
}

impl ContributionReport {
    pub fn total_mass(&self) -> f64 {
        self.groups.iter().map(|g| g.raw_mass).sum()
    }

    pub fn get(&self, group: InputGroup) -> Option<&GroupContribution> {
        self.groups.iter().find(|g| g.group == group)
    }
}

/// Raw first-layer mass of each channel group:
/// `Σ_b Σ_t Σ_tap Σ_filter Σ_{i ∈ group} |W[tap, i, filter] · X[b, t + tap − k/2, i]|`.
///
/// Taps that fall on the zero padding contribute nothing.
pub fn first_layer_masses<T: Scalar>(
    conv: &Conv1d<T>,
    input: &Tensor<T>,
    groups: &[Range<usize>],
) -> Result<Vec<f64>> {
    let in_ch = conv.in_channels();
    input.expect_shape(conv.name(), &[None, None, Some(in_ch)])?;
    if let Some(g) = groups.iter().find(|g| g.end > in_ch) {
        return Err(Error::dim(
            conv.name(),
            format!("group {g:?} exceeds {in_ch} input channels"),
        ));
    }
    let (k, out) = (conv.kernel(), conv.out_channels());
    let w = conv.weight.value.data();
    // |W x| = |W| |x|, so filters can be summed before touching the input.
    let w_abs: Vec<f64> = (0..k * in_ch)
        .map(|row| {
            w[row * out..(row + 1) * out]
                .iter()
                .map(|v| v.to_f64_lossy().abs())
                .sum()
        })
        .collect();
    let (batch, steps) = (input.dim(0), input.dim(1));
    let x = input.data();
    let half = k / 2;
    let mut x_abs = vec![0.0f64; k * in_ch];
    for b in 0..batch {
        for t in 0..steps {
            let frame = &x[(b * steps + t) * in_ch..(b * steps + t + 1) * in_ch];
            for tap in 0..k {
                // Input position t is read by output positions t − tap + k/2.
                let target = t as isize - tap as isize + half as isize;
                if target < 0 || target >= steps as isize {
                    continue;
                }
                for (i, v) in frame.iter().enumerate() {
                    x_abs[tap * in_ch + i] += v.to_f64_lossy().abs();
                }
            }
        }
    }
    Ok(groups
        .iter()
        .map(|g| {
            (0..k)
                .flat_map(|tap| g.clone().map(move |i| tap * in_ch + i))
                .map(|j| w_abs[j] * x_abs[j])
                .sum()
        })
        .collect())
}

/// Contribution of the four CL input groups over the pairs selected by
/// `composition`.
pub fn contribution(
    cl: &ClModel<f32>,
    features: &[ClExample],
    composition: Composition,
) -> Result<ContributionReport> {
    let selected: Vec<&ClExample> = features
        .iter()
        .filter(|e| composition.admits(e.label))
        .collect();
    if selected.is_empty() {
        return Err(Error::Evaluation(format!(
            "no {composition} pairs to analyse"
        )));
    }
    let layout = cl.layout();
    let ranges: Vec<Range<usize>> = InputGroup::ALL.iter().map(|&g| layout.range(g)).collect();
    let cl64 = cl.cast::<f64>();
    let chunks: Vec<Result<Vec<f64>>> = selected
        .par_chunks(64)
        .map(|chunk| {
            let b = ClBatch::<f64>::new(chunk, cl.themes())?;
            let x = cl64.input(&b.audio_emb, &b.visual_embs, &b.theme_pred, &b.theme_true)?;
            first_layer_masses(&cl64.fusion.conv1, &x, &ranges)
        })
        .collect();
    let mut masses = vec![0.0; ranges.len()];
    for c in chunks {
        for (m, v) in masses.iter_mut().zip(c?) {
            *m += v;
        }
    }
    report_from_masses(&masses, composition, selected.len())
}

/// Normalizes raw masses into a report; a zero total is degenerate.
pub fn report_from_masses(
    masses: &[f64],
    composition: Composition,
    n_pairs: usize,
) -> Result<ContributionReport> {
    if masses.len() != InputGroup::ALL.len() {
        return Err(Error::Evaluation(format!(
            "expected {} group masses, got {}",
            InputGroup::ALL.len(),
            masses.len()
        )));
    }
    let total: f64 = masses.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::DegenerateContribution);
    }
    Ok(ContributionReport {
        groups: InputGroup::ALL
            .iter()
            .zip(masses)
            .map(|(&group, &raw_mass)| GroupContribution {
                group,
                raw_mass,
                proportion: raw_mass / total,
            })
            .collect(),
        composition,
        n_pairs,
    })
}
