//! The Bayes-optimal match scorer for synthetic data.
//!
//! Frame means `v̄` and step means `ā` are sufficient for the match
//! decision: the within-record deviations carry no information about the
//! latent or the sign. Given theme `t`, `(v̄, ā)` is Gaussian with mean
//! `[γ μ_t; 0]` and covariance
//!
//! ```text
//! [ P Pᵀ + σ_v²/F I     s P Qᵀ          ]
//! [ s Q Pᵀ              Q Qᵀ + σ_a²/T I ]
//! ```
//!
//! where `s = c_t` for a matched pair. A theme-flipped negative has
//! `s = −c_t` and a shuffled negative has `s = 0`. The aware oracle scores
//! the exact log-likelihood ratio at the true theme; the blind oracle
//! averages both likelihoods over a uniform theme prior.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::format::NegativeMode;
use super::synth::{item_rng, GeneratorParams, SynthConfig};
use crate::error::{Error, Result};
use crate::eval::roc_auc;
use crate::models::Example;
use crate::nn::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    /// The theme of the visual side is known.
    Aware,
    /// The theme is marginalized under a uniform prior.
    Blind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub auc: f64,
    /// 95% interval from the Hanley-McNeil standard error.
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_pairs: usize,
}

/// A Gaussian with a factored covariance.
#[derive(Clone, Debug)]
struct Gaussian {
    l: DMatrix<f64>,
    half_log_det: f64,
    /// `L⁻¹ m_t` for every theme.
    whitened_means: Vec<DVector<f64>>,
}

impl Gaussian {
    fn new(cov: DMatrix<f64>, means: &[DVector<f64>], label: &str) -> Result<Self> {
        let l = cov
            .cholesky()
            .ok_or_else(|| Error::Numeric(format!("{label} covariance is not positive definite")))?
            .unpack();
        let half_log_det = l.diagonal().iter().map(|d| d.ln()).sum();
        let whitened_means = means
            .iter()
            .map(|m| l.solve_lower_triangular(m).expect("factor is non-singular"))
            .collect();
        Ok(Self {
            l,
            half_log_det,
            whitened_means,
        })
    }

    fn whiten(&self, x: &DVector<f64>) -> DVector<f64> {
        self.l
            .solve_lower_triangular(x)
            .expect("factor is non-singular")
    }

    /// Log-density up to the shared `2π` term, from a whitened point.
    fn log_density(&self, y: &DVector<f64>, theme: usize) -> f64 {
        -0.5 * (y - &self.whitened_means[theme]).norm_squared() - self.half_log_det
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Bayes-optimal scorer under a known generator.
#[derive(Clone, Debug)]
pub struct BayesOracle {
    config: SynthConfig,
    params: GeneratorParams,
    /// Matched-law Gaussians for `s = +1` and `s = −1`.
    positive: Gaussian,
    negative: Gaussian,
    /// `s = 0`, used for shuffled negatives.
    independent: Gaussian,
}

impl BayesOracle {
    pub fn new(config: &SynthConfig) -> Result<Self> {
        let params = GeneratorParams::new(config)?;
        let (dv, da) = (config.visual_dim, config.audio_dim);
        let vv = &params.p * params.p.transpose()
            + DMatrix::identity(dv, dv) * (config.sigma_v.powi(2) / config.frames as f64);
        let aa = &params.q * params.q.transpose()
            + DMatrix::identity(da, da) * (config.sigma_a.powi(2) / config.audio_steps as f64);
        let pq = &params.p * params.q.transpose();
        let cov = |s: f64| {
            let mut c = DMatrix::zeros(dv + da, dv + da);
            c.view_mut((0, 0), (dv, dv)).copy_from(&vv);
            c.view_mut((dv, dv), (da, da)).copy_from(&aa);
            c.view_mut((0, dv), (dv, da)).copy_from(&(&pq * s));
            c.view_mut((dv, 0), (da, dv))
                .copy_from(&(pq.transpose() * s));
            c
        };
        let means: Vec<DVector<f64>> = params
            .means
            .iter()
            .map(|mu| {
                let mut m = DVector::zeros(dv + da);
                m.rows_mut(0, dv).copy_from(&(mu * config.gamma));
                m
            })
            .collect();
        Ok(Self {
            positive: Gaussian::new(cov(1.0), &means, "s = +1")?,
            negative: Gaussian::new(cov(-1.0), &means, "s = -1")?,
            independent: Gaussian::new(cov(0.0), &means, "s = 0")?,
            config: config.clone(),
            params,
        })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.config
    }

    fn matched(&self, theme: usize) -> &Gaussian {
        if self.config.sign(theme) > 0.0 {
            &self.positive
        } else {
            &self.negative
        }
    }

    fn mismatched(&self, theme: usize) -> &Gaussian {
        match self.config.negative_mode {
            NegativeMode::ThemeFlip if self.config.sign(theme) > 0.0 => &self.negative,
            NegativeMode::ThemeFlip => &self.positive,
            NegativeMode::Shuffle => &self.independent,
        }
    }

    /// Log-likelihood ratio of matched over mismatched for the statistic
    /// `x = [v̄; ā]`.
    pub fn log_ratio(&self, x: &DVector<f64>, theme: usize, mode: OracleMode) -> f64 {
        let y_pos = self.positive.whiten(x);
        let y_neg = self.negative.whiten(x);
        let y_ind = match self.config.negative_mode {
            NegativeMode::Shuffle => Some(self.independent.whiten(x)),
            NegativeMode::ThemeFlip => None,
        };
        let whitened = |g: &Gaussian| -> &DVector<f64> {
            if std::ptr::eq(g, &self.positive) {
                &y_pos
            } else if std::ptr::eq(g, &self.negative) {
                &y_neg
            } else {
                y_ind.as_ref().expect("whitened for shuffle mode")
            }
        };
        let log_lik = |g: &Gaussian, t: usize| g.log_density(whitened(g), t);
        match mode {
            OracleMode::Aware => {
                log_lik(self.matched(theme), theme) - log_lik(self.mismatched(theme), theme)
            }
            OracleMode::Blind => {
                let k = self.config.themes;
                log_sum_exp((0..k).map(|t| log_lik(self.matched(t), t)))
                    - log_sum_exp((0..k).map(|t| log_lik(self.mismatched(t), t)))
            }
        }
    }

    /// Scores model inputs drawn from this oracle's generator.
    pub fn score(&self, example: &Example, mode: OracleMode) -> Result<f64> {
        let x = statistic_from_tensors(&example.visual, &example.audio, &self.config)?;
        Ok(self.log_ratio(&x, example.theme, mode))
    }

    pub fn score_examples(&self, examples: &[Example], mode: OracleMode) -> Result<Vec<f64>> {
        examples.par_iter().map(|e| self.score(e, mode)).collect()
    }

    /// Monte-Carlo AUC over `n_pairs` fresh balanced pairs.
    pub fn auc(&self, mode: OracleMode, n_pairs: usize) -> Result<OracleResult> {
        let m = n_pairs / 2;
        if m < 2 {
            return Err(Error::Config(format!(
                "the oracle needs at least 4 pairs, got {n_pairs}"
            )));
        }
        let c = &self.config;
        let samples: Vec<_> = (0..m)
            .into_par_iter()
            .map(|i| {
                self.params
                    .sample(c, &mut item_rng("oracle", c.seed, i as u64))
            })
            .collect();
        let scored: Vec<(f64, f64)> = (0..m)
            .into_par_iter()
            .map(|i| {
                let s = &samples[i];
                let neg_audio = match c.negative_mode {
                    NegativeMode::ThemeFlip => s.audio_flip.as_ref().expect("flip mode draws it"),
                    NegativeMode::Shuffle => &samples[(i + 1) % m].audio,
                };
                let pos = self.log_ratio(&statistic(&s.visual, &s.audio), s.theme, mode);
                let neg = self.log_ratio(&statistic(&s.visual, neg_audio), s.theme, mode);
                (pos, neg)
            })
            .collect();
        let mut scores = Vec::with_capacity(2 * m);
        let mut labels = Vec::with_capacity(2 * m);
        for (pos, neg) in scored {
            scores.extend([pos, neg]);
            labels.extend([true, false]);
        }
        let auc = roc_auc(&scores, &labels)?;
        let half_width = 1.96 * hanley_mcneil_se(auc, m, m);
        Ok(OracleResult {
            auc,
            ci_low: (auc - half_width).max(0.0),
            ci_high: (auc + half_width).min(1.0),
            n_pairs: 2 * m,
        })
    }
}

/// Monte-Carlo AUC of the Bayes oracle under `config`.
pub fn bayes_oracle_auc(
    config: &SynthConfig,
    mode: OracleMode,
    n_pairs: usize,
) -> Result<OracleResult> {
    BayesOracle::new(config)?.auc(mode, n_pairs)
}

/// Standard error of an AUC estimate from `p` positives and `n` negatives.
pub fn hanley_mcneil_se(auc: f64, p: usize, n: usize) -> f64 {
    let (pf, nf) = (p as f64, n as f64);
    let q1 = auc / (2.0 - auc);
    let q2 = 2.0 * auc * auc / (1.0 + auc);
    let var = (auc * (1.0 - auc) + (pf - 1.0) * (q1 - auc * auc) + (nf - 1.0) * (q2 - auc * auc))
        / (pf * nf);
    var.max(0.0).sqrt()
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.mean()))
}

/// `[v̄; ā]` for `F × D_v` frames and `T × D_a` steps.
pub(crate) fn statistic(visual: &DMatrix<f64>, audio: &DMatrix<f64>) -> DVector<f64> {
    let v = column_means(visual);
    let a = column_means(audio);
    DVector::from_iterator(v.len() + a.len(), v.iter().chain(a.iter()).copied())
}

fn statistic_from_tensors(
    visual: &Tensor<f32>,
    audio: &Tensor<f32>,
    config: &SynthConfig,
) -> Result<DVector<f64>> {
    if visual.shape() != [config.frames, config.visual_dim]
        || audio.shape() != [config.audio_steps, config.audio_dim]
    {
        return Err(Error::dim(
            "oracle",
            format!(
                "visual {:?} and audio {:?} do not match the generator",
                visual.shape(),
                audio.shape()
            ),
        ));
    }
    let to_matrix = |t: &Tensor<f32>| {
        DMatrix::from_row_iterator(t.dim(0), t.dim(1), t.data().iter().map(|&x| x as f64))
    };
    Ok(statistic(&to_matrix(visual), &to_matrix(audio)))
}
