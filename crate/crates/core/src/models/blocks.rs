//! Sub-networks shared by every system: the audio and visual encoders and
//! the convolutional fusion stack.

use std::collections::BTreeMap;

use rand::Rng;

use super::config::FusionWidths;
use crate::error::{Error, Result};
use crate::nn::param::{visit_child, visit_child_mut};
use crate::nn::{
    Activation, AttentionCache, AttentionPool, Conv1d, Conv1dCache, Dense, DenseCache, Lstm,
    LstmCache, MaxPoolCache, MaxPoolTime, Param, Params, Scalar, Tensor, TimeDistributed,
};

const RELU: Activation = Activation::Relu;

/// Time-distributed dense → ReLU → LSTM → attention pooling.
///
/// Sequences in a batch may differ in length; equal lengths are batched
/// together.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioEncoder<T> {
    pub td: TimeDistributed<T>,
    pub lstm: Lstm<T>,
    pub attention: AttentionPool<T>,
}

#[derive(Clone, Debug)]
struct AudioGroup<T> {
    rows: Vec<usize>,
    td: DenseCache<T>,
    td_out: Tensor<T>,
    lstm: LstmCache<T>,
    attention: AttentionCache<T>,
}

#[derive(Clone, Debug)]
pub struct AudioCache<T> {
    batch: usize,
    groups: Vec<AudioGroup<T>>,
}

impl<T: Scalar> AudioCache<T> {
    /// Attention weights of batch row `row`.
    pub fn attention_weights(&self, row: usize) -> Option<&[T]> {
        self.groups.iter().find_map(|g| {
            let pos = g.rows.iter().position(|&r| r == row)?;
            let w = g.attention.weights();
            let steps = w.shape()[1];
            Some(&w.data()[pos * steps..(pos + 1) * steps])
        })
    }
}

impl<T: Scalar> AudioEncoder<T> {
    pub fn new<R: Rng + ?Sized>(prefix: &str, in_dim: usize, width: usize, rng: &mut R) -> Self {
        Self {
            td: TimeDistributed::new(format!("{prefix}.td"), in_dim, width, rng),
            lstm: Lstm::new(format!("{prefix}.lstm"), width, width, rng),
            attention: AttentionPool::new(format!("{prefix}.attention"), width, width, rng),
        }
    }

    pub fn width(&self) -> usize {
        self.attention.dim()
    }

    /// Encodes `[T_i, D_a]` sequences into a `[B, W]` embedding.
    pub fn forward(&self, seqs: &[&Tensor<T>]) -> Result<(Tensor<T>, AudioCache<T>)> {
        let in_dim = self.td.0.input_dim();
        let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, s) in seqs.iter().enumerate() {
            s.expect_shape(self.td.0.name(), &[None, Some(in_dim)])?;
            if s.dim(0) == 0 {
                return Err(Error::EmptySequence {
                    layer: self.td.0.name().to_string(),
                });
            }
            by_len.entry(s.dim(0)).or_default().push(i);
        }
        let width = self.width();
        let mut out = Tensor::zeros(&[seqs.len(), width]);
        let mut groups = Vec::with_capacity(by_len.len());
        for rows in by_len.into_values() {
            let members: Vec<&Tensor<T>> = rows.iter().map(|&r| seqs[r]).collect();
            let x = Tensor::stack(&members)?;
            let (h, td) = self.td.forward(&x)?;
            let td_out = RELU.apply(&h);
            let (seq, lstm) = self.lstm.forward(&td_out)?;
            let (pooled, attention) = self.attention.forward(&seq)?;
            for (k, &r) in rows.iter().enumerate() {
                out.data_mut()[r * width..(r + 1) * width].copy_from_slice(pooled.row(k));
            }
            groups.push(AudioGroup {
                rows,
                td,
                td_out,
                lstm,
                attention,
            });
        }
        Ok((
            out,
            AudioCache {
                batch: seqs.len(),
                groups,
            },
        ))
    }

    pub fn backward(&mut self, cache: &AudioCache<T>, d_emb: &Tensor<T>) {
        debug_assert_eq!(d_emb.shape(), [cache.batch, self.width()]);
        let width = self.width();
        for g in &cache.groups {
            let d_pooled = Tensor::from_fn(&[g.rows.len(), width], |i| {
                d_emb.data()[g.rows[i / width] * width + i % width]
            });
            let d_seq = self.attention.backward(&g.attention, &d_pooled);
            let d_td_out = self.lstm.backward(&g.lstm, &d_seq);
            let d_h = RELU.backward(&g.td_out, &d_td_out);
            self.td.backward(&g.td, &d_h);
        }
    }

    pub(crate) fn cast<U: Scalar>(&self) -> AudioEncoder<U> {
        AudioEncoder {
            td: self.td.cast(),
            lstm: self.lstm.cast(),
            attention: self.attention.cast(),
        }
    }
}

impl<T: Scalar> Params<T> for AudioEncoder<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>)) {
        visit_child("td", &self.td, f);
        visit_child("lstm", &self.lstm, f);
        visit_child("attention", &self.attention, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        visit_child_mut("td", &mut self.td, f);
        visit_child_mut("lstm", &mut self.lstm, f);
        visit_child_mut("attention", &mut self.attention, f);
    }
}

/// Dense → ReLU applied to every frame with shared weights.
#[derive(Clone, Debug, PartialEq)]
pub struct VisualEncoder<T> {
    pub dense: Dense<T>,
}

#[derive(Clone, Debug)]
pub struct VisualCache<T> {
    dense: DenseCache<T>,
    out: Tensor<T>,
}

impl<T: Scalar> VisualEncoder<T> {
    pub fn new<R: Rng + ?Sized>(prefix: &str, in_dim: usize, width: usize, rng: &mut R) -> Self {
        Self {
            dense: Dense::new(format!("{prefix}.dense"), in_dim, width, rng),
        }
    }

    /// `[B, F, D_v]` frames to `[B, F, W]` embeddings.
    pub fn forward(&self, frames: &Tensor<T>) -> Result<(Tensor<T>, VisualCache<T>)> {
        frames.expect_shape(
            self.dense.name(),
            &[None, None, Some(self.dense.input_dim())],
        )?;
        let (h, dense) = self.dense.forward(frames)?;
        let out = RELU.apply(&h);
        Ok((out.clone(), VisualCache { dense, out }))
    }

    pub fn backward(&mut self, cache: &VisualCache<T>, d_out: &Tensor<T>) {
        let d_h = RELU.backward(&cache.out, d_out);
        self.dense.backward(&cache.dense, &d_h);
    }

    pub(crate) fn cast<U: Scalar>(&self) -> VisualEncoder<U> {
        VisualEncoder {
            dense: self.dense.cast(),
        }
    }
}

impl<T: Scalar> Params<T> for VisualEncoder<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>)) {
        visit_child("dense", &self.dense, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        visit_child_mut("dense", &mut self.dense, f);
    }
}

/// conv1 → ReLU → conv2 → ReLU → max-pool over frames → dense → ReLU →
/// dense head producing logits.
#[derive(Clone, Debug, PartialEq)]
pub struct Fusion<T> {
    pub conv1: Conv1d<T>,
    pub conv2: Conv1d<T>,
    pub dense: Dense<T>,
    pub head: Dense<T>,
}

#[derive(Clone, Debug)]
pub struct FusionCache<T> {
    conv1: Conv1dCache<T>,
    a1: Tensor<T>,
    conv2: Conv1dCache<T>,
    a2: Tensor<T>,
    pool: MaxPoolCache,
    dense: DenseCache<T>,
    a3: Tensor<T>,
    head: DenseCache<T>,
}

impl<T: Scalar> Fusion<T> {
    pub fn new<R: Rng + ?Sized>(
        prefix: &str,
        input: usize,
        widths: FusionWidths,
        output: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            conv1: Conv1d::new(format!("{prefix}.conv1"), input, widths.conv1, kernel, rng)?,
            conv2: Conv1d::new(
                format!("{prefix}.conv2"),
                widths.conv1,
                widths.conv2,
                kernel,
                rng,
            )?,
            dense: Dense::new(format!("{prefix}.dense"), widths.conv2, widths.dense, rng),
            head: Dense::new(format!("{prefix}.head"), widths.dense, output, rng),
        })
    }

    pub fn input_channels(&self) -> usize {
        self.conv1.in_channels()
    }

    pub fn output_dim(&self) -> usize {
        self.head.output_dim()
    }

    /// `[B, F, C]` to `[B, out]` logits.
    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, FusionCache<T>)> {
        let (h1, conv1) = self.conv1.forward(x)?;
        let a1 = RELU.apply(&h1);
        let (h2, conv2) = self.conv2.forward(&a1)?;
        let a2 = RELU.apply(&h2);
        let (pooled, pool) = MaxPoolTime.forward(&a2)?;
        let (h3, dense) = self.dense.forward(&pooled)?;
        let a3 = RELU.apply(&h3);
        let (logits, head) = self.head.forward(&a3)?;
        Ok((
            logits,
            FusionCache {
                conv1,
                a1,
                conv2,
                a2,
                pool,
                dense,
                a3,
                head,
            },
        ))
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &FusionCache<T>, d_logits: &Tensor<T>) -> Tensor<T> {
        let d_a3 = self.head.backward(&cache.head, d_logits);
        let d_h3 = RELU.backward(&cache.a3, &d_a3);
        let d_pooled = self.dense.backward(&cache.dense, &d_h3);
        let d_a2 = MaxPoolTime.backward(&cache.pool, &d_pooled);
        let d_h2 = RELU.backward(&cache.a2, &d_a2);
        let d_a1 = self.conv2.backward(&cache.conv2, &d_h2);
        let d_h1 = RELU.backward(&cache.a1, &d_a1);
        self.conv1.backward(&cache.conv1, &d_h1)
    }

    pub(crate) fn cast<U: Scalar>(&self) -> Fusion<U> {
        Fusion {
            conv1: self.conv1.cast(),
            conv2: self.conv2.cast(),
            dense: self.dense.cast(),
            head: self.head.cast(),
        }
    }
}

impl<T: Scalar> Params<T> for Fusion<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>)) {
        visit_child("conv1", &self.conv1, f);
        visit_child("conv2", &self.conv2, f);
        visit_child("dense", &self.dense, f);
        visit_child("head", &self.head, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        visit_child_mut("conv1", &mut self.conv1, f);
        visit_child_mut("conv2", &mut self.conv2, f);
        visit_child_mut("dense", &mut self.dense, f);
        visit_child_mut("head", &mut self.head, f);
    }
}
