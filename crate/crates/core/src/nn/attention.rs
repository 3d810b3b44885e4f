use rand::Rng;

use super::activation::softmax_in_place;
use super::dense::{affine_backward, affine_forward};
use super::param::{glorot_uniform, Param, Params};
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Additive self-attention pooling over the time axis.
///
/// `e_t = v · tanh(W h_t + b)`, `α = softmax_t(e)`, `pooled = Σ_t α_t h_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionPool<T> {
    name: String,
    /// `[d, a]`
    pub weight: Param<T>,
    /// `[a]`
    pub bias: Param<T>,
    /// `[a]`
    pub score: Param<T>,
}

#[derive(Clone, Debug)]
pub struct AttentionCache<T> {
    input: Tensor<T>,
    /// `tanh(W h_t + b)` as `[B*T, a]`.
    hidden: Vec<T>,
    weights: Tensor<T>,
}

impl<T> AttentionCache<T> {
    /// The attention weights `[B, T]` of the cached forward pass.
    pub fn weights(&self) -> &Tensor<T> {
        &self.weights
    }
}

impl<T: Scalar> AttentionPool<T> {
    pub fn new<R: Rng + ?Sized>(
        name: impl Into<String>,
        dim: usize,
        attn_dim: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            name: name.into(),
            weight: Param::new(glorot_uniform(rng, &[dim, attn_dim], dim, attn_dim)),
            bias: Param::zeros(&[attn_dim]),
            score: Param::new(glorot_uniform(rng, &[attn_dim], attn_dim, 1)),
        }
    }

    pub fn dim(&self) -> usize {
        self.weight.value.dim(0)
    }

    fn attn_dim(&self) -> usize {
        self.weight.value.dim(1)
    }

    /// Returns the pooled `[B, d]` vector; the `[B, T]` weights are kept in
    /// the cache.
    pub fn forward(&self, h: &Tensor<T>) -> Result<(Tensor<T>, AttentionCache<T>)> {
        h.expect_shape(&self.name, &[None, None, Some(self.dim())])?;
        let (batch, steps, d) = (h.dim(0), h.dim(1), h.dim(2));
        if steps == 0 {
            return Err(Error::EmptySequence {
                layer: self.name.clone(),
            });
        }
        let a = self.attn_dim();
        let mut hidden = affine_forward(
            h.data(),
            batch * steps,
            d,
            self.weight.value.data(),
            a,
            self.bias.value.data(),
        );
        hidden.iter_mut().for_each(|v| *v = v.tanh());
        let v = self.score.value.data();
        let mut weights: Vec<T> = hidden
            .chunks_exact(a)
            .map(|u| u.iter().zip(v).map(|(&x, &y)| x * y).sum())
            .collect();
        for row in weights.chunks_exact_mut(steps) {
            softmax_in_place(row);
        }
        let mut pooled = vec![T::zero(); batch * d];
        for b in 0..batch {
            for t in 0..steps {
                let alpha = weights[b * steps + t];
                let ht = &h.data()[(b * steps + t) * d..(b * steps + t + 1) * d];
                for (p, &x) in pooled[b * d..(b + 1) * d].iter_mut().zip(ht) {
                    *p += alpha * x;
                }
            }
        }
        Ok((
            Tensor::new(vec![batch, d], pooled)?,
            AttentionCache {
                input: h.clone(),
                hidden,
                weights: Tensor::new(vec![batch, steps], weights)?,
            },
        ))
    }

    pub fn backward(&mut self, cache: &AttentionCache<T>, dpooled: &Tensor<T>) -> Tensor<T> {
        let h = &cache.input;
        let (batch, steps, d) = (h.dim(0), h.dim(1), h.dim(2));
        let a = self.attn_dim();
        let alpha = cache.weights.data();
        let mut dh = vec![T::zero(); h.len()];
        let mut de = vec![T::zero(); batch * steps];
        for b in 0..batch {
            let g = &dpooled.data()[b * d..(b + 1) * d];
            let mut dalpha = vec![T::zero(); steps];
            for t in 0..steps {
                let idx = (b * steps + t) * d;
                let ht = &h.data()[idx..idx + d];
                dalpha[t] = ht.iter().zip(g).map(|(&x, &y)| x * y).sum();
                let at = alpha[b * steps + t];
                for (o, &y) in dh[idx..idx + d].iter_mut().zip(g) {
                    *o = at * y;
                }
            }
            let mean: T = (0..steps).map(|t| alpha[b * steps + t] * dalpha[t]).sum();
            for t in 0..steps {
                de[b * steps + t] = alpha[b * steps + t] * (dalpha[t] - mean);
            }
        }
        let v = self.score.value.data().to_vec();
        let mut dz = vec![T::zero(); batch * steps * a];
        {
            let dv = self.score.grad.data_mut();
            for (row, (&e, u)) in de.iter().zip(cache.hidden.chunks_exact(a)).enumerate() {
                for k in 0..a {
                    dv[k] += e * u[k];
                    dz[row * a + k] = e * v[k] * (T::one() - u[k] * u[k]);
                }
            }
        }
        let dh_score = affine_backward(
            h.data(),
            batch * steps,
            d,
            self.weight.value.data(),
            a,
            &dz,
            self.weight.grad.data_mut(),
            self.bias.grad.data_mut(),
        );
        for (o, &x) in dh.iter_mut().zip(&dh_score) {
            *o += x;
        }
        Tensor::new(h.shape().to_vec(), dh).expect("input shape")
    }

    pub(crate) fn cast<U: Scalar>(&self) -> AttentionPool<U> {
        AttentionPool {
            name: self.name.clone(),
            weight: self.weight.cast(),
            bias: self.bias.cast(),
            score: self.score.cast(),
        }
    }
}

impl<T: Scalar> Params<T> for AttentionPool<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>)) {
        f("weight", &self.weight);
        f("bias", &self.bias);
        f("score", &self.score);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
        f("score", &mut self.score);
    }
}
