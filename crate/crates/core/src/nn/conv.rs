use rand::Rng;

use super::dense::{affine_backward, affine_forward};
use super::param::{glorot_uniform, Param, Params};
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// 1-D cross-correlation along the time axis with zero "same" padding.
///
/// Input `[B, T, in]`, output `[B, T, out]`, weight `[k, in, out]` with odd
/// kernel width `k`. Tap `j` reads position `t + j - k/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d<T> {
    name: String,
    pub weight: Param<T>,
    pub bias: Param<T>,
}

#[derive(Clone, Debug)]
pub struct Conv1dCache<T> {
    input_shape: Vec<usize>,
    /// im2col buffer `[B*T, k*in]`; for `k == 1` this is the input itself.
    cols: Vec<T>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn new<R: Rng + ?Sized>(
        name: impl Into<String>,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let name = name.into();
        check_kernel(&name, kernel)?;
        Ok(Self {
            weight: Param::new(glorot_uniform(
                rng,
                &[kernel, in_ch, out_ch],
                kernel * in_ch,
                kernel * out_ch,
            )),
            bias: Param::zeros(&[out_ch]),
            name,
        })
    }

    pub fn from_weights(
        name: impl Into<String>,
        weight: Tensor<T>,
        bias: Tensor<T>,
    ) -> Result<Self> {
        let name = name.into();
        if weight.rank() != 3 || bias.shape() != [weight.dim(2)] {
            return Err(Error::dim(
                &name,
                format!("weight {:?} / bias {:?}", weight.shape(), bias.shape()),
            ));
        }
        check_kernel(&name, weight.dim(0))?;
        Ok(Self {
            name,
            weight: Param::new(weight),
            bias: Param::new(bias),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kernel(&self) -> usize {
        self.weight.value.dim(0)
    }

    pub fn in_channels(&self) -> usize {
        self.weight.value.dim(1)
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.dim(2)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Conv1dCache<T>)> {
        x.expect_shape(&self.name, &[None, None, Some(self.in_channels())])?;
        let (batch, steps, in_ch) = (x.dim(0), x.dim(1), x.dim(2));
        let k = self.kernel();
        let cols = if k == 1 {
            x.data().to_vec()
        } else {
            im2col(x.data(), batch, steps, in_ch, k)
        };
        let out = self.out_channels();
        let y = affine_forward(
            &cols,
            batch * steps,
            k * in_ch,
            self.weight.value.data(),
            out,
            self.bias.value.data(),
        );
        Ok((
            Tensor::new(vec![batch, steps, out], y)?,
            Conv1dCache {
                input_shape: x.shape().to_vec(),
                cols,
            },
        ))
    }

    pub fn backward(&mut self, cache: &Conv1dCache<T>, dy: &Tensor<T>) -> Tensor<T> {
        let (batch, steps, in_ch) = (
            cache.input_shape[0],
            cache.input_shape[1],
            cache.input_shape[2],
        );
        let k = self.kernel();
        let dcols = affine_backward(
            &cache.cols,
            batch * steps,
            k * in_ch,
            self.weight.value.data(),
            self.out_channels(),
            dy.data(),
            self.weight.grad.data_mut(),
            self.bias.grad.data_mut(),
        );
        let dx = if k == 1 {
            dcols
        } else {
            col2im(&dcols, batch, steps, in_ch, k)
        };
        Tensor::new(cache.input_shape.clone(), dx).expect("input shape")
    }

    pub(crate) fn cast<U: Scalar>(&self) -> Conv1d<U> {
        Conv1d {
            name: self.name.clone(),
            weight: self.weight.cast(),
            bias: self.bias.cast(),
        }
    }
}

fn check_kernel(name: &str, kernel: usize) -> Result<()> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "{name}: kernel width must be odd and >= 1, got {kernel}"
        )));
    }
    Ok(())
}

fn im2col<T: Scalar>(x: &[T], batch: usize, steps: usize, in_ch: usize, k: usize) -> Vec<T> {
    let half = k / 2;
    let width = k * in_ch;
    let mut cols = vec![T::zero(); batch * steps * width];
    for b in 0..batch {
        for t in 0..steps {
            let row = &mut cols[(b * steps + t) * width..(b * steps + t + 1) * width];
            for j in 0..k {
                let src = t + j;
                if src < half || src - half >= steps {
                    continue;
                }
                let s = b * steps + src - half;
                row[j * in_ch..(j + 1) * in_ch].copy_from_slice(&x[s * in_ch..(s + 1) * in_ch]);
            }
        }
    }
    cols
}

fn col2im<T: Scalar>(dcols: &[T], batch: usize, steps: usize, in_ch: usize, k: usize) -> Vec<T> {
    let half = k / 2;
    let width = k * in_ch;
    let mut dx = vec![T::zero(); batch * steps * in_ch];
    for b in 0..batch {
        for t in 0..steps {
            let row = &dcols[(b * steps + t) * width..(b * steps + t + 1) * width];
            for j in 0..k {
                let src = t + j;
                if src < half || src - half >= steps {
                    continue;
                }
                let s = b * steps + src - half;
                for (d, &g) in dx[s * in_ch..(s + 1) * in_ch]
                    .iter_mut()
                    .zip(&row[j * in_ch..(j + 1) * in_ch])
                {
                    *d += g;
                }
            }
        }
    }
    dx
}

impl<T: Scalar> Params<T> for Conv1d<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>)) {
        f("weight", &self.weight);
        f("bias", &self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }
}

/// Per-channel maximum over the time axis: `[B, T, C] -> [B, C]`.
///
/// Backward routes each channel's gradient to the first arg-max position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MaxPoolTime;

#[derive(Clone, Debug)]
pub struct MaxPoolCache {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

impl MaxPoolCache {
    /// Time index selected for each `(batch, channel)`.
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

impl MaxPoolTime {
    pub fn forward<T: Scalar>(&self, x: &Tensor<T>) -> Result<(Tensor<T>, MaxPoolCache)> {
        if x.rank() != 3 {
            return Err(Error::dim(
                "maxpool_time",
                format!("expected [B, T, C], got {:?}", x.shape()),
            ));
        }
        let (batch, steps, ch) = (x.dim(0), x.dim(1), x.dim(2));
        if steps == 0 {
            return Err(Error::EmptySequence {
                layer: "maxpool_time".into(),
            });
        }
        let mut out = vec![T::zero(); batch * ch];
        let mut argmax = vec![0usize; batch * ch];
        for b in 0..batch {
            for c in 0..ch {
                let mut best = x.data()[b * steps * ch + c];
                let mut idx = 0;
                for t in 1..steps {
                    let v = x.data()[(b * steps + t) * ch + c];
                    if v > best {
                        best = v;
                        idx = t;
                    }
                }
                out[b * ch + c] = best;
                argmax[b * ch + c] = idx;
            }
        }
        Ok((
            Tensor::new(vec![batch, ch], out)?,
            MaxPoolCache {
                input_shape: x.shape().to_vec(),
                argmax,
            },
        ))
    }

    pub fn backward<T: Scalar>(&self, cache: &MaxPoolCache, dy: &Tensor<T>) -> Tensor<T> {
        let (batch, steps, ch) = (
            cache.input_shape[0],
            cache.input_shape[1],
            cache.input_shape[2],
        );
        let mut dx = vec![T::zero(); batch * steps * ch];
        for b in 0..batch {
            for c in 0..ch {
                let t = cache.argmax[b * ch + c];
                dx[(b * steps + t) * ch + c] = dy.data()[b * ch + c];
            }
        }
        Tensor::new(cache.input_shape.clone(), dx).expect("input shape")
    }
}
