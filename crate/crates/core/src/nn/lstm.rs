use rand::Rng;

use super::activation::sigmoid;
use super::dense::{affine_backward, affine_forward};
use super::param::{glorot_uniform, Param, Params};
use super::tensor::{gemm, Op, Scalar, Tensor};
use crate::error::{Error, Result};

/// Single-layer LSTM returning the full hidden sequence.
///
/// Gate blocks are stored fused along the output axis in the order
/// input, forget, candidate, output: `w_input` is `[in, 4H]`, `w_hidden`
/// is `[H, 4H]`, `bias` is `[4H]`. Each block is one of the eight gate
/// matrices of the textbook formulation. Initial hidden and cell states
/// are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Lstm<T> {
    name: String,
    pub w_input: Param<T>,
    pub w_hidden: Param<T>,
    pub bias: Param<T>,
}

#[derive(Clone, Debug)]
pub struct LstmCache<T> {
    input: Tensor<T>,
    /// Post-nonlinearity gate values `[B, T, 4H]`.
    gates: Vec<T>,
    /// Cell states `[B, T, H]`.
    cells: Vec<T>,
    /// Hidden states `[B, T, H]`.
    hidden: Vec<T>,
}

impl<T: Scalar> Lstm<T> {
    pub fn new<R: Rng + ?Sized>(
        name: impl Into<String>,
        in_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            name: name.into(),
            w_input: Param::new(glorot_uniform(rng, &[in_dim, 4 * hidden], in_dim, hidden)),
            w_hidden: Param::new(glorot_uniform(rng, &[hidden, 4 * hidden], hidden, hidden)),
            bias: Param::zeros(&[4 * hidden]),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.value.dim(0)
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hidden.value.dim(0)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, LstmCache<T>)> {
        x.expect_shape(&self.name, &[None, None, Some(self.input_dim())])?;
        let (batch, steps, in_dim) = (x.dim(0), x.dim(1), x.dim(2));
        if steps == 0 {
            return Err(Error::EmptySequence {
                layer: self.name.clone(),
            });
        }
        let h = self.hidden_dim();
        let g4 = 4 * h;
        let xw = affine_forward(
            x.data(),
            batch * steps,
            in_dim,
            self.w_input.value.data(),
            g4,
            self.bias.value.data(),
        );
        let mut gates = vec![T::zero(); batch * steps * g4];
        let mut cells = vec![T::zero(); batch * steps * h];
        let mut hidden = vec![T::zero(); batch * steps * h];
        let mut h_prev = vec![T::zero(); batch * h];
        let mut c_prev = vec![T::zero(); batch * h];
        let mut hw = vec![T::zero(); batch * g4];
        for t in 0..steps {
            if t > 0 {
                gemm(
                    batch,
                    h,
                    g4,
                    &h_prev,
                    Op::N,
                    self.w_hidden.value.data(),
                    Op::N,
                    T::zero(),
                    &mut hw,
                );
            }
            for b in 0..batch {
                let row = b * steps + t;
                let pre = &xw[row * g4..(row + 1) * g4];
                let gate = &mut gates[row * g4..(row + 1) * g4];
                for k in 0..g4 {
                    let z = if t > 0 {
                        pre[k] + hw[b * g4 + k]
                    } else {
                        pre[k]
                    };
                    gate[k] = if (2 * h..3 * h).contains(&k) {
                        z.tanh()
                    } else {
                        sigmoid(z)
                    };
                }
                for j in 0..h {
                    let (i, f, g, o) = (gate[j], gate[h + j], gate[2 * h + j], gate[3 * h + j]);
                    let c = f * c_prev[b * h + j] + i * g;
                    let hv = o * c.tanh();
                    cells[row * h + j] = c;
                    hidden[row * h + j] = hv;
                    c_prev[b * h + j] = c;
                    h_prev[b * h + j] = hv;
                }
            }
        }
        let out = Tensor::new(vec![batch, steps, h], hidden.clone())?;
        Ok((
            out,
            LstmCache {
                input: x.clone(),
                gates,
                cells,
                hidden,
            },
        ))
    }

    /// Backpropagation through time over all gates.
    pub fn backward(&mut self, cache: &LstmCache<T>, dy: &Tensor<T>) -> Tensor<T> {
        let (batch, steps, in_dim) = (cache.input.dim(0), cache.input.dim(1), cache.input.dim(2));
        let h = self.hidden_dim();
        let g4 = 4 * h;
        let one = T::one();
        let mut dpre_all = vec![T::zero(); batch * steps * g4];
        let mut dpre_t = vec![T::zero(); batch * g4];
        let mut dh_next = vec![T::zero(); batch * h];
        let mut dc_next = vec![T::zero(); batch * h];
        let mut h_prev = vec![T::zero(); batch * h];
        for t in (0..steps).rev() {
            for b in 0..batch {
                let row = b * steps + t;
                let gate = &cache.gates[row * g4..(row + 1) * g4];
                let dp = &mut dpre_t[b * g4..(b + 1) * g4];
                for j in 0..h {
                    let (i, f, g, o) = (gate[j], gate[h + j], gate[2 * h + j], gate[3 * h + j]);
                    let c = cache.cells[row * h + j];
                    let c_before = if t > 0 {
                        cache.cells[(row - 1) * h + j]
                    } else {
                        T::zero()
                    };
                    let tc = c.tanh();
                    let dh = dy.data()[row * h + j] + dh_next[b * h + j];
                    let d_o = dh * tc;
                    let dc = dh * o * (one - tc * tc) + dc_next[b * h + j];
                    dc_next[b * h + j] = dc * f;
                    dp[j] = dc * g * i * (one - i);
                    dp[h + j] = dc * c_before * f * (one - f);
                    dp[2 * h + j] = dc * i * (one - g * g);
                    dp[3 * h + j] = d_o * o * (one - o);
                }
                dpre_all[row * g4..(row + 1) * g4].copy_from_slice(dp);
            }
            if t > 0 {
                for b in 0..batch {
                    let row = b * steps + t - 1;
                    h_prev[b * h..(b + 1) * h]
                        .copy_from_slice(&cache.hidden[row * h..(row + 1) * h]);
                }
                gemm(
                    h,
                    batch,
                    g4,
                    &h_prev,
                    Op::T,
                    &dpre_t,
                    Op::N,
                    one,
                    self.w_hidden.grad.data_mut(),
                );
                gemm(
                    batch,
                    g4,
                    h,
                    &dpre_t,
                    Op::N,
                    self.w_hidden.value.data(),
                    Op::T,
                    T::zero(),
                    &mut dh_next,
                );
            }
        }
        let dx = affine_backward(
            cache.input.data(),
            batch * steps,
            in_dim,
            self.w_input.value.data(),
            g4,
            &dpre_all,
            self.w_input.grad.data_mut(),
            self.bias.grad.data_mut(),
        );
        Tensor::new(cache.input.shape().to_vec(), dx).expect("input shape")
    }

    pub(crate) fn cast<U: Scalar>(&self) -> Lstm<U> {
        Lstm {
            name: self.name.clone(),
            w_input: self.w_input.cast(),
            w_hidden: self.w_hidden.cast(),
            bias: self.bias.cast(),
        }
    }
}

impl<T: Scalar> Params<T> for Lstm<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>)) {
        f("w_input", &self.w_input);
        f("w_hidden", &self.w_hidden);
        f("bias", &self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f("w_input", &mut self.w_input);
        f("w_hidden", &mut self.w_hidden);
        f("bias", &mut self.bias);
    }
}
