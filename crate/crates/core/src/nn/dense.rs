use rand::Rng;

use super::param::{glorot_uniform, Param, Params};
use super::tensor::{gemm, Op, Scalar, Tensor};
use crate::error::{Error, Result};

/// `y = x W + b` over a row-major `[rows, in]` buffer.
pub(crate) fn affine_forward<T: Scalar>(
    x: &[T],
    rows: usize,
    in_dim: usize,
    weight: &[T],
    out_dim: usize,
    bias: &[T],
) -> Vec<T> {
    let mut y = vec![T::zero(); rows * out_dim];
    gemm(
        rows,
        in_dim,
        out_dim,
        x,
        Op::N,
        weight,
        Op::N,
        T::zero(),
        &mut y,
    );
    for row in y.chunks_exact_mut(out_dim) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
    y
}

/// Accumulates `dW += xᵀ dy`, `db += colsum(dy)` and returns `dx = dy Wᵀ`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn affine_backward<T: Scalar>(
    x: &[T],
    rows: usize,
    in_dim: usize,
    weight: &[T],
    out_dim: usize,
    dy: &[T],
    dweight: &mut [T],
    dbias: &mut [T],
) -> Vec<T> {
    gemm(
        in_dim,
        rows,
        out_dim,
        x,
        Op::T,
        dy,
        Op::N,
        T::one(),
        dweight,
    );
    for row in dy.chunks_exact(out_dim) {
        for (g, &d) in dbias.iter_mut().zip(row) {
            *g += d;
        }
    }
    let mut dx = vec![T::zero(); rows * in_dim];
    gemm(
        rows,
        out_dim,
        in_dim,
        dy,
        Op::N,
        weight,
        Op::T,
        T::zero(),
        &mut dx,
    );
    dx
}

/// Fully connected layer applied to the last axis of its input.
///
/// Any leading axes are treated as independent rows, so the same layer
/// serves as a time-distributed dense layer on `[batch, T, in]` input.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    name: String,
    /// `[in, out]`
    pub weight: Param<T>,
    /// `[out]`
    pub bias: Param<T>,
}

#[derive(Clone, Debug)]
pub struct DenseCache<T> {
    input: Tensor<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new<R: Rng + ?Sized>(
        name: impl Into<String>,
        in_dim: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            name: name.into(),
            weight: Param::new(glorot_uniform(rng, &[in_dim, out_dim], in_dim, out_dim)),
            bias: Param::zeros(&[out_dim]),
        }
    }

    pub fn from_weights(
        name: impl Into<String>,
        weight: Tensor<T>,
        bias: Tensor<T>,
    ) -> Result<Self> {
        let name = name.into();
        if weight.rank() != 2 || bias.shape() != [weight.dim(1)] {
            return Err(Error::dim(
                &name,
                format!(
                    "weight {:?} and bias {:?} are inconsistent",
                    weight.shape(),
                    bias.shape()
                ),
            ));
        }
        Ok(Self {
            name,
            weight: Param::new(weight),
            bias: Param::new(bias),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.dim(0)
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.dim(1)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, DenseCache<T>)> {
        let y = self.infer(x)?;
        Ok((y, DenseCache { input: x.clone() }))
    }

    /// Forward pass without keeping a backward cache.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let in_dim = self.input_dim();
        if x.rank() < 2 || x.shape()[x.rank() - 1] != in_dim {
            return Err(Error::dim(
                &self.name,
                format!("expected [.., {in_dim}] input, got {:?}", x.shape()),
            ));
        }
        let rows = x.len() / in_dim;
        let out_dim = self.output_dim();
        let y = affine_forward(
            x.data(),
            rows,
            in_dim,
            self.weight.value.data(),
            out_dim,
            self.bias.value.data(),
        );
        let mut shape = x.shape().to_vec();
        *shape.last_mut().expect("rank >= 2") = out_dim;
        Tensor::new(shape, y)
    }

    pub fn backward(&mut self, cache: &DenseCache<T>, dy: &Tensor<T>) -> Tensor<T> {
        let in_dim = self.input_dim();
        let out_dim = self.output_dim();
        let rows = cache.input.len() / in_dim;
        debug_assert_eq!(dy.len(), rows * out_dim);
        let dx = affine_backward(
            cache.input.data(),
            rows,
            in_dim,
            self.weight.value.data(),
            out_dim,
            dy.data(),
            self.weight.grad.data_mut(),
            self.bias.grad.data_mut(),
        );
        Tensor::new(cache.input.shape().to_vec(), dx).expect("input shape")
    }

    pub(crate) fn cast<U: Scalar>(&self) -> Dense<U> {
        Dense {
            name: self.name.clone(),
            weight: self.weight.cast(),
            bias: self.bias.cast(),
        }
    }
}

impl<T: Scalar> Params<T> for Dense<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>)) {
        f("weight", &self.weight);
        f("bias", &self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }
}

/// Dense layer shared across the time axis of `[batch, T, in]` input.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeDistributed<T>(pub Dense<T>);

impl<T: Scalar> TimeDistributed<T> {
    pub fn new<R: Rng + ?Sized>(
        name: impl Into<String>,
        in_dim: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Self {
        Self(Dense::new(name, in_dim, out_dim, rng))
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, DenseCache<T>)> {
        x.expect_shape(self.0.name(), &[None, None, Some(self.0.input_dim())])?;
        self.0.forward(x)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.expect_shape(self.0.name(), &[None, None, Some(self.0.input_dim())])?;
        self.0.infer(x)
    }

    pub fn backward(&mut self, cache: &DenseCache<T>, dy: &Tensor<T>) -> Tensor<T> {
        self.0.backward(cache, dy)
    }

    pub(crate) fn cast<U: Scalar>(&self) -> TimeDistributed<U> {
        TimeDistributed(self.0.cast())
    }
}

impl<T: Scalar> Params<T> for TimeDistributed<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.0.visit_params(f)
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.0.visit_params_mut(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn identity_weights_pass_input_through() {
        let layer =
            Dense::from_weights("d", t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]), t(&[2], &[0.0, 0.0]))
                .unwrap();
        let y = layer.infer(&t(&[1, 2], &[1.0, 2.0])).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0]);
    }

    #[test]
    fn zero_input_passes_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut layer = Dense::<f64>::new("d", 2, 2, &mut rng);
        layer.bias.value = t(&[2], &[3.0, -1.0]);
        let y = layer.infer(&t(&[1, 2], &[0.0, 0.0])).unwrap();
        assert_eq!(y.data(), &[3.0, -1.0]);
    }

    #[test]
    fn shape_mismatch_names_the_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = Dense::<f32>::new("visual.frame_dense", 4, 3, &mut rng);
        let err = layer.infer(&Tensor::zeros(&[2, 5])).unwrap_err();
        assert!(err.to_string().contains("visual.frame_dense"), "{err}");
    }

    #[test]
    fn time_distributed_single_step_equals_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let td = TimeDistributed::<f64>::new("td", 3, 4, &mut rng);
        let x = Tensor::from_fn(&[2, 1, 3], |i| (i as f64 * 0.37).sin());
        let y_td = td.infer(&x).unwrap();
        let y_dense = td.0.infer(&x.clone().reshape(&[2, 3]).unwrap()).unwrap();
        assert_eq!(y_td.data(), y_dense.data());
    }

    #[test]
    fn time_distributed_commutes_with_time_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let td = TimeDistributed::<f64>::new("td", 3, 2, &mut rng);
        let (b, steps, d) = (2, 4, 3);
        let x = Tensor::from_fn(&[b, steps, d], |i| (i as f64 * 0.91).cos());
        let perm = [2, 0, 3, 1];
        let permute = |x: &Tensor<f64>, width: usize| {
            let mut out = Vec::new();
            for bi in 0..b {
                for &p in &perm {
                    let start = (bi * steps + p) * width;
                    out.extend_from_slice(&x.data()[start..start + width]);
                }
            }
            Tensor::new(vec![b, steps, width], out).unwrap()
        };
        let y_perm = td.infer(&permute(&x, d)).unwrap();
        let perm_y = permute(&td.infer(&x).unwrap(), 2);
        assert_eq!(y_perm, perm_y);
    }

    #[test]
    fn time_distributed_rejects_rank_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let td = TimeDistributed::<f32>::new("td", 3, 2, &mut rng);
        assert!(td.infer(&Tensor::zeros(&[2, 3])).is_err());
    }
}
