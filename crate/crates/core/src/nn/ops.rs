//! Frame-axis concatenation used to fuse per-frame and per-clip features.

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// One input to [`concat_frames`].
#[derive(Clone, Copy, Debug)]
pub enum FramePart<'a, T> {
    /// `[B, F, w]`, one vector per frame.
    PerFrame(&'a Tensor<T>),
    /// `[B, w]`, repeated at every frame.
    Repeated(&'a Tensor<T>),
}

impl<T: Scalar> FramePart<'_, T> {
    fn width(&self) -> usize {
        match self {
            FramePart::PerFrame(t) | FramePart::Repeated(t) => *t.shape().last().unwrap_or(&0),
        }
    }
}

/// Concatenates along the channel axis into `[B, F, Σ w]`.
pub fn concat_frames<T: Scalar>(frames: usize, parts: &[FramePart<'_, T>]) -> Result<Tensor<T>> {
    let batch = match parts.first() {
        Some(FramePart::PerFrame(t)) | Some(FramePart::Repeated(t)) if t.rank() >= 1 => t.dim(0),
        _ => return Err(Error::dim("concat", "no inputs")),
    };
    for p in parts {
        let ok = match p {
            FramePart::PerFrame(t) => t.rank() == 3 && t.dim(0) == batch && t.dim(1) == frames,
            FramePart::Repeated(t) => t.rank() == 2 && t.dim(0) == batch,
        };
        if !ok {
            let shape = match p {
                FramePart::PerFrame(t) | FramePart::Repeated(t) => t.shape().to_vec(),
            };
            return Err(Error::dim(
                "concat",
                format!("part {shape:?} does not fit batch {batch} x frames {frames}"),
            ));
        }
    }
    let widths: Vec<usize> = parts.iter().map(FramePart::width).collect();
    let total: usize = widths.iter().sum();
    let mut out = Vec::with_capacity(batch * frames * total);
    for b in 0..batch {
        for f in 0..frames {
            for (p, &w) in parts.iter().zip(&widths) {
                match p {
                    FramePart::PerFrame(t) => {
                        let s = (b * frames + f) * w;
                        out.extend_from_slice(&t.data()[s..s + w]);
                    }
                    FramePart::Repeated(t) => out.extend_from_slice(&t.data()[b * w..(b + 1) * w]),
                }
            }
        }
    }
    Tensor::new(vec![batch, frames, total], out)
}

/// Splits a `[B, F, Σ w]` gradient back into its parts. Parts that were
/// repeated receive the sum over frames.
pub fn split_frames_grad<T: Scalar>(grad: &Tensor<T>, parts: &[(usize, bool)]) -> Vec<Tensor<T>> {
    let (batch, frames, total) = (grad.dim(0), grad.dim(1), grad.dim(2));
    debug_assert_eq!(total, parts.iter().map(|p| p.0).sum::<usize>());
    let mut outs: Vec<Tensor<T>> = parts
        .iter()
        .map(|&(w, repeated)| {
            if repeated {
                Tensor::zeros(&[batch, w])
            } else {
                Tensor::zeros(&[batch, frames, w])
            }
        })
        .collect();
    for b in 0..batch {
        for f in 0..frames {
            let row = &grad.data()[(b * frames + f) * total..(b * frames + f + 1) * total];
            let mut offset = 0;
            for (out, &(w, repeated)) in outs.iter_mut().zip(parts) {
                let src = &row[offset..offset + w];
                let dst = if repeated {
                    &mut out.data_mut()[b * w..(b + 1) * w]
                } else {
                    &mut out.data_mut()[(b * frames + f) * w..(b * frames + f + 1) * w]
                };
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
                offset += w;
            }
        }
    }
    outs
}
