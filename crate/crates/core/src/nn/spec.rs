use serde::{Deserialize, Serialize};

use super::activation::Activation;
use crate::error::{Error, Result};

/// Declarative description of one layer, used for validation and for
/// counting parameters without building a network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        input: usize,
        output: usize,
    },
    TimeDistributedDense {
        input: usize,
        output: usize,
    },
    Lstm {
        input: usize,
        hidden: usize,
    },
    AttentionPool {
        dim: usize,
        attn_dim: usize,
    },
    Conv1d {
        input: usize,
        output: usize,
        kernel: usize,
    },
    MaxpoolTime,
    Activation {
        name: Activation,
    },
    Concat {
        widths: Vec<usize>,
    },
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |label: &str, v: usize| {
            if v == 0 {
                Err(Error::Config(format!(
                    "{label} must be positive in {self:?}"
                )))
            } else {
                Ok(())
            }
        };
        match self {
            LayerSpec::Dense { input, output }
            | LayerSpec::TimeDistributedDense { input, output } => {
                positive("input", *input)?;
                positive("output", *output)
            }
            LayerSpec::Lstm { input, hidden } => {
                positive("input", *input)?;
                positive("hidden", *hidden)
            }
            LayerSpec::AttentionPool { dim, attn_dim } => {
                positive("dim", *dim)?;
                positive("attn_dim", *attn_dim)
            }
            LayerSpec::Conv1d {
                input,
                output,
                kernel,
            } => {
                positive("input", *input)?;
                positive("output", *output)?;
                if kernel % 2 == 0 {
                    return Err(Error::Config(format!(
                        "conv1d kernel width must be odd and >= 1, got {kernel}"
                    )));
                }
                Ok(())
            }
            LayerSpec::Concat { widths } => widths.iter().try_for_each(|&w| positive("width", w)),
            LayerSpec::MaxpoolTime | LayerSpec::Activation { .. } => Ok(()),
        }
    }

    /// Number of trainable scalars the layer owns.
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Dense { input, output }
            | LayerSpec::TimeDistributedDense { input, output } => input * output + output,
            LayerSpec::Lstm { input, hidden } => 4 * hidden * (input + hidden) + 4 * hidden,
            LayerSpec::AttentionPool { dim, attn_dim } => dim * attn_dim + 2 * attn_dim,
            LayerSpec::Conv1d {
                input,
                output,
                kernel,
            } => kernel * input * output + output,
            LayerSpec::MaxpoolTime | LayerSpec::Activation { .. } | LayerSpec::Concat { .. } => 0,
        }
    }
}
