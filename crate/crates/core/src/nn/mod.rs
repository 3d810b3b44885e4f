//! Minimal neural-network kernel with explicit forward and backward passes.

pub mod activation;
pub mod attention;
pub mod checkpoint;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod lstm;
pub mod ops;
pub mod param;
pub mod spec;
pub mod tensor;

pub use activation::{
    binary_cross_entropy_with_logits, sigmoid, softmax, softmax_backward, softmax_cross_entropy,
    Activation, LossOutput,
};
pub use attention::{AttentionCache, AttentionPool};
pub use conv::{Conv1d, Conv1dCache, MaxPoolCache, MaxPoolTime};
pub use dense::{Dense, DenseCache, TimeDistributed};
pub use gradcheck::{
    grad_check, input_grad_check, relative_error, GradCheckOptions, GradCheckReport,
    DEFAULT_EPSILON, GRADIENT_FLOOR,
};
pub use lstm::{Lstm, LstmCache};
pub use ops::{concat_frames, split_frames_grad, FramePart};
pub use param::{glorot_uniform, Param, Params};
pub use spec::LayerSpec;
pub use tensor::{Scalar, Tensor};
