//! From-scratch differentiable substrate for the GridLU agents.
//!
//! Implements exactly the two instruction-conditioned architectures the
//! tasks use: a FiLM-NMN (instruction-shaped tree of shared-weight
//! convolution modules over a stem convnet) and a FiLM-LSTM (five-layer
//! convnet modulated by coefficients projected from an LSTM reading the
//! token sequence), plus the policy, baseline, reward-prediction, and
//! discriminator heads, truncated-normal initialization, column-norm
//! clipping, a versioned checkpoint container, and a finite-difference
//! gradient oracle.
//!
//! Training runs at `f32`; all gradient verification instantiates the
//! same generic code at `f64`, where central differences are meaningful.

pub mod checkpoint;
pub mod encode;
pub mod filmlstm;
pub mod gradcheck;
pub mod lstm;
pub mod model;
pub mod nmn;
pub mod ops;
pub mod tensor;
pub mod verify;

pub use checkpoint::{load_params, meta_get, read_meta, save_params, CheckpointError};
pub use encode::encode_image;
pub use filmlstm::{FilmLstmEval, FilmLstmTrunk, NUM_FILM_LAYERS};
pub use gradcheck::{assert_grads_match, compare_grads, fd_gradient, get_flat, set_flat, GradCheckReport};
pub use lstm::{Lstm, LstmCache};
pub use model::{
    clip_column_norms, film_lstm_tensors_mut, nmn_tensors_mut, init_disc, init_params, init_policy, truncated_normal, DiscEval,
    DiscParams, ModelConfig, ModelError, ParamKind, ParamSet, PolicyEval, PolicyParams, Trunk,
    TrunkEval, TrunkKind,
};
pub use nmn::{ModuleToken, ModuleTrace, NmnEval, NmnTrunk, StemEval, NUM_MODULE_TOKENS};
pub use ops::{
    concat_channels, film, film_backward, maxpool_global, maxpool_global_backward, relu,
    relu_backward, relu_vec, relu_vec_backward, sigmoid, sigmoid_backward, softmax,
    softmax_backward, split_channels, Conv2d, ConvCache, Linear,
};
pub use tensor::{Scalar, Tensor};
pub use verify::{verify_gradients, VerifyCase};
