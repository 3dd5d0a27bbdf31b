//! Dense-tensor layer kit with hand-derived gradients.

pub mod affine;
pub mod attention;
pub mod checkpoint;
pub mod gru;
pub mod loss;
pub mod params;
pub mod tensor;

pub use affine::{affine_backward, affine_forward, relu, relu_backward, AffineGrads};
pub use attention::{
    causal_attention_backward, causal_attention_forward, layer_norm_backward, layer_norm_forward,
    AttentionCache, AttentionGrads, AttentionWeights, LayerNormCache,
};
pub use checkpoint::Checkpoint;
pub use gru::{
    gru_cell_backward, gru_cell_forward, gru_unroll_backward, gru_unroll_forward, hidden_states, GruGrads,
    GruLayer, GruSet, GruStep, GruWeights,
};
pub use loss::{log_softmax, softmax, softmax_xent, XentOutput};
pub use params::{AdamConfig, Grads, ParamId, ParamStore};
pub use tensor::{add_outer, cosine, dot, matvec, vecmat, Tensor2D};
