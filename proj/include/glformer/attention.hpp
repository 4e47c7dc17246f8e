#pragma once

#include <functional>
#include <string>
#include <vector>

#include "glformer/rng.hpp"
#include "glformer/tape.hpp"
#include "glformer/tokenizer.hpp"

namespace glformer {

using ParamVisitor = std::function<void(const std::string&, Var&)>;

// Per-head projection weights. For head t: query_proj and key_proj are
// Dv x D, value_proj is Dv x D, and out_proj is D x Dv, with Dv = D / heads.
struct AttentionParams {
    std::vector<Var> out_proj;   // W_t
    std::vector<Var> value_proj; // W'_t
    std::vector<Var> query_proj; // U_t
    std::vector<Var> key_proj;   // V_t

    std::size_t heads() const { return out_proj.size(); }
    void for_each_param(const std::string& prefix, const ParamVisitor& fn);
};

// Two affine layers D -> D_ff -> D with ReLU between, plus the scale/shift
// pairs of both add&norm sites around them.
struct FfnParams {
    Var w1, b1; // D_ff x D, 1 x D_ff
    Var w2, b2; // D x D_ff, 1 x D
    Var ln1_gamma, ln1_beta; // 1 x D
    Var ln2_gamma, ln2_beta; // 1 x D

    void for_each_param(const std::string& prefix, const ParamVisitor& fn);
};

AttentionParams init_attention(std::size_t d, std::size_t heads, const Rng& rng);
FfnParams init_ffn(std::size_t d, std::size_t d_ff, const Rng& rng);

// Multi-head self-attention over the M rows of z (queries == keys == z).
// Row q of the output is sum_t W_t [ sum_k O_tqk * W'_t x_k ] with the
// attention weights O_tqk softmax-normalized over all keys per (t, q).
Var spatial_mhsa(const Var& z, const AttentionParams& p);

// Same weighting with the key set spanning all N*M rows of `frames`;
// normalization runs jointly over frames and keys.
Var temporal_mhsa(const Var& queries, const std::vector<Var>& frames, const AttentionParams& p);

// Attention weight probes: the row-stochastic O matrices per head, computed
// by the same vectorized path (used for normalization invariant checks).
std::vector<Tensor> spatial_attention_weights(const Tensor& z, const AttentionParams& p);
std::vector<Tensor> temporal_attention_weights(const Tensor& queries,
                                               const std::vector<Tensor>& frames,
                                               const AttentionParams& p);

// Post-norm residual scheme: y = LN(x + sub_out); out = LN(y + FFN(y)).
Var transformer_sublayer(const Var& x, const Var& sub_out, const FfnParams& f,
                         double ln_eps = 1e-5);

struct TransformerStageParams {
    AttentionParams attn;
    FfnParams ffn;
};

// One layer = spatial attention block over each frame, then temporal
// attention block across all frames' intermediates.
struct TransformerLayerParams {
    TransformerStageParams spatial;
    TransformerStageParams temporal;
};

struct TransformerParams {
    std::vector<TransformerLayerParams> layers;
    double ln_eps = 1e-5;

    void for_each_param(const std::string& prefix, const ParamVisitor& fn);
    void bind(Tape& tape);
};

TransformerParams init_transformer(std::size_t d, std::size_t heads, std::size_t d_ff,
                                   std::size_t layers, const Rng& rng);

// Global aggregation over a window: per frame, spatial attention on
// tokens+positions followed by add&norm+FFN; then temporal attention across
// all frames' intermediates with its own add&norm+FFN. Output rows are
// concatenated frame-major: (N*M) x D.
Var transformer_forward(const std::vector<TokenFrame>& frames, const TransformerParams& p);

} // namespace glformer
