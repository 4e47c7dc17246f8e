#pragma once

#include <utility>
#include <vector>

#include "glformer/attention.hpp"
#include "glformer/blender.hpp"
#include "glformer/graph.hpp"
#include "glformer/tensor.hpp"

// Naive per-element reference implementations, written directly from the
// closed-form definitions with scalar loops. They share only the Tensor
// container with the vectorized library path and exist to cross-check it;
// keep them free of the Var/Tape machinery and of the * kernels' shortcuts
// (no max-subtraction softmax, no matmul reuse inside formulas).
namespace glformer::ref {

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor spatial_mhsa(const Tensor& z, const AttentionParams& p);
Tensor temporal_mhsa(const Tensor& queries, const std::vector<Tensor>& frames,
                     const AttentionParams& p);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
Tensor transformer_sublayer(const Tensor& x, const Tensor& sub_out, const FfnParams& f,
                            double ln_eps);
Tensor transformer_forward(const std::vector<Tensor>& tokens,
                           const std::vector<Tensor>& positions, const TransformerParams& p);

Tensor edge_scores(const Tensor& r, const EdgeMlpParams& mlp);
Tensor adjacency(const Tensor& edge_scores);
Tensor adjacency_tensor(const Tensor& a, const PruneConfig& cfg); // S x M x M
std::pair<Tensor, Tensor> soft_select(const Tensor& packed_slices, const PruneConfig& cfg);
Tensor laplacian_normalize(const Tensor& y);
Tensor pruned_adjacency(const Tensor& r, const EdgeMlpParams& mlp, const PruneConfig& cfg);
Tensor graph_conv_layer(const Tensor& h, const Tensor& w, const EdgeMlpParams& mlp,
                        const PruneConfig& cfg);
Tensor graph_conv_block(const Tensor& h, const GraphConvParams& p);
Tensor graphformer_forward(const std::vector<Tensor>& tokens,
                           const std::vector<Tensor>& positions, const GraphFormerParams& p);

std::pair<Tensor, Tensor> blend_weights(const Tensor& g, const Tensor& l, const Tensor& w_alpha);
Tensor blend(const Tensor& g, const Tensor& l, const Tensor& w_alpha);

} // namespace glformer::ref
