#pragma once

#include <utility>
#include <vector>

#include "glformer/attention.hpp" // ParamVisitor
#include "glformer/rng.hpp"
#include "glformer/tape.hpp"
#include "glformer/tokenizer.hpp"

namespace glformer {

// Two affine layers 3 -> hidden -> 1 with ReLU between; maps the three
// pairwise similarity scalars (standardized Euclidean distance, cosine
// similarity, semantic similarity) to an edge score.
struct EdgeMlpParams {
    Var w1, b1; // hidden x 3, 1 x hidden
    Var w2, b2; // 1 x hidden, 1 x 1

    void for_each_param(const std::string& prefix, const ParamVisitor& fn);
};

// Graph pruning configuration: ascending thresholds over the probability
// matrix, the probability weight lambda, the slice-selection logits of the
// two 1x1 convolutions, and the block residual constant rho.
struct PruneConfig {
    std::vector<double> thresholds = {0.1, 0.3, 1.0};
    double lambda = 0.3;
    Var phi1, phi2; // 1 x S logits
    double rho = 0.5;

    void for_each_param(const std::string& prefix, const ParamVisitor& fn);
};

// One dynamic graph-convolution block: L layer weights (D x D) plus the edge
// MLP and prune configuration shared by every layer's graph re-computation.
struct GraphConvParams {
    std::vector<Var> weights;
    EdgeMlpParams mlp;
    PruneConfig prune;

    void for_each_param(const std::string& prefix, const ParamVisitor& fn);
};

enum class TemporalGraphMode { PerLocation, Full };

struct GraphFormerParams {
    GraphConvParams spatial;
    GraphConvParams temporal;
    TemporalGraphMode mode = TemporalGraphMode::PerLocation;

    void for_each_param(const std::string& prefix, const ParamVisitor& fn);
    void bind(Tape& tape);
};

EdgeMlpParams init_edge_mlp(std::size_t hidden, const Rng& rng);
PruneConfig init_prune(std::vector<double> thresholds, double lambda, double rho, const Rng& rng);
GraphConvParams init_graph_conv(std::size_t d, std::size_t layers, std::size_t edge_hidden,
                                const std::vector<double>& thresholds, double lambda, double rho,
                                const Rng& rng);
GraphFormerParams init_graphformer(std::size_t d, std::size_t layers, std::size_t edge_hidden,
                                   const std::vector<double>& thresholds, double lambda,
                                   double rho, TemporalGraphMode mode, const Rng& rng);

// Pairwise edge scores over the M rows of R. The Euclidean distance is
// standardized per dimension by the variance over the M rows (+1e-8); cosine
// similarity is 0 when either norm is below 1e-12; semantic similarity is the
// raw dot product.
Var edge_scores(const Var& r, const EdgeMlpParams& mlp);

// Row-wise softmax of the edge scores: the row-stochastic adjacency matrix.
Var adjacency(const Var& edge_scores);

// Threshold partition of A: slice 1 is the identity; slice s >= 2 keeps
// A_ij iff theta_{s-1} <= P_ij < theta_s and i != j, where
// P_ij = lambda * A_ij / d_i and d_i = sum_j (A + E)_ij.
std::vector<Var> adjacency_slices(const Var& a, const PruneConfig& cfg);

// Packed S x M x M view of the slices.
Tensor adjacency_tensor(const Tensor& a, const PruneConfig& cfg);

// Convex combinations of the slices with softmax(phi) weights.
std::pair<Var, Var> soft_select(const std::vector<Var>& slices, const PruneConfig& cfg);

// psi(Y) = D^{-1/2} Y D^{-1/2} with D = diag(row sums of Y).
Var laplacian_normalize(const Var& y);

// Composition: edge_scores -> adjacency -> slices -> soft_select ->
// psi(Q1 Q2 + E).
Var pruned_adjacency(const Var& r, const EdgeMlpParams& mlp, const PruneConfig& cfg);

// Diagnostic bundle of every stage of the pruning chain for one node set.
struct PrunedGraph {
    Tensor node_features; // H: D x M (columns are nodes)
    Tensor adjacency;     // A: M x M, row-stochastic
    Tensor slices;        // S x M x M threshold partition (slice 1 = E)
    Tensor probabilities; // P_ij = lambda * A_ij / d_i
    Tensor normalized;    // Abar = psi(Q1 Q2 + E)
};

PrunedGraph build_pruned_graph(const Tensor& r, const EdgeMlpParams& mlp,
                               const PruneConfig& cfg);

// One dynamic graph convolution layer: rebuilds the pruned adjacency from the
// current node features (columns of H) and applies ReLU(W * H * Abar).
Var graph_conv_layer(const Var& h, const Var& w, const EdgeMlpParams& mlp,
                     const PruneConfig& cfg);

// Residual block: layer chain plus rho * H. With zero layers only the
// residual path remains.
Var graph_conv_block(const Var& h, const GraphConvParams& p);

// Local aggregation over a window: per frame, a graph block over the M
// tokens+positions; then, per spatial location, a graph block over the N
// intermediate features across frames (or one graph over all N*M tokens in
// Full mode). Output rows are concatenated frame-major: (N*M) x D.
Var graphformer_forward(const std::vector<TokenFrame>& frames, const GraphFormerParams& p);

} // namespace glformer
