#include "glformer/graph.hpp"

#include <cmath>

namespace glformer {

namespace {

constexpr double kVarianceFloor = 1e-8;

void validate_thresholds(const std::vector<double>& g) {
    if (g.empty()) throw ConfigError("prune thresholds must be non-empty");
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] < 0.0 || g[i] > 1.0) {
            throw ConfigError("prune threshold " + std::to_string(g[i]) + " outside [0, 1]");
        }
        if (i > 0 && g[i - 1] >= g[i]) {
            throw ConfigError("prune thresholds must be strictly ascending");
        }
    }
}

} // namespace

void EdgeMlpParams::for_each_param(const std::string& prefix, const ParamVisitor& fn) {
    fn(prefix + "/w1", w1);
    fn(prefix + "/b1", b1);
    fn(prefix + "/w2", w2);
    fn(prefix + "/b2", b2);
}

void PruneConfig::for_each_param(const std::string& prefix, const ParamVisitor& fn) {
    fn(prefix + "/phi1", phi1);
    fn(prefix + "/phi2", phi2);
}

void GraphConvParams::for_each_param(const std::string& prefix, const ParamVisitor& fn) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        fn(prefix + "/w" + std::to_string(l), weights[l]);
    }
    mlp.for_each_param(prefix + "/edge_mlp", fn);
    prune.for_each_param(prefix + "/prune", fn);
}

void GraphFormerParams::for_each_param(const std::string& prefix, const ParamVisitor& fn) {
    spatial.for_each_param(prefix + "/spatial", fn);
    temporal.for_each_param(prefix + "/temporal", fn);
}

void GraphFormerParams::bind(Tape& tape) {
    for_each_param("", [&tape](const std::string&, Var& v) { v = tape.leaf(v.value()); });
}

EdgeMlpParams init_edge_mlp(std::size_t hidden, const Rng& rng) {
    if (hidden == 0) throw ConfigError("edge MLP hidden width must be >= 1");
    EdgeMlpParams p;
    p.w1 = init_uniform({hidden, 3}, 3, rng.derive("w1"));
    p.b1 = init_uniform({1, hidden}, 3, rng.derive("b1"));
    p.w2 = init_uniform({1, hidden}, hidden, rng.derive("w2"));
    p.b2 = init_uniform({1, 1}, hidden, rng.derive("b2"));
    return p;
}

PruneConfig init_prune(std::vector<double> thresholds, double lambda, double rho,
                       const Rng& rng) {
    validate_thresholds(thresholds);
    PruneConfig cfg;
    cfg.thresholds = std::move(thresholds);
    cfg.lambda = lambda;
    cfg.rho = rho;
    const std::size_t s = cfg.thresholds.size();
    cfg.phi1 = init_uniform({1, s}, s, rng.derive("phi1"));
    cfg.phi2 = init_uniform({1, s}, s, rng.derive("phi2"));
    return cfg;
}

GraphConvParams init_graph_conv(std::size_t d, std::size_t layers, std::size_t edge_hidden,
                                const std::vector<double>& thresholds, double lambda, double rho,
                                const Rng& rng) {
    GraphConvParams p;
    for (std::size_t l = 0; l < layers; ++l) {
        p.weights.emplace_back(init_uniform({d, d}, d, rng.derive("w" + std::to_string(l))));
    }
    p.mlp = init_edge_mlp(edge_hidden, rng.derive("edge_mlp"));
    p.prune = init_prune(thresholds, lambda, rho, rng.derive("prune"));
    return p;
}

GraphFormerParams init_graphformer(std::size_t d, std::size_t layers, std::size_t edge_hidden,
                                   const std::vector<double>& thresholds, double lambda,
                                   double rho, TemporalGraphMode mode, const Rng& rng) {
    GraphFormerParams p;
    p.spatial =
        init_graph_conv(d, layers, edge_hidden, thresholds, lambda, rho, rng.derive("spatial"));
    p.temporal =
        init_graph_conv(d, layers, edge_hidden, thresholds, lambda, rho, rng.derive("temporal"));
    p.mode = mode;
    return p;
}

Var edge_scores(const Var& r, const EdgeMlpParams& mlp) {
    const Tensor& rv = r.value();
    if (rv.ndim() != 2) {
        throw DimensionError("edge_scores expects M x D node features, got " +
                             shape_str(rv.shape()));
    }
    const std::size_t m = rv.rows();
    if (m == 0) throw EmptyInputError("edge_scores: empty node set");

    // Standardized Euclidean distance: per-dimension variance over the M rows.
    Var mu = mean_rows(r);
    Var centered = add_rowvec(r, mul_scalar(mu, -1.0));
    Var variance = mean_rows(mul(centered, centered));
    Var weights = recip(add_scalar(variance, kVarianceFloor));
    Var euc = sqrt0(weighted_sqdist(r, weights));

    Var cos = cosine_matrix(r);
    Var sec = matmul(r, transpose(r));

    Var feats = stack_cols3(euc, cos, sec); // (M*M) x 3
    Var hidden = relu(add_rowvec(matmul(feats, transpose(mlp.w1)), mlp.b1));
    Var scores = add_rowvec(matmul(hidden, transpose(mlp.w2)), mlp.b2);
    return reshape(scores, {m, m});
}

Var adjacency(const Var& e) {
    const Tensor& ev = e.value();
    if (ev.ndim() != 2 || ev.rows() != ev.cols()) {
        throw DimensionError("adjacency expects a square edge-score matrix, got " +
                             shape_str(ev.shape()));
    }
    return softmax(e, 1);
}

std::vector<Var> adjacency_slices(const Var& a, const PruneConfig& cfg) {
    validate_thresholds(cfg.thresholds);
    const Tensor& av = a.value();
    if (av.ndim() != 2 || av.rows() != av.cols()) {
        throw DimensionError("adjacency_slices expects a square matrix, got " +
                             shape_str(av.shape()));
    }
    const std::size_t m = av.rows();
    const std::size_t s_total = cfg.thresholds.size();

    // Probability matrix P_ij = lambda * A_ij / d_i with d_i = sum_j (A+E)_ij.
    // P only gates which entries survive, so the masks are constants.
    std::vector<double> degree(m);
    for (std::size_t i = 0; i < m; ++i) {
        double d = 1.0; // the identity contribution
        for (std::size_t j = 0; j < m; ++j) d += av.at(i, j);
        degree[i] = d;
    }

    std::vector<Var> slices;
    slices.reserve(s_total);
    slices.emplace_back(Tensor::identity(m));
    for (std::size_t s = 2; s <= s_total; ++s) {
        const double lo = cfg.thresholds[s - 2];
        const double hi = cfg.thresholds[s - 1];
        Tensor mask({m, m});
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (i == j) continue;
                const double p = cfg.lambda * av.at(i, j) / degree[i];
                if (p >= lo && p < hi) mask.at(i, j) = 1.0;
            }
        }
        slices.push_back(mask_mul(a, mask));
    }
    return slices;
}

Tensor adjacency_tensor(const Tensor& a, const PruneConfig& cfg) {
    const std::vector<Var> slices = adjacency_slices(Var(a), cfg);
    const std::size_t m = a.rows();
    Tensor packed({slices.size(), m, m});
    for (std::size_t s = 0; s < slices.size(); ++s) {
        std::copy(slices[s].value().data(), slices[s].value().data() + m * m,
                  packed.data() + s * m * m);
    }
    return packed;
}

std::pair<Var, Var> soft_select(const std::vector<Var>& slices, const PruneConfig& cfg) {
    if (slices.empty()) throw EmptyInputError("soft_select: no adjacency slices");
    const std::size_t s_total = slices.size();
    if (cfg.phi1.value().size() != s_total || cfg.phi2.value().size() != s_total) {
        throw ConfigError("slice-selection logits must have one entry per slice");
    }
    auto combine = [&](const Var& phi) {
        Var w = softmax(phi, 1); // 1 x S, non-negative, sums to 1
        Var q = scale(slice_cols(w, 0, 1), slices[0]);
        for (std::size_t s = 1; s < s_total; ++s) {
            q = add(q, scale(slice_cols(w, s, s + 1), slices[s]));
        }
        return q;
    };
    return {combine(cfg.phi1), combine(cfg.phi2)};
}

Var laplacian_normalize(const Var& y) {
    const Tensor& yv = y.value();
    if (yv.ndim() != 2 || yv.rows() != yv.cols()) {
        throw DimensionError("laplacian_normalize expects a square matrix, got " +
                             shape_str(yv.shape()));
    }
    for (std::size_t i = 0; i < yv.rows(); ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < yv.cols(); ++j) d += yv.at(i, j);
        if (!(d > 0.0)) {
            throw DegenerateGraphError("laplacian_normalize: row " + std::to_string(i) +
                                       " has nonpositive degree " + std::to_string(d));
        }
    }
    Var inv_sqrt_deg = recip(sqrt0(row_sums(y))); // M x 1
    return mul_rowvec(mul_colvec(y, inv_sqrt_deg), transpose(inv_sqrt_deg));
}

Var pruned_adjacency(const Var& r, const EdgeMlpParams& mlp, const PruneConfig& cfg) {
    Var a = adjacency(edge_scores(r, mlp));
    auto [q1, q2] = soft_select(adjacency_slices(a, cfg), cfg);
    Var y = add(matmul(q1, q2), Var(Tensor::identity(r.value().rows())));
    return laplacian_normalize(y);
}

PrunedGraph build_pruned_graph(const Tensor& r, const EdgeMlpParams& mlp,
                               const PruneConfig& cfg) {
    PrunedGraph g;
    g.node_features = transpose(r);
    g.adjacency = adjacency(edge_scores(Var(r), mlp)).value();
    g.slices = adjacency_tensor(g.adjacency, cfg);

    const std::size_t m = g.adjacency.rows();
    g.probabilities = Tensor({m, m});
    for (std::size_t i = 0; i < m; ++i) {
        double degree = 1.0;
        for (std::size_t j = 0; j < m; ++j) degree += g.adjacency.at(i, j);
        for (std::size_t j = 0; j < m; ++j) {
            g.probabilities.at(i, j) = cfg.lambda * g.adjacency.at(i, j) / degree;
        }
    }
    g.normalized = pruned_adjacency(Var(r), mlp, cfg).value();
    return g;
}

Var graph_conv_layer(const Var& h, const Var& w, const EdgeMlpParams& mlp,
                     const PruneConfig& cfg) {
    const Tensor& hv = h.value();
    if (hv.ndim() != 2) {
        throw DimensionError("graph_conv_layer expects D x M node features, got " +
                             shape_str(hv.shape()));
    }
    Var abar = pruned_adjacency(transpose(h), mlp, cfg); // graph over the M columns
    return relu(matmul(matmul(w, h), abar));
}

Var graph_conv_block(const Var& h, const GraphConvParams& p) {
    Var residual = mul_scalar(h, p.prune.rho);
    if (p.weights.empty()) return residual;
    Var conv = h;
    for (const Var& w : p.weights) conv = graph_conv_layer(conv, w, p.mlp, p.prune);
    return add(conv, residual);
}

Var graphformer_forward(const std::vector<TokenFrame>& frames, const GraphFormerParams& p) {
    if (frames.empty()) throw EmptyInputError("graphformer_forward needs at least one frame");
    const std::size_t m = frames[0].tokens.value().rows();
    const std::size_t d = frames[0].tokens.value().cols();

    // Spatial stage: one graph per frame over its M tokens+positions.
    std::vector<Var> inter;
    inter.reserve(frames.size());
    for (const TokenFrame& f : frames) {
        if (f.tokens.value().rows() != m || f.tokens.value().cols() != d) {
            throw DimensionError("inconsistent token shape across frames: " +
                                 shape_str(f.tokens.value().shape()));
        }
        Var h = transpose(add(f.tokens, f.positions)); // D x M
        inter.push_back(graph_conv_block(h, p.spatial));
    }
    const std::size_t n = frames.size();

    if (p.mode == TemporalGraphMode::Full) {
        Var all = n == 1 ? inter[0] : concat_cols(inter); // D x (N*M), frame-major columns
        return transpose(graph_conv_block(all, p.temporal));
    }

    // Temporal stage: one graph per spatial location over its N intermediates.
    std::vector<Var> per_location;
    per_location.reserve(m);
    for (std::size_t loc = 0; loc < m; ++loc) {
        std::vector<Var> cols;
        cols.reserve(n);
        for (const Var& i : inter) cols.push_back(slice_cols(i, loc, loc + 1));
        Var t = n == 1 ? cols[0] : concat_cols(cols); // D x N
        per_location.push_back(graph_conv_block(t, p.temporal));
    }

    std::vector<Var> rows;
    rows.reserve(n);
    for (std::size_t f = 0; f < n; ++f) {
        std::vector<Var> frame_cols;
        frame_cols.reserve(m);
        for (std::size_t loc = 0; loc < m; ++loc) {
            frame_cols.push_back(slice_cols(per_location[loc], f, f + 1));
        }
        Var frame = m == 1 ? frame_cols[0] : concat_cols(frame_cols); // D x M
        rows.push_back(transpose(frame));
    }
    return n == 1 ? rows[0] : concat_rows(rows);
}

} // namespace glformer
