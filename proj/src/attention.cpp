#include "glformer/attention.hpp"

#include <cmath>

namespace glformer {

namespace {

// Head geometry must satisfy Dv * T = D.
void validate_attention(std::size_t d, const AttentionParams& p) {
    const std::size_t t = p.heads();
    if (t == 0 || p.value_proj.size() != t || p.query_proj.size() != t ||
        p.key_proj.size() != t) {
        throw ConfigError("attention params must hold the same number of projections per head");
    }
    const std::size_t dv = p.query_proj[0].value().rows();
    if (dv * t != d) {
        throw ConfigError("feature dimension " + std::to_string(d) +
                          " is not divisible into " + std::to_string(t) + " heads of width " +
                          std::to_string(dv));
    }
    for (std::size_t i = 0; i < t; ++i) {
        if (p.query_proj[i].value().shape() != std::vector<std::size_t>{dv, d} ||
            p.key_proj[i].value().shape() != std::vector<std::size_t>{dv, d} ||
            p.value_proj[i].value().shape() != std::vector<std::size_t>{dv, d} ||
            p.out_proj[i].value().shape() != std::vector<std::size_t>{d, dv}) {
            throw ConfigError("attention projection shapes inconsistent at head " +
                              std::to_string(i));
        }
    }
}

// Shared core: queries M x D against an arbitrary key set K x D.
Var mhsa(const Var& queries, const Var& keys, const AttentionParams& p) {
    const std::size_t d = queries.value().cols();
    if (keys.value().cols() != d) {
        throw DimensionError("attention key width " + std::to_string(keys.value().cols()) +
                             " does not match query width " + std::to_string(d));
    }
    validate_attention(d, p);
    const std::size_t dv = d / p.heads();
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dv));

    Var out;
    for (std::size_t t = 0; t < p.heads(); ++t) {
        Var q = matmul(queries, transpose(p.query_proj[t])); // M x Dv
        Var k = matmul(keys, transpose(p.key_proj[t]));      // K x Dv
        Var logits = mul_scalar(matmul(q, transpose(k)), inv_scale);
        Var weights = softmax(logits, 1); // rows sum to 1 over all keys
        Var values = matmul(keys, transpose(p.value_proj[t])); // K x Dv
        Var head = matmul(matmul(weights, values), transpose(p.out_proj[t]));
        out = (t == 0) ? head : add(out, head);
    }
    return out;
}

std::vector<Tensor> mhsa_weights(const Tensor& queries, const Tensor& keys,
                                 const AttentionParams& p) {
    const std::size_t d = queries.cols();
    validate_attention(d, p);
    const std::size_t dv = d / p.heads();
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dv));
    std::vector<Tensor> per_head;
    per_head.reserve(p.heads());
    for (std::size_t t = 0; t < p.heads(); ++t) {
        Tensor q = matmul(queries, transpose(p.query_proj[t].value()));
        Tensor k = matmul(keys, transpose(p.key_proj[t].value()));
        per_head.push_back(softmax(mul_scalar(matmul(q, transpose(k)), inv_scale), 1));
    }
    return per_head;
}

Var concat_key_set(const std::vector<Var>& frames) {
    if (frames.empty()) throw EmptyInputError("attention needs at least one frame");
    const std::size_t m = frames[0].value().rows();
    const std::size_t d = frames[0].value().cols();
    for (const Var& f : frames) {
        if (f.value().ndim() != 2 || f.value().rows() != m || f.value().cols() != d) {
            throw DimensionError("temporal attention frames must share M x D, got " +
                                 shape_str(f.value().shape()) + " vs " +
                                 shape_str(frames[0].value().shape()));
        }
    }
    return frames.size() == 1 ? frames[0] : concat_rows(frames);
}

} // namespace

void AttentionParams::for_each_param(const std::string& prefix, const ParamVisitor& fn) {
    for (std::size_t t = 0; t < out_proj.size(); ++t) {
        const std::string h = prefix + "/h" + std::to_string(t);
        fn(h + "/q", query_proj[t]);
        fn(h + "/k", key_proj[t]);
        fn(h + "/v", value_proj[t]);
        fn(h + "/o", out_proj[t]);
    }
}

void FfnParams::for_each_param(const std::string& prefix, const ParamVisitor& fn) {
    fn(prefix + "/w1", w1);
    fn(prefix + "/b1", b1);
    fn(prefix + "/w2", w2);
    fn(prefix + "/b2", b2);
    fn(prefix + "/ln1_gamma", ln1_gamma);
    fn(prefix + "/ln1_beta", ln1_beta);
    fn(prefix + "/ln2_gamma", ln2_gamma);
    fn(prefix + "/ln2_beta", ln2_beta);
}

AttentionParams init_attention(std::size_t d, std::size_t heads, const Rng& rng) {
    if (heads == 0 || d % heads != 0) {
        throw ConfigError("feature dimension " + std::to_string(d) +
                          " must be divisible by the head count " + std::to_string(heads));
    }
    const std::size_t dv = d / heads;
    AttentionParams p;
    for (std::size_t t = 0; t < heads; ++t) {
        const std::string h = "h" + std::to_string(t);
        p.query_proj.emplace_back(init_uniform({dv, d}, d, rng.derive(h + "/q")));
        p.key_proj.emplace_back(init_uniform({dv, d}, d, rng.derive(h + "/k")));
        p.value_proj.emplace_back(init_uniform({dv, d}, d, rng.derive(h + "/v")));
        p.out_proj.emplace_back(init_uniform({d, dv}, dv, rng.derive(h + "/o")));
    }
    return p;
}

FfnParams init_ffn(std::size_t d, std::size_t d_ff, const Rng& rng) {
    if (d_ff < d) {
        throw ConfigError("feed-forward width " + std::to_string(d_ff) +
                          " must be at least the feature dimension " + std::to_string(d));
    }
    FfnParams f;
    f.w1 = init_uniform({d_ff, d}, d, rng.derive("w1"));
    f.b1 = init_uniform({1, d_ff}, d, rng.derive("b1"));
    f.w2 = init_uniform({d, d_ff}, d_ff, rng.derive("w2"));
    f.b2 = init_uniform({1, d}, d_ff, rng.derive("b2"));
    f.ln1_gamma = Tensor::full({1, d}, 1.0);
    f.ln1_beta = Tensor({1, d});
    f.ln2_gamma = Tensor::full({1, d}, 1.0);
    f.ln2_beta = Tensor({1, d});
    return f;
}

Var spatial_mhsa(const Var& z, const AttentionParams& p) {
    if (z.value().ndim() != 2 || z.value().rows() == 0) {
        throw DimensionError("spatial attention expects non-empty M x D input, got " +
                             shape_str(z.value().shape()));
    }
    return mhsa(z, z, p);
}

Var temporal_mhsa(const Var& queries, const std::vector<Var>& frames, const AttentionParams& p) {
    return mhsa(queries, concat_key_set(frames), p);
}

std::vector<Tensor> spatial_attention_weights(const Tensor& z, const AttentionParams& p) {
    return mhsa_weights(z, z, p);
}

std::vector<Tensor> temporal_attention_weights(const Tensor& queries,
                                               const std::vector<Tensor>& frames,
                                               const AttentionParams& p) {
    if (frames.empty()) throw EmptyInputError("attention needs at least one frame");
    if (frames.size() == 1) return mhsa_weights(queries, frames[0], p);
    std::vector<Var> parts(frames.begin(), frames.end());
    return mhsa_weights(queries, concat_rows(parts).value(), p);
}

Var transformer_sublayer(const Var& x, const Var& sub_out, const FfnParams& f, double ln_eps) {
    Var y = layer_norm(add(x, sub_out), f.ln1_gamma, f.ln1_beta, ln_eps);
    Var hidden = relu(add_rowvec(matmul(y, transpose(f.w1)), f.b1));
    Var ffn_out = add_rowvec(matmul(hidden, transpose(f.w2)), f.b2);
    return layer_norm(add(y, ffn_out), f.ln2_gamma, f.ln2_beta, ln_eps);
}

void TransformerParams::for_each_param(const std::string& prefix, const ParamVisitor& fn) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string lp = prefix + "/layer" + std::to_string(l);
        layers[l].spatial.attn.for_each_param(lp + "/spatial/attn", fn);
        layers[l].spatial.ffn.for_each_param(lp + "/spatial/ffn", fn);
        layers[l].temporal.attn.for_each_param(lp + "/temporal/attn", fn);
        layers[l].temporal.ffn.for_each_param(lp + "/temporal/ffn", fn);
    }
}

void TransformerParams::bind(Tape& tape) {
    for_each_param("", [&tape](const std::string&, Var& v) { v = tape.leaf(v.value()); });
}

TransformerParams init_transformer(std::size_t d, std::size_t heads, std::size_t d_ff,
                                   std::size_t layers, const Rng& rng) {
    TransformerParams p;
    for (std::size_t l = 0; l < layers; ++l) {
        const Rng lr = rng.derive("layer" + std::to_string(l));
        TransformerLayerParams layer;
        layer.spatial.attn = init_attention(d, heads, lr.derive("spatial/attn"));
        layer.spatial.ffn = init_ffn(d, d_ff, lr.derive("spatial/ffn"));
        layer.temporal.attn = init_attention(d, heads, lr.derive("temporal/attn"));
        layer.temporal.ffn = init_ffn(d, d_ff, lr.derive("temporal/ffn"));
        p.layers.push_back(std::move(layer));
    }
    return p;
}

Var transformer_forward(const std::vector<TokenFrame>& frames, const TransformerParams& p) {
    if (frames.empty()) throw EmptyInputError("transformer_forward needs at least one frame");
    if (p.layers.empty()) throw ConfigError("transformer needs at least one layer");
    const std::size_t m = frames[0].tokens.value().rows();
    std::vector<Var> state;
    state.reserve(frames.size());
    for (const TokenFrame& f : frames) {
        if (f.tokens.value().rows() != m) {
            throw DimensionError("inconsistent token count across frames: " +
                                 std::to_string(f.tokens.value().rows()) + " vs " +
                                 std::to_string(m));
        }
        state.push_back(add(f.tokens, f.positions));
    }

    for (const TransformerLayerParams& layer : p.layers) {
        std::vector<Var> inter;
        inter.reserve(state.size());
        for (const Var& z : state) {
            Var attn = spatial_mhsa(z, layer.spatial.attn);
            inter.push_back(transformer_sublayer(z, attn, layer.spatial.ffn, p.ln_eps));
        }
        std::vector<Var> out;
        out.reserve(state.size());
        for (const Var& z : inter) {
            Var attn = temporal_mhsa(z, inter, layer.temporal.attn);
            out.push_back(transformer_sublayer(z, attn, layer.temporal.ffn, p.ln_eps));
        }
        state = std::move(out);
    }
    return state.size() == 1 ? state[0] : concat_rows(state);
}

} // namespace glformer
