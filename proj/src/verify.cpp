#include "glformer/verify.hpp"

#include <chrono>
#include <cmath>

#include "../reference/reference.hpp"

namespace glformer {

std::vector<BlockCheck> gradcheck(
    const std::function<void(const ParamVisitor&)>& enumerate_params,
    const std::function<Var()>& forward_loss, const GradCheckOptions& opt) {
    std::vector<std::pair<std::string, Var*>> blocks;
    enumerate_params([&](const std::string& name, Var& v) { blocks.emplace_back(name, &v); });

    // Analytic gradients: one taped forward/backward pass.
    Tape tape;
    for (auto& [name, v] : blocks) *v = tape.leaf(v->value());
    Var loss = forward_loss();
    tape.backward(loss);
    std::vector<Tensor> analytic;
    analytic.reserve(blocks.size());
    for (auto& [name, v] : blocks) analytic.push_back(tape.gradient(*v));
    for (auto& [name, v] : blocks) *v = Var(v->value()); // back to constants

    std::vector<BlockCheck> out;
    out.reserve(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        Var* v = blocks[b].second;
        const Tensor base = v->value();
        Tensor numeric(base.shape());
        for (std::size_t i = 0; i < base.size(); ++i) {
            Tensor probe = base;
            probe[i] = base[i] + opt.h;
            *v = Var(std::move(probe));
            const double fp = forward_loss().value()[0];
            Tensor probe2 = base;
            probe2[i] = base[i] - opt.h;
            *v = Var(std::move(probe2));
            const double fm = forward_loss().value()[0];
            numeric[i] = (fp - fm) / (2.0 * opt.h);
        }
        *v = Var(base);

        const double scale = std::max({1.0, max_abs(analytic[b]), max_abs(numeric)});
        const double rel = max_abs_diff(analytic[b], numeric) / scale;
        out.push_back({blocks[b].first, rel, rel < opt.tol});
    }
    return out;
}

PipelineConfig gradcheck_config(const PipelineConfig& cfg) {
    PipelineConfig g = cfg;
    g.frames = 2;
    g.height = 3;
    g.width = 2; // M = 6
    g.token_dim = 8;
    g.channels = 8;
    g.heads = 2;
    g.ffn_dim = 0; // 4 * D
    validate_config(g);
    return g;
}

namespace {

struct Timed {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

std::vector<TokenFrame> gradcheck_tokens(const PipelineConfig& cfg, const ModelParams& params,
                                         std::uint64_t seed) {
    const Tensor window = synth_sequence(cfg, seed);
    return tokenize_window(split_frames(window), cfg, params);
}

} // namespace

GradCheckReport gradcheck_transformer(const PipelineConfig& cfg, std::uint64_t seed,
                                      const GradCheckOptions& opt) {
    const PipelineConfig g = gradcheck_config(cfg);
    ModelParams params = init_model(g);
    const std::vector<TokenFrame> tokens = gradcheck_tokens(g, params, seed);
    Timed timer;
    GradCheckReport report;
    report.blocks = gradcheck(
        [&](const ParamVisitor& fn) { params.transformer.for_each_param("transformer", fn); },
        [&] { return sum(transformer_forward(tokens, params.transformer)); }, opt);
    report.seconds = timer.seconds();
    return report;
}

GradCheckReport gradcheck_graphformer(const PipelineConfig& cfg, std::uint64_t seed,
                                      const GradCheckOptions& opt) {
    const PipelineConfig g = gradcheck_config(cfg);
    ModelParams params = init_model(g);
    const std::vector<TokenFrame> tokens = gradcheck_tokens(g, params, seed);
    Timed timer;
    GradCheckReport report;
    report.blocks = gradcheck(
        [&](const ParamVisitor& fn) { params.graphformer.for_each_param("graphformer", fn); },
        [&] { return sum(graphformer_forward(tokens, params.graphformer)); }, opt);
    report.seconds = timer.seconds();
    return report;
}

GradCheckReport gradcheck_blender(const PipelineConfig& cfg, std::uint64_t seed,
                                  const GradCheckOptions& opt) {
    const PipelineConfig g = gradcheck_config(cfg);
    ModelParams params = init_model(g);
    Rng rng = Rng(seed).derive("gradcheck/blender");
    const std::size_t cols = g.frames * g.tokens_per_frame();
    Tensor gm({g.token_dim, cols}), lm({g.token_dim, cols});
    for (std::size_t i = 0; i < gm.size(); ++i) gm[i] = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < lm.size(); ++i) lm[i] = rng.uniform(-1.0, 1.0);
    const Var gv(gm), lv(lm);
    Timed timer;
    GradCheckReport report;
    report.blocks = gradcheck(
        [&](const ParamVisitor& fn) { params.blender.for_each_param("blender", fn); },
        [&] { return sum(blend(gv, lv, params.blender.w_alpha)); }, opt);
    report.seconds = timer.seconds();
    return report;
}

GradCheckReport gradcheck_pipeline(const PipelineConfig& cfg, std::uint64_t seed,
                                   const GradCheckOptions& opt) {
    const PipelineConfig g = gradcheck_config(cfg);
    ModelParams params = init_model(g);
    const std::vector<TokenFrame> tokens = gradcheck_tokens(g, params, seed);
    Timed timer;
    GradCheckReport report;
    report.blocks = gradcheck(
        [&](const ParamVisitor& fn) { params.for_each_param(fn); },
        [&] { return sum(pipeline_blended(tokens, params)); }, opt);
    report.seconds = timer.seconds();
    return report;
}

namespace {

KernelCheck make_check(std::string name, double diff, double tol) {
    return {std::move(name), diff, tol, diff < tol};
}

} // namespace

std::vector<KernelCheck> oracle_compare(const PipelineConfig& cfg, std::uint64_t seed,
                                        bool inject_fault) {
    validate_config(cfg);
    ModelParams params = init_model(cfg);

    // The reference side captures the pristine parameters; the fault hook
    // perturbs one attention weight on the vectorized side afterwards.
    ModelParams vec_params = params;
    if (inject_fault) {
        Tensor w = vec_params.transformer.layers[0].spatial.attn.query_proj[0].value();
        w[0] += 1e-3;
        vec_params.transformer.layers[0].spatial.attn.query_proj[0] = Var(std::move(w));
    }

    const Tensor window = synth_sequence(cfg, seed);
    const std::vector<TokenFrame> tokens = tokenize_window(split_frames(window), cfg, params);
    const std::size_t d = cfg.token_dim;
    const std::size_t nm = cfg.frames * cfg.tokens_per_frame();

    std::vector<Tensor> z; // token+position sums per frame
    z.reserve(tokens.size());
    for (const TokenFrame& t : tokens) z.push_back(add(t.tokens.value(), t.positions.value()));
    std::vector<Tensor> positions;
    std::vector<Tensor> raw_tokens;
    for (const TokenFrame& t : tokens) {
        positions.push_back(t.positions.value());
        raw_tokens.push_back(t.tokens.value());
    }

    std::vector<KernelCheck> checks;

    {
        Rng rng = Rng(seed).derive("oracle/matmul");
        Tensor a({5, 7}), b({7, 3});
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(-1.0, 1.0);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = rng.uniform(-1.0, 1.0);
        checks.push_back(make_check("matmul", max_abs_diff(matmul(a, b), ref::matmul(a, b)),
                                    1e-14));
    }

    const auto& vec_attn = vec_params.transformer.layers[0];
    const auto& ref_attn = params.transformer.layers[0];
    checks.push_back(make_check("spatial_mhsa",
                                max_abs_diff(spatial_mhsa(Var(z[0]), vec_attn.spatial.attn).value(),
                                             ref::spatial_mhsa(z[0], ref_attn.spatial.attn)),
                                1e-10));
    {
        std::vector<Var> frame_vars(z.begin(), z.end());
        checks.push_back(
            make_check("temporal_mhsa",
                       max_abs_diff(temporal_mhsa(Var(z[0]), frame_vars, vec_attn.temporal.attn)
                                        .value(),
                                    ref::temporal_mhsa(z[0], z, ref_attn.temporal.attn)),
                       1e-10));
    }
    {
        Rng rng = Rng(seed).derive("oracle/sublayer");
        Tensor sub(z[0].shape());
        for (std::size_t i = 0; i < sub.size(); ++i) sub[i] = rng.uniform(-1.0, 1.0);
        checks.push_back(make_check(
            "transformer_sublayer",
            max_abs_diff(
                transformer_sublayer(Var(z[0]), Var(sub), vec_attn.spatial.ffn, cfg.ln_eps)
                    .value(),
                ref::transformer_sublayer(z[0], sub, ref_attn.spatial.ffn, cfg.ln_eps)),
            1e-10));
    }
    checks.push_back(make_check(
        "transformer_forward",
        max_abs_diff(transformer_forward(tokens, vec_params.transformer).value(),
                     ref::transformer_forward(raw_tokens, positions, params.transformer)),
        1e-9));

    const auto& graph = params.graphformer;
    checks.push_back(make_check(
        "edge_scores",
        max_abs_diff(edge_scores(Var(z[0]), graph.spatial.mlp).value(),
                     ref::edge_scores(z[0], graph.spatial.mlp)),
        1e-12));

    const Tensor escores = edge_scores(Var(z[0]), graph.spatial.mlp).value();
    checks.push_back(make_check(
        "adjacency", max_abs_diff(adjacency(Var(escores)).value(), ref::adjacency(escores)),
        1e-12));

    const Tensor adj = adjacency(Var(escores)).value();
    checks.push_back(make_check(
        "adjacency_tensor",
        max_abs_diff(adjacency_tensor(adj, graph.spatial.prune),
                     ref::adjacency_tensor(adj, graph.spatial.prune)),
        1e-15));

    {
        const auto slices = adjacency_slices(Var(adj), graph.spatial.prune);
        const auto [q1, q2] = soft_select(slices, graph.spatial.prune);
        const auto [r1, r2] = ref::soft_select(ref::adjacency_tensor(adj, graph.spatial.prune),
                                               graph.spatial.prune);
        const double diff =
            std::max(max_abs_diff(q1.value(), r1), max_abs_diff(q2.value(), r2));
        checks.push_back(make_check("soft_select", diff, 1e-12));

        Tensor y = add(matmul(q1.value(), q2.value()), Tensor::identity(adj.rows()));
        checks.push_back(make_check(
            "laplacian_normalize",
            max_abs_diff(laplacian_normalize(Var(y)).value(), ref::laplacian_normalize(y)),
            1e-12));
    }

    checks.push_back(make_check(
        "pruned_adjacency",
        max_abs_diff(pruned_adjacency(Var(z[0]), graph.spatial.mlp, graph.spatial.prune).value(),
                     ref::pruned_adjacency(z[0], graph.spatial.mlp, graph.spatial.prune)),
        1e-12));

    {
        const Tensor h = transpose(z[0]);
        const Tensor w = graph.spatial.weights.empty()
                             ? Tensor::identity(d)
                             : graph.spatial.weights[0].value();
        checks.push_back(make_check(
            "graph_conv_layer",
            max_abs_diff(
                graph_conv_layer(Var(h), Var(w), graph.spatial.mlp, graph.spatial.prune).value(),
                ref::graph_conv_layer(h, w, graph.spatial.mlp, graph.spatial.prune)),
            1e-10));
        checks.push_back(make_check(
            "graph_conv_block",
            max_abs_diff(graph_conv_block(Var(h), graph.spatial).value(),
                         ref::graph_conv_block(h, graph.spatial)),
            1e-10));
    }

    checks.push_back(make_check(
        "graphformer_forward",
        max_abs_diff(graphformer_forward(tokens, params.graphformer).value(),
                     ref::graphformer_forward(raw_tokens, positions, params.graphformer)),
        1e-9));

    {
        Rng rng = Rng(seed).derive("oracle/blend");
        Tensor gm({d, nm}), lm({d, nm});
        for (std::size_t i = 0; i < gm.size(); ++i) gm[i] = rng.uniform(-1.0, 1.0);
        for (std::size_t i = 0; i < lm.size(); ++i) lm[i] = rng.uniform(-1.0, 1.0);
        const Tensor wa = params.blender.w_alpha.value();
        const auto [agf, alf] = blend_weights(Var(gm), Var(lm), Var(wa));
        const auto [rgf, rlf] = ref::blend_weights(gm, lm, wa);
        checks.push_back(make_check(
            "blend_weights",
            std::max(max_abs_diff(agf.value(), rgf), max_abs_diff(alf.value(), rlf)), 1e-12));
        checks.push_back(make_check(
            "blend",
            max_abs_diff(blend(Var(gm), Var(lm), Var(wa)).value(), ref::blend(gm, lm, wa)),
            1e-12));
    }

    return checks;
}

} // namespace glformer
