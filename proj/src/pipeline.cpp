#include "glformer/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <sstream>

#include <json.hpp>

namespace glformer {

void ModelParams::for_each_param(const ParamVisitor& fn) {
    if (token_proj) fn("params/token_proj", *token_proj);
    transformer.for_each_param("params/transformer", fn);
    graphformer.for_each_param("params/graphformer", fn);
    blender.for_each_param("params/blender", fn);
}

void ModelParams::bind(Tape& tape) {
    for_each_param([&tape](const std::string&, Var& v) { v = tape.leaf(v.value()); });
}

ModelParams init_model(const PipelineConfig& cfg) {
    validate_config(cfg);
    const Rng root(cfg.seed);
    const Rng params = root.derive("params");
    ModelParams m;
    m.transformer = init_transformer(cfg.token_dim, cfg.heads, cfg.ffn_width(),
                                     cfg.transformer_layers, params.derive("transformer"));
    m.transformer.ln_eps = cfg.ln_eps;
    m.graphformer = init_graphformer(cfg.token_dim, cfg.graph_conv_layers, cfg.edge_hidden,
                                     cfg.prune_thresholds, cfg.prune_lambda, cfg.residual,
                                     cfg.temporal_mode, params.derive("graphformer"));
    m.blender = init_blender(cfg.token_dim, params.derive("blender"));
    if (cfg.channels != cfg.token_dim) {
        m.token_proj = init_uniform({cfg.channels, cfg.token_dim}, cfg.channels,
                                    params.derive("token_proj"));
    }
    return m;
}

Tensor synth_sequence(const PipelineConfig& cfg, std::uint64_t seed) {
    validate_config(cfg);
    const std::size_t n = cfg.frames, c = cfg.channels, h = cfg.height, w = cfg.width;
    const Rng root(seed);
    Rng blob = root.derive("synth/blob");
    const auto y0 = static_cast<double>(blob.next() % h);
    const auto x0 = static_cast<double>(blob.next() % w);
    std::vector<double> channel_amp(c);
    for (std::size_t i = 0; i < c; ++i) channel_amp[i] = blob.uniform(0.5, 1.0);
    const double sigma = std::max(0.75, static_cast<double>(std::min(h, w)) / 4.0);
    const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);

    auto wrap = [](double v, double period) {
        double r = std::fmod(v, period);
        if (r < 0.0) r += period;
        return r;
    };

    Rng noise = root.derive("synth/noise");
    Tensor window({n, c, h, w});
    for (std::size_t f = 0; f < n; ++f) {
        const double fd = static_cast<double>(f);
        const double cy = wrap(y0 + cfg.blob_velocity[0] * fd, static_cast<double>(h));
        const double cx = wrap(x0 + cfg.blob_velocity[1] * fd, static_cast<double>(w));
        for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    // Toroidal distance keeps the blob in-frame for any N.
                    double dy = std::abs(static_cast<double>(y) - cy);
                    dy = std::min(dy, static_cast<double>(h) - dy);
                    double dx = std::abs(static_cast<double>(x) - cx);
                    dx = std::min(dx, static_cast<double>(w) - dx);
                    const double bump = std::exp(-(dy * dy + dx * dx) * inv_two_sigma2);
                    window[((f * c + ch) * h + y) * w + x] =
                        cfg.blob_amplitude * channel_amp[ch] * bump +
                        cfg.noise_scale * noise.uniform(-1.0, 1.0);
                }
            }
        }
    }
    return window;
}

std::pair<std::size_t, std::size_t> synth_blob_center(const PipelineConfig& cfg,
                                                      std::uint64_t seed, std::size_t frame) {
    Rng blob = Rng(seed).derive("synth/blob");
    const auto y0 = static_cast<double>(blob.next() % cfg.height);
    const auto x0 = static_cast<double>(blob.next() % cfg.width);
    const double fd = static_cast<double>(frame);
    auto wrap = [](double v, double period) {
        double r = std::fmod(v, period);
        if (r < 0.0) r += period;
        return r;
    };
    const double cy = wrap(y0 + cfg.blob_velocity[0] * fd, static_cast<double>(cfg.height));
    const double cx = wrap(x0 + cfg.blob_velocity[1] * fd, static_cast<double>(cfg.width));
    return {static_cast<std::size_t>(std::llround(cy)) % cfg.height,
            static_cast<std::size_t>(std::llround(cx)) % cfg.width};
}

bool RunReport::invariants_pass() const {
    for (const auto& [name, ok] : invariants) {
        if (!ok) return false;
    }
    return true;
}

std::string RunReport::to_json() const {
    nlohmann::ordered_json j;
    auto& timings = j["stage_timings_ms"];
    for (const auto& [name, ms] : stage_timings_ms) timings[name] = ms;
    auto& inv = j["invariants"];
    for (const auto& [name, ok] : invariants) inv[name] = ok;
    auto& sums = j["checksums"];
    for (const auto& [name, sum] : checksums) sums[name] = sum;
    if (!outputs.empty()) {
        auto& out = j["outputs"];
        for (const auto& [name, path] : outputs) out[name] = path;
    }
    return j.dump(2);
}

std::vector<Var> split_frames(const Tensor& window) {
    if (window.ndim() != 4) {
        throw DimensionError("frame window must be [N, c, h, w], got " +
                             shape_str(window.shape()));
    }
    const std::size_t n = window.dim(0);
    const std::size_t per = window.size() / std::max<std::size_t>(n, 1);
    std::vector<Var> frames;
    frames.reserve(n);
    for (std::size_t f = 0; f < n; ++f) {
        Tensor frame({window.dim(1), window.dim(2), window.dim(3)});
        std::copy(window.data() + f * per, window.data() + (f + 1) * per, frame.data());
        frames.emplace_back(std::move(frame));
    }
    return frames;
}

std::vector<TokenFrame> tokenize_window(const std::vector<Var>& frames,
                                        const PipelineConfig& cfg, const ModelParams& params) {
    if (frames.empty()) throw EmptyInputError("tokenize_window: no frames");
    const Var positions(positional_encoding(cfg.height, cfg.width, cfg.token_dim));
    std::vector<TokenFrame> tokens;
    tokens.reserve(frames.size());
    for (const Var& frame : frames) {
        if (frame.value().shape() !=
            std::vector<std::size_t>{cfg.channels, cfg.height, cfg.width}) {
            throw DimensionError("frame shape " + shape_str(frame.value().shape()) +
                                 " does not match config [c, h, w]");
        }
        Var tok = params.token_proj ? tokenize(frame, *params.token_proj) : tokenize(frame);
        tokens.push_back(TokenFrame{tok, positions});
    }
    return tokens;
}

Var pipeline_blended(const std::vector<TokenFrame>& tokens, const ModelParams& params) {
    Var global_rows = transformer_forward(tokens, params.transformer); // (N*M) x D
    Var local_rows = graphformer_forward(tokens, params.graphformer);  // (N*M) x D
    return blend(transpose(global_rows), transpose(local_rows), params.blender.w_alpha);
}

std::string checksum(const Tensor& t) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
    for (std::size_t i = 0; i < t.size() * sizeof(double); ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << "0x" << std::hex << h;
    return os.str();
}

namespace {

double tolerance_breach(const Tensor& row_sums_minus_one) {
    double worst = 0.0;
    for (std::size_t i = 0; i < row_sums_minus_one.size(); ++i) {
        worst = std::max(worst, std::abs(row_sums_minus_one[i]));
    }
    return worst;
}

// Worst |row sum - 1| across the per-head attention weight matrices.
double attention_normalization_gap(const std::vector<Tensor>& weights) {
    double worst = 0.0;
    for (const Tensor& w : weights) {
        Tensor sums = row_sums(w);
        worst = std::max(worst, tolerance_breach(add_scalar(sums, -1.0)));
    }
    return worst;
}

} // namespace

PipelineResult run_pipeline(const Tensor& window, const PipelineConfig& cfg,
                            const ModelParams& params) {
    validate_config(cfg);
    using clock = std::chrono::steady_clock;
    auto ms_since = [](clock::time_point start) {
        return std::chrono::duration<double, std::milli>(clock::now() - start).count();
    };

    PipelineResult result;
    RunReport& report = result.report;

    auto stage = [&](const char* name, auto&& fn) {
        const auto start = clock::now();
        try {
            fn();
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string("stage ") + name + ": " + e.what());
        }
        report.stage_timings_ms.emplace_back(name, ms_since(start));
    };

    std::vector<TokenFrame> tokens;
    stage("tokenize", [&] {
        const std::vector<Var> frames = split_frames(window);
        if (frames.size() != cfg.frames) {
            throw DimensionError("window holds " + std::to_string(frames.size()) +
                                 " frames, config expects N = " + std::to_string(cfg.frames));
        }
        tokens = tokenize_window(frames, cfg, params);
    });

    Var global_rows, local_rows, blended;
    stage("transformer", [&] { global_rows = transformer_forward(tokens, params.transformer); });
    stage("graphformer", [&] { local_rows = graphformer_forward(tokens, params.graphformer); });
    stage("blender", [&] {
        blended = blend(transpose(global_rows), transpose(local_rows), params.blender.w_alpha);
    });
    result.blended = blended.value();

    // Invariant probes (first frame / first layer; cheap at desk scale).
    const Tensor z0 = add(tokens[0].tokens.value(), tokens[0].positions.value());
    const auto& layer0 = params.transformer.layers.front();
    double attn_gap = attention_normalization_gap(spatial_attention_weights(z0, layer0.spatial.attn));
    {
        std::vector<Tensor> all_z;
        for (const TokenFrame& t : tokens) {
            all_z.push_back(add(t.tokens.value(), t.positions.value()));
        }
        attn_gap = std::max(attn_gap, attention_normalization_gap(temporal_attention_weights(
                                          all_z[0], all_z, layer0.temporal.attn)));
    }
    report.invariants.emplace_back("attention_rows_normalized", attn_gap < 1e-12);

    const Tensor adj =
        adjacency(edge_scores(Var(z0), params.graphformer.spatial.mlp)).value();
    report.invariants.emplace_back(
        "adjacency_row_stochastic",
        tolerance_breach(add_scalar(row_sums(adj), -1.0)) < 1e-12);

    const Tensor abar =
        pruned_adjacency(Var(z0), params.graphformer.spatial.mlp, params.graphformer.spatial.prune)
            .value();
    bool abar_nonneg = true;
    for (std::size_t i = 0; i < abar.size(); ++i) abar_nonneg = abar_nonneg && abar[i] >= 0.0;
    report.invariants.emplace_back("pruned_adjacency_nonnegative", abar_nonneg);

    {
        const Var g = transpose(global_rows);
        const Var l = transpose(local_rows);
        auto [agf, alf] = blend_weights(g, l, params.blender.w_alpha);
        double sum_gap = 0.0;
        bool bounds_ok = true;
        for (std::size_t i = 0; i < result.blended.size(); ++i) {
            sum_gap = std::max(sum_gap, std::abs(agf.value()[i] + alf.value()[i] - 1.0));
            const double lo = std::min(g.value()[i], l.value()[i]);
            const double hi = std::max(g.value()[i], l.value()[i]);
            // A hair of slack for the convex combination rounding.
            bounds_ok = bounds_ok && result.blended[i] >= lo - 1e-12 &&
                        result.blended[i] <= hi + 1e-12;
        }
        report.invariants.emplace_back("blend_weights_normalized", sum_gap < 1e-12);
        report.invariants.emplace_back("blend_convex_bounds", bounds_ok);
    }
    report.invariants.emplace_back("output_finite", result.blended.all_finite());

    Tensor all_tokens({0, 0});
    {
        std::vector<Var> token_mats;
        for (const TokenFrame& t : tokens) token_mats.push_back(t.tokens);
        all_tokens = token_mats.size() == 1 ? token_mats[0].value()
                                            : concat_rows(token_mats).value();
    }
    report.checksums.emplace_back("tokens", checksum(all_tokens));
    report.checksums.emplace_back("global", checksum(global_rows.value()));
    report.checksums.emplace_back("local", checksum(local_rows.value()));
    report.checksums.emplace_back("blended", checksum(result.blended));

    return result;
}

} // namespace glformer
