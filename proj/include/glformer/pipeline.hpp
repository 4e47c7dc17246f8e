#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "glformer/attention.hpp"
#include "glformer/blender.hpp"
#include "glformer/config.hpp"
#include "glformer/graph.hpp"
#include "glformer/tokenizer.hpp"

namespace glformer {

// All learnable state of one pipeline instance.
struct ModelParams {
    TransformerParams transformer;
    GraphFormerParams graphformer;
    BlenderParams blender;
    std::optional<Var> token_proj; // c x D, present when c != D

    void for_each_param(const ParamVisitor& fn);
    void bind(Tape& tape);
};

// Deterministic init from cfg.seed: every tensor is drawn from its own
// labelled child stream of the root seed (uniform on +-1/sqrt(fan_in)).
ModelParams init_model(const PipelineConfig& cfg);

// Deterministic synthetic window [N, c, h, w]: per-channel noise plus a
// Gaussian "object" blob whose center translates by cfg.blob_velocity per
// frame (toroidal wrap), giving the temporal stages a trackable signal.
Tensor synth_sequence(const PipelineConfig& cfg, std::uint64_t seed);

// Expected blob center of frame n (toroidal), for verification.
std::pair<std::size_t, std::size_t> synth_blob_center(const PipelineConfig& cfg,
                                                      std::uint64_t seed, std::size_t frame);

struct RunReport {
    std::vector<std::pair<std::string, double>> stage_timings_ms;
    std::vector<std::pair<std::string, bool>> invariants;
    std::vector<std::pair<std::string, std::string>> checksums;
    std::vector<std::pair<std::string, std::string>> outputs;

    bool invariants_pass() const;
    std::string to_json() const;
};

struct PipelineResult {
    Tensor blended; // D x (N*M)
    RunReport report;
};

// Split a [N, c, h, w] window into per-frame constants.
std::vector<Var> split_frames(const Tensor& window);

// Tokenize each frame and pair it with the shared positional features.
std::vector<TokenFrame> tokenize_window(const std::vector<Var>& frames,
                                        const PipelineConfig& cfg, const ModelParams& params);

// End-to-end differentiable forward: tokens -> transformer || graphformer ->
// blender. Returns the blended D x (N*M) features.
Var pipeline_blended(const std::vector<TokenFrame>& tokens, const ModelParams& params);

// One pass over the whole window with per-stage timings, invariant checks and
// checksums. Module errors propagate with a stage label prefix.
PipelineResult run_pipeline(const Tensor& window, const PipelineConfig& cfg,
                            const ModelParams& params);

// FNV-1a over the little-endian bytes of the tensor payload, hex-encoded.
std::string checksum(const Tensor& t);

} // namespace glformer
