#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "glformer/graph.hpp" // TemporalGraphMode

namespace glformer {

// Window-level pipeline configuration. JSON schema (all fields optional,
// defaults below):
//
//   {
//     "N": 25, "c": 24, "h": 4, "w": 4, "D": 24, "seed": 0,
//     "sttm": {"T": 6, "d_ff": 96, "layers": 1},
//     "stgm": {"l_dgc": 2, "gamma": [0.1, 0.3, 1.0], "lambda": 0.3,
//              "rho": 0.5, "h_e": 16, "temporal_mode": "per-location"},
//     "synth": {"blob_velocity": [1, 1], "blob_amplitude": 3.0,
//               "noise_scale": 0.1},
//     "object_queries": 80
//   }
//
// Unknown keys are rejected with an error naming the key.
struct PipelineConfig {
    std::size_t frames = 25;   // N, frames per window
    std::size_t channels = 24; // c
    std::size_t height = 4;    // h
    std::size_t width = 4;     // w
    std::size_t token_dim = 24; // D
    std::uint64_t seed = 0;

    // transformer stage
    std::size_t heads = 6;               // T
    std::size_t ffn_dim = 0;             // D_ff; 0 means 4*D
    std::size_t transformer_layers = 1;

    // graph stage
    std::size_t graph_conv_layers = 2; // L_DGC
    std::vector<double> prune_thresholds = {0.1, 0.3, 1.0};
    double prune_lambda = 0.3;
    double residual = 0.5; // rho
    std::size_t edge_hidden = 16; // h_e
    TemporalGraphMode temporal_mode = TemporalGraphMode::PerLocation;

    // synthetic-sequence generator
    double blob_amplitude = 3.0;
    double noise_scale = 0.1;
    std::array<double, 2> blob_velocity{1.0, 1.0};

    // Carried for a future decoder stage; the pipeline ends at blended
    // features, so this is validated but otherwise unused.
    std::size_t object_queries = 80;

    double ln_eps = 1e-5;

    std::size_t tokens_per_frame() const { return height * width; }
    std::size_t ffn_width() const { return ffn_dim ? ffn_dim : 4 * token_dim; }
};

// Throws ConfigError naming the offending field.
void validate_config(const PipelineConfig& cfg);

PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);

// Fully-resolved JSON (useful for reports and the python bindings).
std::string config_to_json(const PipelineConfig& cfg);

} // namespace glformer
