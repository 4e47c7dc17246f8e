#include "glformer/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "glformer/error.hpp"

namespace glformer {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) {
            throw ConfigError("unknown config field \"" + (where.empty() ? key : where + "." + key) +
                              "\"");
        }
    }
}

std::size_t get_size(const json& j, const char* field) {
    const auto& v = j.at(field);
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
        throw ConfigError(std::string("config field \"") + field + "\" must be an integer");
    }
    if (v.is_number_integer() && v.get<long long>() < 0) {
        throw ConfigError(std::string("config field \"") + field + "\" must be non-negative");
    }
    return v.get<std::size_t>();
}

double get_num(const json& j, const char* field) {
    const auto& v = j.at(field);
    if (!v.is_number()) {
        throw ConfigError(std::string("config field \"") + field + "\" must be a number");
    }
    return v.get<double>();
}

} // namespace

void validate_config(const PipelineConfig& cfg) {
    if (cfg.frames < 1) throw ConfigError("config field \"N\" must be >= 1");
    if (cfg.channels < 1) throw ConfigError("config field \"c\" must be >= 1");
    if (cfg.height < 1) throw ConfigError("config field \"h\" must be >= 1");
    if (cfg.width < 1) throw ConfigError("config field \"w\" must be >= 1");
    if (cfg.token_dim < 1) throw ConfigError("config field \"D\" must be >= 1");
    if (cfg.token_dim % 4 != 0) {
        throw ConfigError("config field \"D\" must be divisible by 4 (positional encoding), got " +
                          std::to_string(cfg.token_dim));
    }
    if (cfg.heads < 1) throw ConfigError("config field \"sttm.T\" must be >= 1");
    if (cfg.token_dim % cfg.heads != 0) {
        throw ConfigError("config field \"D\" (" + std::to_string(cfg.token_dim) +
                          ") must be divisible by \"sttm.T\" (" + std::to_string(cfg.heads) + ")");
    }
    if (cfg.ffn_width() < cfg.token_dim) {
        throw ConfigError("config field \"sttm.d_ff\" must be >= D");
    }
    if (cfg.transformer_layers < 1) throw ConfigError("config field \"sttm.layers\" must be >= 1");
    if (cfg.prune_thresholds.empty()) {
        throw ConfigError("config field \"stgm.gamma\" must be non-empty");
    }
    for (std::size_t i = 0; i < cfg.prune_thresholds.size(); ++i) {
        const double t = cfg.prune_thresholds[i];
        if (t < 0.0 || t > 1.0) {
            throw ConfigError("config field \"stgm.gamma\" entries must lie in [0, 1]");
        }
        if (i > 0 && cfg.prune_thresholds[i - 1] >= t) {
            throw ConfigError("config field \"stgm.gamma\" must be strictly ascending");
        }
    }
    if (cfg.edge_hidden < 1) throw ConfigError("config field \"stgm.h_e\" must be >= 1");
    if (cfg.ln_eps <= 0.0) throw ConfigError("config field \"ln_eps\" must be > 0");
}

namespace {

PipelineConfig parse_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    PipelineConfig cfg;

    reject_unknown(j, {"N", "c", "h", "w", "D", "seed", "sttm", "stgm", "synth",
                       "object_queries", "ln_eps"},
                   "");

    if (j.contains("N")) cfg.frames = get_size(j, "N");
    if (j.contains("c")) cfg.channels = get_size(j, "c");
    if (j.contains("h")) cfg.height = get_size(j, "h");
    if (j.contains("w")) cfg.width = get_size(j, "w");
    // D defaults to c (pure-reshape tokenization); c != D enables the learned
    // token projection.
    cfg.token_dim = j.contains("D") ? get_size(j, "D") : cfg.channels;
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("ln_eps")) cfg.ln_eps = get_num(j, "ln_eps");
    if (j.contains("object_queries")) cfg.object_queries = get_size(j, "object_queries");

    if (j.contains("sttm")) {
        const json& s = j.at("sttm");
        if (!s.is_object()) throw ConfigError("config field \"sttm\" must be an object");
        reject_unknown(s, {"T", "d_ff", "layers"}, "sttm");
        if (s.contains("T")) cfg.heads = get_size(s, "T");
        if (s.contains("d_ff")) cfg.ffn_dim = get_size(s, "d_ff");
        if (s.contains("layers")) cfg.transformer_layers = get_size(s, "layers");
    }

    if (j.contains("stgm")) {
        const json& s = j.at("stgm");
        if (!s.is_object()) throw ConfigError("config field \"stgm\" must be an object");
        reject_unknown(s, {"l_dgc", "gamma", "lambda", "rho", "h_e", "temporal_mode"}, "stgm");
        if (s.contains("l_dgc")) cfg.graph_conv_layers = get_size(s, "l_dgc");
        if (s.contains("gamma")) {
            if (!s.at("gamma").is_array()) {
                throw ConfigError("config field \"stgm.gamma\" must be an array");
            }
            cfg.prune_thresholds = s.at("gamma").get<std::vector<double>>();
        }
        if (s.contains("lambda")) cfg.prune_lambda = get_num(s, "lambda");
        if (s.contains("rho")) cfg.residual = get_num(s, "rho");
        if (s.contains("h_e")) cfg.edge_hidden = get_size(s, "h_e");
        if (s.contains("temporal_mode")) {
            const std::string mode = s.at("temporal_mode").get<std::string>();
            if (mode == "per-location") {
                cfg.temporal_mode = TemporalGraphMode::PerLocation;
            } else if (mode == "full") {
                cfg.temporal_mode = TemporalGraphMode::Full;
            } else {
                throw ConfigError("config field \"stgm.temporal_mode\" must be "
                                  "\"per-location\" or \"full\", got \"" + mode + "\"");
            }
        }
    }

    if (j.contains("synth")) {
        const json& s = j.at("synth");
        if (!s.is_object()) throw ConfigError("config field \"synth\" must be an object");
        reject_unknown(s, {"blob_velocity", "blob_amplitude", "noise_scale"}, "synth");
        if (s.contains("blob_velocity")) {
            const auto& v = s.at("blob_velocity");
            if (!v.is_array() || v.size() != 2) {
                throw ConfigError("config field \"synth.blob_velocity\" must be [vy, vx]");
            }
            cfg.blob_velocity = {v[0].get<double>(), v[1].get<double>()};
        }
        if (s.contains("blob_amplitude")) cfg.blob_amplitude = get_num(s, "blob_amplitude");
        if (s.contains("noise_scale")) cfg.noise_scale = get_num(s, "noise_scale");
    }

    validate_config(cfg);
    return cfg;
}

} // namespace

PipelineConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse failure: ") + e.what());
    }
    return parse_json(j);
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config(buf.str());
}

std::string config_to_json(const PipelineConfig& cfg) {
    nlohmann::ordered_json j;
    j["N"] = cfg.frames;
    j["c"] = cfg.channels;
    j["h"] = cfg.height;
    j["w"] = cfg.width;
    j["D"] = cfg.token_dim;
    j["seed"] = cfg.seed;
    j["sttm"] = {{"T", cfg.heads}, {"d_ff", cfg.ffn_width()}, {"layers", cfg.transformer_layers}};
    j["stgm"] = {{"l_dgc", cfg.graph_conv_layers},
                 {"gamma", cfg.prune_thresholds},
                 {"lambda", cfg.prune_lambda},
                 {"rho", cfg.residual},
                 {"h_e", cfg.edge_hidden},
                 {"temporal_mode",
                  cfg.temporal_mode == TemporalGraphMode::PerLocation ? "per-location" : "full"}};
    j["synth"] = {{"blob_velocity", cfg.blob_velocity},
                  {"blob_amplitude", cfg.blob_amplitude},
                  {"noise_scale", cfg.noise_scale}};
    j["object_queries"] = cfg.object_queries;
    j["ln_eps"] = cfg.ln_eps;
    return j.dump(2);
}

} // namespace glformer
