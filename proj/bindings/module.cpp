#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "glformer/pipeline.hpp"
#include "glformer/tzr.hpp"
#include "glformer/verify.hpp"

namespace py = pybind11;
using namespace glformer;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const DoubleArray& arr) {
    std::vector<std::size_t> shape(arr.ndim());
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) {
        shape[static_cast<std::size_t>(i)] = static_cast<std::size_t>(arr.shape(i));
    }
    std::vector<double> data(arr.data(), arr.data() + arr.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.ndim());
    for (std::size_t i = 0; i < t.ndim(); ++i) shape[i] = static_cast<py::ssize_t>(t.dim(i));
    py::array_t<double> out(shape);
    std::copy(t.data(), t.data() + t.size(), out.mutable_data());
    return out;
}

PipelineConfig config_from(const std::string& json_text) { return parse_config(json_text); }

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Global-local video feature aggregation: spatial-temporal attention, pruned "
              "dynamic graph convolution and adaptive feature blending.";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);

    m.def("default_config", [] { return config_to_json(PipelineConfig{}); },
          "Fully-resolved default configuration as JSON.");
    m.def("resolve_config",
          [](const std::string& json_text) { return config_to_json(config_from(json_text)); },
          py::arg("config"), "Parse, validate and fully resolve a config JSON string.");

    m.def("positional_encoding",
          [](std::size_t h, std::size_t w, std::size_t d) {
              return from_tensor(positional_encoding(h, w, d));
          },
          py::arg("h"), py::arg("w"), py::arg("d"),
          "2-D sinusoidal positional features, (h*w, d).");

    m.def("tokenize",
          [](const DoubleArray& frame, py::object proj) {
              const Tensor f = to_tensor(frame);
              if (proj.is_none()) return from_tensor(tokenize(f));
              return from_tensor(tokenize(f, to_tensor(proj.cast<DoubleArray>())));
          },
          py::arg("frame"), py::arg("proj") = py::none(),
          "Frame feature (c, h, w) -> token features (h*w, D).");

    m.def("softmax",
          [](const DoubleArray& x, std::size_t axis) {
              return from_tensor(softmax(to_tensor(x), axis));
          },
          py::arg("x"), py::arg("axis"));

    m.def("layer_norm",
          [](const DoubleArray& x, const DoubleArray& gamma, const DoubleArray& beta,
             double eps) {
              return from_tensor(layer_norm(to_tensor(x), to_tensor(gamma), to_tensor(beta), eps));
          },
          py::arg("x"), py::arg("gamma"), py::arg("beta"), py::arg("eps") = 1e-5);

    m.def("synth",
          [](const std::string& config, std::uint64_t seed) {
              return from_tensor(synth_sequence(config_from(config), seed));
          },
          py::arg("config"), py::arg("seed"),
          "Deterministic synthetic frame window (N, c, h, w).");

    m.def("run",
          [](const DoubleArray& frames, const std::string& config) {
              const PipelineConfig cfg = config_from(config);
              const ModelParams params = init_model(cfg);
              PipelineResult result = run_pipeline(to_tensor(frames), cfg, params);
              return py::make_tuple(from_tensor(result.blended), result.report.to_json());
          },
          py::arg("frames"), py::arg("config"),
          "Full pipeline over a (N, c, h, w) window; returns (B (D, N*M), report JSON).");

    m.def("global_features",
          [](const DoubleArray& frames, const std::string& config) {
              const PipelineConfig cfg = config_from(config);
              const ModelParams params = init_model(cfg);
              const auto tokens = tokenize_window(split_frames(to_tensor(frames)), cfg, params);
              return from_tensor(transformer_forward(tokens, params.transformer).value());
          },
          py::arg("frames"), py::arg("config"),
          "Transformer-aggregated features, (N*M, D).");

    m.def("local_features",
          [](const DoubleArray& frames, const std::string& config) {
              const PipelineConfig cfg = config_from(config);
              const ModelParams params = init_model(cfg);
              const auto tokens = tokenize_window(split_frames(to_tensor(frames)), cfg, params);
              return from_tensor(graphformer_forward(tokens, params.graphformer).value());
          },
          py::arg("frames"), py::arg("config"),
          "GraphFormer-aggregated features, (N*M, D).");

    m.def("pruned_adjacency",
          [](const DoubleArray& r, const std::string& config) {
              const PipelineConfig cfg = config_from(config);
              const ModelParams params = init_model(cfg);
              return from_tensor(pruned_adjacency(Var(to_tensor(r)),
                                                  params.graphformer.spatial.mlp,
                                                  params.graphformer.spatial.prune)
                                     .value());
          },
          py::arg("r"), py::arg("config"),
          "Pruned, Laplacian-normalized adjacency built from (M, D) node features.");

    m.def("adjacency_tensor",
          [](const DoubleArray& a, const std::string& config) {
              const PipelineConfig cfg = config_from(config);
              const ModelParams params = init_model(cfg);
              return from_tensor(adjacency_tensor(to_tensor(a), params.graphformer.spatial.prune));
          },
          py::arg("a"), py::arg("config"),
          "Threshold partition (S, M, M) of a row-stochastic adjacency.");

    m.def("pruned_graph",
          [](const DoubleArray& r, const std::string& config) {
              const PipelineConfig cfg = config_from(config);
              const ModelParams params = init_model(cfg);
              const PrunedGraph g = build_pruned_graph(to_tensor(r),
                                                       params.graphformer.spatial.mlp,
                                                       params.graphformer.spatial.prune);
              py::dict d;
              d["node_features"] = from_tensor(g.node_features);
              d["adjacency"] = from_tensor(g.adjacency);
              d["slices"] = from_tensor(g.slices);
              d["probabilities"] = from_tensor(g.probabilities);
              d["normalized"] = from_tensor(g.normalized);
              return d;
          },
          py::arg("r"), py::arg("config"),
          "Every stage of the pruning chain for (M, D) node features.");

    m.def("blend_weights",
          [](const DoubleArray& g, const DoubleArray& l, const DoubleArray& w_alpha) {
              auto [agf, alf] =
                  blend_weights(Var(to_tensor(g)), Var(to_tensor(l)), Var(to_tensor(w_alpha)));
              return py::make_tuple(from_tensor(agf.value()), from_tensor(alf.value()));
          },
          py::arg("g"), py::arg("l"), py::arg("w_alpha"));

    m.def("blend",
          [](const DoubleArray& g, const DoubleArray& l, const DoubleArray& w_alpha) {
              return from_tensor(
                  blend(Var(to_tensor(g)), Var(to_tensor(l)), Var(to_tensor(w_alpha))).value());
          },
          py::arg("g"), py::arg("l"), py::arg("w_alpha"));

    m.def("oracle_check",
          [](const std::string& config, std::uint64_t seed) {
              py::list out;
              for (const auto& c : oracle_compare(config_from(config), seed)) {
                  py::dict d;
                  d["kernel"] = c.kernel;
                  d["max_diff"] = c.max_diff;
                  d["tol"] = c.tol;
                  d["pass"] = c.pass;
                  out.append(d);
              }
              return out;
          },
          py::arg("config"), py::arg("seed"),
          "Vectorized kernels vs naive loop oracles; one entry per kernel.");

    m.def("gradcheck",
          [](const std::string& config, std::uint64_t seed, const std::string& module) {
              const PipelineConfig cfg = config_from(config);
              GradCheckReport report;
              if (module == "transformer") {
                  report = gradcheck_transformer(cfg, seed);
              } else if (module == "graphformer") {
                  report = gradcheck_graphformer(cfg, seed);
              } else if (module == "blender") {
                  report = gradcheck_blender(cfg, seed);
              } else if (module == "pipeline") {
                  report = gradcheck_pipeline(cfg, seed);
              } else {
                  throw ConfigError("unknown gradcheck module \"" + module + "\"");
              }
              py::list out;
              for (const auto& b : report.blocks) {
                  py::dict d;
                  d["block"] = b.block;
                  d["rel_err"] = b.rel_err;
                  d["pass"] = b.pass;
                  out.append(d);
              }
              return out;
          },
          py::arg("config"), py::arg("seed"), py::arg("module"),
          "Tape gradients vs central finite differences for one module.");

    m.def("read_tzr", [](const std::string& path) { return from_tensor(read_tzr(path)); },
          py::arg("path"));
    m.def("write_tzr",
          [](const std::string& path, const DoubleArray& t) { write_tzr(path, to_tensor(t)); },
          py::arg("path"), py::arg("t"));

    m.attr("__version__") = "0.1.0";
}
