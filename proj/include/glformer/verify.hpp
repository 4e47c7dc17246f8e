#pragma once

#include <functional>
#include <string>
#include <vector>

#include "glformer/pipeline.hpp"

namespace glformer {

// ---- gradient checking -----------------------------------------------------

struct BlockCheck {
    std::string block;
    double rel_err = 0.0;
    bool pass = false;
};

struct GradCheckOptions {
    double h = 1e-5;
    double tol = 1e-5;
};

// Compares tape gradients of a scalar loss against central finite differences
// for every parameter block reachable through `enumerate_params`. The loss
// closure must read the enumerated Vars by reference so that re-binding /
// perturbing them is visible. Relative error per block is
// max|a - n| / max(1, max|a|, max|n|).
std::vector<BlockCheck> gradcheck(
    const std::function<void(const ParamVisitor&)>& enumerate_params,
    const std::function<Var()>& forward_loss, const GradCheckOptions& opt = {});

struct GradCheckReport {
    std::vector<BlockCheck> blocks;
    double seconds = 0.0;
    bool pass() const {
        for (const auto& b : blocks) {
            if (!b.pass) return false;
        }
        return !blocks.empty();
    }
};

// Per-module and composed-pipeline gradient suites at the canonical instance
// (N=2, h=3, w=2 -> M=6, D=8, T=2); structural knobs (graph layers,
// thresholds, transformer layers, temporal mode, ...) come from cfg.
GradCheckReport gradcheck_transformer(const PipelineConfig& cfg, std::uint64_t seed,
                                      const GradCheckOptions& opt = {});
GradCheckReport gradcheck_graphformer(const PipelineConfig& cfg, std::uint64_t seed,
                                      const GradCheckOptions& opt = {});
GradCheckReport gradcheck_blender(const PipelineConfig& cfg, std::uint64_t seed,
                                  const GradCheckOptions& opt = {});
GradCheckReport gradcheck_pipeline(const PipelineConfig& cfg, std::uint64_t seed,
                                   const GradCheckOptions& opt = {});

// The canonical gradcheck geometry applied on top of cfg's structural knobs.
PipelineConfig gradcheck_config(const PipelineConfig& cfg);

// ---- oracle comparison ------------------------------------------------------

struct KernelCheck {
    std::string kernel;
    double max_diff = 0.0;
    double tol = 0.0;
    bool pass = false;
};

// Runs every vectorized kernel against its naive-loop reference at the
// config's geometry. `inject_fault` perturbs one attention weight by 1e-3
// after the reference values are captured (harness sensitivity hook).
std::vector<KernelCheck> oracle_compare(const PipelineConfig& cfg, std::uint64_t seed,
                                        bool inject_fault = false);

} // namespace glformer
