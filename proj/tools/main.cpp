#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "glformer/pipeline.hpp"
#include "glformer/tzr.hpp"
#include "glformer/verify.hpp"

namespace {

using namespace glformer;

constexpr int kExitOk = 0;
constexpr int kExitBreach = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

int cmd_run(const std::string& config_path, const std::string& input_path, bool synth,
            const std::string& output_path, const std::string& report_path) {
    const PipelineConfig cfg = load_config(config_path);

    Tensor window;
    if (synth) {
        window = synth_sequence(cfg, cfg.seed);
    } else {
        window = read_tzr(input_path);
        const std::vector<std::size_t> expected{cfg.frames, cfg.channels, cfg.height, cfg.width};
        if (window.shape() != expected) {
            throw ConfigError("input frames shape " + shape_str(window.shape()) +
                              " does not match config [N, c, h, w] = " + shape_str(expected));
        }
    }

    const ModelParams params = init_model(cfg);
    PipelineResult result = run_pipeline(window, cfg, params);

    write_tzr(output_path, result.blended);
    result.report.outputs.emplace_back("blended", output_path);
    if (!report_path.empty()) {
        std::ofstream os(report_path);
        if (!os) throw IoError("cannot open " + report_path + " for writing");
        os << result.report.to_json() << "\n";
    }

    std::cout << "blended features " << shape_str(result.blended.shape()) << " -> "
              << output_path << "\n";
    for (const auto& [name, ms] : result.report.stage_timings_ms) {
        std::cout << "  " << std::left << std::setw(14) << name << std::fixed
                  << std::setprecision(3) << ms << " ms\n";
    }
    bool ok = true;
    for (const auto& [name, pass] : result.report.invariants) {
        std::cout << "  invariant " << std::left << std::setw(31) << name
                  << (pass ? "pass" : "FAIL") << "\n";
        ok = ok && pass;
    }
    return ok ? kExitOk : kExitBreach;
}

int cmd_oracle(const std::string& config_path, std::uint64_t seed, bool inject_fault) {
    const PipelineConfig cfg = load_config(config_path);
    const auto checks = oracle_compare(cfg, seed, inject_fault);
    bool ok = true;
    std::cout << std::left << std::setw(22) << "kernel" << std::setw(14) << "max_abs_diff"
              << std::setw(12) << "tolerance" << "status\n";
    for (const auto& c : checks) {
        std::cout << std::left << std::setw(22) << c.kernel << std::setw(14)
                  << std::scientific << std::setprecision(3) << c.max_diff << std::setw(12)
                  << c.tol << (c.pass ? "pass" : "FAIL") << "\n";
        ok = ok && c.pass;
    }
    return ok ? kExitOk : kExitBreach;
}

int cmd_gradcheck(const std::string& config_path, std::uint64_t seed, double h,
                  const std::string& module) {
    const PipelineConfig cfg = load_config(config_path);
    GradCheckOptions opt;
    if (h < 1e-9) {
        std::cout << "warning: step h = " << h
                  << " would be dominated by cancellation; judging at the default h = 1e-5\n";
    } else {
        opt.h = h;
    }
    const PipelineConfig effective = gradcheck_config(cfg);
    std::cout << "gradcheck instance: N=" << effective.frames
              << " M=" << effective.tokens_per_frame() << " D=" << effective.token_dim
              << " T=" << effective.heads << " (structure from config)\n";

    bool ok = true;
    auto run_section = [&](const std::string& name, const GradCheckReport& report) {
        std::cout << name << " (" << std::fixed << std::setprecision(2) << report.seconds
                  << " s)\n";
        for (const auto& b : report.blocks) {
            std::cout << "  " << std::left << std::setw(52) << b.block << std::scientific
                      << std::setprecision(3) << b.rel_err << (b.pass ? "  pass" : "  FAIL")
                      << "\n";
            ok = ok && b.pass;
        }
    };

    if (module == "all" || module == "transformer") {
        run_section("transformer", gradcheck_transformer(cfg, seed, opt));
    }
    if (module == "all" || module == "graphformer") {
        run_section("graphformer", gradcheck_graphformer(cfg, seed, opt));
    }
    if (module == "all" || module == "blender") {
        run_section("blender", gradcheck_blender(cfg, seed, opt));
    }
    if (module == "all" || module == "pipeline") {
        run_section("pipeline", gradcheck_pipeline(cfg, seed, opt));
    }
    return ok ? kExitOk : kExitBreach;
}

int cmd_synth(const std::string& config_path, std::uint64_t seed, const std::string& output) {
    const PipelineConfig cfg = load_config(config_path);
    const Tensor window = synth_sequence(cfg, seed);
    write_tzr(output, window);
    std::cout << "synthetic window " << shape_str(window.shape()) << " -> " << output << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatial-temporal global/local feature aggregation pipeline"};
    app.require_subcommand(1);

    std::string config_path, input_path, output_path, report_path, module = "all";
    std::uint64_t seed = 0;
    double h = 1e-5;
    bool synth = false, inject_fault = false;

    auto* run = app.add_subcommand("run", "tokenize -> aggregate -> blend one frame window");
    run->add_option("--config", config_path, "pipeline config JSON")->required();
    auto* input_opt = run->add_option("--input", input_path, "input frames (TZR, [N,c,h,w])");
    run->add_flag("--synth", synth, "synthesize the input window from the config seed");
    run->add_option("--output", output_path, "output blended features (TZR, [D, N*M])")
        ->required();
    run->add_option("--report", report_path, "write the run report JSON here");

    auto* oracle = app.add_subcommand("oracle", "compare vectorized kernels to naive oracles");
    oracle->add_option("--config", config_path, "pipeline config JSON")->required();
    oracle->add_option("--seed", seed, "data seed")->required();
    oracle->add_flag("--inject-fault", inject_fault,
                     "perturb one weight after oracle capture (harness sensitivity hook)");

    auto* gradcheck = app.add_subcommand("gradcheck", "tape gradients vs finite differences");
    gradcheck->set_help_flag("--help", "print help");
    gradcheck->add_option("--config", config_path, "pipeline config JSON")->required();
    gradcheck->add_option("--seed", seed, "data seed")->required();
    gradcheck->add_option("--h", h, "finite-difference step (default 1e-5)");
    gradcheck->add_option("--module", module, "transformer|graphformer|blender|pipeline|all")
        ->check(CLI::IsMember({"transformer", "graphformer", "blender", "pipeline", "all"}));

    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic frame window");
    synth_cmd->add_option("--config", config_path, "pipeline config JSON")->required();
    synth_cmd->add_option("--seed", seed, "generator seed")->required();
    synth_cmd->add_option("--output", output_path, "output frames (TZR)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            if (synth == !input_path.empty()) {
                std::cerr << "error: run needs exactly one of --input or --synth\n";
                return kExitConfig;
            }
            (void)input_opt;
            return cmd_run(config_path, input_path, synth, output_path, report_path);
        }
        if (oracle->parsed()) return cmd_oracle(config_path, seed, inject_fault);
        if (gradcheck->parsed()) return cmd_gradcheck(config_path, seed, h, module);
        if (synth_cmd->parsed()) return cmd_synth(config_path, seed, output_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DimensionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBreach;
    }
    return kExitOk;
}
