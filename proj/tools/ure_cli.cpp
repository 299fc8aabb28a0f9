// ure: command-line front end for the spectrogram robustness workbench.
//
// Exit status: 0 success, 1 internal failure, 2 configuration error,
// 3 missing prerequisite artifact.

#include "ure/config.hpp"
#include "ure/error.hpp"
#include "ure/kernels.hpp"
#include "ure/workbench.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

int exit_code(ure::ErrorCode code) {
    switch (code) {
        case ure::ErrorCode::kConfig: return 2;
        case ure::ErrorCode::kMissingPrerequisite: return 3;
        default: return 1;
    }
}

struct CommonArgs {
    std::string config;
    std::string out = "runs";
    std::optional<std::uint64_t> seed;
    std::string stages = "all";
    std::string method;
    std::optional<int> samples_per_class;
    bool quiet = false;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectrogram classifier robustness and attribution workbench"};
    app.require_subcommand(1);
    app.set_version_flag("--version", ure::workbench::kToolVersion);

    CommonArgs args;
    std::string backend;
    app.add_option("--backend", backend, "Kernel backend: scalar or avx2 (default: widest available)");

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config, "Experiment config file")->required();
        sub->add_option("--out", args.out, "Output root directory")->capture_default_str();
        sub->add_option("--seed", args.seed, "Override every seed in the config");
        sub->add_flag("--quiet", args.quiet, "Only print errors");
    };

    struct Command {
        const char* name;
        const char* help;
        std::string stages;
    };
    const Command commands[] = {
        {"generate", "Synthesize recordings and write the spectrogram dataset", "generate"},
        {"train", "Train the deterministic and stochastic classifiers", "train"},
        {"evaluate", "Clean test-set metrics for both classifiers", "evaluate"},
        {"sweep", "Gaussian input-noise robustness sweep", "sweep"},
        {"explain", "Attribution maps, heatmaps and band scores", "explain"},
        {"report", "Collect tables and band scores into a report", "report"},
        {"all", "Run several stages in order (see --stages)", ""},
    };
    std::string chosen_stages;
    for (const Command& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        add_common(sub);
        if (std::string(c.name) == "all") {
            sub->add_option("--stages", args.stages, "Comma-separated stages or 'all'")->capture_default_str();
        }
        if (std::string(c.name) == "explain") {
            sub->add_option("--method", args.method, "ig, ig-nt, gradshap, gradcam or occlusion");
            sub->add_option("--samples-per-class", args.samples_per_class, "Maps per class");
        }
        sub->callback([&chosen_stages, &args, c] { chosen_stages = c.stages.empty() ? args.stages : c.stages; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (!backend.empty()) {
            const auto b = backend == "scalar" ? ure::simd::Backend::kScalar
                         : backend == "avx2"   ? ure::simd::Backend::kAvx2
                                               : throw ure::Error(ure::ErrorCode::kConfig, "unknown backend " + backend);
            if (!ure::simd::backend_available(b)) {
                throw ure::Error(ure::ErrorCode::kConfig, "backend " + backend + " is not available on this machine");
            }
            ure::simd::select_backend(b);
        }
        ure::workbench::ExperimentConfig config = ure::workbench::load_config(args.config);
        if (args.seed) {
            config.override_seed(*args.seed);
        }
        if (!args.method.empty()) {
            try {
                config.attribution.methods = {ure::attribution::method_from_string(args.method)};
            } catch (const ure::Error& e) {
                throw ure::Error(ure::ErrorCode::kConfig, std::string("--method: ") + e.what());
            }
        }
        if (args.samples_per_class) {
            config.attribution.samples_per_class = *args.samples_per_class;
        }
        config.validate();

        ure::workbench::PipelineOptions options;
        options.out = args.out;
        options.stages = ure::workbench::parse_stages(chosen_stages);
        if (!args.quiet) {
            options.log = [](const std::string& line) { std::cout << line << std::endl; };
        }
        const auto meta = ure::workbench::run_pipeline(config, options);
        if (!args.quiet) {
            for (const auto& s : meta.stages) {
                std::cout << ure::workbench::to_string(s.stage) << " -> " << s.dir.string()
                          << (s.reused ? " (reused)" : "") << "\n";
            }
        }
        return 0;
    } catch (const ure::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
