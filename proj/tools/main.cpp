#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vdan/experiment.hpp"

namespace {

struct CommandSpec {
    std::string name;
    std::string description;
    void (*handler)(const vdan::ExperimentConfig&);
};

const std::vector<CommandSpec>& commands() {
    static const std::vector<CommandSpec> specs = {
        {"synth", "generate the synthetic CSI dataset file", vdan::run_synth},
        {"train", "fit one variant, write checkpoint and history CSV", vdan::run_train},
        {"eval", "evaluate a checkpoint, write metrics JSON", vdan::run_eval},
        {"ablate", "train every variant across the seed list, write the summary table",
         vdan::run_ablate},
        {"snr-sweep", "accuracy under injected noise, write curve CSV", vdan::run_snr_sweep},
        {"inspect-attention", "per-sample attention weights and alignment CSVs",
         vdan::run_inspect_attention},
        {"gradcheck", "finite-difference gradient suite, nonzero exit on failure",
         vdan::run_gradcheck},
    };
    return specs;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"VDAN: variational dual-path attention preprocessing for CSI gesture recognition"};
    app.require_subcommand(1);

    struct Parsed {
        std::string config_path;
        std::vector<std::string> overrides;
        const CommandSpec* spec = nullptr;
    } parsed;

    for (const CommandSpec& spec : commands()) {
        CLI::App* sub = app.add_subcommand(spec.name, spec.description);
        sub->add_option("-c,--config", parsed.config_path, "JSON config file (flat dotted keys)");
        sub->add_option("overrides", parsed.overrides, "key=value overrides");
        sub->callback([&parsed, &spec]() { parsed.spec = &spec; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        const vdan::ExperimentConfig cfg =
            vdan::ExperimentConfig::load(parsed.config_path, parsed.overrides);
        parsed.spec->handler(cfg);
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
