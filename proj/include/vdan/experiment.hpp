#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vdan/config.hpp"
#include "vdan/train.hpp"

namespace vdan {

// Command implementations behind the CLI. Each writes its result files plus a
// manifest under run.output_dir and throws std::invalid_argument for bad
// inputs or std::runtime_error for execution failures.

void run_synth(const ExperimentConfig& cfg);
void run_train(const ExperimentConfig& cfg);
void run_eval(const ExperimentConfig& cfg);
void run_ablate(const ExperimentConfig& cfg);
void run_snr_sweep(const ExperimentConfig& cfg);
void run_inspect_attention(const ExperimentConfig& cfg);
void run_gradcheck(const ExperimentConfig& cfg);  // throws when the suite fails

struct AblationRow {
    std::string variant;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    std::size_t extra_parameters = 0;
    std::vector<double> per_seed_accuracy;
};

// exposed for tests and the acceptance suite
std::vector<AblationRow> ablation_study(const ExperimentConfig& cfg,
                                        const std::vector<CsiSample>& samples);

// The configured dataset: planted samples plus the configured noise level
// (clean = true skips the noise regardless of synth.snr_db).
Dataset build_dataset(const ExperimentConfig& cfg, bool clean);

struct TrainedRun {
    Model model;
    TrainHistory history;
    std::vector<CsiSample> test_set;
};

// Split by `seed`, build the variant with init seed `seed`, fit on the
// train/val splits and return the model beside its held-out test split.
TrainedRun train_variant(const ExperimentConfig& cfg, VariantKind kind, std::uint64_t seed,
                         const std::vector<CsiSample>& samples);

// task(i) for i in [0, count) on up to `threads` workers (0 = hardware).
void parallel_tasks(std::size_t count, std::size_t threads,
                    const std::function<void(std::size_t)>& task);

}  // namespace vdan
