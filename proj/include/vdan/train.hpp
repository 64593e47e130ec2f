#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vdan/csi.hpp"
#include "vdan/model.hpp"

namespace vdan {

struct TrainConfig {
    double lambda = 0.05;  // KL coefficient
    double base_lr = 1e-4;
    double weight_decay = 5e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 150;
    std::size_t early_stop_patience = 20;
    std::uint64_t seed = 1;
    double train_fraction = 0.70;
    double val_fraction = 0.15;  // remainder is the test split

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double loss = 0.0;
    double ce = 0.0;
    double kl_c = 0.0;
    double kl_t = 0.0;
    double val_accuracy = 0.0;
    double lr = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_val_accuracy = 0.0;
    std::size_t stopped_epoch = 0;
};

// batch CE + lambda * (kl_c + kl_t); inputs are scalar tensors on the tape
Tensor total_loss(Tape* tape, const Tensor& ce, const Tensor& kl_c, const Tensor& kl_t,
                  double lambda);
// single-example convenience from raw logits
Tensor total_loss(Tape* tape, const Tensor& logits, std::size_t label, const Tensor& kl_c,
                  const Tensor& kl_t, double lambda);

// cosine decay with zero floor: base_lr * (1 + cos(pi * step / total_steps)) / 2
double lr_at(std::size_t step, std::size_t total_steps, double base_lr);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

// Per-class shuffled split; fractions apply within every class.
SplitIndices stratified_split(std::span<const CsiSample> samples, double train_fraction,
                              double val_fraction, std::uint64_t seed);

std::vector<CsiSample> select(std::span<const CsiSample> samples,
                              std::span<const std::size_t> indices);

// Decoupled-weight-decay Adam over a fixed parameter list.
class AdamW {
public:
    AdamW(std::vector<Tensor> params, const TrainConfig& cfg);
    void zero_grad();
    void step(double lr);  // applies gradients, then multiplicative decay

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    double beta1_, beta2_, eps_, weight_decay_;
    std::size_t t_ = 0;
};

// Validation metric evaluated once per epoch; the default measures accuracy
// on the validation set. Overridable for tests that stub the metric.
using ValMetric = std::function<double(const Model&, std::size_t epoch)>;

// Joint optimisation of the preprocessing variant and classifier. One epsilon
// draw per variational path per forward pass, cosine schedule per step, early
// stopping on best validation accuracy with the best checkpoint restored.
// Fully deterministic given cfg.seed.
TrainHistory fit(Model& model, std::span<const CsiSample> train_set,
                 std::span<const CsiSample> val_set, const TrainConfig& cfg,
                 const ValMetric& val_metric = {});

void write_history_csv(const std::string& path, const TrainHistory& history);

}  // namespace vdan
