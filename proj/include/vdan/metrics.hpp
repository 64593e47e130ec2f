#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vdan/csi.hpp"
#include "vdan/model.hpp"

namespace vdan {

struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<std::size_t> counts;  // rows = true class, cols = predicted

    std::size_t& at(std::size_t truth, std::size_t predicted);
    std::size_t at(std::size_t truth, std::size_t predicted) const;
    std::size_t total() const;
    double accuracy() const;  // trace / total
    std::vector<std::size_t> row_sums() const;
};

struct EvalResult {
    double accuracy = 0.0;
    ConfusionMatrix confusion;
};

// INFER-mode argmax predictions over the sample set; deterministic.
EvalResult evaluate(const Model& model, std::span<const CsiSample> samples);

ConfusionMatrix confusion_from_pairs(std::size_t classes,
                                     std::span<const std::size_t> labels,
                                     std::span<const std::size_t> predictions);

// Mean-absolute-difference Gini coefficient of a non-negative vector:
// sum_ij |w_i - w_j| / (2 n sum_i w_i). 0 for uniform, (n-1)/n for one-hot.
double gini(std::span<const double> w);

// Zero-lag mean-removed normalized cross-correlation (Pearson form).
double alignment_score(std::span<const double> w, std::span<const double> r);

enum class DiagnosticAxis { kSubcarrier, kTime };

// Per-index standard deviation of CSI magnitude, pooled over the remaining
// axes and over all samples.
std::vector<double> reference_std_vector(std::span<const CsiSample> samples, DiagnosticAxis axis);

// Attention weights in INFER mode (posterior mean) per sample; empty when the
// variant has no path on that axis.
std::vector<std::vector<double>> attention_per_sample(const Model& model,
                                                      std::span<const CsiSample> samples,
                                                      DiagnosticAxis axis);
std::vector<double> mean_attention(const Model& model, std::span<const CsiSample> samples,
                                   DiagnosticAxis axis);

struct SnrPoint {
    double snr_db = 0.0;  // +infinity marks the no-noise entry
    double accuracy = 0.0;
};

// Evaluates noisy copies of `clean` at each requested SNR. An infinity entry
// (clean accuracy, exactly) is prepended when not already requested.
std::vector<SnrPoint> snr_sweep(const Model& model, std::span<const CsiSample> clean,
                                std::span<const double> snr_list_db, std::uint64_t noise_seed);

}  // namespace vdan
