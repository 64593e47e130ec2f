#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vdan/tensor.hpp"

namespace vdan {

// One labeled CSI example. `data` has shape [C, T, S, 2] with the real/imag
// axis innermost; masks mark the planted gesture structure.
struct CsiSample {
    Tensor data;
    std::uint32_t label = 0;
    std::vector<std::uint8_t> subcarrier_mask;  // length C, 1 = gesture-perturbed
    std::vector<std::uint8_t> time_mask;        // length T, 1 = inside gesture window
};

struct SynthConfig {
    std::size_t subcarriers = 30;     // C
    std::size_t time_frames = 100;    // T
    std::size_t streams = 3;          // S
    std::size_t classes = 5;          // K
    double perturbed_fraction = 0.3;
    double window_fraction = 0.4;
    double static_gain_scale = 1.0;
    double gesture_amplitude = 2.0;
    // cycles per gesture window, one per class; defaults to 1.5 + 2k
    std::vector<double> doppler_cycles;
    std::uint64_t seed = 1;

    std::size_t masked_count() const;
    std::size_t window_length() const;
    std::vector<double> resolved_doppler_cycles() const;
    void validate() const;  // throws std::invalid_argument naming the bad field
};

// Planted subcarrier set of a class: a core shared by every class plus a
// class-specific remainder, both drawn deterministically from cfg.seed. The
// shared core keeps the attention target stable across classes while the
// class-specific part keeps classes separable from per-subcarrier statistics.
std::vector<std::uint8_t> class_subcarrier_mask(const SynthConfig& cfg, std::size_t class_id);

// Static environment gains (constant over time), fixed per dataset.
// Returned as [C, S, 2] values appearing identically in every sample.
std::vector<double> static_gains(const SynthConfig& cfg);

CsiSample generate_sample(const SynthConfig& cfg, std::size_t class_id, std::uint64_t sample_seed);

// count samples with labels i % K and sample_seed i
std::vector<CsiSample> generate_dataset(const SynthConfig& cfg, std::size_t count);

// Additive white Gaussian noise on both real and imaginary channels, scaled
// so that 10*log10(mean sample power / complex noise variance) == snr_db.
// std::nullopt means "no noise" and returns the sample unchanged.
CsiSample inject_noise(const CsiSample& sample, std::optional<double> snr_db,
                       std::uint64_t noise_seed);

struct DatasetDims {
    std::uint32_t subcarriers = 0;
    std::uint32_t time_frames = 0;
    std::uint32_t streams = 0;
    std::uint32_t classes = 0;
};

struct Dataset {
    DatasetDims dims;
    std::vector<CsiSample> samples;
};

// Binary little-endian container; payload stored as float32.
void write_dataset(const std::string& path, const Dataset& dataset);
Dataset read_dataset(const std::string& path);

}  // namespace vdan
