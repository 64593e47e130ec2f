#pragma once

#include <cstdint>
#include <vector>

#include "vdan/attention.hpp"
#include "vdan/tensor.hpp"

namespace vdan {

// Architecture dimensions shared by every variant.
struct ModelConfig {
    std::size_t subcarriers = 30;   // C
    std::size_t time_frames = 100;  // T
    std::size_t streams = 3;        // S
    std::size_t classes = 5;        // K

    std::size_t feature_dim = 64;  // D
    std::size_t out_time = 25;     // T'

    std::size_t subcarrier_ratio = 5;    // r_c
    std::size_t temporal_ratio = 10;     // r_t
    std::size_t subcarrier_hidden = 256;
    std::size_t temporal_hidden = 96;
    double fusion_init = 0.1;
    // init gain of the temporal encoder; see AttentionPathParams::init
    double temporal_path_gain = 8.0;

    // comparison attention modules, widths sized for comparable budgets
    std::size_t se_hidden = 560;
    std::size_t cbam_channel_hidden = 300;
    std::size_t cbam_temporal_hidden = 96;

    std::size_t lstm_layers = 1;
    std::size_t lstm_hidden = 32;

    std::size_t input_channels() const { return subcarriers * streams * 2; }
    void validate() const;  // throws std::invalid_argument naming the bad field
};

// depthwise k3 + pointwise + ReLU + temporal stride-s down-sampling
struct DsBlockParams {
    Tensor dw_kernel;  // [in_channels, 3]
    Tensor dw_bias;    // [in_channels]
    Tensor pw_weight;  // [in_channels, out_channels]
    Tensor pw_bias;    // [out_channels]
    std::size_t stride = 2;

    static DsBlockParams init(std::size_t in_channels, std::size_t out_channels,
                              std::size_t stride, RandomStream& rng);
    std::vector<Tensor> parameters() const;
};

struct EncoderParams {
    DsBlockParams block1;
    DsBlockParams block2;

    static EncoderParams init(const ModelConfig& cfg, std::size_t stride1, std::size_t stride2,
                              RandomStream& rng);
    std::vector<Tensor> parameters() const;
};

struct VdanParams {
    AttentionPathParams subcarrier_path;
    AttentionPathParams temporal_path;
    Tensor alpha;  // fusion scale of the subcarrier-recalibrated tensor
    Tensor beta;   // fusion scale of the time-recalibrated tensor
    EncoderParams encoder;

    // variational == false builds the dual-deterministic flavour
    static VdanParams init(const ModelConfig& cfg, bool variational, RandomStream& rng);
    std::vector<Tensor> parameters() const;
    std::size_t parameter_count() const;
};

// Eq. 1 style global descriptors: mean over every axis except the kept one
// (the real/imag axis is pooled together with time and streams).
Tensor subcarrier_descriptor(Tape* tape, const Tensor& x);  // [C,T,S,2] -> [C]
Tensor time_descriptor(Tape* tape, const Tensor& x);        // [C,T,S,2] -> [T]

enum class RecalAxis { kSubcarrier, kTime };

// weights broadcast along the chosen axis, elementwise multiplied into x
Tensor recalibrate(Tape* tape, const Tensor& x, const Tensor& weights, RecalAxis axis);

// X + alpha * x_c + beta * x_t
Tensor fuse(Tape* tape, const Tensor& x, const Tensor& x_c, const Tensor& x_t,
            const Tensor& alpha, const Tensor& beta);

Tensor ds_block(Tape* tape, const Tensor& x, const DsBlockParams& block);

// [C,T,S,2] -> channels (C*S*2) x T -> two blocks -> [D, T']
Tensor encode(Tape* tape, const Tensor& x_fused, const EncoderParams& encoder,
              const ModelConfig& cfg);

struct VdanForward {
    Tensor features;  // [D, T']
    Tensor kl_c;      // scalar, zero constant for deterministic paths
    Tensor kl_t;
    Tensor w_c;  // [C]
    Tensor w_t;  // [T]
};

VdanForward vdan_forward(Tape* tape, const Tensor& x, const VdanParams& params,
                         const ModelConfig& cfg, RunMode mode, std::uint64_t eps_seed);

}  // namespace vdan
