#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vdan/classifier.hpp"
#include "vdan/csi.hpp"
#include "vdan/vdan.hpp"

namespace vdan {

enum class VariantKind {
    kBaseline,   // no attention, encode raw X
    kSapOnly,    // subcarrier path only
    kTapOnly,    // temporal path only
    kDualDet,    // both paths, deterministic mappings, no KL
    kSeStyle,    // squeeze-excitation style channel reweighting over C
    kCbamStyle,  // channel attention followed by temporal attention
    kFullVdan,
};

std::string variant_name(VariantKind kind);
VariantKind parse_variant(const std::string& name);  // baseline|sap|tap|dual-det|se|cbam|vdan
std::vector<VariantKind> all_variants();

// Deterministic squeeze-style attention MLP: descriptor -> hidden -> sigmoid.
struct SqueezeParams {
    Tensor w1, b1, w2, b2;
    static SqueezeParams init(std::size_t dim, std::size_t hidden, RandomStream& rng);
    std::vector<Tensor> parameters() const;
};

struct ForwardOut {
    Tensor features;  // [D, T']
    Tensor kl_c;      // scalar; exact zero constant when no variational path
    Tensor kl_t;
    Tensor w_c;  // defined when the variant produces subcarrier weights
    Tensor w_t;  // defined when the variant produces temporal weights
};

// One preprocessing-variant + classifier bundle. Built by build_variant();
// which optional members exist depends on the kind.
struct Model {
    VariantKind kind = VariantKind::kBaseline;
    ModelConfig config;

    std::optional<VdanParams> dual;               // kFullVdan (variational), kDualDet
    std::optional<AttentionPathParams> single;    // kSapOnly / kTapOnly
    Tensor single_alpha;                          //   their fusion scalar
    std::optional<EncoderParams> encoder;         // every kind except the dual ones
    Tensor tap_tail_w, tap_tail_b;                // kTapOnly trailing 1x1 conv
    std::optional<SqueezeParams> channel_att;     // kSeStyle, kCbamStyle
    std::optional<SqueezeParams> temporal_att;    // kCbamStyle
    ClassifierParams classifier;

    ForwardOut forward(Tape* tape, const Tensor& x, RunMode mode, std::uint64_t eps_seed) const;

    struct LogitsOut {
        Tensor logits;
        ForwardOut preprocess;
    };
    LogitsOut logits(Tape* tape, const Tensor& x, RunMode mode, std::uint64_t eps_seed) const;

    std::size_t predict(const CsiSample& sample) const;  // INFER argmax

    std::vector<Tensor> parameters() const;
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    std::size_t parameter_count() const;
    // parameters beyond the plain encode-raw-X baseline with the same config
    std::size_t extra_parameter_count() const;
};

Model build_variant(VariantKind kind, const ModelConfig& config, std::uint64_t init_seed);

}  // namespace vdan
