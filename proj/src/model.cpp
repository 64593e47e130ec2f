#include "vdan/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vdan {

std::string variant_name(VariantKind kind) {
    switch (kind) {
        case VariantKind::kBaseline: return "baseline";
        case VariantKind::kSapOnly: return "sap";
        case VariantKind::kTapOnly: return "tap";
        case VariantKind::kDualDet: return "dual-det";
        case VariantKind::kSeStyle: return "se";
        case VariantKind::kCbamStyle: return "cbam";
        case VariantKind::kFullVdan: return "vdan";
    }
    throw std::invalid_argument("variant_name: unknown kind");
}

VariantKind parse_variant(const std::string& name) {
    for (VariantKind kind : all_variants()) {
        if (variant_name(kind) == name) return kind;
    }
    throw std::invalid_argument("unknown variant '" + name +
                                "' (expected baseline|sap|tap|dual-det|se|cbam|vdan)");
}

std::vector<VariantKind> all_variants() {
    return {VariantKind::kBaseline, VariantKind::kSapOnly,  VariantKind::kTapOnly,
            VariantKind::kDualDet,  VariantKind::kSeStyle,  VariantKind::kCbamStyle,
            VariantKind::kFullVdan};
}

namespace {

Tensor glorot_matrix(std::size_t fan_in, std::size_t fan_out, RandomStream& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w = Tensor::zeros({fan_in, fan_out}, true);
    for (double& v : w.data()) v = rng.uniform(-limit, limit);
    return w;
}

Tensor squeeze_forward(Tape* tape, const Tensor& descriptor, const SqueezeParams& p) {
    Tensor h = relu(tape, affine(tape, descriptor, p.w1, p.b1));
    return sigmoid(tape, affine(tape, h, p.w2, p.b2));
}

Tensor zero_scalar() { return Tensor::scalar(0.0); }

// [D, 2m] -> [D, m] by averaging adjacent pairs
Tensor temporal_pair_mean(Tape* tape, const Tensor& x) {
    const std::size_t d = x.shape()[0];
    const std::size_t t = x.shape()[1];
    Tensor grouped = reshape(tape, x, {d, t / 2, 2});
    return reduce_mean(tape, grouped, {2});
}

}  // namespace

SqueezeParams SqueezeParams::init(std::size_t dim, std::size_t hidden, RandomStream& rng) {
    SqueezeParams p;
    p.w1 = glorot_matrix(dim, hidden, rng);
    p.b1 = Tensor::zeros({hidden}, true);
    p.w2 = glorot_matrix(hidden, dim, rng);
    p.b2 = Tensor::zeros({dim}, true);
    return p;
}

std::vector<Tensor> SqueezeParams::parameters() const { return {w1, b1, w2, b2}; }

Model build_variant(VariantKind kind, const ModelConfig& config, std::uint64_t init_seed) {
    config.validate();
    RandomStream rng(mix_seed(init_seed, 0xB0 + static_cast<std::uint64_t>(kind)));

    Model m;
    m.kind = kind;
    m.config = config;

    switch (kind) {
        case VariantKind::kFullVdan:
            m.dual = VdanParams::init(config, /*variational=*/true, rng);
            break;
        case VariantKind::kDualDet:
            m.dual = VdanParams::init(config, /*variational=*/false, rng);
            break;
        case VariantKind::kSapOnly:
            m.single = AttentionPathParams::init(config.subcarriers, config.subcarrier_ratio,
                                                 config.subcarrier_hidden, true, rng);
            m.single_alpha = Tensor::scalar(config.fusion_init, true);
            // strides (2, 1): the missing halving comes from a trailing
            // temporal mean-pool over adjacent pairs
            m.encoder = EncoderParams::init(config, 2, 1, rng);
            break;
        case VariantKind::kTapOnly:
            m.single = AttentionPathParams::init(config.time_frames, config.temporal_ratio,
                                                 config.temporal_hidden, true, rng,
                                                 config.temporal_path_gain);
            m.single_alpha = Tensor::scalar(config.fusion_init, true);
            m.encoder = EncoderParams::init(config, 2, 2, rng);
            // trailing 1x1 conv keeps the declared output contract
            m.tap_tail_w = glorot_matrix(config.feature_dim, config.feature_dim, rng);
            m.tap_tail_b = Tensor::zeros({config.feature_dim}, true);
            break;
        case VariantKind::kSeStyle:
            m.channel_att = SqueezeParams::init(config.subcarriers, config.se_hidden, rng);
            m.encoder = EncoderParams::init(config, 2, 2, rng);
            break;
        case VariantKind::kCbamStyle:
            m.channel_att = SqueezeParams::init(config.subcarriers, config.cbam_channel_hidden, rng);
            m.temporal_att = SqueezeParams::init(config.time_frames, config.cbam_temporal_hidden, rng);
            m.encoder = EncoderParams::init(config, 2, 2, rng);
            break;
        case VariantKind::kBaseline:
            m.encoder = EncoderParams::init(config, 2, 2, rng);
            break;
    }

    m.classifier = ClassifierParams::init(config.feature_dim, config.lstm_hidden,
                                          config.lstm_layers, config.classes, rng);
    return m;
}

ForwardOut Model::forward(Tape* tape, const Tensor& x, RunMode mode,
                          std::uint64_t eps_seed) const {
    ForwardOut out;
    out.kl_c = zero_scalar();
    out.kl_t = zero_scalar();

    switch (kind) {
        case VariantKind::kFullVdan:
        case VariantKind::kDualDet: {
            VdanForward f = vdan_forward(tape, x, *dual, config, mode, eps_seed);
            out.features = f.features;
            out.kl_c = f.kl_c;
            out.kl_t = f.kl_t;
            out.w_c = f.w_c;
            out.w_t = f.w_t;
            return out;
        }
        case VariantKind::kSapOnly: {
            Tensor d_c = subcarrier_descriptor(tape, x);
            PathOutput sap = variational_weights(tape, d_c, *single, mode, mix_seed(eps_seed, 0xC0));
            out.w_c = sap.weights;
            out.kl_c = kl_divergence(tape, sap.posterior);
            Tensor x_c = recalibrate(tape, x, out.w_c, RecalAxis::kSubcarrier);
            Tensor fused = add(tape, x, mul_scalar(tape, x_c, single_alpha));
            // strides (2, 1) leave [D, T/2]; pool pairs down to T'
            Tensor seq = encode(tape, fused, *encoder,
                                [this] { ModelConfig c = config; c.out_time = 2 * c.out_time; return c; }());
            out.features = temporal_pair_mean(tape, seq);
            return out;
        }
        case VariantKind::kTapOnly: {
            Tensor d_t = time_descriptor(tape, x);
            PathOutput tap = variational_weights(tape, d_t, *single, mode, mix_seed(eps_seed, 0xC1));
            out.w_t = tap.weights;
            out.kl_t = kl_divergence(tape, tap.posterior);
            Tensor x_t = recalibrate(tape, x, out.w_t, RecalAxis::kTime);
            Tensor fused = add(tape, x, mul_scalar(tape, x_t, single_alpha));
            Tensor seq = encode(tape, fused, *encoder, config);
            out.features = pointwise_conv1d(tape, seq, tap_tail_w, tap_tail_b);
            return out;
        }
        case VariantKind::kSeStyle: {
            Tensor d_c = subcarrier_descriptor(tape, x);
            out.w_c = squeeze_forward(tape, d_c, *channel_att);
            Tensor re = recalibrate(tape, x, out.w_c, RecalAxis::kSubcarrier);
            out.features = encode(tape, re, *encoder, config);
            return out;
        }
        case VariantKind::kCbamStyle: {
            Tensor d_c = subcarrier_descriptor(tape, x);
            out.w_c = squeeze_forward(tape, d_c, *channel_att);
            Tensor stage1 = recalibrate(tape, x, out.w_c, RecalAxis::kSubcarrier);
            Tensor d_t = time_descriptor(tape, stage1);
            out.w_t = squeeze_forward(tape, d_t, *temporal_att);
            Tensor stage2 = recalibrate(tape, stage1, out.w_t, RecalAxis::kTime);
            out.features = encode(tape, stage2, *encoder, config);
            return out;
        }
        case VariantKind::kBaseline: {
            out.features = encode(tape, x, *encoder, config);
            return out;
        }
    }
    throw std::invalid_argument("Model::forward: unknown variant kind");
}

Model::LogitsOut Model::logits(Tape* tape, const Tensor& x, RunMode mode,
                               std::uint64_t eps_seed) const {
    LogitsOut out;
    out.preprocess = forward(tape, x, mode, eps_seed);
    out.logits = classify(tape, out.preprocess.features, classifier);
    return out;
}

std::size_t Model::predict(const CsiSample& sample) const {
    Tensor l = logits(nullptr, sample.data, RunMode::kInfer, 0).logits;
    auto d = l.data();
    return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

std::vector<std::pair<std::string, Tensor>> Model::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    auto push_path = [&out](const std::string& prefix, const AttentionPathParams& p) {
        out.emplace_back(prefix + ".enc_w1", p.enc_w1);
        out.emplace_back(prefix + ".enc_b1", p.enc_b1);
        out.emplace_back(prefix + ".mu_w", p.mu_w);
        out.emplace_back(prefix + ".mu_b", p.mu_b);
        if (p.variational) {
            out.emplace_back(prefix + ".logvar_w", p.logvar_w);
            out.emplace_back(prefix + ".logvar_b", p.logvar_b);
        }
        out.emplace_back(prefix + ".dec_w1", p.dec_w1);
        out.emplace_back(prefix + ".dec_b1", p.dec_b1);
        out.emplace_back(prefix + ".dec_w2", p.dec_w2);
        out.emplace_back(prefix + ".dec_b2", p.dec_b2);
    };
    auto push_encoder = [&out](const std::string& prefix, const EncoderParams& e) {
        out.emplace_back(prefix + ".block1.dw_kernel", e.block1.dw_kernel);
        out.emplace_back(prefix + ".block1.dw_bias", e.block1.dw_bias);
        out.emplace_back(prefix + ".block1.pw_weight", e.block1.pw_weight);
        out.emplace_back(prefix + ".block1.pw_bias", e.block1.pw_bias);
        out.emplace_back(prefix + ".block2.dw_kernel", e.block2.dw_kernel);
        out.emplace_back(prefix + ".block2.dw_bias", e.block2.dw_bias);
        out.emplace_back(prefix + ".block2.pw_weight", e.block2.pw_weight);
        out.emplace_back(prefix + ".block2.pw_bias", e.block2.pw_bias);
    };
    auto push_squeeze = [&out](const std::string& prefix, const SqueezeParams& s) {
        out.emplace_back(prefix + ".w1", s.w1);
        out.emplace_back(prefix + ".b1", s.b1);
        out.emplace_back(prefix + ".w2", s.w2);
        out.emplace_back(prefix + ".b2", s.b2);
    };

    if (dual) {
        push_path("sap", dual->subcarrier_path);
        push_path("tap", dual->temporal_path);
        out.emplace_back("fusion.alpha", dual->alpha);
        out.emplace_back("fusion.beta", dual->beta);
        push_encoder("encoder", dual->encoder);
    }
    if (single) {
        push_path(kind == VariantKind::kSapOnly ? "sap" : "tap", *single);
        out.emplace_back("fusion.alpha", single_alpha);
    }
    if (channel_att) push_squeeze("channel_att", *channel_att);
    if (temporal_att) push_squeeze("temporal_att", *temporal_att);
    if (encoder) push_encoder("encoder", *encoder);
    if (tap_tail_w.defined()) {
        out.emplace_back("tap_tail.w", tap_tail_w);
        out.emplace_back("tap_tail.b", tap_tail_b);
    }
    for (std::size_t l = 0; l < classifier.layers.size(); ++l) {
        const LstmLayerParams& lay = classifier.layers[l];
        const std::string prefix = "classifier.layer" + std::to_string(l);
        out.emplace_back(prefix + ".wx_fwd", lay.wx_fwd);
        out.emplace_back(prefix + ".wh_fwd", lay.wh_fwd);
        out.emplace_back(prefix + ".b_fwd", lay.b_fwd);
        out.emplace_back(prefix + ".wx_bwd", lay.wx_bwd);
        out.emplace_back(prefix + ".wh_bwd", lay.wh_bwd);
        out.emplace_back(prefix + ".b_bwd", lay.b_bwd);
    }
    out.emplace_back("classifier.head_w", classifier.head_w);
    out.emplace_back("classifier.head_b", classifier.head_b);
    return out;
}

std::vector<Tensor> Model::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor& t : parameters()) n += t.numel();
    return n;
}

std::size_t Model::extra_parameter_count() const {
    const Model baseline = build_variant(VariantKind::kBaseline, config, 0);
    return parameter_count() - baseline.parameter_count();
}

}  // namespace vdan
