#include "vdan/vdan.hpp"

#include <cmath>
#include <stdexcept>

namespace vdan {

void ModelConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw std::invalid_argument("ModelConfig." + field + ": " + why);
    };
    if (subcarriers == 0) fail("subcarriers", "must be positive");
    if (time_frames == 0) fail("time_frames", "must be positive");
    if (streams == 0) fail("streams", "must be positive");
    if (classes < 2) fail("classes", "need at least two classes");
    if (feature_dim == 0) fail("feature_dim", "must be positive");
    if (out_time == 0) fail("out_time", "must be positive");
    // two stride-2 blocks: the temporal length must divide down exactly
    if (time_frames % 4 != 0) fail("time_frames", "must be divisible by 4");
    if (time_frames != 4 * out_time)
        fail("out_time", "encoder strides (2, 2) require time_frames == 4 * out_time");
    if (subcarrier_ratio == 0) fail("subcarrier_ratio", "must be positive");
    if (temporal_ratio == 0) fail("temporal_ratio", "must be positive");
    if (subcarrier_hidden == 0) fail("subcarrier_hidden", "must be positive");
    if (temporal_hidden == 0) fail("temporal_hidden", "must be positive");
    if (se_hidden == 0) fail("se_hidden", "must be positive");
    if (cbam_channel_hidden == 0) fail("cbam_channel_hidden", "must be positive");
    if (cbam_temporal_hidden == 0) fail("cbam_temporal_hidden", "must be positive");
    if (lstm_layers == 0) fail("lstm_layers", "must be positive");
    if (lstm_hidden == 0) fail("lstm_hidden", "must be positive");
}

namespace {

Tensor glorot_matrix(std::size_t fan_in, std::size_t fan_out, Shape shape, RandomStream& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w = Tensor::zeros(std::move(shape), true);
    for (double& v : w.data()) v = rng.uniform(-limit, limit);
    return w;
}

void check_input(const Tensor& x, const char* who) {
    if (x.rank() != 4 || x.shape()[3] != 2) {
        throw std::invalid_argument(std::string(who) + ": expected [C,T,S,2], got " +
                                    shape_str(x.shape()));
    }
}

}  // namespace

DsBlockParams DsBlockParams::init(std::size_t in_channels, std::size_t out_channels,
                                  std::size_t stride, RandomStream& rng) {
    DsBlockParams b;
    b.stride = stride;
    b.dw_kernel = glorot_matrix(3, 3, {in_channels, 3}, rng);
    b.dw_bias = Tensor::zeros({in_channels}, true);
    b.pw_weight = glorot_matrix(in_channels, out_channels, {in_channels, out_channels}, rng);
    b.pw_bias = Tensor::zeros({out_channels}, true);
    return b;
}

std::vector<Tensor> DsBlockParams::parameters() const {
    return {dw_kernel, dw_bias, pw_weight, pw_bias};
}

EncoderParams EncoderParams::init(const ModelConfig& cfg, std::size_t stride1,
                                  std::size_t stride2, RandomStream& rng) {
    EncoderParams e;
    e.block1 = DsBlockParams::init(cfg.input_channels(), cfg.feature_dim, stride1, rng);
    e.block2 = DsBlockParams::init(cfg.feature_dim, cfg.feature_dim, stride2, rng);
    return e;
}

std::vector<Tensor> EncoderParams::parameters() const {
    std::vector<Tensor> out = block1.parameters();
    for (Tensor& t : block2.parameters()) out.push_back(t);
    return out;
}

VdanParams VdanParams::init(const ModelConfig& cfg, bool variational, RandomStream& rng) {
    VdanParams p;
    p.subcarrier_path = AttentionPathParams::init(cfg.subcarriers, cfg.subcarrier_ratio,
                                                  cfg.subcarrier_hidden, variational, rng);
    p.temporal_path = AttentionPathParams::init(cfg.time_frames, cfg.temporal_ratio,
                                                cfg.temporal_hidden, variational, rng,
                                                cfg.temporal_path_gain);
    p.alpha = Tensor::scalar(cfg.fusion_init, true);
    p.beta = Tensor::scalar(cfg.fusion_init, true);
    p.encoder = EncoderParams::init(cfg, 2, 2, rng);
    return p;
}

std::vector<Tensor> VdanParams::parameters() const {
    std::vector<Tensor> out = subcarrier_path.parameters();
    for (Tensor& t : temporal_path.parameters()) out.push_back(t);
    out.push_back(alpha);
    out.push_back(beta);
    for (Tensor& t : encoder.parameters()) out.push_back(t);
    return out;
}

std::size_t VdanParams::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor& t : parameters()) n += t.numel();
    return n;
}

Tensor subcarrier_descriptor(Tape* tape, const Tensor& x) {
    check_input(x, "subcarrier_descriptor");
    return reduce_mean(tape, x, {1, 2, 3});
}

Tensor time_descriptor(Tape* tape, const Tensor& x) {
    check_input(x, "time_descriptor");
    return reduce_mean(tape, x, {0, 2, 3});
}

Tensor recalibrate(Tape* tape, const Tensor& x, const Tensor& weights, RecalAxis axis) {
    check_input(x, "recalibrate");
    const std::size_t ax = axis == RecalAxis::kSubcarrier ? 0 : 1;
    return scale_axis(tape, x, weights, ax);
}

Tensor fuse(Tape* tape, const Tensor& x, const Tensor& x_c, const Tensor& x_t,
            const Tensor& alpha, const Tensor& beta) {
    if (x.shape() != x_c.shape() || x.shape() != x_t.shape()) {
        throw std::invalid_argument("fuse: shape mismatch between residual and recalibrated tensors");
    }
    Tensor scaled_c = mul_scalar(tape, x_c, alpha);
    Tensor scaled_t = mul_scalar(tape, x_t, beta);
    return add(tape, x, add(tape, scaled_c, scaled_t));
}

Tensor ds_block(Tape* tape, const Tensor& x, const DsBlockParams& block) {
    Tensor y = depthwise_conv1d(tape, x, block.dw_kernel, block.dw_bias);
    y = pointwise_conv1d(tape, y, block.pw_weight, block.pw_bias);
    y = relu(tape, y);
    return downsample_time(tape, y, block.stride);
}

Tensor encode(Tape* tape, const Tensor& x_fused, const EncoderParams& encoder,
              const ModelConfig& cfg) {
    check_input(x_fused, "encode");
    const std::size_t t_len = x_fused.shape()[1];
    const std::size_t reach = encoder.block1.stride * encoder.block2.stride;
    if (t_len % reach != 0 || t_len / reach != cfg.out_time) {
        throw std::invalid_argument("encode: strides (" + std::to_string(encoder.block1.stride) +
                                    ", " + std::to_string(encoder.block2.stride) +
                                    ") cannot map T=" + std::to_string(t_len) +
                                    " to T'=" + std::to_string(cfg.out_time));
    }
    // [C,T,S,2] -> [C,S,2,T] -> [C*S*2, T]
    Tensor seq = permute(tape, x_fused, {0, 2, 3, 1});
    seq = reshape(tape, seq, {cfg.input_channels(), t_len});
    seq = ds_block(tape, seq, encoder.block1);
    return ds_block(tape, seq, encoder.block2);
}

VdanForward vdan_forward(Tape* tape, const Tensor& x, const VdanParams& params,
                         const ModelConfig& cfg, RunMode mode, std::uint64_t eps_seed) {
    check_input(x, "vdan_forward");
    VdanForward out;
    Tensor d_c = subcarrier_descriptor(tape, x);
    Tensor d_t = time_descriptor(tape, x);

    if (params.subcarrier_path.variational) {
        PathOutput sap = variational_weights(tape, d_c, params.subcarrier_path, mode,
                                             mix_seed(eps_seed, 0xC0));
        PathOutput tap = variational_weights(tape, d_t, params.temporal_path, mode,
                                             mix_seed(eps_seed, 0xC1));
        out.w_c = sap.weights;
        out.w_t = tap.weights;
        out.kl_c = kl_divergence(tape, sap.posterior);
        out.kl_t = kl_divergence(tape, tap.posterior);
    } else {
        out.w_c = deterministic_weights(tape, d_c, params.subcarrier_path);
        out.w_t = deterministic_weights(tape, d_t, params.temporal_path);
        out.kl_c = Tensor::scalar(0.0);
        out.kl_t = Tensor::scalar(0.0);
    }

    Tensor x_c = recalibrate(tape, x, out.w_c, RecalAxis::kSubcarrier);
    Tensor x_t = recalibrate(tape, x, out.w_t, RecalAxis::kTime);
    Tensor fused = fuse(tape, x, x_c, x_t, params.alpha, params.beta);
    out.features = encode(tape, fused, params.encoder, cfg);
    return out;
}

}  // namespace vdan
