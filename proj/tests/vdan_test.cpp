#include <doctest.h>

#include <cmath>
#include <vector>

#include "vdan/rng.hpp"
#include "vdan/vdan.hpp"

using namespace vdan;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.subcarriers = 8;
    cfg.time_frames = 16;
    cfg.streams = 2;
    cfg.classes = 3;
    cfg.feature_dim = 8;
    cfg.out_time = 4;
    cfg.subcarrier_hidden = 8;
    cfg.temporal_hidden = 8;
    cfg.lstm_hidden = 4;
    return cfg;
}

Tensor random_input(const ModelConfig& cfg, std::uint64_t seed) {
    RandomStream rng(seed);
    Tensor x = Tensor::zeros({cfg.subcarriers, cfg.time_frames, cfg.streams, 2});
    for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
    return x;
}

}  // namespace

TEST_CASE("descriptors: constant tensors give constant vectors") {
    Tensor x = Tensor::full({4, 6, 2, 2}, -2.5);
    Tensor dc = subcarrier_descriptor(nullptr, x);
    Tensor dt = time_descriptor(nullptr, x);
    REQUIRE(dc.shape() == Shape{4});
    REQUIRE(dt.shape() == Shape{6});
    for (double v : dc.data()) CHECK(v == -2.5);
    for (double v : dt.data()) CHECK(v == -2.5);
}

TEST_CASE("subcarrier descriptor against a four-term loop oracle") {
    // C=2, T=2, S=1: descriptor(i) = mean of the four values at subcarrier i
    Tensor x = Tensor::from({2, 2, 1, 2}, {1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 2.5, -2.0});
    Tensor dc = subcarrier_descriptor(nullptr, x);
    CHECK(std::abs(dc.data()[0] - (1.0 + 2.0 + 3.0 + 4.0) / 4.0) <= 1e-12);
    CHECK(std::abs(dc.data()[1] - (-1.0 + 0.5 + 2.5 - 2.0) / 4.0) <= 1e-12);

    Tensor dt = time_descriptor(nullptr, x);
    CHECK(std::abs(dt.data()[0] - (1.0 + 2.0 - 1.0 + 0.5) / 4.0) <= 1e-12);
    CHECK(std::abs(dt.data()[1] - (3.0 + 4.0 + 2.5 - 2.0) / 4.0) <= 1e-12);
}

TEST_CASE("descriptors are homogeneous under scaling") {
    ModelConfig cfg = tiny_config();
    Tensor x = random_input(cfg, 5);
    Tensor scaled = scale_const(nullptr, x, 3.5);
    Tensor dc = subcarrier_descriptor(nullptr, x);
    Tensor dcs = subcarrier_descriptor(nullptr, scaled);
    for (std::size_t i = 0; i < dc.numel(); ++i) {
        CHECK(dcs.data()[i] == doctest::Approx(3.5 * dc.data()[i]).epsilon(1e-12));
    }
    Tensor dts = time_descriptor(nullptr, scaled);
    Tensor dt = time_descriptor(nullptr, x);
    for (std::size_t i = 0; i < dt.numel(); ++i) {
        CHECK(dts.data()[i] == doctest::Approx(3.5 * dt.data()[i]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(subcarrier_descriptor(nullptr, Tensor::zeros({2, 2})), std::invalid_argument);
}

TEST_CASE("recalibrate: identity, zero, and loop oracle") {
    ModelConfig cfg = tiny_config();
    Tensor x = random_input(cfg, 6);

    Tensor ones = Tensor::full({cfg.subcarriers}, 1.0);
    Tensor same = recalibrate(nullptr, x, ones, RecalAxis::kSubcarrier);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(same.data()[i] == x.data()[i]);

    Tensor zeros = Tensor::zeros({cfg.time_frames});
    Tensor none = recalibrate(nullptr, x, zeros, RecalAxis::kTime);
    for (double v : none.data()) CHECK(v == 0.0);

    RandomStream rng(7);
    Tensor w = Tensor::zeros({cfg.time_frames});
    for (double& v : w.data()) v = rng.uniform(0.0, 1.0);
    Tensor y = recalibrate(nullptr, x, w, RecalAxis::kTime);
    const std::size_t C = cfg.subcarriers, T = cfg.time_frames, S = cfg.streams;
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t s = 0; s < S; ++s) {
                for (std::size_t p = 0; p < 2; ++p) {
                    const std::size_t idx = (((c * T) + t) * S + s) * 2 + p;
                    CHECK(std::abs(y.data()[idx] - x.data()[idx] * w.data()[t]) <= 1e-12);
                }
            }
        }
    }
    CHECK_THROWS_AS(recalibrate(nullptr, x, Tensor::zeros({3}), RecalAxis::kSubcarrier),
                    std::invalid_argument);
}

TEST_CASE("fuse: residual identities and formula oracle") {
    ModelConfig cfg = tiny_config();
    Tensor x = random_input(cfg, 8);
    Tensor xc = random_input(cfg, 9);
    Tensor xt = random_input(cfg, 10);

    Tensor zero = Tensor::scalar(0.0);
    Tensor fused0 = fuse(nullptr, x, xc, xt, zero, zero);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(fused0.data()[i] == x.data()[i]);

    Tensor one = Tensor::scalar(1.0);
    Tensor doubled = fuse(nullptr, x, x, xt, one, zero);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        CHECK(doubled.data()[i] == doctest::Approx(2.0 * x.data()[i]).epsilon(1e-15));
    }

    Tensor alpha = Tensor::scalar(0.37);
    Tensor beta = Tensor::scalar(-0.81);
    Tensor fused = fuse(nullptr, x, xc, xt, alpha, beta);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double expect = x.data()[i] + 0.37 * xc.data()[i] - 0.81 * xt.data()[i];
        CHECK(std::abs(fused.data()[i] - expect) <= 1e-12);
    }
    CHECK_THROWS_AS(fuse(nullptr, x, xc, Tensor::zeros({2, 2, 2, 2}), alpha, beta),
                    std::invalid_argument);
}

TEST_CASE("fuse is linear in all three tensors for fixed alpha, beta") {
    ModelConfig cfg = tiny_config();
    Tensor x = random_input(cfg, 11);
    Tensor xc = random_input(cfg, 12);
    Tensor xt = random_input(cfg, 13);
    Tensor alpha = Tensor::scalar(0.1);
    Tensor beta = Tensor::scalar(0.2);
    const double a = 2.75;
    Tensor lhs = fuse(nullptr, scale_const(nullptr, x, a), scale_const(nullptr, xc, a),
                      scale_const(nullptr, xt, a), alpha, beta);
    Tensor rhs = scale_const(nullptr, fuse(nullptr, x, xc, xt, alpha, beta), a);
    for (std::size_t i = 0; i < lhs.numel(); ++i) {
        CHECK(lhs.data()[i] == doctest::Approx(rhs.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("encoder maps the default geometry to 64 x 25") {
    ModelConfig cfg;  // defaults: C=30, T=100, S=3, D=64, T'=25
    RandomStream rng(14);
    EncoderParams enc = EncoderParams::init(cfg, 2, 2, rng);
    Tensor x = Tensor::zeros({cfg.subcarriers, cfg.time_frames, cfg.streams, 2});
    for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
    Tensor f = encode(nullptr, x, enc, cfg);
    CHECK(f.shape() == Shape{64, 25});
}

TEST_CASE("encoder: zero input with zero biases gives zero output") {
    ModelConfig cfg = tiny_config();
    RandomStream rng(15);
    EncoderParams enc = EncoderParams::init(cfg, 2, 2, rng);
    for (Tensor t : {enc.block1.dw_bias, enc.block1.pw_bias, enc.block2.dw_bias,
                     enc.block2.pw_bias}) {
        for (double& v : t.data()) v = 0.0;
    }
    Tensor x = Tensor::zeros({cfg.subcarriers, cfg.time_frames, cfg.streams, 2});
    Tensor f = encode(nullptr, x, enc, cfg);
    for (double v : f.data()) CHECK(v == 0.0);
}

TEST_CASE("encoder rejects strides that cannot reach T-prime") {
    ModelConfig cfg = tiny_config();
    RandomStream rng(16);
    EncoderParams enc = EncoderParams::init(cfg, 2, 1, rng);  // reach 2, needs 4
    Tensor x = Tensor::zeros({cfg.subcarriers, cfg.time_frames, cfg.streams, 2});
    CHECK_THROWS_AS(encode(nullptr, x, enc, cfg), std::invalid_argument);

    ModelConfig bad = tiny_config();
    bad.time_frames = 18;  // not divisible by 4
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("time_frames"), std::invalid_argument);
}

TEST_CASE("depthwise separable block undercuts a full convolution's parameter count") {
    const std::size_t cin = 180, cout = 64, k = 3;
    const std::size_t separable = cin * k + cin + cin * cout + cout;
    const std::size_t full = cin * cout * k + cout;
    CHECK(separable < full);

    ModelConfig cfg;
    RandomStream rng(17);
    DsBlockParams block = DsBlockParams::init(cin, cout, 2, rng);
    std::size_t actual = 0;
    for (const Tensor& t : block.parameters()) actual += t.numel();
    CHECK(actual == separable);
}

TEST_CASE("vdan_forward: inference determinism and weight exposure") {
    ModelConfig cfg = tiny_config();
    RandomStream rng(18);
    VdanParams params = VdanParams::init(cfg, true, rng);
    Tensor x = random_input(cfg, 19);

    VdanForward a = vdan_forward(nullptr, x, params, cfg, RunMode::kInfer, 1);
    VdanForward b = vdan_forward(nullptr, x, params, cfg, RunMode::kInfer, 2);
    REQUIRE(a.features.shape() == Shape{cfg.feature_dim, cfg.out_time});
    for (std::size_t i = 0; i < a.features.numel(); ++i) {
        CHECK(a.features.data()[i] == b.features.data()[i]);  // eps seed has no effect
    }
    for (double w : a.w_c.data()) {
        CHECK(w > 0.0);
        CHECK(w < 1.0);
    }
    CHECK(a.w_t.numel() == cfg.time_frames);
    CHECK(a.kl_c.value() >= 0.0);
    CHECK(a.kl_t.value() >= 0.0);
}

TEST_CASE("vdan_forward with weights forced to 0.5 equals encode(1.1 x)") {
    ModelConfig cfg = tiny_config();
    RandomStream rng(20);
    VdanParams params = VdanParams::init(cfg, true, rng);
    // force both decoders to output exactly sigmoid(0) = 0.5 everywhere
    for (Tensor t : {params.subcarrier_path.dec_w2, params.subcarrier_path.dec_b2,
                     params.temporal_path.dec_w2, params.temporal_path.dec_b2}) {
        for (double& v : t.data()) v = 0.0;
    }
    REQUIRE(params.alpha.value() == 0.1);
    REQUIRE(params.beta.value() == 0.1);

    Tensor x = random_input(cfg, 21);
    VdanForward out = vdan_forward(nullptr, x, params, cfg, RunMode::kInfer, 0);
    for (double w : out.w_c.data()) CHECK(w == 0.5);
    for (double w : out.w_t.data()) CHECK(w == 0.5);

    // X + 0.1*(0.5 X) + 0.1*(0.5 X) = 1.1 X
    Tensor expected = encode(nullptr, scale_const(nullptr, x, 1.1), params.encoder, cfg);
    for (std::size_t i = 0; i < expected.numel(); ++i) {
        CHECK(out.features.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("full pipeline gradient check with frozen epsilon") {
    ModelConfig cfg = tiny_config();
    RandomStream rng(22);
    VdanParams params = VdanParams::init(cfg, true, rng);
    Tensor x = random_input(cfg, 23);
    const std::uint64_t eps_seed = 99;
    auto loss = [&](Tape& tape) {
        VdanForward out = vdan_forward(&tape, x, params, cfg, RunMode::kTrain, eps_seed);
        Tensor feat = reduce_sum(&tape, tanh(&tape, out.features), {0, 1});
        Tensor kl = add(&tape, out.kl_c, out.kl_t);
        return add(&tape, feat, scale_const(&tape, kl, 0.05));
    };
    CHECK(grad_check(loss, params.parameters(), 3e-4) < 1e-4);
}

TEST_CASE("fusion scalars start at exactly 0.1") {
    ModelConfig cfg = tiny_config();
    RandomStream rng(24);
    VdanParams params = VdanParams::init(cfg, true, rng);
    CHECK(params.alpha.value() == 0.1);
    CHECK(params.beta.value() == 0.1);
}
