#include <doctest.h>

#include <cmath>
#include <vector>

#include "vdan/classifier.hpp"
#include "vdan/rng.hpp"
#include "vdan/tensor.hpp"

using namespace vdan;

namespace {

double sigmoid_ref(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// plain-double unrolled recurrence for one direction, gates packed [i, f, g, o]
std::vector<double> unrolled_direction(const std::vector<std::vector<double>>& inputs,
                                       const Tensor& wx, const Tensor& wh, const Tensor& b,
                                       std::size_t hidden) {
    const std::size_t in_dim = inputs[0].size();
    std::vector<double> h(hidden, 0.0), c(hidden, 0.0);
    for (const auto& x : inputs) {
        std::vector<double> pre(4 * hidden, 0.0);
        for (std::size_t j = 0; j < 4 * hidden; ++j) pre[j] = b.data()[j];
        for (std::size_t i = 0; i < in_dim; ++i) {
            for (std::size_t j = 0; j < 4 * hidden; ++j) {
                pre[j] += x[i] * wx.data()[i * 4 * hidden + j];
            }
        }
        for (std::size_t i = 0; i < hidden; ++i) {
            for (std::size_t j = 0; j < 4 * hidden; ++j) {
                pre[j] += h[i] * wh.data()[i * 4 * hidden + j];
            }
        }
        std::vector<double> nh(hidden), nc(hidden);
        for (std::size_t u = 0; u < hidden; ++u) {
            const double ig = sigmoid_ref(pre[u]);
            const double fg = sigmoid_ref(pre[hidden + u]);
            const double gg = std::tanh(pre[2 * hidden + u]);
            const double og = sigmoid_ref(pre[3 * hidden + u]);
            nc[u] = fg * c[u] + ig * gg;
            nh[u] = og * std::tanh(nc[u]);
        }
        h = nh;
        c = nc;
    }
    return h;
}

Tensor random_features(std::size_t d, std::size_t t_len, std::uint64_t seed) {
    RandomStream rng(seed);
    Tensor f = Tensor::zeros({d, t_len});
    for (double& v : f.data()) v = rng.uniform(-1.0, 1.0);
    return f;
}

}  // namespace

TEST_CASE("classify returns finite logits of length K") {
    RandomStream rng(40);
    ClassifierParams params = ClassifierParams::init(64, 32, 1, 5, rng);
    Tensor f = random_features(64, 25, 41);
    Tensor logits = classify(nullptr, f, params);
    REQUIRE(logits.shape() == Shape{5});
    for (double v : logits.data()) CHECK(std::isfinite(v));
    CHECK_THROWS_AS(classify(nullptr, random_features(32, 25, 1), params), std::invalid_argument);
}

TEST_CASE("zero weights and biases give zero logits and CE = ln 5") {
    RandomStream rng(42);
    ClassifierParams params = ClassifierParams::init(8, 4, 1, 5, rng);
    for (Tensor& t : params.parameters()) {
        for (double& v : t.data()) v = 0.0;
    }
    Tensor f = random_features(8, 3, 43);
    Tensor logits = classify(nullptr, f, params);
    for (double v : logits.data()) CHECK(v == 0.0);
    const double ce = softmax_cross_entropy(nullptr, logits, 2).value();
    CHECK(ce == doctest::Approx(std::log(5.0)).epsilon(1e-12));
    CHECK(ce == doctest::Approx(1.6094379124341003).epsilon(1e-12));
}

TEST_CASE("single layer H=2 T'=3 against the hand-unrolled recurrence oracle") {
    RandomStream rng(44);
    const std::size_t d = 3, t_len = 3, hidden = 2;
    ClassifierParams params = ClassifierParams::init(d, hidden, 1, 4, rng);
    Tensor f = random_features(d, t_len, 45);

    std::vector<std::vector<double>> steps(t_len, std::vector<double>(d));
    for (std::size_t t = 0; t < t_len; ++t) {
        for (std::size_t i = 0; i < d; ++i) steps[t][i] = f.data()[i * t_len + t];
    }
    const LstmLayerParams& layer = params.layers[0];
    const std::vector<double> h_fwd =
        unrolled_direction(steps, layer.wx_fwd, layer.wh_fwd, layer.b_fwd, hidden);
    std::vector<std::vector<double>> reversed(steps.rbegin(), steps.rend());
    const std::vector<double> h_bwd =
        unrolled_direction(reversed, layer.wx_bwd, layer.wh_bwd, layer.b_bwd, hidden);

    BilstmOutput out = bilstm_layer(nullptr, permute(nullptr, f, {1, 0}), layer, false);
    for (std::size_t u = 0; u < hidden; ++u) {
        CHECK(std::abs(out.final_fwd.data()[u] - h_fwd[u]) <= 1e-10);
        CHECK(std::abs(out.final_bwd.data()[u] - h_bwd[u]) <= 1e-10);
    }

    // head consumes [final_fwd, final_bwd]
    Tensor logits = classify(nullptr, f, params);
    std::vector<double> joined = h_fwd;
    joined.insert(joined.end(), h_bwd.begin(), h_bwd.end());
    for (std::size_t k = 0; k < 4; ++k) {
        double expect = params.head_b.data()[k];
        for (std::size_t i = 0; i < joined.size(); ++i) {
            expect += joined[i] * params.head_w.data()[i * 4 + k];
        }
        CHECK(std::abs(logits.data()[k] - expect) <= 1e-10);
    }
}

TEST_CASE("reversing the sequence swaps the direction outputs") {
    RandomStream rng(46);
    const std::size_t d = 5, t_len = 7, hidden = 3;
    LstmLayerParams layer = LstmLayerParams::init(d, hidden, rng);
    // symmetric cell: both directions share weights so the swap is exact
    layer.wx_bwd = layer.wx_fwd;
    layer.wh_bwd = layer.wh_fwd;
    layer.b_bwd = layer.b_fwd;

    Tensor seq = random_features(t_len, d, 47);  // already [T', d]
    Tensor reversed = Tensor::zeros({t_len, d});
    for (std::size_t t = 0; t < t_len; ++t) {
        for (std::size_t i = 0; i < d; ++i) {
            reversed.data()[(t_len - 1 - t) * d + i] = seq.data()[t * d + i];
        }
    }
    BilstmOutput fwd = bilstm_layer(nullptr, seq, layer, false);
    BilstmOutput rev = bilstm_layer(nullptr, reversed, layer, false);
    for (std::size_t u = 0; u < hidden; ++u) {
        CHECK(fwd.final_fwd.data()[u] == doctest::Approx(rev.final_bwd.data()[u]).epsilon(1e-12));
        CHECK(fwd.final_bwd.data()[u] == doctest::Approx(rev.final_fwd.data()[u]).epsilon(1e-12));
    }
}

TEST_CASE("forget gate bias starts at one") {
    RandomStream rng(48);
    LstmLayerParams layer = LstmLayerParams::init(4, 3, rng);
    for (std::size_t u = 0; u < 3; ++u) {
        CHECK(layer.b_fwd.data()[u] == 0.0);            // input gate
        CHECK(layer.b_fwd.data()[3 + u] == 1.0);        // forget gate
        CHECK(layer.b_fwd.data()[2 * 3 + u] == 0.0);    // candidate
        CHECK(layer.b_fwd.data()[3 * 3 + u] == 0.0);    // output gate
    }
}

TEST_CASE("two stacked layers consume the per-step concatenation") {
    RandomStream rng(49);
    ClassifierParams params = ClassifierParams::init(6, 4, 2, 3, rng);
    CHECK(params.layers[0].input_dim == 6);
    CHECK(params.layers[1].input_dim == 8);
    Tensor f = random_features(6, 5, 50);
    Tensor logits = classify(nullptr, f, params);
    REQUIRE(logits.shape() == Shape{3});
    for (double v : logits.data()) CHECK(std::isfinite(v));
}

TEST_CASE("grad_check through the full classify path") {
    RandomStream rng(51);
    ClassifierParams params = ClassifierParams::init(4, 3, 1, 3, rng);
    Tensor f = random_features(4, 5, 52);
    f.set_requires_grad(true);
    auto loss = [&](Tape& tape) {
        Tensor logits = classify(&tape, f, params);
        return softmax_cross_entropy(&tape, logits, 1);
    };
    std::vector<Tensor> params_and_input = params.parameters();
    params_and_input.push_back(f);
    CHECK(grad_check(loss, params_and_input, 1e-4) < 1e-4);
}
