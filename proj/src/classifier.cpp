#include "vdan/classifier.hpp"

#include <cmath>
#include <stdexcept>

namespace vdan {

namespace {

Tensor glorot_matrix(std::size_t fan_in, std::size_t fan_out, RandomStream& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w = Tensor::zeros({fan_in, fan_out}, true);
    for (double& v : w.data()) v = rng.uniform(-limit, limit);
    return w;
}

Tensor gate_bias(std::size_t hidden, RandomStream&) {
    Tensor b = Tensor::zeros({4 * hidden}, true);
    auto d = b.data();
    for (std::size_t i = hidden; i < 2 * hidden; ++i) d[i] = 1.0;  // forget gate
    return b;
}

struct StepState {
    Tensor h;
    Tensor c;
};

// one gated step: i,f,o sigmoid, candidate tanh
StepState lstm_step(Tape* tape, const Tensor& x_t, const StepState& prev, const Tensor& wx,
                    const Tensor& wh, const Tensor& b, const Tensor& zero4h, std::size_t hidden) {
    Tensor pre = add(tape, affine(tape, x_t, wx, b), affine(tape, prev.h, wh, zero4h));
    Tensor i = sigmoid(tape, slice(tape, pre, 0, 0, hidden));
    Tensor f = sigmoid(tape, slice(tape, pre, 0, hidden, hidden));
    Tensor g = tanh(tape, slice(tape, pre, 0, 2 * hidden, hidden));
    Tensor o = sigmoid(tape, slice(tape, pre, 0, 3 * hidden, hidden));
    StepState next;
    next.c = add(tape, mul(tape, f, prev.c), mul(tape, i, g));
    next.h = mul(tape, o, tanh(tape, next.c));
    return next;
}

}  // namespace

LstmLayerParams LstmLayerParams::init(std::size_t input_dim, std::size_t hidden_dim,
                                      RandomStream& rng) {
    LstmLayerParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.wx_fwd = glorot_matrix(input_dim, 4 * hidden_dim, rng);
    p.wh_fwd = glorot_matrix(hidden_dim, 4 * hidden_dim, rng);
    p.b_fwd = gate_bias(hidden_dim, rng);
    p.wx_bwd = glorot_matrix(input_dim, 4 * hidden_dim, rng);
    p.wh_bwd = glorot_matrix(hidden_dim, 4 * hidden_dim, rng);
    p.b_bwd = gate_bias(hidden_dim, rng);
    return p;
}

std::vector<Tensor> LstmLayerParams::parameters() const {
    return {wx_fwd, wh_fwd, b_fwd, wx_bwd, wh_bwd, b_bwd};
}

ClassifierParams ClassifierParams::init(std::size_t input_dim, std::size_t hidden_dim,
                                        std::size_t num_layers, std::size_t classes,
                                        RandomStream& rng) {
    if (num_layers == 0) throw std::invalid_argument("ClassifierParams: need at least one layer");
    ClassifierParams p;
    std::size_t in = input_dim;
    for (std::size_t l = 0; l < num_layers; ++l) {
        p.layers.push_back(LstmLayerParams::init(in, hidden_dim, rng));
        in = 2 * hidden_dim;
    }
    p.head_w = glorot_matrix(2 * hidden_dim, classes, rng);
    p.head_b = Tensor::zeros({classes}, true);
    return p;
}

std::vector<Tensor> ClassifierParams::parameters() const {
    std::vector<Tensor> out;
    for (const LstmLayerParams& l : layers) {
        for (Tensor& t : l.parameters()) out.push_back(t);
    }
    out.push_back(head_w);
    out.push_back(head_b);
    return out;
}

std::size_t ClassifierParams::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor& t : parameters()) n += t.numel();
    return n;
}

BilstmOutput bilstm_layer(Tape* tape, const Tensor& seq, const LstmLayerParams& params,
                          bool need_sequence) {
    if (seq.rank() != 2 || seq.shape()[1] != params.input_dim) {
        throw std::invalid_argument("bilstm_layer: expected sequence [T', " +
                                    std::to_string(params.input_dim) + "], got " +
                                    shape_str(seq.shape()));
    }
    const std::size_t steps = seq.shape()[0];
    const std::size_t hidden = params.hidden_dim;
    Tensor zero4h = Tensor::zeros({4 * hidden});

    std::vector<Tensor> inputs(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        inputs[t] = reshape(tape, slice(tape, seq, 0, t, 1), {params.input_dim});
    }

    std::vector<Tensor> h_fwd(steps), h_bwd(steps);
    StepState state{Tensor::zeros({hidden}), Tensor::zeros({hidden})};
    for (std::size_t t = 0; t < steps; ++t) {
        state = lstm_step(tape, inputs[t], state, params.wx_fwd, params.wh_fwd, params.b_fwd,
                          zero4h, hidden);
        h_fwd[t] = state.h;
    }
    BilstmOutput out;
    out.final_fwd = state.h;

    state = StepState{Tensor::zeros({hidden}), Tensor::zeros({hidden})};
    for (std::size_t t = steps; t-- > 0;) {
        state = lstm_step(tape, inputs[t], state, params.wx_bwd, params.wh_bwd, params.b_bwd,
                          zero4h, hidden);
        h_bwd[t] = state.h;
    }
    out.final_bwd = state.h;

    if (need_sequence) {
        std::vector<Tensor> rows(steps);
        for (std::size_t t = 0; t < steps; ++t) {
            std::vector<Tensor> pair = {h_fwd[t], h_bwd[t]};
            rows[t] = reshape(tape, concat(tape, pair, 0), {1, 2 * hidden});
        }
        out.sequence = concat(tape, rows, 0);
    }
    return out;
}

Tensor classify(Tape* tape, const Tensor& features, const ClassifierParams& params) {
    if (params.layers.empty()) throw std::invalid_argument("classify: classifier has no layers");
    if (features.rank() != 2 || features.shape()[0] != params.layers.front().input_dim) {
        throw std::invalid_argument("classify: features must be [" +
                                    std::to_string(params.layers.front().input_dim) +
                                    ", T'], got " + shape_str(features.shape()));
    }
    // [D, T'] -> [T', D]
    Tensor seq = permute(tape, features, {1, 0});
    BilstmOutput out;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const bool need_sequence = l + 1 < params.layers.size();
        out = bilstm_layer(tape, seq, params.layers[l], need_sequence);
        if (need_sequence) seq = out.sequence;
    }
    std::vector<Tensor> finals = {out.final_fwd, out.final_bwd};
    Tensor joined = concat(tape, finals, 0);
    return affine(tape, joined, params.head_w, params.head_b);
}

}  // namespace vdan
