#pragma once

#include <vector>

#include "vdan/rng.hpp"
#include "vdan/tensor.hpp"

namespace vdan {

// One bidirectional gated recurrent layer. Gates are packed [i, f, g, o];
// the forget-gate bias starts at 1.
struct LstmLayerParams {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    Tensor wx_fwd, wh_fwd, b_fwd;  // [in, 4H], [H, 4H], [4H]
    Tensor wx_bwd, wh_bwd, b_bwd;

    static LstmLayerParams init(std::size_t input_dim, std::size_t hidden_dim, RandomStream& rng);
    std::vector<Tensor> parameters() const;
};

struct ClassifierParams {
    std::vector<LstmLayerParams> layers;  // layer l > 0 consumes [T', 2H]
    Tensor head_w;                        // [2H, K]
    Tensor head_b;                        // [K]

    static ClassifierParams init(std::size_t input_dim, std::size_t hidden_dim,
                                 std::size_t num_layers, std::size_t classes, RandomStream& rng);
    std::vector<Tensor> parameters() const;
    std::size_t parameter_count() const;
};

struct BilstmOutput {
    Tensor final_fwd;  // [H], last state of the forward direction
    Tensor final_bwd;  // [H], last state of the backward direction
    Tensor sequence;   // [T', 2H], per-step concatenation; only if requested
};

// seq has shape [T', input_dim]
BilstmOutput bilstm_layer(Tape* tape, const Tensor& seq, const LstmLayerParams& params,
                          bool need_sequence);

// features [D, T'] -> logits [K]; T' is the sequence axis
Tensor classify(Tape* tape, const Tensor& features, const ClassifierParams& params);

}  // namespace vdan
