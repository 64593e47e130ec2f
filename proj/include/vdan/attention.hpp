#pragma once

#include <cstdint>
#include <vector>

#include "vdan/rng.hpp"
#include "vdan/tensor.hpp"

namespace vdan {

enum class RunMode { kTrain, kInfer };

// Per-sample posterior of a path's latent variable.
struct LatentGaussian {
    Tensor mu;
    Tensor log_var;
};

// One attention path: encoder MLP descriptor -> hidden -> (mu, log-variance),
// decoder MLP latent -> hidden -> weights, sigmoid at the output. The
// deterministic flavour keeps the same layer stack but drops the log-variance
// head and the sampling step.
struct AttentionPathParams {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::size_t latent_dim = 0;
    bool variational = true;

    Tensor enc_w1, enc_b1;      // input -> hidden
    Tensor mu_w, mu_b;          // hidden -> latent mean
    Tensor logvar_w, logvar_b;  // hidden -> latent log-variance (variational only)
    Tensor dec_w1, dec_b1;      // latent -> hidden
    Tensor dec_w2, dec_b2;      // hidden -> weights

    static std::size_t latent_dim_for(std::size_t input_dim, std::size_t compression_ratio);
    static AttentionPathParams init(std::size_t input_dim, std::size_t compression_ratio,
                                    std::size_t hidden_dim, bool variational, RandomStream& rng,
                                    double encoder_gain = 1.0);

    std::vector<Tensor> parameters() const;
    std::size_t parameter_count() const;
};

struct PathOutput {
    Tensor weights;            // in (0,1), length input_dim
    LatentGaussian posterior;  // tensors undefined for deterministic paths
};

// Variational weight generation. kTrain samples z = mu + sigma .* eps with eps
// drawn from eps_seed; kInfer uses the posterior mean directly (no randomness).
PathOutput variational_weights(Tape* tape, const Tensor& descriptor,
                               const AttentionPathParams& params, RunMode mode,
                               std::uint64_t eps_seed);

// Same computation with the noise vector supplied by the caller (tests, frozen
// epsilon gradient checks). eps must have length latent_dim.
PathOutput variational_weights_with_eps(Tape* tape, const Tensor& descriptor,
                                        const AttentionPathParams& params,
                                        const std::vector<double>& eps);

// w = sigmoid(MLP(d)) with the same layer count as the variational stack; no
// latent sampling and no KL term.
Tensor deterministic_weights(Tape* tape, const Tensor& descriptor,
                             const AttentionPathParams& params);

// Closed-form KL(N(mu, diag(sigma^2)) || N(0, I)) = 1/2 sum(mu^2 + sigma^2 - 1 - log sigma^2)
Tensor kl_divergence(Tape* tape, const LatentGaussian& posterior);

}  // namespace vdan
