#include "vdan/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace vdan {

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, RandomStream& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w = Tensor::zeros({fan_in, fan_out}, true);
    for (double& v : w.data()) v = rng.uniform(-limit, limit);
    return w;
}

void check_descriptor(const Tensor& d, const AttentionPathParams& p, const char* who) {
    if (d.rank() != 1 || d.numel() != p.input_dim) {
        throw std::invalid_argument(std::string(who) + ": descriptor length " +
                                    std::to_string(d.numel()) + " does not match path input " +
                                    std::to_string(p.input_dim));
    }
    if (!all_finite(d)) {
        throw std::invalid_argument(std::string(who) + ": non-finite descriptor");
    }
}

Tensor decode(Tape* tape, const Tensor& z, const AttentionPathParams& p) {
    Tensor h = relu(tape, affine(tape, z, p.dec_w1, p.dec_b1));
    return sigmoid(tape, affine(tape, h, p.dec_w2, p.dec_b2));
}

}  // namespace

std::size_t AttentionPathParams::latent_dim_for(std::size_t input_dim,
                                                std::size_t compression_ratio) {
    if (compression_ratio == 0) {
        throw std::invalid_argument("AttentionPathParams: compression ratio must be positive");
    }
    return std::max<std::size_t>(1, input_dim / compression_ratio);
}

AttentionPathParams AttentionPathParams::init(std::size_t input_dim,
                                              std::size_t compression_ratio,
                                              std::size_t hidden_dim, bool variational,
                                              RandomStream& rng, double encoder_gain) {
    AttentionPathParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.latent_dim = latent_dim_for(input_dim, compression_ratio);
    p.variational = variational;

    // encoder_gain > 1 starts the descriptor -> latent map hot, which keeps
    // the path input-coupled under KL pressure (shrinking a large encoder
    // takes more optimizer steps than the training budget allows)
    p.enc_w1 = glorot(input_dim, hidden_dim, rng);
    for (double& v : p.enc_w1.data()) v *= encoder_gain;
    p.enc_b1 = Tensor::zeros({hidden_dim}, true);
    p.mu_w = glorot(hidden_dim, p.latent_dim, rng);
    for (double& v : p.mu_w.data()) v *= encoder_gain;
    p.mu_b = Tensor::zeros({p.latent_dim}, true);
    if (variational) {
        // sigma starts at exactly 1: the KL variance terms begin at their
        // minimum and only move if the data pushes them
        p.logvar_w = Tensor::zeros({hidden_dim, p.latent_dim}, true);
        p.logvar_b = Tensor::zeros({p.latent_dim}, true);
    }
    p.dec_w1 = glorot(p.latent_dim, hidden_dim, rng);
    p.dec_b1 = Tensor::zeros({hidden_dim}, true);
    p.dec_w2 = glorot(hidden_dim, input_dim, rng);
    // zero output bias keeps the initial weights near sigmoid(0) = 0.5
    p.dec_b2 = Tensor::zeros({input_dim}, true);
    return p;
}

std::vector<Tensor> AttentionPathParams::parameters() const {
    std::vector<Tensor> out = {enc_w1, enc_b1, mu_w, mu_b};
    if (variational) {
        out.push_back(logvar_w);
        out.push_back(logvar_b);
    }
    out.push_back(dec_w1);
    out.push_back(dec_b1);
    out.push_back(dec_w2);
    out.push_back(dec_b2);
    return out;
}

std::size_t AttentionPathParams::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor& t : parameters()) n += t.numel();
    return n;
}

PathOutput variational_weights(Tape* tape, const Tensor& descriptor,
                               const AttentionPathParams& params, RunMode mode,
                               std::uint64_t eps_seed) {
    check_descriptor(descriptor, params, "variational_weights");
    if (!params.variational) {
        throw std::invalid_argument("variational_weights: path was built deterministic");
    }
    if (mode == RunMode::kInfer) {
        // posterior mean inference: never consumes randomness
        return variational_weights_with_eps(tape, descriptor, params,
                                            std::vector<double>(params.latent_dim, 0.0));
    }
    RandomStream rng(eps_seed);
    std::vector<double> eps(params.latent_dim);
    for (double& e : eps) e = rng.normal();
    return variational_weights_with_eps(tape, descriptor, params, eps);
}

PathOutput variational_weights_with_eps(Tape* tape, const Tensor& descriptor,
                                        const AttentionPathParams& params,
                                        const std::vector<double>& eps) {
    check_descriptor(descriptor, params, "variational_weights");
    if (eps.size() != params.latent_dim) {
        throw std::invalid_argument("variational_weights: eps length " +
                                    std::to_string(eps.size()) + " != latent dim " +
                                    std::to_string(params.latent_dim));
    }
    Tensor h = relu(tape, affine(tape, descriptor, params.enc_w1, params.enc_b1));
    PathOutput out;
    out.posterior.mu = affine(tape, h, params.mu_w, params.mu_b);
    out.posterior.log_var = affine(tape, h, params.logvar_w, params.logvar_b);

    bool zero_eps = true;
    for (double e : eps) zero_eps = zero_eps && e == 0.0;

    Tensor z;
    if (zero_eps) {
        z = out.posterior.mu;  // exactly the inference path
    } else {
        Tensor sigma = exp(tape, scale_const(tape, out.posterior.log_var, 0.5));
        Tensor eps_t = Tensor::from({params.latent_dim}, eps);
        z = add(tape, out.posterior.mu, mul(tape, sigma, eps_t));
    }
    out.weights = decode(tape, z, params);
    return out;
}

Tensor deterministic_weights(Tape* tape, const Tensor& descriptor,
                             const AttentionPathParams& params) {
    check_descriptor(descriptor, params, "deterministic_weights");
    Tensor h = relu(tape, affine(tape, descriptor, params.enc_w1, params.enc_b1));
    Tensor z = affine(tape, h, params.mu_w, params.mu_b);
    return decode(tape, z, params);
}

Tensor kl_divergence(Tape* tape, const LatentGaussian& posterior) {
    const Tensor& mu = posterior.mu;
    const Tensor& log_var = posterior.log_var;
    if (!mu.defined() || !log_var.defined() || mu.shape() != log_var.shape()) {
        throw std::invalid_argument("kl_divergence: malformed posterior");
    }
    if (!all_finite(mu) || !all_finite(log_var)) {
        throw std::invalid_argument("kl_divergence: non-finite posterior");
    }
    Tensor mu_sq = mul(tape, mu, mu);
    Tensor var = exp(tape, log_var);
    Tensor ones = Tensor::full(mu.shape(), 1.0);
    Tensor terms = sub(tape, add(tape, mu_sq, var), add(tape, ones, log_var));
    std::vector<std::size_t> axes(mu.rank());
    for (std::size_t d = 0; d < axes.size(); ++d) axes[d] = d;
    return scale_const(tape, reduce_sum(tape, terms, axes), 0.5);
}

}  // namespace vdan
