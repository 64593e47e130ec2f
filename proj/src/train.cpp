#include "vdan/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "vdan/metrics.hpp"
#include "vdan/rng.hpp"

namespace vdan {

void TrainConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw std::invalid_argument("TrainConfig." + field + ": " + why);
    };
    if (lambda < 0.0) fail("lambda", "must be >= 0");
    if (!(base_lr > 0.0)) fail("base_lr", "must be positive");
    if (weight_decay < 0.0) fail("weight_decay", "must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1", "must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2", "must lie in [0, 1)");
    if (batch_size == 0) fail("batch_size", "must be positive");
    if (max_epochs == 0) fail("max_epochs", "must be positive");
    if (early_stop_patience == 0) fail("early_stop_patience", "must be >= 1");
    if (!(train_fraction > 0.0 && val_fraction > 0.0 && train_fraction + val_fraction < 1.0)) {
        fail("train_fraction", "train/val fractions must be positive and leave a test remainder");
    }
}

Tensor total_loss(Tape* tape, const Tensor& ce, const Tensor& kl_c, const Tensor& kl_t,
                  double lambda) {
    if (kl_c.value() < 0.0 || kl_t.value() < 0.0) {
        throw std::invalid_argument("total_loss: KL terms must be non-negative");
    }
    if (lambda == 0.0) return ce;  // degenerates to pure cross-entropy
    Tensor kl = add(tape, kl_c, kl_t);
    return add(tape, ce, scale_const(tape, kl, lambda));
}

Tensor total_loss(Tape* tape, const Tensor& logits, std::size_t label, const Tensor& kl_c,
                  const Tensor& kl_t, double lambda) {
    Tensor ce = softmax_cross_entropy(tape, logits, label);
    return total_loss(tape, ce, kl_c, kl_t, lambda);
}

double lr_at(std::size_t step, std::size_t total_steps, double base_lr) {
    if (total_steps == 0) throw std::invalid_argument("lr_at: total_steps must be positive");
    if (step > total_steps) throw std::invalid_argument("lr_at: step beyond total_steps");
    const double phase = 3.14159265358979323846 * static_cast<double>(step) /
                         static_cast<double>(total_steps);
    return base_lr * 0.5 * (1.0 + std::cos(phase));
}

SplitIndices stratified_split(std::span<const CsiSample> samples, double train_fraction,
                              double val_fraction, std::uint64_t seed) {
    if (samples.empty()) throw std::invalid_argument("stratified_split: empty dataset");
    std::map<std::uint32_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < samples.size(); ++i) by_class[samples[i].label].push_back(i);

    RandomStream rng(mix_seed(seed, 0xD0));
    SplitIndices split;
    for (auto& [label, indices] : by_class) {
        for (std::size_t i = indices.size(); i-- > 1;) {
            std::swap(indices[i], indices[rng.uniform_index(i + 1)]);
        }
        const std::size_t n = indices.size();
        const std::size_t n_train = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(n)));
        const std::size_t n_val = static_cast<std::size_t>(
            std::llround(val_fraction * static_cast<double>(n)));
        for (std::size_t i = 0; i < n; ++i) {
            if (i < n_train) split.train.push_back(indices[i]);
            else if (i < n_train + n_val) split.val.push_back(indices[i]);
            else split.test.push_back(indices[i]);
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

std::vector<CsiSample> select(std::span<const CsiSample> samples,
                              std::span<const std::size_t> indices) {
    std::vector<CsiSample> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(samples[i]);
    return out;
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

AdamW::AdamW(std::vector<Tensor> params, const TrainConfig& cfg)
    : params_(std::move(params)),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.adam_eps),
      weight_decay_(cfg.weight_decay) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (Tensor& p : params_) {
        p.ensure_grad();
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void AdamW::zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
}

void AdamW::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        auto d = params_[pi].data();
        auto g = params_[pi].grad();
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < d.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            d[i] -= lr * m_hat / (std::sqrt(v_hat) + eps_);
            d[i] -= lr * weight_decay_ * d[i];  // decoupled decay, not in the gradient
        }
    }
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

namespace {

Tensor mean_of(Tape* tape, std::span<const Tensor> scalars) {
    if (scalars.size() == 1) return scalars[0];
    Tensor joined = concat(tape, scalars, 0);
    return reduce_mean(tape, joined, {0});
}

}  // namespace

TrainHistory fit(Model& model, std::span<const CsiSample> train_set,
                 std::span<const CsiSample> val_set, const TrainConfig& cfg,
                 const ValMetric& val_metric) {
    cfg.validate();
    if (train_set.empty()) throw std::invalid_argument("fit: empty training split");
    if (val_set.empty()) throw std::invalid_argument("fit: empty validation split");

    std::vector<Tensor> params = model.parameters();
    AdamW optimizer(params, cfg);

    const std::size_t batches_per_epoch = (train_set.size() + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = cfg.max_epochs * batches_per_epoch;

    RandomStream shuffle_rng(mix_seed(cfg.seed, 0xE0));
    RandomStream eps_rng(mix_seed(cfg.seed, 0xE1));

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainHistory history;
    std::vector<std::vector<double>> best_params;
    std::size_t epochs_since_best = 0;
    std::size_t step = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i-- > 1;) {
            std::swap(order[i], order[shuffle_rng.uniform_index(i + 1)]);
        }

        double epoch_loss = 0.0, epoch_ce = 0.0, epoch_klc = 0.0, epoch_klt = 0.0;
        double first_lr = 0.0;
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            const std::size_t lo = b * cfg.batch_size;
            const std::size_t hi = std::min(lo + cfg.batch_size, train_set.size());
            const double lr = lr_at(step, total_steps, cfg.base_lr);
            if (b == 0) first_lr = lr;

            optimizer.zero_grad();
            Tape tape;
            std::vector<Tensor> ces, klcs, klts;
            ces.reserve(hi - lo);
            for (std::size_t i = lo; i < hi; ++i) {
                const CsiSample& sample = train_set[order[i]];
                // private copy: tape ops attach gradient buffers to their
                // inputs, and sample storage is shared across replicas
                Model::LogitsOut out = model.logits(&tape, sample.data.clone(), RunMode::kTrain,
                                                    eps_rng.next_u64());
                ces.push_back(softmax_cross_entropy(&tape, out.logits, sample.label));
                klcs.push_back(out.preprocess.kl_c);
                klts.push_back(out.preprocess.kl_t);
            }
            Tensor ce_mean = mean_of(&tape, ces);
            Tensor klc_mean = mean_of(&tape, klcs);
            Tensor klt_mean = mean_of(&tape, klts);
            Tensor loss = total_loss(&tape, ce_mean, klc_mean, klt_mean, cfg.lambda);
            if (!all_finite(loss)) {
                throw std::runtime_error("fit: non-finite loss at epoch " + std::to_string(epoch) +
                                         " batch " + std::to_string(b) + "; training diverged");
            }
            tape.backward(loss);
            optimizer.step(lr);
            ++step;

            const double n = static_cast<double>(hi - lo);
            epoch_loss += loss.value() * n;
            epoch_ce += ce_mean.value() * n;
            epoch_klc += klc_mean.value() * n;
            epoch_klt += klt_mean.value() * n;
        }

        const double n_train = static_cast<double>(train_set.size());
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = epoch_loss / n_train;
        rec.ce = epoch_ce / n_train;
        rec.kl_c = epoch_klc / n_train;
        rec.kl_t = epoch_klt / n_train;
        rec.lr = first_lr;
        rec.val_accuracy = val_metric ? val_metric(model, epoch)
                                      : evaluate(model, val_set).accuracy;
        history.epochs.push_back(rec);
        history.stopped_epoch = epoch;

        if (rec.val_accuracy > history.best_val_accuracy || history.best_epoch == 0) {
            history.best_val_accuracy = rec.val_accuracy;
            history.best_epoch = epoch;
            epochs_since_best = 0;
            best_params.clear();
            for (const Tensor& p : params) {
                best_params.emplace_back(p.data().begin(), p.data().end());
            }
        } else {
            ++epochs_since_best;
            if (epochs_since_best >= cfg.early_stop_patience) break;
        }
    }

    // restore the best checkpoint
    if (!best_params.empty()) {
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            auto d = params[pi].data();
            std::copy(best_params[pi].begin(), best_params[pi].end(), d.begin());
        }
    }
    return history;
}

void write_history_csv(const std::string& path, const TrainHistory& history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_history_csv: cannot open " + path);
    out << "epoch,loss,ce,kl_c,kl_t,val_acc,lr\n";
    out.precision(17);
    for (const EpochRecord& r : history.epochs) {
        out << r.epoch << ',' << r.loss << ',' << r.ce << ',' << r.kl_c << ',' << r.kl_t << ','
            << r.val_accuracy << ',' << r.lr << '\n';
    }
    if (!out) throw std::runtime_error("write_history_csv: write failure on " + path);
}

}  // namespace vdan
