#include "vdan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "vdan/rng.hpp"

namespace vdan {

std::size_t& ConfusionMatrix::at(std::size_t truth, std::size_t predicted) {
    return counts[truth * classes + predicted];
}

std::size_t ConfusionMatrix::at(std::size_t truth, std::size_t predicted) const {
    return counts[truth * classes + predicted];
}

std::size_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

double ConfusionMatrix::accuracy() const {
    const std::size_t n = total();
    if (n == 0) throw std::runtime_error("ConfusionMatrix::accuracy: empty matrix");
    std::size_t trace = 0;
    for (std::size_t k = 0; k < classes; ++k) trace += at(k, k);
    return static_cast<double>(trace) / static_cast<double>(n);
}

std::vector<std::size_t> ConfusionMatrix::row_sums() const {
    std::vector<std::size_t> sums(classes, 0);
    for (std::size_t r = 0; r < classes; ++r) {
        for (std::size_t c = 0; c < classes; ++c) sums[r] += at(r, c);
    }
    return sums;
}

ConfusionMatrix confusion_from_pairs(std::size_t classes, std::span<const std::size_t> labels,
                                     std::span<const std::size_t> predictions) {
    if (labels.size() != predictions.size() || labels.empty()) {
        throw std::invalid_argument("confusion_from_pairs: need matching non-empty label/prediction sets");
    }
    ConfusionMatrix m;
    m.classes = classes;
    m.counts.assign(classes * classes, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= classes || predictions[i] >= classes) {
            throw std::invalid_argument("confusion_from_pairs: class index out of range");
        }
        ++m.at(labels[i], predictions[i]);
    }
    return m;
}

EvalResult evaluate(const Model& model, std::span<const CsiSample> samples) {
    if (samples.empty()) throw std::invalid_argument("evaluate: empty sample set");
    std::vector<std::size_t> labels(samples.size()), preds(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        labels[i] = samples[i].label;
        preds[i] = model.predict(samples[i]);
    }
    EvalResult r;
    r.confusion = confusion_from_pairs(model.config.classes, labels, preds);
    r.accuracy = r.confusion.accuracy();
    return r;
}

double gini(std::span<const double> w) {
    if (w.empty()) throw std::invalid_argument("gini: empty vector");
    double sum = 0.0;
    for (double v : w) {
        if (v < 0.0) throw std::invalid_argument("gini: negative entry");
        sum += v;
    }
    if (sum == 0.0) throw std::invalid_argument("gini: all-zero vector");
    // sorted-rank form of sum_ij |w_i - w_j| / (2 n sum)
    std::vector<double> sorted(w.begin(), w.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double weighted = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        weighted += (2.0 * static_cast<double>(i + 1) - n - 1.0) * sorted[i];
    }
    return weighted / (n * sum);
}

double alignment_score(std::span<const double> w, std::span<const double> r) {
    if (w.size() != r.size() || w.empty()) {
        throw std::invalid_argument("alignment_score: need matching non-empty vectors");
    }
    const double n = static_cast<double>(w.size());
    double mw = 0.0, mr = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) { mw += w[i]; mr += r[i]; }
    mw /= n;
    mr /= n;
    double cov = 0.0, vw = 0.0, vr = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double dw = w[i] - mw;
        const double dr = r[i] - mr;
        cov += dw * dr;
        vw += dw * dw;
        vr += dr * dr;
    }
    if (vw == 0.0 || vr == 0.0) {
        throw std::invalid_argument("alignment_score: zero-variance argument, correlation undefined");
    }
    return cov / std::sqrt(vw * vr);
}

std::vector<double> reference_std_vector(std::span<const CsiSample> samples, DiagnosticAxis axis) {
    if (samples.empty()) throw std::invalid_argument("reference_std_vector: empty sample set");
    const Shape& shape = samples[0].data.shape();
    const std::size_t C = shape[0], T = shape[1], S = shape[2];
    const std::size_t extent = axis == DiagnosticAxis::kSubcarrier ? C : T;

    std::vector<double> sum(extent, 0.0), sum_sq(extent, 0.0);
    std::size_t per_index = 0;
    for (const CsiSample& s : samples) {
        if (s.data.shape() != shape) {
            throw std::invalid_argument("reference_std_vector: inconsistent sample shapes");
        }
        auto d = s.data.data();
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t t = 0; t < T; ++t) {
                const std::size_t idx = axis == DiagnosticAxis::kSubcarrier ? c : t;
                for (std::size_t st = 0; st < S; ++st) {
                    const std::size_t base = ((c * T + t) * S + st) * 2;
                    const double mag = std::sqrt(d[base] * d[base] + d[base + 1] * d[base + 1]);
                    sum[idx] += mag;
                    sum_sq[idx] += mag * mag;
                }
            }
        }
    }
    per_index = samples.size() * (axis == DiagnosticAxis::kSubcarrier ? T * S : C * S);
    std::vector<double> stds(extent);
    for (std::size_t i = 0; i < extent; ++i) {
        const double mean = sum[i] / static_cast<double>(per_index);
        const double var = std::max(0.0, sum_sq[i] / static_cast<double>(per_index) - mean * mean);
        stds[i] = std::sqrt(var);
    }
    return stds;
}

std::vector<std::vector<double>> attention_per_sample(const Model& model,
                                                      std::span<const CsiSample> samples,
                                                      DiagnosticAxis axis) {
    std::vector<std::vector<double>> out;
    out.reserve(samples.size());
    for (const CsiSample& s : samples) {
        ForwardOut f = model.forward(nullptr, s.data, RunMode::kInfer, 0);
        const Tensor& w = axis == DiagnosticAxis::kSubcarrier ? f.w_c : f.w_t;
        if (!w.defined()) {
            out.emplace_back();
            continue;
        }
        out.emplace_back(w.data().begin(), w.data().end());
    }
    return out;
}

std::vector<double> mean_attention(const Model& model, std::span<const CsiSample> samples,
                                   DiagnosticAxis axis) {
    auto per_sample = attention_per_sample(model, samples, axis);
    std::vector<double> mean;
    std::size_t count = 0;
    for (const auto& w : per_sample) {
        if (w.empty()) continue;
        if (mean.empty()) mean.assign(w.size(), 0.0);
        for (std::size_t i = 0; i < w.size(); ++i) mean[i] += w[i];
        ++count;
    }
    if (count == 0) return {};
    for (double& v : mean) v /= static_cast<double>(count);
    return mean;
}

std::vector<SnrPoint> snr_sweep(const Model& model, std::span<const CsiSample> clean,
                                std::span<const double> snr_list_db, std::uint64_t noise_seed) {
    if (snr_list_db.empty()) throw std::invalid_argument("snr_sweep: empty SNR list");
    std::vector<double> levels;
    const bool has_inf = std::any_of(snr_list_db.begin(), snr_list_db.end(),
                                     [](double s) { return std::isinf(s) && s > 0; });
    if (!has_inf) levels.push_back(std::numeric_limits<double>::infinity());
    levels.insert(levels.end(), snr_list_db.begin(), snr_list_db.end());

    std::vector<SnrPoint> curve;
    curve.reserve(levels.size());
    for (std::size_t li = 0; li < levels.size(); ++li) {
        const double snr = levels[li];
        SnrPoint point;
        point.snr_db = snr;
        if (std::isinf(snr) && snr > 0) {
            point.accuracy = evaluate(model, clean).accuracy;
        } else {
            std::vector<CsiSample> noisy;
            noisy.reserve(clean.size());
            for (std::size_t i = 0; i < clean.size(); ++i) {
                noisy.push_back(inject_noise(clean[i], snr, mix_seed(noise_seed, li, i)));
            }
            point.accuracy = evaluate(model, noisy).accuracy;
        }
        curve.push_back(point);
    }
    return curve;
}

}  // namespace vdan
