#include "vdan/csi.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "vdan/rng.hpp"

namespace vdan {

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

// stream tags for deriving independent generators from cfg.seed
enum : std::uint64_t {
    kTagMasks = 0xA1,
    kTagStatic = 0xA2,
    kTagSample = 0xA3,
    kTagNoise = 0xA4,
    kTagPhase = 0xA5,
};

std::size_t round_count(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

}  // namespace

std::size_t SynthConfig::masked_count() const {
    return round_count(perturbed_fraction, subcarriers);
}

std::size_t SynthConfig::window_length() const {
    return round_count(window_fraction, time_frames);
}

std::vector<double> SynthConfig::resolved_doppler_cycles() const {
    if (!doppler_cycles.empty()) return doppler_cycles;
    std::vector<double> cycles(classes);
    for (std::size_t k = 0; k < classes; ++k) cycles[k] = 1.5 + 2.0 * static_cast<double>(k);
    return cycles;
}

void SynthConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw std::invalid_argument("SynthConfig." + field + ": " + why);
    };
    if (subcarriers == 0) fail("subcarriers", "must be positive");
    if (time_frames == 0) fail("time_frames", "must be positive");
    if (streams == 0) fail("streams", "must be positive");
    if (classes == 0) fail("classes", "must be positive");
    if (!(perturbed_fraction > 0.0 && perturbed_fraction <= 1.0))
        fail("perturbed_fraction", "must lie in (0, 1]");
    if (!(window_fraction > 0.0 && window_fraction <= 1.0))
        fail("window_fraction", "must lie in (0, 1]");
    if (!(static_gain_scale > 0.0)) fail("static_gain_scale", "must be positive");
    if (!(gesture_amplitude > 0.0)) fail("gesture_amplitude", "must be positive");
    if (masked_count() < 1) fail("perturbed_fraction", "round(fraction * C) must be >= 1");
    if (window_length() < 2) fail("window_fraction", "round(fraction * T) must be >= 2");
    const auto cycles = resolved_doppler_cycles();
    if (cycles.size() != classes)
        fail("doppler_cycles", "need exactly one frequency per class");
    for (std::size_t i = 0; i < cycles.size(); ++i) {
        if (!(cycles[i] > 0.0)) fail("doppler_cycles", "frequencies must be positive");
        for (std::size_t j = i + 1; j < cycles.size(); ++j) {
            if (cycles[i] == cycles[j]) fail("doppler_cycles", "frequencies must be distinct");
        }
    }
}

std::vector<std::uint8_t> class_subcarrier_mask(const SynthConfig& cfg, std::size_t class_id) {
    if (class_id >= cfg.classes) {
        throw std::invalid_argument("class_subcarrier_mask: class " + std::to_string(class_id) +
                                    " out of range (K=" + std::to_string(cfg.classes) + ")");
    }
    const std::size_t c = cfg.subcarriers;
    const std::size_t n_masked = cfg.masked_count();
    // one class-specific subcarrier on top of a shared core: classes stay
    // separable from per-subcarrier statistics while every class's mask
    // overlaps heavily with the union profile an attention path can learn
    const std::size_t specific = n_masked >= 2 ? 1 : 0;
    const std::size_t core = n_masked - specific;

    // one shared permutation of subcarriers; same for all classes of a dataset
    std::vector<std::size_t> perm(c);
    std::iota(perm.begin(), perm.end(), 0);
    RandomStream rng(mix_seed(cfg.seed, kTagMasks));
    for (std::size_t i = c; i-- > 1;) {
        std::swap(perm[i], perm[rng.uniform_index(i + 1)]);
    }

    std::vector<std::uint8_t> mask(c, 0);
    for (std::size_t i = 0; i < core; ++i) mask[perm[i]] = 1;
    const std::size_t pool = c - core;
    for (std::size_t i = 0; i < specific; ++i) {
        const std::size_t slot = (class_id * specific + i) % pool;  // wraps when K*specific > pool
        mask[perm[core + slot]] = 1;
    }
    return mask;
}

std::vector<double> static_gains(const SynthConfig& cfg) {
    RandomStream rng(mix_seed(cfg.seed, kTagStatic));
    std::vector<double> gains(cfg.subcarriers * cfg.streams * 2);
    for (std::size_t c = 0; c < cfg.subcarriers; ++c) {
        for (std::size_t s = 0; s < cfg.streams; ++s) {
            const double mag = cfg.static_gain_scale * rng.uniform(0.7, 1.3);
            const double phase = rng.uniform(0.0, kTwoPi);
            gains[(c * cfg.streams + s) * 2 + 0] = mag * std::cos(phase);
            gains[(c * cfg.streams + s) * 2 + 1] = mag * std::sin(phase);
        }
    }
    return gains;
}

CsiSample generate_sample(const SynthConfig& cfg, std::size_t class_id, std::uint64_t sample_seed) {
    cfg.validate();
    if (class_id >= cfg.classes) {
        throw std::invalid_argument("generate_sample: class " + std::to_string(class_id) +
                                    " out of range (K=" + std::to_string(cfg.classes) + ")");
    }
    const std::size_t C = cfg.subcarriers, T = cfg.time_frames, S = cfg.streams;
    const std::size_t window = cfg.window_length();
    const double freq = cfg.resolved_doppler_cycles()[class_id];

    CsiSample sample;
    sample.label = static_cast<std::uint32_t>(class_id);
    sample.subcarrier_mask = class_subcarrier_mask(cfg, class_id);
    sample.data = Tensor::zeros({C, T, S, 2});

    // static environment, identical in every sample of the dataset
    const std::vector<double> gains = static_gains(cfg);
    auto d = sample.data.data();
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t s = 0; s < S; ++s) {
                const std::size_t base = ((c * T + t) * S + s) * 2;
                d[base + 0] = gains[(c * S + s) * 2 + 0];
                d[base + 1] = gains[(c * S + s) * 2 + 1];
            }
        }
    }

    // gesture: class Doppler tone on masked subcarriers inside a random window.
    // Tone phases are a per-(class, subcarrier) signature of the dataset (the
    // same gesture traces the same multipath), so only the window position
    // varies between samples of a class.
    RandomStream rng(mix_seed(cfg.seed, kTagSample, mix_seed(class_id, sample_seed)));
    const std::size_t start = rng.uniform_index(T - window + 1);
    sample.time_mask.assign(T, 0);
    for (std::size_t t = start; t < start + window; ++t) sample.time_mask[t] = 1;

    RandomStream phase_rng(mix_seed(cfg.seed, kTagPhase, class_id));
    for (std::size_t c = 0; c < C; ++c) {
        if (!sample.subcarrier_mask[c]) continue;
        const double phase = phase_rng.uniform(0.0, kTwoPi);
        for (std::size_t t = start; t < start + window; ++t) {
            const double theta = kTwoPi * freq * static_cast<double>(t - start) /
                                 static_cast<double>(window) + phase;
            const double re = cfg.gesture_amplitude * std::cos(theta);
            const double im = cfg.gesture_amplitude * std::sin(theta);
            for (std::size_t s = 0; s < S; ++s) {
                const std::size_t base = ((c * T + t) * S + s) * 2;
                d[base + 0] += re;
                d[base + 1] += im;
            }
        }
    }
    return sample;
}

std::vector<CsiSample> generate_dataset(const SynthConfig& cfg, std::size_t count) {
    std::vector<CsiSample> samples;
    samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        samples.push_back(generate_sample(cfg, i % cfg.classes, i));
    }
    return samples;
}

CsiSample inject_noise(const CsiSample& sample, std::optional<double> snr_db,
                       std::uint64_t noise_seed) {
    if (!snr_db.has_value()) return sample;
    if (!std::isfinite(*snr_db)) {
        throw std::invalid_argument("inject_noise: snr_db must be finite (use nullopt for no noise)");
    }
    if (!all_finite(sample.data)) {
        throw std::invalid_argument("inject_noise: sample contains non-finite values");
    }

    auto src = sample.data.data();
    double power = 0.0;
    for (std::size_t i = 0; i + 1 < src.size(); i += 2) {
        power += src[i] * src[i] + src[i + 1] * src[i + 1];
    }
    power /= static_cast<double>(src.size() / 2);  // mean of re^2 + im^2 per pair

    // complex noise variance (re + im together) set by the target ratio
    const double noise_var = power * std::pow(10.0, -*snr_db / 10.0);
    const double sigma = std::sqrt(noise_var / 2.0);

    CsiSample noisy;
    noisy.label = sample.label;
    noisy.subcarrier_mask = sample.subcarrier_mask;
    noisy.time_mask = sample.time_mask;
    noisy.data = sample.data.clone();

    RandomStream rng(mix_seed(noise_seed, kTagNoise));
    auto dst = noisy.data.data();
    for (double& v : dst) v += sigma * rng.normal();
    return noisy;
}

// ---------------------------------------------------------------------------
// dataset file: "CSID", version u32, count u32, C u32, T u32, S u32, K u32,
// then per sample: label u32, subcarrier mask bytes, time mask bytes,
// payload C*T*S*2 float32, all little-endian.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'C', 'S', 'I', 'D'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("dataset file: truncated while reading u32");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

float get_f32(std::istream& in) {
    const std::uint32_t bits = get_u32(in);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

void write_dataset(const std::string& path, const Dataset& dataset) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_dataset: cannot open " + path);
    const auto& dims = dataset.dims;
    const std::size_t payload = static_cast<std::size_t>(dims.subcarriers) * dims.time_frames *
                                dims.streams * 2;
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(dataset.samples.size()));
    put_u32(out, dims.subcarriers);
    put_u32(out, dims.time_frames);
    put_u32(out, dims.streams);
    put_u32(out, dims.classes);
    for (const CsiSample& s : dataset.samples) {
        if (s.data.numel() != payload || s.subcarrier_mask.size() != dims.subcarriers ||
            s.time_mask.size() != dims.time_frames) {
            throw std::runtime_error("write_dataset: sample shape disagrees with header dims");
        }
        put_u32(out, s.label);
        out.write(reinterpret_cast<const char*>(s.subcarrier_mask.data()),
                  static_cast<std::streamsize>(s.subcarrier_mask.size()));
        out.write(reinterpret_cast<const char*>(s.time_mask.data()),
                  static_cast<std::streamsize>(s.time_mask.size()));
        for (double v : s.data.data()) put_f32(out, static_cast<float>(v));
    }
    if (!out) throw std::runtime_error("write_dataset: write failure on " + path);
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_dataset: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("read_dataset: bad magic, not a CSID dataset: " + path);
    }
    const std::uint32_t version = get_u32(in);
    if (version != kVersion) {
        throw std::runtime_error("read_dataset: unsupported version " + std::to_string(version));
    }
    Dataset dataset;
    const std::uint32_t count = get_u32(in);
    dataset.dims.subcarriers = get_u32(in);
    dataset.dims.time_frames = get_u32(in);
    dataset.dims.streams = get_u32(in);
    dataset.dims.classes = get_u32(in);
    const std::size_t C = dataset.dims.subcarriers, T = dataset.dims.time_frames,
                      S = dataset.dims.streams;
    if (C == 0 || T == 0 || S == 0) {
        throw std::runtime_error("read_dataset: degenerate dims in header");
    }
    dataset.samples.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        CsiSample s;
        s.label = get_u32(in);
        s.subcarrier_mask.resize(C);
        in.read(reinterpret_cast<char*>(s.subcarrier_mask.data()), static_cast<std::streamsize>(C));
        s.time_mask.resize(T);
        in.read(reinterpret_cast<char*>(s.time_mask.data()), static_cast<std::streamsize>(T));
        if (!in) throw std::runtime_error("read_dataset: truncated sample " + std::to_string(i));
        s.data = Tensor::zeros({C, T, S, 2});
        auto d = s.data.data();
        for (double& v : d) v = static_cast<double>(get_f32(in));
        dataset.samples.push_back(std::move(s));
    }
    return dataset;
}

}  // namespace vdan
