#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "vdan/csi.hpp"
#include "vdan/rng.hpp"

using namespace vdan;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

// per-subcarrier standard deviation over time of the magnitude, averaged over
// streams; the feature vector behind the separability oracle
std::vector<double> magnitude_std_features(const CsiSample& sample) {
    const Shape& shape = sample.data.shape();
    const std::size_t C = shape[0], T = shape[1], S = shape[2];
    auto d = sample.data.data();
    std::vector<double> features(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            double sum = 0.0, sum_sq = 0.0;
            for (std::size_t t = 0; t < T; ++t) {
                const std::size_t base = ((c * T + t) * S + s) * 2;
                const double mag = std::sqrt(d[base] * d[base] + d[base + 1] * d[base + 1]);
                sum += mag;
                sum_sq += mag * mag;
            }
            const double mean = sum / static_cast<double>(T);
            acc += std::sqrt(std::max(0.0, sum_sq / static_cast<double>(T) - mean * mean));
        }
        features[c] = acc / static_cast<double>(S);
    }
    return features;
}

double nearest_centroid_train_accuracy(const std::vector<CsiSample>& samples, std::size_t classes) {
    std::vector<std::vector<double>> centroids(classes);
    std::vector<std::size_t> counts(classes, 0);
    std::vector<std::vector<double>> features;
    for (const CsiSample& s : samples) {
        features.push_back(magnitude_std_features(s));
        auto& cen = centroids[s.label];
        if (cen.empty()) cen.assign(features.back().size(), 0.0);
        for (std::size_t i = 0; i < cen.size(); ++i) cen[i] += features.back()[i];
        ++counts[s.label];
    }
    for (std::size_t k = 0; k < classes; ++k) {
        for (double& v : centroids[k]) v /= static_cast<double>(counts[k]);
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double best = 0.0;
        std::size_t best_k = 0;
        for (std::size_t k = 0; k < classes; ++k) {
            double dist = 0.0;
            for (std::size_t j = 0; j < features[i].size(); ++j) {
                const double diff = features[i][j] - centroids[k][j];
                dist += diff * diff;
            }
            if (k == 0 || dist < best) {
                best = dist;
                best_k = k;
            }
        }
        if (best_k == samples[i].label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace

TEST_CASE("generation is deterministic in (cfg, class, sample_seed)") {
    SynthConfig cfg;
    CsiSample a = generate_sample(cfg, 2, 17);
    CsiSample b = generate_sample(cfg, 2, 17);
    REQUIRE(a.data.numel() == b.data.numel());
    for (std::size_t i = 0; i < a.data.numel(); ++i) {
        CHECK(a.data.data()[i] == b.data.data()[i]);  // bit-identical
    }
    CHECK(a.subcarrier_mask == b.subcarrier_mask);
    CHECK(a.time_mask == b.time_mask);

    CsiSample c = generate_sample(cfg, 2, 18);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.data.numel(); ++i) {
        any_diff = any_diff || a.data.data()[i] != c.data.data()[i];
    }
    CHECK(any_diff);
}

TEST_CASE("default mask density: round(0.3 * 30) = 9 subcarriers") {
    SynthConfig cfg;
    for (std::size_t k = 0; k < cfg.classes; ++k) {
        CsiSample s = generate_sample(cfg, k, 0);
        std::size_t count = 0;
        for (std::uint8_t m : s.subcarrier_mask) count += m;
        CHECK(count == 9);
    }
}

TEST_CASE("class masks share a core and stay class-separable") {
    SynthConfig cfg;
    std::vector<std::vector<std::uint8_t>> masks;
    for (std::size_t k = 0; k < cfg.classes; ++k) masks.push_back(class_subcarrier_mask(cfg, k));
    for (std::size_t k = 1; k < masks.size(); ++k) {
        CHECK(masks[k] != masks[0]);
        std::size_t overlap = 0;
        for (std::size_t c = 0; c < masks[k].size(); ++c) {
            overlap += masks[k][c] && masks[0][c];
        }
        CHECK(overlap >= 6);  // the shared core
    }
    CHECK_THROWS_AS(class_subcarrier_mask(cfg, cfg.classes), std::invalid_argument);
    CHECK_THROWS_AS(generate_sample(cfg, cfg.classes, 0), std::invalid_argument);
}

TEST_CASE("time mask is one contiguous run") {
    SynthConfig cfg;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        CsiSample s = generate_sample(cfg, seed % cfg.classes, seed);
        std::size_t transitions = 0;
        for (std::size_t t = 1; t < s.time_mask.size(); ++t) {
            transitions += s.time_mask[t] != s.time_mask[t - 1];
        }
        CHECK(transitions <= 2);
        std::size_t count = 0;
        for (std::uint8_t m : s.time_mask) count += m;
        CHECK(count == cfg.window_length());
    }
}

TEST_CASE("unmasked subcarriers are static: temporal magnitude std exactly zero") {
    SynthConfig cfg;
    CsiSample s = generate_sample(cfg, 1, 5);
    const std::size_t C = cfg.subcarriers, T = cfg.time_frames, S = cfg.streams;
    auto d = s.data.data();
    for (std::size_t c = 0; c < C; ++c) {
        if (s.subcarrier_mask[c]) continue;
        for (std::size_t st = 0; st < S; ++st) {
            const std::size_t first = ((c * T + 0) * S + st) * 2;
            for (std::size_t t = 1; t < T; ++t) {
                const std::size_t base = ((c * T + t) * S + st) * 2;
                CHECK(d[base] == d[first]);
                CHECK(d[base + 1] == d[first + 1]);
            }
        }
    }
}

TEST_CASE("masked subcarriers vary strictly more than any unmasked one") {
    SynthConfig cfg;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CsiSample s = generate_sample(cfg, seed % cfg.classes, seed);
        const std::vector<double> features = magnitude_std_features(s);
        double max_unmasked = 0.0, min_masked = 1e300;
        for (std::size_t c = 0; c < features.size(); ++c) {
            if (s.subcarrier_mask[c]) min_masked = std::min(min_masked, features[c]);
            else max_unmasked = std::max(max_unmasked, features[c]);
        }
        CHECK(min_masked > max_unmasked);
    }
}

TEST_CASE("separability oracle: nearest centroid on std features is perfect when noiseless") {
    SynthConfig cfg;
    std::vector<CsiSample> samples = generate_dataset(cfg, 100);
    CHECK(nearest_centroid_train_accuracy(samples, cfg.classes) == 1.0);
}

TEST_CASE("inject_noise no-op and determinism contracts") {
    SynthConfig cfg;
    CsiSample clean = generate_sample(cfg, 0, 3);
    CsiSample same = inject_noise(clean, std::nullopt, 99);
    for (std::size_t i = 0; i < clean.data.numel(); ++i) {
        CHECK(same.data.data()[i] == clean.data.data()[i]);
    }

    CsiSample n1 = inject_noise(clean, 10.0, 42);
    CsiSample n2 = inject_noise(clean, 10.0, 42);
    for (std::size_t i = 0; i < n1.data.numel(); ++i) {
        CHECK(n1.data.data()[i] == n2.data.data()[i]);
    }
    CHECK(n1.subcarrier_mask == clean.subcarrier_mask);
    CHECK(n1.time_mask == clean.time_mask);
    CHECK(n1.data.shape() == clean.data.shape());

    CHECK_THROWS_AS(inject_noise(clean, std::nan(""), 1), std::invalid_argument);
}

TEST_CASE("measured SNR lands within 0.5 dB of the 10 dB target") {
    SynthConfig cfg;  // C*T*S = 9000 pairs
    CsiSample clean = generate_sample(cfg, 1, 7);
    CsiSample noisy = inject_noise(clean, 10.0, 1234);
    auto cd = clean.data.data();
    auto nd = noisy.data.data();
    double signal = 0.0, noise = 0.0;
    for (std::size_t i = 0; i + 1 < cd.size(); i += 2) {
        signal += cd[i] * cd[i] + cd[i + 1] * cd[i + 1];
        const double dre = nd[i] - cd[i];
        const double dim = nd[i + 1] - cd[i + 1];
        noise += dre * dre + dim * dim;
    }
    const double measured_db = 10.0 * std::log10(signal / noise);
    CHECK(std::abs(measured_db - 10.0) <= 0.5);
}

TEST_CASE("dataset file round-trips bit-exactly") {
    SynthConfig cfg;
    Dataset dataset;
    dataset.dims = {static_cast<std::uint32_t>(cfg.subcarriers),
                    static_cast<std::uint32_t>(cfg.time_frames),
                    static_cast<std::uint32_t>(cfg.streams),
                    static_cast<std::uint32_t>(cfg.classes)};
    dataset.samples = generate_dataset(cfg, 10);
    const std::string path = temp_path("vdan_roundtrip.csid");
    write_dataset(path, dataset);
    Dataset loaded = read_dataset(path);
    REQUIRE(loaded.samples.size() == 10);
    CHECK(loaded.dims.subcarriers == dataset.dims.subcarriers);
    CHECK(loaded.dims.classes == dataset.dims.classes);
    for (std::size_t i = 0; i < 10; ++i) {
        const CsiSample& a = dataset.samples[i];
        const CsiSample& b = loaded.samples[i];
        CHECK(a.label == b.label);
        CHECK(a.subcarrier_mask == b.subcarrier_mask);
        CHECK(a.time_mask == b.time_mask);
        for (std::size_t j = 0; j < a.data.numel(); ++j) {
            // payloads are 32-bit on disk: compare at float precision
            CHECK(static_cast<float>(a.data.data()[j]) == static_cast<float>(b.data.data()[j]));
        }
    }

    // a second write of the loaded samples is byte-identical
    const std::string path2 = temp_path("vdan_roundtrip2.csid");
    write_dataset(path2, loaded);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string bytes1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string bytes2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(bytes1 == bytes2);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("empty dataset round-trips") {
    Dataset dataset;
    dataset.dims = {30, 100, 3, 5};
    const std::string path = temp_path("vdan_empty.csid");
    write_dataset(path, dataset);
    Dataset loaded = read_dataset(path);
    CHECK(loaded.samples.empty());
    CHECK(loaded.dims.time_frames == 100);
    std::remove(path.c_str());
}

TEST_CASE("corrupted magic is a format error, not a crash") {
    const std::string path = temp_path("vdan_badmagic.csid");
    {
        std::ofstream out(path, std::ios::binary);
        out << "JUNKJUNKJUNKJUNKJUNK";
    }
    CHECK_THROWS_AS(read_dataset(path), std::runtime_error);
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_dataset(temp_path("vdan_missing_file.csid")), std::runtime_error);
}

TEST_CASE("truncated file is a format error") {
    SynthConfig cfg;
    Dataset dataset;
    dataset.dims = {static_cast<std::uint32_t>(cfg.subcarriers),
                    static_cast<std::uint32_t>(cfg.time_frames),
                    static_cast<std::uint32_t>(cfg.streams),
                    static_cast<std::uint32_t>(cfg.classes)};
    dataset.samples = generate_dataset(cfg, 2);
    const std::string path = temp_path("vdan_truncated.csid");
    write_dataset(path, dataset);
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    CHECK_THROWS_AS(read_dataset(path), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("config validation names the offending field") {
    SynthConfig cfg;
    cfg.perturbed_fraction = 0.0;
    CHECK_THROWS_WITH_AS(cfg.validate(),
                         doctest::Contains("perturbed_fraction"), std::invalid_argument);
    cfg = SynthConfig{};
    cfg.window_fraction = 0.005;  // round(0.005 * 100) = 1 < 2
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("window_fraction"),
                         std::invalid_argument);
    cfg = SynthConfig{};
    cfg.doppler_cycles = {1.0, 1.0, 2.0, 3.0, 4.0};
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("doppler_cycles"),
                         std::invalid_argument);
}
