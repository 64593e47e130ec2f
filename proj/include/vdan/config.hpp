#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vdan/csi.hpp"
#include "vdan/model.hpp"
#include "vdan/train.hpp"

namespace vdan {

struct RunConfig {
    std::string output_dir = "out";
    std::string dataset_path;     // default <output_dir>/dataset.csid
    std::string checkpoint_path;  // default <output_dir>/<variant>_seed<seed>.ckpt
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::vector<double> snr_list = {20.0, 15.0, 10.0, 5.0, 0.0};
    std::uint64_t noise_seed = 777;
    std::size_t threads = 0;  // 0 = hardware concurrency
};

// Union of generator, model, training and run controls, serialized as a JSON
// object with flat dotted keys; overrides are key=value strings.
struct ExperimentConfig {
    SynthConfig synth;
    std::size_t sample_count = 1000;
    std::optional<double> dataset_snr_db = 15.0;  // noise baked into `synth` output

    VariantKind variant = VariantKind::kFullVdan;
    // model dims beyond what synth provides
    std::size_t feature_dim = 64;
    std::size_t out_time = 25;
    std::size_t subcarrier_ratio = 5;
    std::size_t temporal_ratio = 10;
    std::size_t subcarrier_hidden = 256;
    std::size_t temporal_hidden = 96;
    double fusion_init = 0.1;
    double temporal_path_gain = 8.0;
    std::size_t se_hidden = 560;
    std::size_t cbam_channel_hidden = 300;
    std::size_t cbam_temporal_hidden = 96;
    std::size_t lstm_layers = 1;
    std::size_t lstm_hidden = 32;

    TrainConfig train;
    RunConfig run;

    ModelConfig model_config() const;
    std::string dataset_path() const;
    std::string checkpoint_path() const;

    nlohmann::json to_json() const;                      // flat dotted keys
    static ExperimentConfig from_json(const nlohmann::json& j);  // rejects unknown keys
    void validate() const;

    // apply a "key=value" override; value parsed as JSON, else kept as string
    void apply_override(const std::string& assignment);

    static ExperimentConfig load(const std::string& path,
                                 const std::vector<std::string>& overrides);
};

}  // namespace vdan
