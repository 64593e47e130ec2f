#include "vdan/config.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace vdan {

using nlohmann::json;

ModelConfig ExperimentConfig::model_config() const {
    ModelConfig m;
    m.subcarriers = synth.subcarriers;
    m.time_frames = synth.time_frames;
    m.streams = synth.streams;
    m.classes = synth.classes;
    m.feature_dim = feature_dim;
    m.out_time = out_time;
    m.subcarrier_ratio = subcarrier_ratio;
    m.temporal_ratio = temporal_ratio;
    m.subcarrier_hidden = subcarrier_hidden;
    m.temporal_hidden = temporal_hidden;
    m.fusion_init = fusion_init;
    m.temporal_path_gain = temporal_path_gain;
    m.se_hidden = se_hidden;
    m.cbam_channel_hidden = cbam_channel_hidden;
    m.cbam_temporal_hidden = cbam_temporal_hidden;
    m.lstm_layers = lstm_layers;
    m.lstm_hidden = lstm_hidden;
    return m;
}

std::string ExperimentConfig::dataset_path() const {
    if (!run.dataset_path.empty()) return run.dataset_path;
    return run.output_dir + "/dataset.csid";
}

std::string ExperimentConfig::checkpoint_path() const {
    if (!run.checkpoint_path.empty()) return run.checkpoint_path;
    return run.output_dir + "/" + variant_name(variant) + "_seed" +
           std::to_string(train.seed) + ".ckpt";
}

json ExperimentConfig::to_json() const {
    json j = json::object();
    j["synth.subcarriers"] = synth.subcarriers;
    j["synth.time_frames"] = synth.time_frames;
    j["synth.streams"] = synth.streams;
    j["synth.classes"] = synth.classes;
    j["synth.perturbed_fraction"] = synth.perturbed_fraction;
    j["synth.window_fraction"] = synth.window_fraction;
    j["synth.static_gain_scale"] = synth.static_gain_scale;
    j["synth.gesture_amplitude"] = synth.gesture_amplitude;
    j["synth.doppler_cycles"] = synth.doppler_cycles;  // empty array = derive per class
    j["synth.seed"] = synth.seed;
    j["synth.sample_count"] = sample_count;
    if (dataset_snr_db.has_value()) j["synth.snr_db"] = *dataset_snr_db;
    else j["synth.snr_db"] = nullptr;

    j["model.variant"] = variant_name(variant);
    j["model.feature_dim"] = feature_dim;
    j["model.out_time"] = out_time;
    j["model.subcarrier_ratio"] = subcarrier_ratio;
    j["model.temporal_ratio"] = temporal_ratio;
    j["model.subcarrier_hidden"] = subcarrier_hidden;
    j["model.temporal_hidden"] = temporal_hidden;
    j["model.fusion_init"] = fusion_init;
    j["model.temporal_path_gain"] = temporal_path_gain;
    j["model.se_hidden"] = se_hidden;
    j["model.cbam_channel_hidden"] = cbam_channel_hidden;
    j["model.cbam_temporal_hidden"] = cbam_temporal_hidden;
    j["model.lstm_layers"] = lstm_layers;
    j["model.lstm_hidden"] = lstm_hidden;

    j["train.lambda"] = train.lambda;
    j["train.base_lr"] = train.base_lr;
    j["train.weight_decay"] = train.weight_decay;
    j["train.beta1"] = train.beta1;
    j["train.beta2"] = train.beta2;
    j["train.batch_size"] = train.batch_size;
    j["train.max_epochs"] = train.max_epochs;
    j["train.early_stop_patience"] = train.early_stop_patience;
    j["train.seed"] = train.seed;
    j["train.train_fraction"] = train.train_fraction;
    j["train.val_fraction"] = train.val_fraction;

    j["run.output_dir"] = run.output_dir;
    j["run.dataset_path"] = run.dataset_path;
    j["run.checkpoint_path"] = run.checkpoint_path;
    j["run.seeds"] = run.seeds;
    j["run.snr_list"] = run.snr_list;
    j["run.noise_seed"] = run.noise_seed;
    j["run.threads"] = run.threads;
    return j;
}

namespace {

[[noreturn]] void bad_field(const std::string& key, const std::string& why) {
    throw std::invalid_argument("config field '" + key + "': " + why);
}

template <typename T>
T as(const json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        bad_field(key, "has the wrong type (" + v.dump() + ")");
    }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    ExperimentConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "synth.subcarriers") cfg.synth.subcarriers = as<std::size_t>(value, key);
        else if (key == "synth.time_frames") cfg.synth.time_frames = as<std::size_t>(value, key);
        else if (key == "synth.streams") cfg.synth.streams = as<std::size_t>(value, key);
        else if (key == "synth.classes") cfg.synth.classes = as<std::size_t>(value, key);
        else if (key == "synth.perturbed_fraction") cfg.synth.perturbed_fraction = as<double>(value, key);
        else if (key == "synth.window_fraction") cfg.synth.window_fraction = as<double>(value, key);
        else if (key == "synth.static_gain_scale") cfg.synth.static_gain_scale = as<double>(value, key);
        else if (key == "synth.gesture_amplitude") cfg.synth.gesture_amplitude = as<double>(value, key);
        else if (key == "synth.doppler_cycles") cfg.synth.doppler_cycles = as<std::vector<double>>(value, key);
        else if (key == "synth.seed") cfg.synth.seed = as<std::uint64_t>(value, key);
        else if (key == "synth.sample_count") cfg.sample_count = as<std::size_t>(value, key);
        else if (key == "synth.snr_db") {
            if (value.is_null()) cfg.dataset_snr_db.reset();
            else cfg.dataset_snr_db = as<double>(value, key);
        }
        else if (key == "model.variant") cfg.variant = parse_variant(as<std::string>(value, key));
        else if (key == "model.feature_dim") cfg.feature_dim = as<std::size_t>(value, key);
        else if (key == "model.out_time") cfg.out_time = as<std::size_t>(value, key);
        else if (key == "model.subcarrier_ratio") cfg.subcarrier_ratio = as<std::size_t>(value, key);
        else if (key == "model.temporal_ratio") cfg.temporal_ratio = as<std::size_t>(value, key);
        else if (key == "model.subcarrier_hidden") cfg.subcarrier_hidden = as<std::size_t>(value, key);
        else if (key == "model.temporal_hidden") cfg.temporal_hidden = as<std::size_t>(value, key);
        else if (key == "model.fusion_init") cfg.fusion_init = as<double>(value, key);
        else if (key == "model.temporal_path_gain") cfg.temporal_path_gain = as<double>(value, key);
        else if (key == "model.se_hidden") cfg.se_hidden = as<std::size_t>(value, key);
        else if (key == "model.cbam_channel_hidden") cfg.cbam_channel_hidden = as<std::size_t>(value, key);
        else if (key == "model.cbam_temporal_hidden") cfg.cbam_temporal_hidden = as<std::size_t>(value, key);
        else if (key == "model.lstm_layers") cfg.lstm_layers = as<std::size_t>(value, key);
        else if (key == "model.lstm_hidden") cfg.lstm_hidden = as<std::size_t>(value, key);
        else if (key == "train.lambda") cfg.train.lambda = as<double>(value, key);
        else if (key == "train.base_lr") cfg.train.base_lr = as<double>(value, key);
        else if (key == "train.weight_decay") cfg.train.weight_decay = as<double>(value, key);
        else if (key == "train.beta1") cfg.train.beta1 = as<double>(value, key);
        else if (key == "train.beta2") cfg.train.beta2 = as<double>(value, key);
        else if (key == "train.batch_size") cfg.train.batch_size = as<std::size_t>(value, key);
        else if (key == "train.max_epochs") cfg.train.max_epochs = as<std::size_t>(value, key);
        else if (key == "train.early_stop_patience") cfg.train.early_stop_patience = as<std::size_t>(value, key);
        else if (key == "train.seed") cfg.train.seed = as<std::uint64_t>(value, key);
        else if (key == "train.train_fraction") cfg.train.train_fraction = as<double>(value, key);
        else if (key == "train.val_fraction") cfg.train.val_fraction = as<double>(value, key);
        else if (key == "run.output_dir") cfg.run.output_dir = as<std::string>(value, key);
        else if (key == "run.dataset_path") cfg.run.dataset_path = as<std::string>(value, key);
        else if (key == "run.checkpoint_path") cfg.run.checkpoint_path = as<std::string>(value, key);
        else if (key == "run.seeds") cfg.run.seeds = as<std::vector<std::uint64_t>>(value, key);
        else if (key == "run.snr_list") cfg.run.snr_list = as<std::vector<double>>(value, key);
        else if (key == "run.noise_seed") cfg.run.noise_seed = as<std::uint64_t>(value, key);
        else if (key == "run.threads") cfg.run.threads = as<std::size_t>(value, key);
        else bad_field(key, "unknown key");
    }
    return cfg;
}

void ExperimentConfig::validate() const {
    synth.validate();
    model_config().validate();
    train.validate();
    if (sample_count == 0) bad_field("synth.sample_count", "must be positive");
    if (dataset_snr_db.has_value() && !std::isfinite(*dataset_snr_db)) {
        bad_field("synth.snr_db", "must be finite or null");
    }
    if (run.seeds.empty()) bad_field("run.seeds", "need at least one seed");
    if (run.output_dir.empty()) bad_field("run.output_dir", "must not be empty");
}

void ExperimentConfig::apply_override(const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw std::invalid_argument("override '" + assignment + "' is not of the form key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;  // unquoted strings, e.g. model.variant=vdan
    }
    json merged = to_json();
    if (!merged.contains(key)) bad_field(key, "unknown key");
    merged[key] = value;
    *this = from_json(merged);
}

ExperimentConfig ExperimentConfig::load(const std::string& path,
                                        const std::vector<std::string>& overrides) {
    ExperimentConfig cfg;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("config: cannot open " + path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw std::invalid_argument("config: " + path + " is not valid JSON: " + e.what());
        }
        // missing keys keep their defaults: merge file over defaults
        json merged = cfg.to_json();
        for (const auto& [key, value] : j.items()) merged[key] = value;
        cfg = from_json(merged);
    }
    for (const std::string& o : overrides) cfg.apply_override(o);
    cfg.validate();
    return cfg;
}

}  // namespace vdan
