// Drives the built CLI end to end: synth -> train -> eval -> diagnostics on a
// tiny configuration, plus failure-path and determinism checks. Invoked by
// ctest with the binary path as argv[1].

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

int failures = 0;

void expect(bool ok, const std::string& what) {
    if (!ok) {
        ++failures;
        std::cerr << "[FAIL] " << what << "\n";
    } else {
        std::cout << "[ ok ] " << what << "\n";
    }
}

int run(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: pipeline_test <path-to-vdan-binary>\n";
        return 2;
    }
    const std::string tool = argv[1];
    const fs::path work = fs::temp_directory_path() / "vdan_pipeline_test";
    fs::remove_all(work);
    fs::create_directories(work);

    // tiny, fast configuration shared by every invocation
    const std::string cfg_path = (work / "config.json").string();
    {
        std::ofstream out(cfg_path);
        out << R"({
            "synth.subcarriers": 8,
            "synth.time_frames": 16,
            "synth.streams": 2,
            "synth.classes": 3,
            "synth.window_fraction": 0.5,
            "synth.gesture_amplitude": 2.0,
            "synth.sample_count": 60,
            "model.feature_dim": 8,
            "model.out_time": 4,
            "model.subcarrier_hidden": 8,
            "model.temporal_hidden": 8,
            "model.se_hidden": 8,
            "model.cbam_channel_hidden": 8,
            "model.cbam_temporal_hidden": 8,
            "model.lstm_hidden": 4,
            "train.batch_size": 8,
            "train.max_epochs": 4,
            "train.early_stop_patience": 4,
            "run.snr_list": [10.0, 0.0],
            "run.seeds": [1, 2]
        })";
    }
    auto vdan = [&](const std::string& args) {
        return run(tool + " " + args + " > /dev/null 2>&1");
    };
    const std::string base = "-c " + cfg_path + " run.output_dir=" + (work / "out").string();

    // synth -> train -> eval pipeline
    expect(vdan("synth " + base) == 0, "synth exits 0");
    expect(fs::exists(work / "out/dataset.csid"), "dataset file exists");
    expect(fs::exists(work / "out/synth_manifest.json"), "synth manifest exists");

    expect(vdan("train " + base) == 0, "train exits 0");
    expect(fs::exists(work / "out/vdan_seed1.ckpt"), "checkpoint exists");
    expect(fs::exists(work / "out/vdan_seed1_history.csv"), "history CSV exists");

    expect(vdan("eval " + base) == 0, "eval exits 0");
    {
        nlohmann::json metrics;
        std::ifstream in(work / "out/metrics.json");
        in >> metrics;
        expect(metrics.contains("accuracy") && metrics.contains("confusion") &&
                   metrics.contains("gini") && metrics.contains("alignment") &&
                   metrics.contains("snr_curve"),
               "metrics JSON matches the schema");
        expect(metrics["confusion"].size() == 3, "confusion matrix is K x K");
        expect(metrics["snr_curve"].size() == 3, "snr curve has the no-noise entry prepended");
        expect(metrics["snr_curve"][0][0].is_null(), "no-noise snr serializes as null");
    }

    expect(vdan("snr-sweep " + base) == 0, "snr-sweep exits 0");
    expect(fs::exists(work / "out/snr_sweep.csv"), "sweep CSV exists");
    {
        const std::string csv = slurp((work / "out/snr_sweep.csv").string());
        expect(csv.find("inf,") != std::string::npos, "sweep CSV carries the inf row");
    }

    expect(vdan("inspect-attention " + base) == 0, "inspect-attention exits 0");
    expect(fs::exists(work / "out/attention_vectors.csv") &&
               fs::exists(work / "out/attention_scores.csv"),
           "attention CSVs exist");

    expect(vdan("gradcheck " + base) == 0, "gradcheck exits 0 on the tiny config");

    // ablate: exactly 7 variant rows
    expect(vdan("ablate " + base + " run.seeds=[1]") == 0, "ablate exits 0");
    {
        nlohmann::json summary;
        std::ifstream in(work / "out/ablation_summary.json");
        in >> summary;
        expect(summary.size() == 7, "ablation summary lists exactly 7 variants");
        std::vector<std::string> names;
        for (auto& row : summary) names.push_back(row["variant"].get<std::string>());
        const std::vector<std::string> expected = {"baseline", "sap", "tap", "dual-det",
                                                   "se", "cbam", "vdan"};
        expect(names == expected, "ablation covers every variant name");
    }

    // determinism: identical invocations produce identical result files
    const std::string out_a = (work / "det_a").string();
    const std::string out_b = (work / "det_b").string();
    for (const std::string& dir : {out_a, out_b}) {
        expect(vdan("synth -c " + cfg_path + " run.output_dir=" + dir) == 0,
               "determinism synth " + dir);
        expect(vdan("train -c " + cfg_path + " run.output_dir=" + dir) == 0,
               "determinism train " + dir);
    }
    expect(slurp(out_a + "/dataset.csid") == slurp(out_b + "/dataset.csid"),
           "identical runs write identical dataset bytes");
    expect(slurp(out_a + "/vdan_seed1.ckpt") == slurp(out_b + "/vdan_seed1.ckpt"),
           "identical runs write identical checkpoint bytes");
    expect(slurp(out_a + "/vdan_seed1_history.csv") == slurp(out_b + "/vdan_seed1_history.csv"),
           "identical runs write identical history bytes");

    // error contracts
    expect(vdan("unknown-command " + base) != 0, "unknown command is rejected");
    expect(vdan("train " + base + " train.batch_size=0") == 1,
           "invalid config exits with status 1");
    expect(vdan("eval -c " + cfg_path + " run.output_dir=" + (work / "nowhere").string()) == 2,
           "missing inputs exit with status 2");
    expect(vdan("train " + base + " bogus.key=1") == 1, "unknown override is a validation error");

    fs::remove_all(work);
    if (failures) {
        std::cerr << failures << " pipeline check(s) failed\n";
        return 1;
    }
    std::cout << "pipeline checks passed\n";
    return 0;
}
