#include "vdan/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <thread>

#include "vdan/checkpoint.hpp"
#include "vdan/metrics.hpp"
#include "vdan/rng.hpp"
#include "vdan/train.hpp"

namespace vdan {

namespace {

using nlohmann::json;

void ensure_output_dir(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.run.output_dir);
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failure on " + path);
}

void write_manifest(const ExperimentConfig& cfg, const std::string& command,
                    const std::vector<std::string>& outputs) {
    json manifest;
    manifest["command"] = command;
    manifest["config"] = cfg.to_json();
    manifest["seeds"] = cfg.run.seeds;
    manifest["outputs"] = outputs;
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    manifest["timestamp_unix"] =
        std::chrono::duration_cast<std::chrono::seconds>(now).count();
    write_json(cfg.run.output_dir + "/" + command + "_manifest.json", manifest);
}

Dataset build_dataset_impl(const ExperimentConfig& cfg, bool clean) {
    Dataset dataset;
    dataset.dims.subcarriers = static_cast<std::uint32_t>(cfg.synth.subcarriers);
    dataset.dims.time_frames = static_cast<std::uint32_t>(cfg.synth.time_frames);
    dataset.dims.streams = static_cast<std::uint32_t>(cfg.synth.streams);
    dataset.dims.classes = static_cast<std::uint32_t>(cfg.synth.classes);
    dataset.samples = generate_dataset(cfg.synth, cfg.sample_count);
    if (!clean && cfg.dataset_snr_db.has_value()) {
        for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
            dataset.samples[i] = inject_noise(dataset.samples[i], cfg.dataset_snr_db,
                                              mix_seed(cfg.synth.seed, 0xF0, i));
        }
    }
    return dataset;
}

Dataset load_dataset_checked(const ExperimentConfig& cfg) {
    Dataset dataset = read_dataset(cfg.dataset_path());
    if (dataset.dims.subcarriers != cfg.synth.subcarriers ||
        dataset.dims.time_frames != cfg.synth.time_frames ||
        dataset.dims.streams != cfg.synth.streams ||
        dataset.dims.classes != cfg.synth.classes) {
        throw std::invalid_argument("dataset " + cfg.dataset_path() +
                                    " dims disagree with the configured synth dims");
    }
    if (dataset.samples.empty()) {
        throw std::invalid_argument("dataset " + cfg.dataset_path() + " is empty");
    }
    return dataset;
}

}  // namespace

void parallel_tasks(std::size_t count, std::size_t threads,
                    const std::function<void(std::size_t)>& task) {
    if (threads == 0) threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        workers.emplace_back([&, w]() {
            try {
                for (std::size_t i = next++; i < count; i = next++) task(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

TrainedRun train_variant(const ExperimentConfig& cfg, VariantKind kind, std::uint64_t seed,
                         const std::vector<CsiSample>& samples) {
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    SplitIndices split = stratified_split(samples, tc.train_fraction, tc.val_fraction, seed);
    if (split.train.empty() || split.val.empty() || split.test.empty()) {
        throw std::invalid_argument("train: dataset too small for the configured split");
    }
    TrainedRun run{build_variant(kind, cfg.model_config(), seed), {}, {}};
    const std::vector<CsiSample> train_set = select(samples, split.train);
    const std::vector<CsiSample> val_set = select(samples, split.val);
    run.history = fit(run.model, train_set, val_set, tc);
    run.test_set = select(samples, split.test);
    return run;
}

Dataset build_dataset(const ExperimentConfig& cfg, bool clean) {
    return build_dataset_impl(cfg, clean);
}

namespace {

json attention_metrics(const Model& model, std::span<const CsiSample> test_set) {
    json out;
    out["gini"] = {{"subcarrier", nullptr}, {"temporal", nullptr}};
    out["alignment"] = {{"subcarrier", nullptr}, {"temporal", nullptr}};
    const std::vector<double> mean_wc = mean_attention(model, test_set, DiagnosticAxis::kSubcarrier);
    const std::vector<double> mean_wt = mean_attention(model, test_set, DiagnosticAxis::kTime);
    if (!mean_wc.empty()) {
        out["gini"]["subcarrier"] = gini(mean_wc);
        out["alignment"]["subcarrier"] =
            alignment_score(mean_wc, reference_std_vector(test_set, DiagnosticAxis::kSubcarrier));
    }
    if (!mean_wt.empty()) {
        out["gini"]["temporal"] = gini(mean_wt);
        out["alignment"]["temporal"] =
            alignment_score(mean_wt, reference_std_vector(test_set, DiagnosticAxis::kTime));
    }
    return out;
}

}  // namespace

void run_synth(const ExperimentConfig& cfg) {
    ensure_output_dir(cfg);
    Dataset dataset = build_dataset(cfg, /*clean=*/false);
    write_dataset(cfg.dataset_path(), dataset);
    write_manifest(cfg, "synth", {cfg.dataset_path()});
    std::cout << "wrote " << dataset.samples.size() << " samples to " << cfg.dataset_path()
              << "\n";
}

void run_train(const ExperimentConfig& cfg) {
    ensure_output_dir(cfg);
    Dataset dataset = load_dataset_checked(cfg);
    TrainedRun run = train_variant(cfg, cfg.variant, cfg.train.seed, dataset.samples);
    save_checkpoint(cfg.checkpoint_path(), run.model);
    const std::string history_path = cfg.run.output_dir + "/" + variant_name(cfg.variant) +
                                     "_seed" + std::to_string(cfg.train.seed) + "_history.csv";
    write_history_csv(history_path, run.history);
    write_manifest(cfg, "train", {cfg.checkpoint_path(), history_path});
    const double test_acc = evaluate(run.model, run.test_set).accuracy;
    std::cout << variant_name(cfg.variant) << " seed " << cfg.train.seed << ": best val "
              << run.history.best_val_accuracy << " at epoch " << run.history.best_epoch
              << ", stopped at " << run.history.stopped_epoch << ", test accuracy " << test_acc
              << "\n";
}

void run_eval(const ExperimentConfig& cfg) {
    ensure_output_dir(cfg);
    Dataset dataset = load_dataset_checked(cfg);
    SplitIndices split = stratified_split(dataset.samples, cfg.train.train_fraction,
                                          cfg.train.val_fraction, cfg.train.seed);
    Model model = build_variant(cfg.variant, cfg.model_config(), cfg.train.seed);
    load_checkpoint(cfg.checkpoint_path(), model);
    const std::vector<CsiSample> test_set = select(dataset.samples, split.test);

    EvalResult result = evaluate(model, test_set);
    json metrics;
    metrics["accuracy"] = result.accuracy;
    json confusion = json::array();
    for (std::size_t r = 0; r < result.confusion.classes; ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < result.confusion.classes; ++c) {
            row.push_back(result.confusion.at(r, c));
        }
        confusion.push_back(row);
    }
    metrics["confusion"] = confusion;
    const json att = attention_metrics(model, test_set);
    metrics["gini"] = att["gini"];
    metrics["alignment"] = att["alignment"];

    // the sweep runs on clean regenerations of the same planted structure
    Dataset clean = build_dataset(cfg, /*clean=*/true);
    const std::vector<CsiSample> clean_test = select(clean.samples, split.test);
    json curve = json::array();
    for (const SnrPoint& p : snr_sweep(model, clean_test, cfg.run.snr_list, cfg.run.noise_seed)) {
        curve.push_back({p.snr_db, p.accuracy});  // +inf serializes as null
    }
    metrics["snr_curve"] = curve;

    const std::string metrics_path = cfg.run.output_dir + "/metrics.json";
    write_json(metrics_path, metrics);
    write_manifest(cfg, "eval", {metrics_path});
    std::cout << "test accuracy " << result.accuracy << ", metrics in " << metrics_path << "\n";
}

std::vector<AblationRow> ablation_study(const ExperimentConfig& cfg,
                                        const std::vector<CsiSample>& samples) {
    const std::vector<VariantKind> kinds = all_variants();
    const std::size_t n_seeds = cfg.run.seeds.size();
    std::vector<AblationRow> rows(kinds.size());
    std::vector<double> accuracies(kinds.size() * n_seeds, 0.0);

    parallel_tasks(kinds.size() * n_seeds, cfg.run.threads, [&](std::size_t task) {
        const std::size_t ki = task / n_seeds;
        const std::size_t si = task % n_seeds;
        TrainedRun run = train_variant(cfg, kinds[ki], cfg.run.seeds[si], samples);
        accuracies[task] = evaluate(run.model, run.test_set).accuracy;
    });

    for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
        AblationRow& row = rows[ki];
        row.variant = variant_name(kinds[ki]);
        row.extra_parameters =
            build_variant(kinds[ki], cfg.model_config(), 0).extra_parameter_count();
        row.per_seed_accuracy.assign(accuracies.begin() + static_cast<std::ptrdiff_t>(ki * n_seeds),
                                     accuracies.begin() + static_cast<std::ptrdiff_t>((ki + 1) * n_seeds));
        double mean = 0.0;
        for (double a : row.per_seed_accuracy) mean += a;
        mean /= static_cast<double>(n_seeds);
        double var = 0.0;
        for (double a : row.per_seed_accuracy) var += (a - mean) * (a - mean);
        row.mean_accuracy = mean;
        row.std_accuracy = n_seeds > 1 ? std::sqrt(var / static_cast<double>(n_seeds - 1)) : 0.0;
    }
    return rows;
}

void run_ablate(const ExperimentConfig& cfg) {
    ensure_output_dir(cfg);
    Dataset dataset = load_dataset_checked(cfg);
    const std::vector<AblationRow> rows = ablation_study(cfg, dataset.samples);

    json summary = json::array();
    const std::string csv_path = cfg.run.output_dir + "/ablation_summary.csv";
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot open " + csv_path);
    csv << "variant,mean_accuracy,std_accuracy,extra_parameters\n";
    csv.precision(17);
    for (const AblationRow& row : rows) {
        summary.push_back({{"variant", row.variant},
                           {"mean_accuracy", row.mean_accuracy},
                           {"std_accuracy", row.std_accuracy},
                           {"extra_parameters", row.extra_parameters},
                           {"per_seed_accuracy", row.per_seed_accuracy}});
        csv << row.variant << ',' << row.mean_accuracy << ',' << row.std_accuracy << ','
            << row.extra_parameters << '\n';
        std::cout << row.variant << ": " << row.mean_accuracy << " +/- " << row.std_accuracy
                  << " (extra params " << row.extra_parameters << ")\n";
    }
    const std::string json_path = cfg.run.output_dir + "/ablation_summary.json";
    write_json(json_path, summary);
    write_manifest(cfg, "ablate", {json_path, csv_path});
}

void run_snr_sweep(const ExperimentConfig& cfg) {
    ensure_output_dir(cfg);
    Model model = build_variant(cfg.variant, cfg.model_config(), cfg.train.seed);
    load_checkpoint(cfg.checkpoint_path(), model);

    Dataset clean = build_dataset(cfg, /*clean=*/true);
    SplitIndices split = stratified_split(clean.samples, cfg.train.train_fraction,
                                          cfg.train.val_fraction, cfg.train.seed);
    const std::vector<CsiSample> clean_test = select(clean.samples, split.test);

    const std::string csv_path = cfg.run.output_dir + "/snr_sweep.csv";
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot open " + csv_path);
    csv << "snr_db,accuracy\n";
    csv.precision(17);
    for (const SnrPoint& p : snr_sweep(model, clean_test, cfg.run.snr_list, cfg.run.noise_seed)) {
        if (std::isinf(p.snr_db)) csv << "inf";
        else csv << p.snr_db;
        csv << ',' << p.accuracy << '\n';
        std::cout << (std::isinf(p.snr_db) ? std::string("inf") : std::to_string(p.snr_db))
                  << " dB: " << p.accuracy << "\n";
    }
    write_manifest(cfg, "snr-sweep", {csv_path});
}

void run_inspect_attention(const ExperimentConfig& cfg) {
    ensure_output_dir(cfg);
    Dataset dataset = load_dataset_checked(cfg);
    SplitIndices split = stratified_split(dataset.samples, cfg.train.train_fraction,
                                          cfg.train.val_fraction, cfg.train.seed);
    Model model = build_variant(cfg.variant, cfg.model_config(), cfg.train.seed);
    load_checkpoint(cfg.checkpoint_path(), model);
    const std::vector<CsiSample> test_set = select(dataset.samples, split.test);

    const auto wc = attention_per_sample(model, test_set, DiagnosticAxis::kSubcarrier);
    const auto wt = attention_per_sample(model, test_set, DiagnosticAxis::kTime);
    const auto ref_c = reference_std_vector(test_set, DiagnosticAxis::kSubcarrier);
    const auto ref_t = reference_std_vector(test_set, DiagnosticAxis::kTime);

    const std::string vec_path = cfg.run.output_dir + "/attention_vectors.csv";
    std::ofstream vec(vec_path, std::ios::trunc);
    if (!vec) throw std::runtime_error("cannot open " + vec_path);
    vec << "sample,label,axis,index,weight,reference_std,mask\n";
    vec.precision(17);
    const std::string score_path = cfg.run.output_dir + "/attention_scores.csv";
    std::ofstream scores(score_path, std::ios::trunc);
    if (!scores) throw std::runtime_error("cannot open " + score_path);
    scores << "sample,label,alignment_subcarrier,alignment_time,argmax_t,argmax_in_window\n";
    scores.precision(17);

    for (std::size_t i = 0; i < test_set.size(); ++i) {
        const CsiSample& s = test_set[i];
        for (std::size_t c = 0; c < wc[i].size(); ++c) {
            vec << i << ',' << s.label << ",subcarrier," << c << ',' << wc[i][c] << ','
                << ref_c[c] << ',' << static_cast<int>(s.subcarrier_mask[c]) << '\n';
        }
        for (std::size_t t = 0; t < wt[i].size(); ++t) {
            vec << i << ',' << s.label << ",time," << t << ',' << wt[i][t] << ',' << ref_t[t]
                << ',' << static_cast<int>(s.time_mask[t]) << '\n';
        }
        scores << i << ',' << s.label << ',';
        if (!wc[i].empty()) {
            std::vector<double> indicator(s.subcarrier_mask.begin(), s.subcarrier_mask.end());
            scores << alignment_score(wc[i], indicator);
        }
        scores << ',';
        if (!wt[i].empty()) {
            std::vector<double> indicator(s.time_mask.begin(), s.time_mask.end());
            scores << alignment_score(wt[i], indicator);
        }
        scores << ',';
        if (!wt[i].empty()) {
            const std::size_t argmax = static_cast<std::size_t>(
                std::max_element(wt[i].begin(), wt[i].end()) - wt[i].begin());
            scores << argmax << ',' << static_cast<int>(s.time_mask[argmax] != 0);
        } else {
            scores << ',';
        }
        scores << '\n';
    }
    write_manifest(cfg, "inspect-attention", {vec_path, score_path});
    std::cout << "wrote " << vec_path << " and " << score_path << "\n";
}

void run_gradcheck(const ExperimentConfig& cfg) {
    ensure_output_dir(cfg);
    struct Check {
        std::string name;
        double error;
        double tolerance;
    };
    std::vector<Check> checks;

    {  // quadratic: analytic gradient is 2x
        Tensor x = Tensor::from({4}, {0.3, -0.7, 1.1, 0.05}, true);
        auto loss_fn = [&x](Tape& tape) {
            return reduce_sum(&tape, mul(&tape, x, x), {0});
        };
        std::vector<Tensor> params = {x};
        checks.push_back({"sum(x^2)", grad_check(loss_fn, params, 1e-6), 1e-8});
    }
    {  // sigmoid of an affine map
        RandomStream rng(mix_seed(cfg.train.seed, 0x6C));
        Tensor x = Tensor::zeros({1, 4}, true);
        Tensor w = Tensor::zeros({4, 3}, true);
        Tensor b = Tensor::zeros({3}, true);
        for (Tensor* t : {&x, &w, &b}) {
            for (double& v : t->data()) v = rng.uniform(-1.0, 1.0);
        }
        auto loss_fn = [&](Tape& tape) {
            Tensor y = sigmoid(&tape, affine(&tape, x, w, b));
            return reduce_sum(&tape, y, {0, 1});
        };
        std::vector<Tensor> params = {x, w, b};
        checks.push_back({"sum(sigmoid(affine))", grad_check(loss_fn, params, 1e-5), 1e-6});
    }
    {  // the full training objective with frozen epsilon
        Model model = build_variant(cfg.variant, cfg.model_config(), cfg.train.seed);
        CsiSample sample = generate_sample(cfg.synth, 0, 0);
        if (cfg.dataset_snr_db.has_value()) {
            sample = inject_noise(sample, cfg.dataset_snr_db, mix_seed(cfg.synth.seed, 0xF0, 0));
        }
        const std::uint64_t frozen_eps = mix_seed(cfg.train.seed, 0x6D);
        const double lambda = cfg.train.lambda;
        auto loss_fn = [&](Tape& tape) {
            Model::LogitsOut out = model.logits(&tape, sample.data, RunMode::kTrain, frozen_eps);
            return total_loss(&tape, out.logits, sample.label, out.preprocess.kl_c,
                              out.preprocess.kl_t, lambda);
        };
        // 3e-4 balances cancellation noise on small-gradient entries against
        // truncation and ReLU-kink effects at larger steps
        checks.push_back({"total loss over all parameters",
                          grad_check(loss_fn, model.parameters(), 3e-4), 1e-4});
    }

    bool ok = true;
    for (const Check& c : checks) {
        const bool pass = c.error < c.tolerance;
        ok = ok && pass;
        std::cout << (pass ? "[PASS] " : "[FAIL] ") << c.name << ": max relative error "
                  << c.error << " (tolerance " << c.tolerance << ")\n";
    }
    write_manifest(cfg, "gradcheck", {});
    if (!ok) throw std::runtime_error("gradcheck: finite-difference suite failed");
}

}  // namespace vdan
