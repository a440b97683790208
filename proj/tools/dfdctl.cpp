// Experiment harness: dataset generation, multistage training, evaluation,
// adversarial sweeps, wavelet feature extraction, and artifact verification.
//
// Exit codes: 0 success, 2 invalid configuration, 3 I/O failure,
// 4 missing checkpoint. `verify-run` exits 1 when artifacts were tampered.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "CLI11.hpp"
#include "dfd/adversarial.hpp"
#include "dfd/backbones.hpp"
#include "dfd/dataset.hpp"
#include "dfd/ensemble.hpp"
#include "dfd/evalsuite.hpp"
#include "dfd/staging.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitTampered = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitCheckpoint = 4;

struct missing_checkpoint : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    fs::path dataset_root;
    fs::path val_root;
    std::vector<std::string> backbones{"mlp"};
    std::size_t input_size = 32;
    std::size_t mlp_hidden = 16;
    std::size_t stages = 5;
    std::uint64_t seed = 42;
    dfd::StageHyperparams hp;
    bool augment_enabled = false;
    dfd::AugmentConfig aug;
    std::string fusion = "equal";
    std::vector<double> epsilons{0.005, 0.01, 0.03, 0.05};
    dfd::AdversarialTrainConfig adv;
    fs::path out_dir;

    void validate() const {
        if (backbones.empty()) throw dfd::invalid_config("config: empty backbone list");
        if (stages < 1) throw dfd::invalid_config("config: stages must be >= 1");
        if (input_size < 2) throw dfd::invalid_config("config: input_size must be >= 2");
        if (fusion != "equal" && fusion != "optimized" && fusion != "majority")
            throw dfd::invalid_config("config: fusion must be equal|optimized|majority");
        for (double e : epsilons)
            if (e < 0.0) throw dfd::invalid_config("config: negative epsilon");
        if (out_dir.empty()) throw dfd::invalid_config("config: out_dir is required");
        hp.validate();
    }
};

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw dfd::io_error("cannot read config: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw dfd::invalid_config("config parse error: " + std::string(e.what()));
    }
    ExperimentConfig cfg;
    try {
        cfg.dataset_root = j.value("dataset_root", std::string{});
        cfg.val_root = j.value("val_root", std::string{});
        if (j.contains("backbones"))
            cfg.backbones = j.at("backbones").get<std::vector<std::string>>();
        cfg.input_size = j.value("input_size", cfg.input_size);
        cfg.mlp_hidden = j.value("mlp_hidden", cfg.mlp_hidden);
        cfg.stages = j.value("stages", cfg.stages);
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("hyperparams")) {
            const json& h = j.at("hyperparams");
            cfg.hp.epochs_per_stage = h.value("epochs_per_stage", cfg.hp.epochs_per_stage);
            cfg.hp.batch_size = h.value("batch_size", cfg.hp.batch_size);
            cfg.hp.initial_lr = h.value("initial_lr", cfg.hp.initial_lr);
            cfg.hp.plateau_factor = h.value("plateau_factor", cfg.hp.plateau_factor);
            cfg.hp.plateau_patience = h.value("plateau_patience", cfg.hp.plateau_patience);
        }
        if (j.contains("augment")) {
            const json& a = j.at("augment");
            cfg.augment_enabled = a.value("enabled", false);
            cfg.aug.hflip_prob = a.value("hflip_prob", cfg.aug.hflip_prob);
            cfg.aug.rotation_max_deg = a.value("rotation_max_deg", cfg.aug.rotation_max_deg);
            cfg.aug.jitter_strength = a.value("jitter_strength", cfg.aug.jitter_strength);
            cfg.aug.crop_scale_min = a.value("crop_scale_min", cfg.aug.crop_scale_min);
            cfg.aug.crop_scale_max = a.value("crop_scale_max", cfg.aug.crop_scale_max);
        }
        cfg.fusion = j.value("fusion", cfg.fusion);
        if (j.contains("epsilons"))
            cfg.epsilons = j.at("epsilons").get<std::vector<double>>();
        if (j.contains("adversarial")) {
            const json& a = j.at("adversarial");
            cfg.adv.epsilon = a.value("epsilon", cfg.adv.epsilon);
            cfg.adv.epochs = a.value("epochs", cfg.adv.epochs);
            cfg.adv.lr = a.value("lr", cfg.adv.lr);
            cfg.adv.clean_per_batch = a.value("clean_per_batch", cfg.adv.clean_per_batch);
            cfg.adv.perturbed_per_batch =
                a.value("perturbed_per_batch", cfg.adv.perturbed_per_batch);
        }
        cfg.out_dir = j.value("out_dir", std::string{});
    } catch (const json::exception& e) {
        throw dfd::invalid_config("config field error: " + std::string(e.what()));
    }
    if (const char* env = std::getenv("DFD_DATASET_ROOT"); env && *env)
        cfg.dataset_root = env;
    return cfg;
}

// ---------------------------------------------------------------------------
// Run directory helpers
// ---------------------------------------------------------------------------

// One process owns the run directory exclusively for the duration of a
// subcommand.
class LockGuard {
public:
    explicit LockGuard(const fs::path& dir) : path_(dir / ".lock") {
        if (fs::exists(path_))
            throw dfd::io_error("run directory is locked: " + path_.string());
        std::ofstream out(path_);
        if (!out) throw dfd::io_error("cannot create lock file: " + path_.string());
        out << "locked\n";
    }
    ~LockGuard() {
        std::error_code ec;
        fs::remove(path_, ec);
    }

private:
    fs::path path_;
};

void write_run_manifest(const fs::path& run_dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name == "manifest.json" || name == ".lock") continue;
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    dfd::RunManifest manifest(run_dir);
    for (const fs::path& f : files) manifest.record(f);
    manifest.save();
}

// ---------------------------------------------------------------------------
// Model plumbing
// ---------------------------------------------------------------------------

struct ModelSlot {
    std::string name;  // unique instance name; doubles as the directory name
    std::string kind;
    std::unique_ptr<dfd::Backbone> backbone;
    dfd::Preprocessor pre;
};

std::vector<ModelSlot> build_models(const ExperimentConfig& cfg) {
    std::vector<ModelSlot> slots;
    std::map<std::string, int> counts;
    for (std::size_t i = 0; i < cfg.backbones.size(); ++i) {
        const std::string& kind = cfg.backbones[i];
        const int n = ++counts[kind];
        ModelSlot slot;
        slot.kind = kind;
        slot.name = n == 1 ? kind : kind + "_" + std::to_string(n);
        const std::uint64_t seed = dfd::mix_seed(cfg.seed, 0xB0 + i);
        if (kind == "mlp") {
            slot.backbone = dfd::make_mlp_backbone(cfg.input_size * cfg.input_size * 3,
                                                   cfg.mlp_hidden, seed, slot.name);
            slot.pre.kind = dfd::Preproc::plain;
            slot.pre.input_size = cfg.input_size;
        } else {
            slot.backbone = dfd::make_backbone(kind, cfg.input_size, seed);
            slot.pre = dfd::Preprocessor::for_backbone(*slot.backbone);
        }
        slot.pre.augment_in_training = cfg.augment_enabled;
        slot.pre.aug = cfg.aug;
        slots.push_back(std::move(slot));
    }
    return slots;
}

fs::path checkpoint_base(const ExperimentConfig& cfg, const ModelSlot& slot) {
    return cfg.out_dir / "checkpoints" / slot.name /
           ("stage_" + std::to_string(cfg.stages));
}

void load_final_checkpoint(const ExperimentConfig& cfg, ModelSlot& slot) {
    const fs::path base = checkpoint_base(cfg, slot);
    if (!fs::exists(base.string() + ".bin"))
        throw missing_checkpoint("missing checkpoint: " + base.string() + ".bin");
    dfd::load_checkpoint(*slot.backbone, base);
}

dfd::ImageFolderDataset open_dataset(const fs::path& root, std::size_t size,
                                     const char* what) {
    if (!fs::exists(root))
        throw dfd::invalid_config(std::string(what) + " does not exist: " + root.string());
    return dfd::ImageFolderDataset(root, size);
}

// Deterministic eval-path tensors for every image in a folder dataset.
std::vector<dfd::LabeledTensor> eval_tensors(const dfd::ImageFolderDataset& ds,
                                             const dfd::Preprocessor& pre,
                                             std::vector<std::string>* ids_out = nullptr) {
    std::vector<dfd::LabeledTensor> out;
    for (const auto* group : {&ds.real_ids(), &ds.fake_ids()}) {
        for (const std::string& id : *group) {
            out.push_back({pre.eval(ds.load(id)), ds.label_of(id)});
            if (ids_out) ids_out->push_back(id);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Plots (rendering details are intentionally simple)
// ---------------------------------------------------------------------------

void plot_roc(const dfd::RocResult& roc, const fs::path& path) {
    const int s = 512, m = 48;
    cv::Mat img(s, s, CV_8UC3, cv::Scalar(255, 255, 255));
    cv::rectangle(img, {m, m}, {s - m, s - m}, cv::Scalar(0, 0, 0));
    cv::line(img, {m, s - m}, {s - m, m}, cv::Scalar(200, 200, 200));
    std::vector<cv::Point> pts;
    for (const auto& p : roc.curve)
        pts.emplace_back(m + static_cast<int>(p.fpr * (s - 2 * m)),
                         s - m - static_cast<int>(p.tpr * (s - 2 * m)));
    cv::polylines(img, pts, false, cv::Scalar(180, 60, 20), 2);
    cv::putText(img, "ROC (AUC " + dfd::format_double(roc.auc) + ")", {m, m - 12},
                cv::FONT_HERSHEY_SIMPLEX, 0.6, cv::Scalar(0, 0, 0), 1);
    cv::putText(img, "FPR", {s / 2, s - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
                cv::Scalar(0, 0, 0), 1);
    cv::putText(img, "TPR", {6, s / 2}, cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(0, 0, 0),
                1);
    if (!cv::imwrite(path.string(), img))
        throw dfd::io_error("cannot write plot: " + path.string());
}

void plot_confusion(const dfd::ConfusionMatrix& c, const fs::path& path) {
    const int s = 512, m = 64;
    cv::Mat img(s, s, CV_8UC3, cv::Scalar(255, 255, 255));
    const int cell = (s - 2 * m) / 2;
    const std::size_t counts[2][2] = {{c.tn, c.fp}, {c.fn, c.tp}};
    const char* row_names[2] = {"true real", "true fake"};
    const char* col_names[2] = {"pred real", "pred fake"};
    for (int r = 0; r < 2; ++r) {
        for (int col = 0; col < 2; ++col) {
            const cv::Rect box(m + col * cell, m + r * cell, cell, cell);
            cv::rectangle(img, box, cv::Scalar(0, 0, 0));
            cv::putText(img, std::to_string(counts[r][col]),
                        {box.x + cell / 2 - 20, box.y + cell / 2},
                        cv::FONT_HERSHEY_SIMPLEX, 0.8, cv::Scalar(20, 60, 180), 2);
        }
        cv::putText(img, row_names[r], {4, m + r * cell + cell / 2},
                    cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1);
        cv::putText(img, col_names[r], {m + r * cell + cell / 4, m - 10},
                    cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1);
    }
    cv::putText(img, "Confusion matrix", {m, 32}, cv::FONT_HERSHEY_SIMPLEX, 0.6,
                cv::Scalar(0, 0, 0), 1);
    if (!cv::imwrite(path.string(), img))
        throw dfd::io_error("cannot write plot: " + path.string());
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_make_dataset(const fs::path& out, std::size_t n_real, std::size_t n_fake,
                     std::uint64_t seed, std::size_t size, const std::string& preset) {
    dfd::SyntheticConfig cfg = preset == "overlapping" ? dfd::SyntheticConfig::overlapping()
                                                       : dfd::SyntheticConfig::easy();
    cfg.size = size;
    dfd::write_synth_dataset(out, n_real, n_fake, seed, cfg);
    std::cout << "wrote " << n_real << " real + " << n_fake << " fake images to " << out
              << "\n";
    return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto train_ds = open_dataset(cfg.dataset_root, cfg.input_size, "dataset_root");
    const auto val_ds = open_dataset(cfg.val_root, cfg.input_size, "val_root");
    if (train_ds.fake_ids().size() < cfg.stages)
        throw dfd::invalid_config("train: fewer fake images than stages");

    fs::create_directories(cfg.out_dir);
    LockGuard lock(cfg.out_dir);

    const dfd::StagePlan plan = dfd::partition_fakes(train_ds.fake_ids(), cfg.stages,
                                                     cfg.seed, train_ds.real_ids());
    dfd::write_file_atomic(cfg.out_dir / "partition.json", plan.to_json().dump(2) + "\n");

    auto slots = build_models(cfg);
    for (std::size_t i = 0; i < slots.size(); ++i) {
        ModelSlot& slot = slots[i];
        const fs::path ckdir = cfg.out_dir / "checkpoints" / slot.name;
        fs::create_directories(ckdir);

        dfd::MultistageOptions opts;
        opts.hp = cfg.hp;
        opts.seed = dfd::mix_seed(cfg.seed, 0x7A + i);
        opts.checkpoint_dir = ckdir;
        // Idempotent resume: restart after the last durable stage checkpoint.
        for (std::size_t s = cfg.stages; s >= 1; --s) {
            const fs::path base = ckdir / ("stage_" + std::to_string(s));
            if (fs::exists(base.string() + ".bin")) {
                dfd::load_checkpoint(*slot.backbone, base);
                opts.resume_after_stage = s;
                break;
            }
        }

        std::map<std::string, dfd::Image> cache;
        const dfd::Preprocessor pre = slot.pre;
        dfd::SampleFetcher fetch = [&](const std::string& id, std::uint64_t sample_seed) {
            auto it = cache.find(id);
            if (it == cache.end()) it = cache.emplace(id, train_ds.load(id)).first;
            return pre.train(it->second, sample_seed);
        };
        const std::vector<dfd::LabeledTensor> val = eval_tensors(val_ds, pre);

        const dfd::MultistageResult res =
            dfd::run_multistage(*slot.backbone, plan, opts, fetch, val);
        dfd::write_file_atomic(ckdir / "training_log.csv", dfd::training_log_csv(res.log));
        std::cout << "trained " << slot.name << " through stage " << cfg.stages << "\n";
    }
    write_run_manifest(cfg.out_dir);
    return kExitOk;
}

int cmd_evaluate(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto val_ds = open_dataset(cfg.val_root, cfg.input_size, "val_root");
    fs::create_directories(cfg.out_dir);
    LockGuard lock(cfg.out_dir);

    auto slots = build_models(cfg);
    if (cfg.fusion == "optimized" && slots.size() != 3)
        throw dfd::invalid_config("evaluate: optimized fusion requires exactly 3 models");
    if (cfg.fusion == "majority" && slots.size() % 2 == 0)
        throw dfd::invalid_config("evaluate: majority fusion requires an odd model count");

    std::vector<std::string> ids;
    std::vector<int> labels;
    std::vector<std::vector<double>> probs;  // sample-major
    for (std::size_t m = 0; m < slots.size(); ++m) {
        load_final_checkpoint(cfg, slots[m]);
        std::vector<std::string> local_ids;
        const auto tensors = eval_tensors(val_ds, slots[m].pre, &local_ids);
        if (m == 0) {
            ids = local_ids;
            probs.assign(tensors.size(), std::vector<double>(slots.size(), 0.0));
            for (const auto& t : tensors) labels.push_back(t.label);
        }
        for (std::size_t i = 0; i < tensors.size(); ++i)
            probs[i][m] = slots[m].backbone->predict_proba(tensors[i].x);
    }
    bool has_real = false, has_fake = false;
    for (int l : labels) (l == 1 ? has_fake : has_real) = true;
    if (!has_real || !has_fake)
        throw dfd::invalid_config("evaluate: validation set needs both classes");

    // Fusion.
    dfd::FusionWeights weights = dfd::FusionWeights::equal(slots.size());
    json fusion_info;
    fusion_info["strategy"] = cfg.fusion;
    if (cfg.fusion == "optimized") {
        const dfd::WeightSearchResult ws = dfd::search_weights(probs, labels);
        weights = ws.weights;
        fusion_info["search_accuracy"] = ws.accuracy;
        fusion_info["grid_size"] = ws.grid_size;
    }
    fusion_info["weights"] = weights.weights;

    std::vector<double> fused(labels.size());
    std::vector<int> decisions(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (cfg.fusion == "majority") {
            std::vector<int> votes;
            for (double p : probs[i]) votes.push_back(p >= 0.5 ? 1 : 0);
            decisions[i] = dfd::fuse_majority(votes);
            fused[i] = static_cast<double>(decisions[i]);
        } else {
            fused[i] = dfd::fuse_weighted(probs[i], weights);
            decisions[i] = fused[i] >= 0.5 ? 1 : 0;
        }
    }

    // Prediction CSV.
    std::string csv = "id,label";
    for (const auto& s : slots) csv += "," + s.name;
    csv += ",fused_prob,fused_decision\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        csv += ids[i] + "," + std::to_string(labels[i]);
        for (double p : probs[i]) csv += "," + dfd::format_double(p);
        csv += "," + dfd::format_double(fused[i]) + "," + std::to_string(decisions[i]) + "\n";
    }
    dfd::write_file_atomic(cfg.out_dir / "predictions.csv", csv);

    auto metric_block = [&](const std::vector<double>& scores) {
        const dfd::ClassificationMetrics cm = dfd::classification_metrics(labels, scores);
        const dfd::RocResult roc = dfd::roc_auc(labels, scores);
        json m;
        m["accuracy"] = cm.accuracy;
        m["precision"] = cm.precision;
        m["recall"] = cm.recall;
        m["f1_score"] = cm.f1;
        m["auc"] = roc.auc;
        m["eer"] = dfd::equal_error_rate(labels, scores).eer;
        m["average_precision"] = dfd::average_precision(labels, scores);
        return m;
    };

    json report;
    std::vector<std::vector<bool>> correct(slots.size());
    for (std::size_t m = 0; m < slots.size(); ++m) {
        std::vector<double> scores;
        for (const auto& row : probs) scores.push_back(row[m]);
        report["metrics"][slots[m].name] = metric_block(scores);
        for (std::size_t i = 0; i < labels.size(); ++i)
            correct[m].push_back((scores[i] >= 0.5 ? 1 : 0) == labels[i]);
    }
    report["metrics"]["ensemble"] = metric_block(fused);
    std::vector<bool> ens_correct;
    for (std::size_t i = 0; i < labels.size(); ++i)
        ens_correct.push_back(decisions[i] == labels[i]);

    // Pairwise McNemar rows: every model pair, then each model vs ensemble.
    std::vector<std::pair<std::string, std::string>> pair_names;
    std::vector<std::pair<const std::vector<bool>*, const std::vector<bool>*>> pair_flags;
    for (std::size_t a = 0; a < slots.size(); ++a)
        for (std::size_t b = a + 1; b < slots.size(); ++b) {
            pair_names.emplace_back(slots[a].name, slots[b].name);
            pair_flags.emplace_back(&correct[a], &correct[b]);
        }
    for (std::size_t a = 0; a < slots.size(); ++a) {
        pair_names.emplace_back(slots[a].name, "ensemble");
        pair_flags.emplace_back(&correct[a], &ens_correct);
    }
    report["mcnemar"] = json::array();
    for (std::size_t i = 0; i < pair_names.size(); ++i) {
        const dfd::McNemarResult r =
            dfd::mcnemar(*pair_flags[i].first, *pair_flags[i].second, 0.05,
                         pair_names.size());
        json row;
        row["model_a"] = pair_names[i].first;
        row["model_b"] = pair_names[i].second;
        row["n11"] = r.n11;
        row["n10"] = r.n10;
        row["n01"] = r.n01;
        row["n00"] = r.n00;
        row["chi2"] = r.chi2;
        row["p_value"] = r.p_value;
        row["significant"] = r.significant;
        row["significant_bonferroni"] = r.significant_bonferroni;
        report["mcnemar"].push_back(row);
    }
    report["fusion"] = fusion_info;
    report["n_samples"] = labels.size();
    dfd::write_file_atomic(cfg.out_dir / "eval_report.json", report.dump(2) + "\n");

    plot_roc(dfd::roc_auc(labels, fused), cfg.out_dir / "roc_curve.png");
    plot_confusion(dfd::classification_metrics(labels, fused).confusion,
                   cfg.out_dir / "confusion_matrix.png");

    write_run_manifest(cfg.out_dir);
    std::cout << "evaluation report written to " << (cfg.out_dir / "eval_report.json")
              << "\n";
    return kExitOk;
}

json robustness_json(const dfd::RobustnessTable& table) {
    json j;
    j["epsilons"] = table.epsilons;
    j["rows"] = json::array();
    for (const auto& r : table.rows) {
        json row;
        row["model"] = r.name;
        row["accuracy"] = r.accuracy;
        j["rows"].push_back(row);
    }
    return j;
}

int cmd_attack(const ExperimentConfig& cfg, bool adv_train) {
    cfg.validate();
    const auto val_ds = open_dataset(cfg.val_root, cfg.input_size, "val_root");
    fs::create_directories(cfg.out_dir);
    LockGuard lock(cfg.out_dir);

    auto slots = build_models(cfg);
    std::vector<dfd::Backbone*> models;
    std::vector<std::vector<dfd::LabeledTensor>> data;
    for (auto& slot : slots) {
        load_final_checkpoint(cfg, slot);
        models.push_back(slot.backbone.get());
        data.push_back(eval_tensors(val_ds, slot.pre));
    }

    dfd::SweepOptions opts;
    opts.weights = dfd::FusionWeights::equal(slots.size());
    if (cfg.fusion == "optimized") {
        // Reuse searched weights from a previous evaluate run when present.
        std::ifstream in(cfg.out_dir / "eval_report.json");
        if (in) {
            json j;
            in >> j;
            if (j.contains("fusion") && j["fusion"].contains("weights"))
                opts.weights.weights = j["fusion"]["weights"].get<std::vector<double>>();
        }
    }
    opts.include_majority = slots.size() % 2 == 1;

    const dfd::RobustnessTable before =
        dfd::robustness_sweep(models, data, cfg.epsilons, opts);
    dfd::write_file_atomic(cfg.out_dir / "robustness.csv", before.to_csv());
    dfd::write_file_atomic(cfg.out_dir / "robustness.json",
                           robustness_json(before).dump(2) + "\n");

    if (adv_train) {
        const auto train_ds =
            open_dataset(cfg.dataset_root, cfg.input_size, "dataset_root");
        for (std::size_t m = 0; m < slots.size(); ++m) {
            const auto train_data = eval_tensors(train_ds, slots[m].pre);
            dfd::AdversarialTrainConfig acfg = cfg.adv;
            acfg.seed = dfd::mix_seed(cfg.seed, 0xAD00 + m);
            dfd::adversarial_train(*slots[m].backbone, train_data, acfg);
            dfd::save_checkpoint(*slots[m].backbone,
                                 cfg.out_dir / "checkpoints" / slots[m].name /
                                     "adversarial",
                                 cfg.stages, acfg.epochs, acfg.seed);
        }
        const dfd::RobustnessTable after =
            dfd::robustness_sweep(models, data, cfg.epsilons, opts);
        dfd::write_file_atomic(cfg.out_dir / "robustness_after.csv", after.to_csv());
        dfd::write_file_atomic(cfg.out_dir / "robustness_after.json",
                               robustness_json(after).dump(2) + "\n");
    }
    write_run_manifest(cfg.out_dir);
    std::cout << "robustness table written to " << (cfg.out_dir / "robustness.csv") << "\n";
    return kExitOk;
}

int cmd_extract_wavelet(const fs::path& input, const fs::path& output, std::size_t size) {
    const dfd::Image img = dfd::load_image(input, size);
    const dfd::Image feat = dfd::wavelet_feature_image(img, size);
    if (!output.parent_path().empty()) fs::create_directories(output.parent_path());
    dfd::save_png(feat, output);
    std::cout << "wavelet feature image written to " << output << "\n";
    return kExitOk;
}

int cmd_verify_run(const fs::path& run_dir) {
    const std::vector<std::string> bad = dfd::RunManifest::verify(run_dir);
    if (bad.empty()) {
        std::cout << "ok: all artifacts match the manifest\n";
        return kExitOk;
    }
    for (const std::string& p : bad) std::cout << "tampered: " << p << "\n";
    return kExitTampered;
}

int map_exception() {
    try {
        throw;
    } catch (const missing_checkpoint& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckpoint;
    } catch (const dfd::invalid_config& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const dfd::invalid_input& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const dfd::decode_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const dfd::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deepfake-detection experiment harness"};
    app.require_subcommand(1);

    // make-dataset
    auto* mk = app.add_subcommand("make-dataset", "generate a seeded synthetic image set");
    fs::path mk_out;
    std::size_t mk_real = 100, mk_fake = 500, mk_size = 32;
    std::uint64_t mk_seed = 42;
    std::string mk_preset = "easy";
    mk->add_option("--out", mk_out, "output directory")->required();
    mk->add_option("--real", mk_real, "number of real images");
    mk->add_option("--fake", mk_fake, "number of fake images");
    mk->add_option("--seed", mk_seed, "generator seed");
    mk->add_option("--size", mk_size, "image side length");
    mk->add_option("--preset", mk_preset, "easy | overlapping")
        ->check(CLI::IsMember({"easy", "overlapping"}));

    // shared experiment flags
    fs::path config_path, out_override;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::size_t> stages_override;
    std::string fusion_override, epsilons_override;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config JSON")->required();
        sub->add_option("--seed", seed_override, "override the config seed");
        sub->add_option("--out", out_override, "override the output directory");
        sub->add_option("--stages", stages_override, "override the stage count");
        sub->add_option("--fusion", fusion_override, "override the fusion strategy");
        sub->add_option("--epsilons", epsilons_override,
                        "override the epsilon list (comma-separated)");
    };
    auto* tr = app.add_subcommand("train", "multistage training run");
    add_common(tr);
    auto* ev = app.add_subcommand("evaluate", "evaluate checkpoints on the validation set");
    add_common(ev);
    auto* at = app.add_subcommand("attack", "FGSM robustness sweep");
    add_common(at);
    bool adv_train_flag = false;
    at->add_flag("--adv-train", adv_train_flag,
                 "adversarially fine-tune before the second sweep");

    // extract-wavelet
    auto* xw = app.add_subcommand("extract-wavelet", "emit the wavelet feature image");
    fs::path xw_in, xw_out;
    std::size_t xw_size = 296;
    xw->add_option("--input", xw_in, "input image")->required();
    xw->add_option("--output", xw_out, "output PNG")->required();
    xw->add_option("--size", xw_size, "feature image side length");

    // verify-run
    auto* vr = app.add_subcommand("verify-run", "check run artifacts against the manifest");
    fs::path vr_dir;
    vr->add_option("--run", vr_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (mk->parsed()) return cmd_make_dataset(mk_out, mk_real, mk_fake, mk_seed, mk_size,
                                                  mk_preset);
        if (xw->parsed()) return cmd_extract_wavelet(xw_in, xw_out, xw_size);
        if (vr->parsed()) return cmd_verify_run(vr_dir);

        ExperimentConfig cfg = load_config(config_path);
        if (seed_override) cfg.seed = *seed_override;
        if (stages_override) cfg.stages = *stages_override;
        if (!out_override.empty()) cfg.out_dir = out_override;
        if (!fusion_override.empty()) cfg.fusion = fusion_override;
        if (!epsilons_override.empty()) {
            cfg.epsilons.clear();
            std::stringstream ss(epsilons_override);
            std::string tok;
            while (std::getline(ss, tok, ',')) cfg.epsilons.push_back(std::stod(tok));
        }
        if (tr->parsed()) return cmd_train(cfg);
        if (ev->parsed()) return cmd_evaluate(cfg);
        if (at->parsed()) return cmd_attack(cfg, adv_train_flag);
    } catch (...) {
        return map_exception();
    }
    return kExitOk;
}
