#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfd/backbones.hpp"
#include "dfd/manifest.hpp"

namespace dfd {

// Seeded disjoint partition of the fake-class ids plus the shared real ids.
struct StagePlan {
    std::vector<std::string> real_ids;
    std::vector<std::vector<std::string>> fake_subsets;
    std::size_t k = 0;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["seed"] = seed;
        j["k"] = k;
        std::vector<std::size_t> sizes;
        for (const auto& s : fake_subsets) sizes.push_back(s.size());
        j["subset_sizes"] = sizes;
        j["real_ids"] = real_ids;
        j["fake_subsets"] = fake_subsets;
        return j;
    }
};

// Seeded shuffle followed by a round-robin split; subset sizes differ by at
// most one and the union reproduces the input exactly.
inline StagePlan partition_fakes(const std::vector<std::string>& fake_ids, std::size_t k,
                                 std::uint64_t seed,
                                 std::vector<std::string> real_ids = {}) {
    if (k < 1) throw invalid_config("partition_fakes: k must be >= 1");
    if (fake_ids.empty()) throw invalid_config("partition_fakes: empty fake list");
    if (k > fake_ids.size())
        throw invalid_config("partition_fakes: k exceeds the number of fake ids");
    std::vector<std::string> shuffled = fake_ids;
    auto rng = make_rng(mix_seed(seed, 0x5A));
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    StagePlan plan;
    plan.seed = seed;
    plan.k = k;
    plan.real_ids = std::move(real_ids);
    plan.fake_subsets.assign(k, {});
    for (std::size_t i = 0; i < shuffled.size(); ++i)
        plan.fake_subsets[i % k].push_back(std::move(shuffled[i]));
    return plan;
}

struct LabeledId {
    std::string id;
    int label = 0;  // 0 = real, 1 = fake
};

// Stage dataset: all reals plus the stage's fake subset, shuffled by a
// stage-derived seed. Stages are 1-based.
inline std::vector<LabeledId> build_stage_dataset(const StagePlan& plan, std::size_t stage) {
    if (stage < 1 || stage > plan.k)
        throw invalid_input("build_stage_dataset: stage out of range");
    std::vector<LabeledId> out;
    for (const auto& id : plan.real_ids) out.push_back({id, 0});
    for (const auto& id : plan.fake_subsets[stage - 1]) out.push_back({id, 1});
    auto rng = make_rng(mix_seed(plan.seed, 0x100 + stage));
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

struct StageHyperparams {
    std::size_t epochs_per_stage = 5;
    std::size_t batch_size = 32;
    double initial_lr = 1e-4;
    double plateau_factor = 0.1;
    std::size_t plateau_patience = 3;
    bool monitor_accuracy = false;  // default: validation loss
    bool continue_lr = false;       // default: re-warm lr at each stage

    void validate() const {
        if (epochs_per_stage == 0 || batch_size == 0 || initial_lr <= 0.0)
            throw invalid_config("StageHyperparams: all settings must be positive");
        if (plateau_factor <= 0.0 || plateau_factor >= 1.0)
            throw invalid_config("StageHyperparams: factor must be in (0,1)");
    }
};

// Reduce-on-plateau: after `patience` consecutive non-improving epochs the
// learning rate is multiplied by `factor` exactly.
class PlateauScheduler {
public:
    PlateauScheduler(double factor, std::size_t patience, bool maximize)
        : factor_(factor), patience_(patience), maximize_(maximize) {}

    // Returns true when the rate was reduced this step.
    bool observe(double metric, nn::Adam& opt) {
        const bool improved = !best_.has_value() ||
                              (maximize_ ? metric > *best_ : metric < *best_);
        if (improved) {
            best_ = metric;
            bad_epochs_ = 0;
            return false;
        }
        if (++bad_epochs_ >= patience_) {
            opt.set_learning_rate(opt.learning_rate() * factor_);
            bad_epochs_ = 0;
            return true;
        }
        return false;
    }

    void reset() {
        best_.reset();
        bad_epochs_ = 0;
    }

private:
    double factor_;
    std::size_t patience_;
    bool maximize_;
    std::optional<double> best_;
    std::size_t bad_epochs_ = 0;
};

struct EpochRecord {
    std::size_t stage = 0;
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

inline std::string training_log_csv(const std::vector<EpochRecord>& log) {
    std::string out = "stage,epoch,lr,train_loss,train_acc,val_loss,val_acc\n";
    for (const EpochRecord& r : log) {
        out += std::to_string(r.stage) + "," + std::to_string(r.epoch) + "," +
               format_double(r.lr) + "," + format_double(r.train_loss) + "," +
               format_double(r.train_acc) + "," + format_double(r.val_loss) + "," +
               format_double(r.val_acc) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: binary parameter blob + JSON sidecar.
// ---------------------------------------------------------------------------

struct CheckpointMeta {
    std::string backbone;
    std::size_t stage = 0;
    std::size_t epoch = 0;
    std::uint64_t seed = 0;
    std::size_t parameter_count = 0;
    std::string content_hash;
};

inline void save_checkpoint(Backbone& bb, const std::filesystem::path& base,
                            std::size_t stage, std::size_t epoch, std::uint64_t seed) {
    const std::vector<double> flat = bb.get_parameters();
    std::string blob = "DFDCKPT1";
    const std::uint64_t n = flat.size();
    blob.append(reinterpret_cast<const char*>(&n), sizeof(n));
    blob.append(reinterpret_cast<const char*>(flat.data()), flat.size() * sizeof(double));
    write_file_atomic(base.string() + ".bin", blob);

    nlohmann::json j;
    j["backbone"] = bb.name();
    j["stage"] = stage;
    j["epoch"] = epoch;
    j["seed"] = seed;
    j["parameter_count"] = flat.size();
    j["content_hash"] = sha256_of_doubles(flat);
    write_file_atomic(base.string() + ".json", j.dump(2) + "\n");
}

inline CheckpointMeta load_checkpoint(Backbone& bb, const std::filesystem::path& base) {
    std::ifstream in(base.string() + ".bin", std::ios::binary);
    if (!in) throw io_error("missing checkpoint: " + base.string() + ".bin");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "DFDCKPT1")
        throw io_error("bad checkpoint magic: " + base.string());
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    std::vector<double> flat(n);
    in.read(reinterpret_cast<char*>(flat.data()), static_cast<long>(n * sizeof(double)));
    if (!in) throw io_error("truncated checkpoint: " + base.string());
    bb.set_parameters(flat);

    CheckpointMeta meta;
    std::ifstream jin(base.string() + ".json");
    if (jin) {
        nlohmann::json j;
        jin >> j;
        meta.backbone = j.value("backbone", "");
        meta.stage = j.value("stage", std::size_t{0});
        meta.epoch = j.value("epoch", std::size_t{0});
        meta.seed = j.value("seed", std::uint64_t{0});
        meta.parameter_count = j.value("parameter_count", std::size_t{0});
        meta.content_hash = j.value("content_hash", "");
    }
    return meta;
}

// ---------------------------------------------------------------------------
// Multistage warm-started training loop
// ---------------------------------------------------------------------------

// Fetches the preprocessed tensor for a sample id. `sample_seed` decorrelates
// per-epoch augmentation; non-augmenting providers may ignore it.
using SampleFetcher = std::function<Tensor(const std::string& id, std::uint64_t sample_seed)>;

struct MultistageOptions {
    StageHyperparams hp;
    std::uint64_t seed = 0;
    std::filesystem::path checkpoint_dir;  // empty: no checkpoints written
    std::size_t resume_after_stage = 0;    // stages <= this are skipped
    Backbone* teacher = nullptr;
};

struct MultistageResult {
    std::vector<EpochRecord> log;
    std::vector<std::filesystem::path> checkpoints;  // one per stage
    // Parameter hashes at each stage boundary: start[i] is the hash the stage
    // trained from, end[i] what it produced. end[i] == start[i+1] bit-exactly.
    std::vector<std::string> stage_start_hashes;
    std::vector<std::string> stage_end_hashes;
};

inline MultistageResult run_multistage(Backbone& bb, const StagePlan& plan,
                                       const MultistageOptions& opts,
                                       const SampleFetcher& fetch_train,
                                       const std::vector<LabeledTensor>& validation) {
    opts.hp.validate();
    if (plan.k == 0 || plan.fake_subsets.size() != plan.k)
        throw invalid_input("run_multistage: invalid plan");

    MultistageResult res;
    // Optimizer moments are per-stage: a stage checkpoint plus the stage
    // index fully determines the rest of the run, which makes resume exact.
    double carried_lr = opts.hp.initial_lr;

    auto val_metrics = [&](double* loss_out, double* acc_out) {
        double loss = 0.0;
        std::size_t correct = 0;
        for (const LabeledTensor& s : validation) {
            const double p = bb.predict_proba(s.x);
            const double p_label = s.label == 1 ? p : 1.0 - p;
            loss += -std::log(p_label + 1e-12);
            if ((p >= 0.5 ? 1 : 0) == s.label) ++correct;
        }
        *loss_out = validation.empty() ? 0.0 : loss / static_cast<double>(validation.size());
        *acc_out = validation.empty()
                       ? 0.0
                       : static_cast<double>(correct) / static_cast<double>(validation.size());
    };

    for (std::size_t stage = 1; stage <= plan.k; ++stage) {
        if (stage <= opts.resume_after_stage) {
            if (!opts.checkpoint_dir.empty())
                res.checkpoints.push_back(opts.checkpoint_dir /
                                          ("stage_" + std::to_string(stage)));
            continue;
        }
        res.stage_start_hashes.push_back(sha256_of_doubles(bb.get_parameters()));
        nn::Adam opt(bb.params(), bb.grads(),
                     opts.hp.continue_lr ? carried_lr : opts.hp.initial_lr);
        PlateauScheduler sched(opts.hp.plateau_factor, opts.hp.plateau_patience,
                               opts.hp.monitor_accuracy);

        const std::vector<LabeledId> ids = build_stage_dataset(plan, stage);
        for (std::size_t epoch = 1; epoch <= opts.hp.epochs_per_stage; ++epoch) {
            const std::uint64_t epoch_seed = mix_seed(opts.seed, stage * 1000 + epoch);
            std::vector<LabeledTensor> data;
            data.reserve(ids.size());
            for (std::size_t i = 0; i < ids.size(); ++i)
                data.push_back({fetch_train(ids[i].id, mix_seed(epoch_seed, i)), ids[i].label});

            TrainOptions to;
            to.lr = opt.learning_rate();
            to.batch_size = opts.hp.batch_size;
            to.shuffle_seed = mix_seed(epoch_seed, 0xF00D);
            to.teacher = opts.teacher;
            const double lr_at_epoch = opt.learning_rate();
            const EpochStats st = train_epoch(bb, data, opt, to);

            EpochRecord rec;
            rec.stage = stage;
            rec.epoch = epoch;
            rec.lr = lr_at_epoch;
            rec.train_loss = st.mean_loss;
            rec.train_acc = st.accuracy;
            val_metrics(&rec.val_loss, &rec.val_acc);
            res.log.push_back(rec);

            sched.observe(opts.hp.monitor_accuracy ? rec.val_acc : rec.val_loss, opt);
        }

        carried_lr = opt.learning_rate();
        res.stage_end_hashes.push_back(sha256_of_doubles(bb.get_parameters()));
        if (!opts.checkpoint_dir.empty()) {
            const std::filesystem::path base =
                opts.checkpoint_dir / ("stage_" + std::to_string(stage));
            save_checkpoint(bb, base, stage, opts.hp.epochs_per_stage, opts.seed);
            res.checkpoints.push_back(base);
        }
    }
    return res;
}

}  // namespace dfd
