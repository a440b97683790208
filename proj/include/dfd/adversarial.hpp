#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "dfd/backbones.hpp"
#include "dfd/ensemble.hpp"

namespace dfd {

struct AttackConfig {
    double epsilon = 0.005;
    double clamp_min = -std::numeric_limits<double>::infinity();
    double clamp_max = std::numeric_limits<double>::infinity();

    void validate() const {
        if (epsilon < 0.0) throw invalid_config("AttackConfig: epsilon must be >= 0");
        if (clamp_min > clamp_max) throw invalid_config("AttackConfig: empty clamp range");
    }
};

// x_adv = clamp(x + eps * sign(grad_x J)). Parameters are untouched.
inline Tensor fgsm(Backbone& bb, const Tensor& x, int label, const AttackConfig& cfg) {
    cfg.validate();
    if (cfg.epsilon == 0.0) return x;
    Tensor grad;
    bb.backprop(x, label, 1.0, &grad, nullptr);
    // Discard the parameter-gradient side effect.
    for (Tensor* g : bb.grads()) g->fill(0.0);
    Tensor adv = x;
    for (std::size_t i = 0; i < adv.size(); ++i) {
        const double s = grad[i] > 0.0 ? 1.0 : (grad[i] < 0.0 ? -1.0 : 0.0);
        adv[i] = std::clamp(adv[i] + cfg.epsilon * s, cfg.clamp_min, cfg.clamp_max);
    }
    return adv;
}

struct AdversarialTrainConfig {
    double epsilon = 0.005;
    std::size_t epochs = 6;
    double lr = 1e-5;
    std::size_t clean_per_batch = 32;
    std::size_t perturbed_per_batch = 32;
    std::uint64_t seed = 0;
    double clamp_min = -std::numeric_limits<double>::infinity();
    double clamp_max = std::numeric_limits<double>::infinity();
};

// Mixed-batch fine-tuning: each optimizer step sees `clean_per_batch` clean
// samples and `perturbed_per_batch` FGSM samples regenerated against the
// current parameters.
inline void adversarial_train(Backbone& bb, const std::vector<LabeledTensor>& data,
                              const AdversarialTrainConfig& cfg) {
    if (cfg.epsilon < 0.0) throw invalid_config("adversarial_train: epsilon must be >= 0");
    if (data.empty()) throw invalid_input("adversarial_train: empty dataset");
    if (cfg.epochs == 0) return;

    nn::Adam opt(bb.params(), bb.grads(), cfg.lr);
    AttackConfig atk{cfg.epsilon, cfg.clamp_min, cfg.clamp_max};
    const std::size_t per_batch = cfg.clean_per_batch;  // perturbed side mirrors it

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(data.size());
        std::iota(order.begin(), order.end(), 0);
        auto rng = make_rng(mix_seed(cfg.seed, 0xADF0 + epoch));
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += per_batch) {
            const std::size_t end = std::min(order.size(), start + per_batch);
            const std::size_t n_clean = end - start;
            // The perturbed half mirrors the clean half of the batch.
            const std::size_t n_pert =
                n_clean * cfg.perturbed_per_batch / std::max<std::size_t>(per_batch, 1);
            const double scale = 1.0 / static_cast<double>(n_clean + n_pert);
            // Perturbations first, against the pre-step parameters.
            std::vector<Tensor> adv;
            std::vector<int> adv_labels;
            for (std::size_t i = start; i < start + n_pert; ++i) {
                const LabeledTensor& s = data[order[i]];
                adv.push_back(fgsm(bb, s.x, s.label, atk));
                adv_labels.push_back(s.label);
            }
            opt.zero_gradients();
            for (std::size_t i = start; i < end; ++i)
                bb.backprop(data[order[i]].x, data[order[i]].label, scale, nullptr, nullptr);
            for (std::size_t i = 0; i < adv.size(); ++i)
                bb.backprop(adv[i], adv_labels[i], scale, nullptr, nullptr);
            opt.step();
        }
    }
}

// ---------------------------------------------------------------------------
// Robustness sweep: accuracy per (model or ensemble) x epsilon.
// ---------------------------------------------------------------------------

struct RobustnessRow {
    std::string name;
    std::vector<double> accuracy;  // aligned with the epsilon list
};

struct RobustnessTable {
    std::vector<double> epsilons;
    std::vector<RobustnessRow> rows;

    std::string to_csv() const {
        std::string out = "model";
        for (double e : epsilons) out += ",eps_" + format_double(e);
        out += "\n";
        for (const auto& r : rows) {
            out += r.name;
            for (double a : r.accuracy) out += "," + format_double(a);
            out += "\n";
        }
        return out;
    }
};

struct SweepOptions {
    FusionWeights weights;        // for the weighted-ensemble row
    bool include_weighted = true;
    bool include_majority = true;
    double threshold = 0.5;
    double clamp_min = -std::numeric_limits<double>::infinity();
    double clamp_max = std::numeric_limits<double>::infinity();
};

// White-box per-constituent attack: each backbone is attacked with its own
// input gradient; ensemble rows fuse the per-model probabilities on each
// model's own adversarial inputs.
inline RobustnessTable robustness_sweep(const std::vector<Backbone*>& models,
                                        const std::vector<std::vector<LabeledTensor>>& data,
                                        const std::vector<double>& epsilons,
                                        const SweepOptions& opts) {
    if (models.empty()) throw invalid_input("robustness_sweep: empty model list");
    if (epsilons.empty()) throw invalid_input("robustness_sweep: empty epsilon list");
    for (double e : epsilons)
        if (e < 0.0) throw invalid_config("robustness_sweep: negative epsilon");
    if (data.size() != models.size())
        throw invalid_input("robustness_sweep: per-model dataset list misaligned");
    const std::size_t n = data[0].size();
    for (const auto& d : data)
        if (d.size() != n) throw invalid_input("robustness_sweep: dataset size mismatch");

    RobustnessTable table;
    table.epsilons = epsilons;
    table.rows.resize(models.size());
    for (std::size_t m = 0; m < models.size(); ++m) table.rows[m].name = models[m]->name();
    RobustnessRow weighted{"weighted_ensemble", {}};
    RobustnessRow majority{"majority_voting", {}};

    for (double eps : epsilons) {
        AttackConfig atk{eps, opts.clamp_min, opts.clamp_max};
        std::vector<std::size_t> correct(models.size(), 0);
        std::size_t correct_weighted = 0, correct_majority = 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> probs(models.size());
            std::vector<int> decisions(models.size());
            const int label = data[0][i].label;
            for (std::size_t m = 0; m < models.size(); ++m) {
                const Tensor x_adv = fgsm(*models[m], data[m][i].x, data[m][i].label, atk);
                probs[m] = models[m]->predict_proba(x_adv);
                decisions[m] = probs[m] >= opts.threshold ? 1 : 0;
                if (decisions[m] == data[m][i].label) ++correct[m];
            }
            if (opts.include_weighted) {
                const double fused = fuse_weighted(probs, opts.weights);
                if ((fused >= opts.threshold ? 1 : 0) == label) ++correct_weighted;
            }
            if (opts.include_majority && models.size() % 2 == 1) {
                if (fuse_majority(decisions) == label) ++correct_majority;
            }
        }
        for (std::size_t m = 0; m < models.size(); ++m)
            table.rows[m].accuracy.push_back(static_cast<double>(correct[m]) /
                                             static_cast<double>(n));
        if (opts.include_weighted)
            weighted.accuracy.push_back(static_cast<double>(correct_weighted) /
                                        static_cast<double>(n));
        if (opts.include_majority && models.size() % 2 == 1)
            majority.accuracy.push_back(static_cast<double>(correct_majority) /
                                        static_cast<double>(n));
    }
    if (opts.include_weighted) table.rows.push_back(std::move(weighted));
    if (opts.include_majority && models.size() % 2 == 1)
        table.rows.push_back(std::move(majority));
    return table;
}

}  // namespace dfd
