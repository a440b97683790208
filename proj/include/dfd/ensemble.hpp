#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dfd/common.hpp"

namespace dfd {

struct FusionWeights {
    std::vector<double> weights;

    void validate() const {
        double sum = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw invalid_input("FusionWeights: negative weight");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw invalid_input("FusionWeights: weights must sum to 1");
    }

    static FusionWeights equal(std::size_t n) {
        return {std::vector<double>(n, 1.0 / static_cast<double>(n))};
    }
};

struct PredictionRecord {
    std::string id;
    int label = 0;
    std::vector<double> model_probs;
    double fused_prob = 0.0;
    int fused_decision = 0;
};

// Probability-level late fusion: sum of w_i * p_i.
inline double fuse_weighted(const std::vector<double>& probs, const FusionWeights& w) {
    if (probs.size() != w.weights.size())
        throw invalid_input("fuse_weighted: weight/probability length mismatch");
    double fused = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) fused += w.weights[i] * probs[i];
    return fused;
}

// Majority vote over binary decisions; requires an odd model count.
inline int fuse_majority(const std::vector<int>& decisions) {
    if (decisions.size() % 2 == 0)
        throw invalid_config("fuse_majority: even model count leaves ties undefined");
    int ones = 0;
    for (int d : decisions) ones += d != 0 ? 1 : 0;
    return 2 * static_cast<std::size_t>(ones) > decisions.size() ? 1 : 0;
}

struct WeightSearchResult {
    FusionWeights weights;
    double accuracy = 0.0;
    std::size_t grid_size = 0;
};

namespace detail {
inline double fused_accuracy(const std::vector<std::vector<double>>& val_probs,
                             const std::vector<int>& labels, const std::vector<double>& w,
                             double threshold) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        double fused = 0.0;
        for (std::size_t m = 0; m < w.size(); ++m) fused += w[m] * val_probs[i][m];
        if ((fused >= threshold ? 1 : 0) == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}
}  // namespace detail

// Exhaustive simplex grid search over three models in `step` increments
// (5,151 candidates at 0.01). Ties break to the lexicographically smallest
// weight vector.
inline WeightSearchResult search_weights(const std::vector<std::vector<double>>& val_probs,
                                         const std::vector<int>& labels, double step = 0.01,
                                         double threshold = 0.5) {
    if (val_probs.empty() || labels.empty() || val_probs.size() != labels.size())
        throw invalid_input("search_weights: empty or misaligned validation set");
    const std::size_t models = val_probs[0].size();
    if (models != 3) throw invalid_config("search_weights: expects exactly 3 models");
    const long denom = std::lround(1.0 / step);
    if (denom <= 0 || std::abs(denom * step - 1.0) > 1e-9)
        throw invalid_config("search_weights: step must divide 1 exactly");

    WeightSearchResult best;
    best.accuracy = -1.0;
    for (long a = 0; a <= denom; ++a) {
        for (long b = 0; b <= denom - a; ++b) {
            const long c = denom - a - b;
            const std::vector<double> w = {static_cast<double>(a) / denom,
                                           static_cast<double>(b) / denom,
                                           static_cast<double>(c) / denom};
            const double acc = detail::fused_accuracy(val_probs, labels, w, threshold);
            ++best.grid_size;
            // Enumeration order is lexicographically increasing, so a strict
            // improvement test realizes the tie-break.
            if (acc > best.accuracy) {
                best.accuracy = acc;
                best.weights.weights = w;
            }
        }
    }
    return best;
}

}  // namespace dfd
