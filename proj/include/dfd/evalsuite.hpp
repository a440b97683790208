#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "dfd/common.hpp"
#include "dfd/tensor.hpp"

namespace dfd {

// Fake is the positive class (label 1) throughout.

struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t total() const { return tp + fp + tn + fn; }
};

struct ClassificationMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    ConfusionMatrix confusion;
    bool precision_degenerate = false;
    bool recall_degenerate = false;
};

inline ClassificationMetrics classification_metrics(const std::vector<int>& labels,
                                                    const std::vector<double>& scores,
                                                    double threshold = 0.5) {
    if (labels.empty() || labels.size() != scores.size())
        throw invalid_input("classification_metrics: empty or misaligned inputs");
    ClassificationMetrics m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int pred = scores[i] >= threshold ? 1 : 0;
        if (pred == 1 && labels[i] == 1) ++m.confusion.tp;
        else if (pred == 1) ++m.confusion.fp;
        else if (labels[i] == 1) ++m.confusion.fn;
        else ++m.confusion.tn;
    }
    const auto& c = m.confusion;
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    if (c.tp + c.fp == 0) {
        m.precision_degenerate = true;
    } else {
        m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    }
    if (c.tp + c.fn == 0) {
        m.recall_degenerate = true;
    } else {
        m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    }
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

struct RocPoint {
    double fpr = 0.0, tpr = 0.0, threshold = 0.0;
};

struct RocResult {
    double auc = 0.0;
    std::vector<RocPoint> curve;
};

// Threshold-sweep ROC with tied scores collapsed into one step. The AUC
// accumulator works in integer pair counts, so the trapezoidal area equals
// the pairwise-concordance value (ties at half credit) exactly.
inline RocResult roc_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    if (labels.size() != scores.size() || labels.empty())
        throw invalid_input("roc_auc: empty or misaligned inputs");
    std::size_t pos = 0, neg = 0;
    for (int l : labels) (l == 1 ? pos : neg)++;
    if (pos == 0 || neg == 0) throw undefined_metric("roc_auc: needs both classes");

    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocResult res;
    res.curve.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0;
    // 2 * sum of trapezoid areas in count units: d_fp * (tp_prev + tp_cur)
    unsigned long long area2 = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        std::size_t dtp = 0, dfp = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? dtp : dfp)++;
            ++j;
        }
        area2 += static_cast<unsigned long long>(dfp) * (2 * tp + dtp);
        tp += dtp;
        fp += dfp;
        res.curve.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                             static_cast<double>(tp) / static_cast<double>(pos),
                             scores[order[i]]});
        i = j;
    }
    res.auc = static_cast<double>(area2) / (2.0 * static_cast<double>(pos) *
                                            static_cast<double>(neg));
    return res;
}

// Concordance oracle: P(random positive outscores random negative), ties 1/2.
inline double auc_concordance(const std::vector<int>& labels,
                              const std::vector<double>& scores) {
    std::size_t pos = 0, neg = 0;
    for (int l : labels) (l == 1 ? pos : neg)++;
    if (pos == 0 || neg == 0) throw undefined_metric("auc_concordance: needs both classes");
    unsigned long long num2 = 0;  // 2*concordant + ties
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] == 1) continue;
            if (scores[i] > scores[j]) num2 += 2;
            else if (scores[i] == scores[j]) num2 += 1;
        }
    }
    return static_cast<double>(num2) /
           (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

struct EerResult {
    double eer = 0.0;
    double threshold = 0.0;
};

// Crossing of FPR and FNR along the ROC polyline, linearly interpolated
// between adjacent sweep points.
inline EerResult equal_error_rate(const std::vector<int>& labels,
                                  const std::vector<double>& scores) {
    const RocResult roc = roc_auc(labels, scores);
    EerResult res;
    for (std::size_t i = 1; i < roc.curve.size(); ++i) {
        const RocPoint& a = roc.curve[i - 1];
        const RocPoint& b = roc.curve[i];
        const double da = a.fpr - (1.0 - a.tpr);
        const double db = b.fpr - (1.0 - b.tpr);
        if (db >= 0.0) {
            // Crossing inside [a, b] (da <= 0 always holds before the first
            // sign change because the sweep starts at FPR=0, FNR=1).
            const double t = (db - da) != 0.0 ? -da / (db - da) : 0.0;
            res.eer = a.fpr + t * (b.fpr - a.fpr);
            res.threshold = a.threshold + t * (b.threshold - a.threshold);
            return res;
        }
    }
    const RocPoint& last = roc.curve.back();
    res.eer = last.fpr;
    res.threshold = last.threshold;
    return res;
}

// Step-wise AP: sum over descending-score thresholds of (R_n - R_{n-1}) P_n,
// tied scores collapsed into one step.
inline double average_precision(const std::vector<int>& labels,
                                const std::vector<double>& scores) {
    if (labels.size() != scores.size() || labels.empty())
        throw invalid_input("average_precision: empty or misaligned inputs");
    std::size_t pos = 0;
    for (int l : labels) pos += l == 1 ? 1 : 0;
    if (pos == 0) throw undefined_metric("average_precision: no positives");

    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double ap = 0.0;
    std::size_t tp = 0, seen = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i, dtp = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            dtp += labels[order[j]] == 1 ? 1 : 0;
            ++j;
        }
        const double r_prev = static_cast<double>(tp) / static_cast<double>(pos);
        tp += dtp;
        seen = j;
        const double r = static_cast<double>(tp) / static_cast<double>(pos);
        const double p = static_cast<double>(tp) / static_cast<double>(seen);
        ap += (r - r_prev) * p;
        i = j;
    }
    return ap;
}

// ---------------------------------------------------------------------------
// McNemar paired test (continuity-corrected) with Bonferroni threshold.
// ---------------------------------------------------------------------------

struct McNemarResult {
    std::size_t n11 = 0, n10 = 0, n01 = 0, n00 = 0;
    double chi2 = 0.0;
    double p_value = 1.0;
    bool significant = false;             // at alpha
    bool significant_bonferroni = false;  // at alpha / m
    bool degenerate = false;
};

// Upper-tail chi-square probability with 1 dof: erfc(sqrt(x/2)).
inline double chi2_sf_1dof(double x) { return std::erfc(std::sqrt(x / 2.0)); }

inline McNemarResult mcnemar_from_counts(std::size_t n11, std::size_t n10, std::size_t n01,
                                         std::size_t n00, double alpha = 0.05,
                                         std::size_t bonferroni_m = 1) {
    McNemarResult r;
    r.n11 = n11; r.n10 = n10; r.n01 = n01; r.n00 = n00;
    const std::size_t disagreements = n10 + n01;
    if (disagreements == 0) {
        r.degenerate = true;
        r.chi2 = 0.0;
        r.p_value = 1.0;
        return r;
    }
    const double diff = std::abs(static_cast<double>(n10) - static_cast<double>(n01));
    const double num = std::max(diff - 1.0, 0.0);
    r.chi2 = num * num / static_cast<double>(disagreements);
    r.p_value = chi2_sf_1dof(r.chi2);
    r.significant = r.p_value < alpha;
    r.significant_bonferroni = r.p_value < alpha / static_cast<double>(bonferroni_m);
    return r;
}

inline McNemarResult mcnemar(const std::vector<bool>& correct_a,
                             const std::vector<bool>& correct_b, double alpha = 0.05,
                             std::size_t bonferroni_m = 1) {
    if (correct_a.size() != correct_b.size())
        throw invalid_input("mcnemar: misaligned flag arrays");
    std::size_t n11 = 0, n10 = 0, n01 = 0, n00 = 0;
    for (std::size_t i = 0; i < correct_a.size(); ++i) {
        if (correct_a[i] && correct_b[i]) ++n11;
        else if (correct_a[i]) ++n10;
        else if (correct_b[i]) ++n01;
        else ++n00;
    }
    return mcnemar_from_counts(n11, n10, n01, n00, alpha, bonferroni_m);
}

// ---------------------------------------------------------------------------
// Cluster separability indices
// ---------------------------------------------------------------------------

namespace detail {

struct ClusterStats {
    std::vector<std::vector<double>> centroids;
    std::vector<std::size_t> sizes;
    std::vector<double> overall_centroid;
    std::size_t k = 0, d = 0, n = 0;
};

inline ClusterStats cluster_stats(const std::vector<std::vector<double>>& embeddings,
                                  const std::vector<int>& labels) {
    if (embeddings.empty() || embeddings.size() != labels.size())
        throw invalid_input("cluster metrics: empty or misaligned inputs");
    ClusterStats cs;
    cs.n = embeddings.size();
    cs.d = embeddings[0].size();
    int kmax = 0;
    for (int l : labels) {
        if (l < 0) throw invalid_input("cluster metrics: negative label");
        kmax = std::max(kmax, l);
    }
    cs.k = static_cast<std::size_t>(kmax) + 1;
    cs.centroids.assign(cs.k, std::vector<double>(cs.d, 0.0));
    cs.sizes.assign(cs.k, 0);
    cs.overall_centroid.assign(cs.d, 0.0);
    for (std::size_t i = 0; i < cs.n; ++i) {
        const auto& e = embeddings[i];
        const auto l = static_cast<std::size_t>(labels[i]);
        ++cs.sizes[l];
        for (std::size_t j = 0; j < cs.d; ++j) {
            cs.centroids[l][j] += e[j];
            cs.overall_centroid[j] += e[j];
        }
    }
    for (std::size_t c = 0; c < cs.k; ++c) {
        if (cs.sizes[c] == 0) throw invalid_input("cluster metrics: empty cluster");
        for (std::size_t j = 0; j < cs.d; ++j)
            cs.centroids[c][j] /= static_cast<double>(cs.sizes[c]);
    }
    for (std::size_t j = 0; j < cs.d; ++j)
        cs.overall_centroid[j] /= static_cast<double>(cs.n);
    return cs;
}

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

}  // namespace detail

// (B/(k-1)) / (W/(n-k)) with B the weighted between-cluster dispersion and W
// the within-cluster sum of squares.
inline double calinski_harabasz(const std::vector<std::vector<double>>& embeddings,
                                const std::vector<int>& labels) {
    const auto cs = detail::cluster_stats(embeddings, labels);
    if (cs.k < 2 || cs.n <= cs.k)
        throw invalid_input("calinski_harabasz: need n > k >= 2");
    double between = 0.0;
    for (std::size_t c = 0; c < cs.k; ++c)
        between += static_cast<double>(cs.sizes[c]) *
                   detail::sq_dist(cs.centroids[c], cs.overall_centroid);
    double within = 0.0;
    for (std::size_t i = 0; i < cs.n; ++i)
        within += detail::sq_dist(embeddings[i],
                                  cs.centroids[static_cast<std::size_t>(labels[i])]);
    if (within == 0.0)
        throw undefined_metric("calinski_harabasz: zero within-cluster scatter");
    return (between / static_cast<double>(cs.k - 1)) /
           (within / static_cast<double>(cs.n - cs.k));
}

// (1/k) sum_i max_{j!=i} (S_i + S_j) / M_ij with S the mean distance to the
// cluster centroid and M the centroid distance.
inline double davies_bouldin(const std::vector<std::vector<double>>& embeddings,
                             const std::vector<int>& labels) {
    const auto cs = detail::cluster_stats(embeddings, labels);
    if (cs.k < 2) throw invalid_input("davies_bouldin: need k >= 2");
    std::vector<double> scatter(cs.k, 0.0);
    for (std::size_t i = 0; i < cs.n; ++i)
        scatter[static_cast<std::size_t>(labels[i])] +=
            std::sqrt(detail::sq_dist(embeddings[i],
                                      cs.centroids[static_cast<std::size_t>(labels[i])]));
    for (std::size_t c = 0; c < cs.k; ++c) scatter[c] /= static_cast<double>(cs.sizes[c]);
    double db = 0.0;
    for (std::size_t i = 0; i < cs.k; ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < cs.k; ++j) {
            if (i == j) continue;
            const double m = std::sqrt(detail::sq_dist(cs.centroids[i], cs.centroids[j]));
            if (m == 0.0) throw undefined_metric("davies_bouldin: coincident centroids");
            worst = std::max(worst, (scatter[i] + scatter[j]) / m);
        }
        db += worst;
    }
    return db / static_cast<double>(cs.k);
}

enum class CentroidMetric { euclidean, mahalanobis };

struct IntercentroidResult {
    double distance = 0.0;
    bool covariance_regularized = false;
};

// Distance between the two class centroids. Mahalanobis uses the pooled
// (sample-size-weighted) within-class covariance; a singular covariance is
// ridge-regularized with eps = 1e-6 * trace / d and flagged.
inline IntercentroidResult intercentroid(const std::vector<std::vector<double>>& embeddings,
                                         const std::vector<int>& labels,
                                         CentroidMetric metric) {
    const auto cs = detail::cluster_stats(embeddings, labels);
    if (cs.k != 2) throw invalid_input("intercentroid: exactly two clusters required");
    std::vector<double> delta(cs.d);
    for (std::size_t j = 0; j < cs.d; ++j) delta[j] = cs.centroids[0][j] - cs.centroids[1][j];
    IntercentroidResult res;
    if (metric == CentroidMetric::euclidean) {
        double s = 0.0;
        for (double v : delta) s += v * v;
        res.distance = std::sqrt(s);
        return res;
    }

    // Pooled within-class covariance.
    const std::size_t d = cs.d;
    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < cs.n; ++i) {
        const auto l = static_cast<std::size_t>(labels[i]);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b)
                cov[a][b] += (embeddings[i][a] - cs.centroids[l][a]) *
                             (embeddings[i][b] - cs.centroids[l][b]);
    }
    const double denom = static_cast<double>(cs.n - cs.k);
    if (denom <= 0.0) throw invalid_input("intercentroid: too few samples for covariance");
    for (auto& row : cov)
        for (double& v : row) v /= denom;

    // Solve cov * x = delta by Gaussian elimination with partial pivoting;
    // retry once with a ridge if near-singular.
    auto try_solve = [&](double ridge, std::vector<double>* out) {
        std::vector<std::vector<double>> m = cov;
        for (std::size_t i = 0; i < d; ++i) m[i][i] += ridge;
        std::vector<double> rhs = delta;
        for (std::size_t col = 0; col < d; ++col) {
            std::size_t piv = col;
            for (std::size_t r = col + 1; r < d; ++r)
                if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
            if (std::abs(m[piv][col]) < 1e-12) return false;
            std::swap(m[piv], m[col]);
            std::swap(rhs[piv], rhs[col]);
            for (std::size_t r = col + 1; r < d; ++r) {
                const double f = m[r][col] / m[col][col];
                for (std::size_t cidx = col; cidx < d; ++cidx) m[r][cidx] -= f * m[col][cidx];
                rhs[r] -= f * rhs[col];
            }
        }
        out->assign(d, 0.0);
        for (std::size_t r = d; r-- > 0;) {
            double acc = rhs[r];
            for (std::size_t cidx = r + 1; cidx < d; ++cidx) acc -= m[r][cidx] * (*out)[cidx];
            (*out)[r] = acc / m[r][r];
        }
        return true;
    };

    std::vector<double> x;
    if (!try_solve(0.0, &x)) {
        double trace = 0.0;
        for (std::size_t i = 0; i < d; ++i) trace += cov[i][i];
        const double eps = 1e-6 * trace / static_cast<double>(d);
        res.covariance_regularized = true;
        if (!try_solve(eps > 0.0 ? eps : 1e-12, &x))
            throw undefined_metric("intercentroid: covariance is singular");
    }
    double q = 0.0;
    for (std::size_t j = 0; j < d; ++j) q += delta[j] * x[j];
    res.distance = std::sqrt(std::max(q, 0.0));
    return res;
}

}  // namespace dfd
