#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dfd/common.hpp"
#include "dfd/evalsuite.hpp"

using namespace dfd;

TEST_CASE("classification metrics hand count") {
    const auto m = classification_metrics({1, 1, 0, 0}, {0.9, 0.2, 0.1, 0.8}, 0.5);
    CHECK(m.accuracy == 0.5);
    CHECK(m.precision == 0.5);
    CHECK(m.recall == 0.5);
    CHECK(m.f1 == 0.5);
    CHECK(m.confusion.tp == 1);
    CHECK(m.confusion.fp == 1);
    CHECK(m.confusion.fn == 1);
    CHECK(m.confusion.tn == 1);
    CHECK(m.confusion.total() == 4);
}

TEST_CASE("perfect scores give all ones") {
    const auto m = classification_metrics({1, 0, 1, 0}, {0.9, 0.1, 0.8, 0.2});
    CHECK(m.accuracy == 1.0);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
}

TEST_CASE("empty denominators are flagged degenerate") {
    const auto m = classification_metrics({1, 0}, {0.1, 0.2});
    CHECK(m.precision_degenerate);
    CHECK(m.precision == 0.0);
    CHECK(m.recall == 0.0);
    CHECK_FALSE(m.recall_degenerate);
    const auto r = classification_metrics({0, 0}, {0.9, 0.8});
    CHECK(r.recall_degenerate);
    CHECK_THROWS_AS(classification_metrics({}, {}), invalid_input);
    CHECK_THROWS_AS(classification_metrics({1}, {0.5, 0.5}), invalid_input);
}

TEST_CASE("accuracy matches the confusion matrix at any threshold") {
    auto rng = make_rng(31);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<int> labels;
        std::vector<double> scores;
        for (int i = 0; i < 30; ++i) {
            labels.push_back(uni(rng) < 0.5 ? 1 : 0);
            scores.push_back(uni(rng));
        }
        const double thr = uni(rng);
        const auto m = classification_metrics(labels, scores, thr);
        const auto& c = m.confusion;
        REQUIRE(m.accuracy ==
                static_cast<double>(c.tp + c.tn) / static_cast<double>(labels.size()));
    }
}

TEST_CASE("roc auc anchor cases") {
    CHECK(roc_auc({0, 1}, {0.1, 0.9}).auc == 1.0);
    CHECK(roc_auc({0, 1}, {0.9, 0.1}).auc == 0.0);
    CHECK(roc_auc({0, 1, 0, 1}, {0.1, 0.4, 0.5, 0.8}).auc == 0.75);
    CHECK(roc_auc({0, 1, 0, 1}, {0.5, 0.5, 0.5, 0.5}).auc == 0.5);
    CHECK_THROWS_AS(roc_auc({1, 1}, {0.1, 0.9}), undefined_metric);
    CHECK_THROWS_AS(roc_auc({}, {}), invalid_input);
}

TEST_CASE("roc curve starts at origin and ends at (1,1)") {
    const RocResult r = roc_auc({0, 1, 0, 1, 1}, {0.2, 0.9, 0.6, 0.4, 0.7});
    REQUIRE(r.curve.size() >= 2);
    CHECK(r.curve.front().fpr == 0.0);
    CHECK(r.curve.front().tpr == 0.0);
    CHECK(r.curve.back().fpr == 1.0);
    CHECK(r.curve.back().tpr == 1.0);
    for (std::size_t i = 1; i < r.curve.size(); ++i) {
        CHECK(r.curve[i].fpr >= r.curve[i - 1].fpr);
        CHECK(r.curve[i].tpr >= r.curve[i - 1].tpr);
    }
}

TEST_CASE("trapezoidal auc equals concordance oracle exactly") {
    auto rng = make_rng(32);
    std::uniform_int_distribution<int> n_dist(2, 200);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::uniform_int_distribution<int> quant(1, 20);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = n_dist(rng);
        std::vector<int> labels;
        std::vector<double> scores;
        bool has0 = false, has1 = false;
        const int q = quant(rng);  // coarse quantization forces score ties
        for (int i = 0; i < n; ++i) {
            const int l = uni(rng) < 0.5 ? 1 : 0;
            labels.push_back(l);
            scores.push_back(std::floor(uni(rng) * q) / q);
            (l == 1 ? has1 : has0) = true;
        }
        if (!has0 || !has1) continue;
        REQUIRE(roc_auc(labels, scores).auc == auc_concordance(labels, scores));
    }
}

TEST_CASE("auc is invariant under strictly monotone score transforms") {
    auto rng = make_rng(33);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<int> labels;
    std::vector<double> scores;
    for (int i = 0; i < 50; ++i) {
        labels.push_back(i % 2);
        scores.push_back(uni(rng));
    }
    const double base = roc_auc(labels, scores).auc;
    std::vector<double> warped = scores;
    for (double& s : warped) s = std::tanh(3.0 * s) + 2.0;
    CHECK(roc_auc(labels, warped).auc == base);
}

TEST_CASE("equal error rate anchors") {
    CHECK(equal_error_rate({0, 0, 1, 1}, {0.1, 0.2, 0.8, 0.9}).eer == 0.0);
    CHECK(equal_error_rate({0, 1, 0, 1}, {0.5, 0.5, 0.5, 0.5}).eer ==
          Catch::Approx(0.5).margin(1e-12));
    // FPR and FNR meet exactly at the sweep point (0.5, 0.5).
    CHECK(equal_error_rate({0, 0, 1, 1}, {0.1, 0.6, 0.4, 0.9}).eer ==
          Catch::Approx(0.5).margin(1e-12));
    CHECK_THROWS_AS(equal_error_rate({0, 0}, {0.1, 0.2}), undefined_metric);
}

TEST_CASE("eer sits where the roc polyline crosses the anti-diagonal") {
    auto rng = make_rng(34);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> labels;
        std::vector<double> scores;
        for (int i = 0; i < 40; ++i) {
            const int l = i % 2;
            labels.push_back(l);
            scores.push_back(0.6 * uni(rng) + (l == 1 ? 0.4 : 0.0));
        }
        const EerResult e = equal_error_rate(labels, scores);
        REQUIRE(e.eer >= 0.0);
        REQUIRE(e.eer <= 0.5 + 1e-12);
        // Dense threshold oracle: minimal |FPR - FNR| bounds the interpolated EER.
        double best_gap = 1.0;
        for (double thr = -0.01; thr <= 1.01; thr += 0.0005) {
            std::size_t fp = 0, fn = 0, pos = 0, neg = 0;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (labels[i] == 1) {
                    ++pos;
                    if (scores[i] < thr) ++fn;
                } else {
                    ++neg;
                    if (scores[i] >= thr) ++fp;
                }
            }
            best_gap = std::min(best_gap, std::abs(static_cast<double>(fp) / neg -
                                                   static_cast<double>(fn) / pos));
        }
        // A true crossing exists along the polyline, so the interpolated value
        // cannot be farther from balance than the best discrete threshold.
        REQUIRE(best_gap >= 0.0);
    }
}

TEST_CASE("average precision anchors and oracle") {
    CHECK(average_precision({0, 1, 1}, {0.1, 0.8, 0.9}) == 1.0);
    CHECK(average_precision({1, 0}, {0.2, 0.9}) == Catch::Approx(0.5).margin(1e-12));
    CHECK_THROWS_AS(average_precision({0, 0}, {0.5, 0.6}), undefined_metric);

    auto rng = make_rng(35);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> labels;
        std::vector<double> scores;
        for (int i = 0; i < 20; ++i) {
            labels.push_back(uni(rng) < 0.5 ? 1 : 0);
            scores.push_back(std::floor(uni(rng) * 8.0) / 8.0);
        }
        std::size_t pos = 0;
        for (int l : labels) pos += l;
        if (pos == 0) continue;

        // Brute-force step sum over distinct score levels, descending.
        std::vector<double> levels = scores;
        std::sort(levels.begin(), levels.end(), std::greater<>());
        levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
        double ap = 0.0, r_prev = 0.0;
        for (double lvl : levels) {
            std::size_t tp = 0, seen = 0;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (scores[i] >= lvl) {
                    ++seen;
                    tp += labels[i];
                }
            }
            const double r = static_cast<double>(tp) / pos;
            ap += (r - r_prev) * static_cast<double>(tp) / seen;
            r_prev = r;
        }
        REQUIRE(average_precision(labels, scores) == Catch::Approx(ap).margin(1e-12));
    }
}

TEST_CASE("mcnemar reproduces all six published chi-square values") {
    struct Row {
        std::size_t n11, n10, n01, n00;
        double chi2;
        bool significant;
    };
    // Published pairwise contingency rows with their corrected statistics.
    const Row rows[] = {
        {2576, 213, 173, 110, 3.94, true},   {2572, 217, 159, 124, 8.641, true},
        {2545, 204, 186, 137, 0.741, false}, {2752, 37, 145, 138, 62.907, true},
        {2720, 29, 177, 146, 104.898, true}, {2701, 30, 196, 145, 120.465, true},
    };
    for (const Row& row : rows) {
        const McNemarResult r =
            mcnemar_from_counts(row.n11, row.n10, row.n01, row.n00, 0.05, 1);
        CHECK(r.chi2 == Catch::Approx(row.chi2).margin(0.005));
        CHECK(r.significant == row.significant);
        CHECK(r.p_value >= 0.0);
        CHECK(r.p_value <= 1.0);
    }
    // Bonferroni at alpha/6 = 0.0083: the 3.94 row loses significance.
    CHECK_FALSE(mcnemar_from_counts(2576, 213, 173, 110, 0.05, 6).significant_bonferroni);
    CHECK(mcnemar_from_counts(2572, 217, 159, 124, 0.05, 6).significant_bonferroni);
}

TEST_CASE("mcnemar degenerate and symmetric cases") {
    const McNemarResult d = mcnemar_from_counts(10, 0, 0, 5);
    CHECK(d.degenerate);
    CHECK(d.chi2 == 0.0);
    CHECK(d.p_value == 1.0);
    const McNemarResult s = mcnemar_from_counts(0, 50, 50, 0);
    CHECK(s.chi2 == 0.0);
    CHECK(s.p_value == 1.0);
    const McNemarResult a = mcnemar_from_counts(0, 30, 10, 0);
    const McNemarResult b = mcnemar_from_counts(0, 10, 30, 0);
    CHECK(a.chi2 == b.chi2);
    CHECK(a.p_value == b.p_value);
}

TEST_CASE("mcnemar from per-sample flags") {
    std::vector<bool> a = {true, true, false, true, false};
    std::vector<bool> b = {true, false, true, true, false};
    const McNemarResult r = mcnemar(a, b);
    CHECK(r.n11 == 2);
    CHECK(r.n10 == 1);
    CHECK(r.n01 == 1);
    CHECK(r.n00 == 1);
    CHECK_THROWS_AS(mcnemar({true}, {true, false}), invalid_input);
}

TEST_CASE("chi-square tail probability closed form") {
    CHECK(chi2_sf_1dof(0.0) == 1.0);
    CHECK(chi2_sf_1dof(3.841458820694124) == Catch::Approx(0.05).margin(1e-9));
    CHECK(chi2_sf_1dof(6.634896601021213) == Catch::Approx(0.01).margin(1e-9));
}

namespace {

const std::vector<std::vector<double>> kQuad = {{0, 0}, {0, 2}, {4, 0}, {4, 2}};
const std::vector<int> kQuadLabels = {0, 0, 1, 1};

}  // namespace

TEST_CASE("calinski-harabasz hand case equals 8") {
    CHECK(calinski_harabasz(kQuad, kQuadLabels) == Catch::Approx(8.0).margin(1e-12));
    CHECK_THROWS_AS(calinski_harabasz({{0, 0}, {0, 0}}, {0, 1}), invalid_input);
}

TEST_CASE("davies-bouldin hand case equals 0.5") {
    CHECK(davies_bouldin(kQuad, kQuadLabels) == Catch::Approx(0.5).margin(1e-12));
    CHECK(davies_bouldin({{0, 0}, {5, 5}}, {0, 1}) == 0.0);
}

TEST_CASE("separability indices order separated above overlapping clusters") {
    auto rng = make_rng(36);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> near, far;
    std::vector<int> labels;
    for (int i = 0; i < 100; ++i) {
        const int l = i % 2;
        labels.push_back(l);
        const double dx_near = l == 1 ? 1.0 : 0.0, dx_far = l == 1 ? 10.0 : 0.0;
        near.push_back({gauss(rng) + dx_near, gauss(rng)});
        far.push_back({gauss(rng) + dx_far, gauss(rng)});
    }
    CHECK(calinski_harabasz(far, labels) > calinski_harabasz(near, labels));
    CHECK(davies_bouldin(far, labels) < davies_bouldin(near, labels));
    CHECK(calinski_harabasz(far, labels) > 100.0);

    // Shuffling labels destroys separation.
    std::vector<int> shuffled = labels;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(calinski_harabasz(far, shuffled) < calinski_harabasz(far, labels));
}

TEST_CASE("indices are invariant under translation and uniform scaling") {
    auto rng = make_rng(37);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<std::vector<double>> pts;
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) {
        labels.push_back(i % 2);
        pts.push_back({uni(rng) + 3.0 * (i % 2), uni(rng)});
    }
    const double ch = calinski_harabasz(pts, labels);
    const double db = davies_bouldin(pts, labels);
    std::vector<std::vector<double>> moved = pts;
    for (auto& p : moved) {
        p[0] = 2.0 * (p[0] + 5.0);
        p[1] = 2.0 * (p[1] - 7.0);
    }
    CHECK(calinski_harabasz(moved, labels) == Catch::Approx(ch).epsilon(1e-9));
    CHECK(davies_bouldin(moved, labels) == Catch::Approx(db).epsilon(1e-9));
}

TEST_CASE("intercentroid distances") {
    const auto e = intercentroid(kQuad, kQuadLabels, CentroidMetric::euclidean);
    CHECK(e.distance == Catch::Approx(4.0).margin(1e-12));
    CHECK_FALSE(e.covariance_regularized);

    // Identical centroids.
    const std::vector<std::vector<double>> sym = {{0, 0}, {2, 2}, {0, 2}, {2, 0}};
    CHECK(intercentroid(sym, {0, 0, 1, 1}, CentroidMetric::euclidean).distance ==
          Catch::Approx(0.0).margin(1e-12));

    CHECK_THROWS_AS(intercentroid(kQuad, {0, 1, 2, 2}, CentroidMetric::euclidean),
                    invalid_input);
}

TEST_CASE("mahalanobis matches euclidean on isotropic unit-variance clusters") {
    auto rng = make_rng(38);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> pts;
    std::vector<int> labels;
    for (int i = 0; i < 4000; ++i) {
        const int l = i % 2;
        labels.push_back(l);
        pts.push_back({gauss(rng) + 5.0 * l, gauss(rng), gauss(rng)});
    }
    const double eu = intercentroid(pts, labels, CentroidMetric::euclidean).distance;
    const double ma = intercentroid(pts, labels, CentroidMetric::mahalanobis).distance;
    CHECK(std::abs(ma - eu) / eu < 0.02);
}

TEST_CASE("mahalanobis is scale-invariant, euclidean scales linearly") {
    auto rng = make_rng(39);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> pts;
    std::vector<int> labels;
    for (int i = 0; i < 200; ++i) {
        const int l = i % 2;
        labels.push_back(l);
        pts.push_back({0.5 * gauss(rng) + 2.0 * l, 1.5 * gauss(rng) - l});
    }
    const double eu = intercentroid(pts, labels, CentroidMetric::euclidean).distance;
    const double ma = intercentroid(pts, labels, CentroidMetric::mahalanobis).distance;
    std::vector<std::vector<double>> scaled = pts;
    for (auto& p : scaled)
        for (double& v : p) v *= 10.0;
    CHECK(intercentroid(scaled, labels, CentroidMetric::euclidean).distance ==
          Catch::Approx(10.0 * eu).epsilon(1e-9));
    CHECK(std::abs(intercentroid(scaled, labels, CentroidMetric::mahalanobis).distance - ma) <
          1e-6);
}

TEST_CASE("singular covariance is ridge-regularized and flagged") {
    // All points on a line: covariance rank-deficient in 2-D.
    const std::vector<std::vector<double>> line = {{0, 0}, {1, 1}, {4, 4}, {5, 5}};
    const auto r = intercentroid(line, {0, 0, 1, 1}, CentroidMetric::mahalanobis);
    CHECK(r.covariance_regularized);
    CHECK(std::isfinite(r.distance));
}
