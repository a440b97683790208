#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dfd/adversarial.hpp"
#include "dfd/manifest.hpp"
#include "helpers.hpp"

using namespace dfd;
using dfd::testutil::random_tensor;

namespace {

// Flat-vector dataset separable along the first coordinate.
std::vector<LabeledTensor> toy_set(std::size_t n, std::size_t dim, std::uint64_t seed,
                                   double margin = 0.4) {
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<LabeledTensor> out;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor x = Tensor::vector(dim);
        for (std::size_t j = 0; j < dim; ++j) x[j] = uni(rng);
        const int label = i % 2;
        x[0] = (label == 1 ? margin : -margin) + 0.2 * uni(rng);
        out.push_back({std::move(x), label});
    }
    return out;
}

}  // namespace

TEST_CASE("attack config validation") {
    AttackConfig cfg;
    cfg.epsilon = -0.1;
    auto bb = make_mlp_backbone(3, 0, 1);
    CHECK_THROWS_AS(fgsm(*bb, Tensor::vector(3), 1, cfg), invalid_config);
    cfg.epsilon = 0.1;
    cfg.clamp_min = 1.0;
    cfg.clamp_max = 0.0;
    CHECK_THROWS_AS(fgsm(*bb, Tensor::vector(3), 1, cfg), invalid_config);
}

TEST_CASE("epsilon zero returns the input unchanged") {
    auto bb = make_mlp_backbone(4, 3, 2);
    auto rng = make_rng(1);
    const Tensor x = random_tensor({4}, rng);
    AttackConfig cfg;
    cfg.epsilon = 0.0;
    CHECK(fgsm(*bb, x, 1, cfg).raw() == x.raw());
}

TEST_CASE("fgsm on a logistic model has the closed-form sign step") {
    // Single-logit linear model p = sigmoid(w.x + b), w = (1, -2), b = 0.
    auto bb = make_mlp_backbone(2, 0, 3);
    bb->set_parameters({1.0, -2.0, 0.0});
    Tensor x = Tensor::vector(2);
    x[0] = 0.5;
    x[1] = 0.5;
    AttackConfig cfg;
    cfg.epsilon = 0.01;
    // Label 1: dJ/dx = (p - 1) * w, so sign = (-sign(w)) = (-1, +1).
    const Tensor adv1 = fgsm(*bb, x, 1, cfg);
    CHECK(adv1[0] == Catch::Approx(0.49).margin(1e-12));
    CHECK(adv1[1] == Catch::Approx(0.51).margin(1e-12));
    // Label 0: dJ/dx = p * w, so sign = sign(w) = (+1, -1).
    const Tensor adv0 = fgsm(*bb, x, 0, cfg);
    CHECK(adv0[0] == Catch::Approx(0.51).margin(1e-12));
    CHECK(adv0[1] == Catch::Approx(0.49).margin(1e-12));
}

TEST_CASE("fgsm respects clamping and leaves parameters untouched") {
    auto bb = make_mlp_backbone(3, 4, 5);
    const std::string before = sha256_of_doubles(bb->get_parameters());
    auto rng = make_rng(2);
    const Tensor x = random_tensor({3}, rng, 0.0, 1.0);
    AttackConfig cfg;
    cfg.epsilon = 5.0;
    cfg.clamp_min = 0.0;
    cfg.clamp_max = 1.0;
    const Tensor adv = fgsm(*bb, x, 1, cfg);
    for (std::size_t i = 0; i < adv.size(); ++i) {
        CHECK(adv[i] >= 0.0);
        CHECK(adv[i] <= 1.0);
    }
    CHECK(sha256_of_doubles(bb->get_parameters()) == before);
    for (Tensor* g : bb->grads())
        for (std::size_t i = 0; i < g->size(); ++i) REQUIRE((*g)[i] == 0.0);
}

TEST_CASE("fgsm never decreases the loss to first order") {
    auto bb = make_mlp_backbone(6, 4, 7);
    // A few training steps so gradients are not at a stationary point.
    auto data = toy_set(64, 6, 3);
    nn::Adam opt(bb->params(), bb->grads(), 0.01);
    TrainOptions to;
    for (int e = 0; e < 5; ++e) {
        to.shuffle_seed = static_cast<std::uint64_t>(e);
        train_epoch(*bb, data, opt, to);
    }
    AttackConfig cfg;
    cfg.epsilon = 0.01;
    std::size_t increased = 0, total = 0;
    for (const auto& s : data) {
        const Tensor adv = fgsm(*bb, s.x, s.label, cfg);
        const double clean = nn::bce_with_logit(bb->logits(s.x)[0], s.label, nullptr);
        const double pert = nn::bce_with_logit(bb->logits(adv)[0], s.label, nullptr);
        ++total;
        if (pert >= clean - 1e-12) ++increased;
    }
    // Allow rare curvature-driven exceptions at finite epsilon.
    CHECK(increased >= total - 2);
}

TEST_CASE("adversarial training recovers accuracy under attack") {
    auto bb = make_mlp_backbone(8, 6, 11);
    // Margin 0.4 with spread 0.2 keeps every sample at least 0.2 from the
    // optimal boundary, so full robustness at eps=0.1 is attainable.
    auto train = toy_set(256, 8, 5);
    auto val = toy_set(128, 8, 6);
    nn::Adam opt(bb->params(), bb->grads(), 0.01);
    TrainOptions to;
    for (int e = 0; e < 10; ++e) {
        to.shuffle_seed = static_cast<std::uint64_t>(e);
        train_epoch(*bb, train, opt, to);
    }
    AttackConfig atk;
    atk.epsilon = 0.1;
    auto attacked_accuracy = [&]() {
        std::size_t correct = 0;
        for (const auto& s : val) {
            const Tensor adv = fgsm(*bb, s.x, s.label, atk);
            if ((bb->predict_proba(adv) >= 0.5 ? 1 : 0) == s.label) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(val.size());
    };
    const double before = attacked_accuracy();

    AdversarialTrainConfig cfg;
    cfg.epsilon = 0.1;
    cfg.epochs = 6;
    cfg.lr = 1e-3;
    cfg.seed = 7;
    adversarial_train(*bb, train, cfg);
    const double after = attacked_accuracy();
    CHECK(after >= before);
    CHECK(after >= 0.9);

    CHECK_THROWS_AS(adversarial_train(*bb, {}, cfg), invalid_input);
    cfg.epsilon = -1.0;
    CHECK_THROWS_AS(adversarial_train(*bb, train, cfg), invalid_config);
}

TEST_CASE("zero-epoch adversarial training is a no-op") {
    auto bb = make_mlp_backbone(4, 3, 13);
    const auto before = bb->get_parameters();
    AdversarialTrainConfig cfg;
    cfg.epochs = 0;
    adversarial_train(*bb, toy_set(16, 4, 9), cfg);
    CHECK(bb->get_parameters() == before);
}

TEST_CASE("robustness table layout and monotone degradation") {
    auto a = make_mlp_backbone(6, 4, 17, "model_a");
    auto b = make_mlp_backbone(6, 4, 19, "model_b");
    auto c = make_mlp_backbone(6, 4, 23, "model_c");
    auto data = toy_set(96, 6, 11);
    for (auto* bb : {a.get(), b.get(), c.get()}) {
        nn::Adam opt(bb->params(), bb->grads(), 0.01);
        TrainOptions to;
        for (int e = 0; e < 8; ++e) {
            to.shuffle_seed = static_cast<std::uint64_t>(e);
            train_epoch(*bb, data, opt, to);
        }
    }
    SweepOptions opts;
    opts.weights = FusionWeights{{0.35, 0.34, 0.31}};
    const std::vector<double> eps = {0.0, 0.05, 0.2};
    const RobustnessTable table = robustness_sweep({a.get(), b.get(), c.get()},
                                                   {data, data, data}, eps, opts);
    REQUIRE(table.rows.size() == 5);  // 3 models + weighted + majority
    CHECK(table.rows[0].name == "model_a");
    CHECK(table.rows[3].name == "weighted_ensemble");
    CHECK(table.rows[4].name == "majority_voting");
    for (const auto& row : table.rows) {
        REQUIRE(row.accuracy.size() == 3);
        CHECK(row.accuracy[0] >= row.accuracy[2] - 1e-12);  // stronger attack hurts
    }
    const std::string csv = table.to_csv();
    CHECK(csv.rfind("model,eps_0,eps_0.05,eps_0.2\n", 0) == 0);
    CHECK(csv.find("majority_voting,") != std::string::npos);

    CHECK_THROWS_AS(robustness_sweep({}, {}, eps, opts), invalid_input);
    CHECK_THROWS_AS(robustness_sweep({a.get()}, {data}, {}, opts), invalid_input);
    CHECK_THROWS_AS(robustness_sweep({a.get()}, {data}, {-0.1}, opts), invalid_config);
}

TEST_CASE("majority voting can survive a single collapsed constituent") {
    // Model a is wrong on attacked inputs, b and c stay right: majority holds
    // while the weighted row tracks whatever the probabilities average to.
    auto good1 = make_mlp_backbone(2, 0, 29, "good1");
    auto good2 = make_mlp_backbone(2, 0, 31, "good2");
    auto bad = make_mlp_backbone(2, 0, 37, "bad");
    good1->set_parameters({4.0, 0.0, 0.0});
    good2->set_parameters({4.0, 0.0, 0.0});
    // Leans on the noise coordinate: its own gradient step flips it.
    bad->set_parameters({0.2, 1.0, 0.0});
    auto data = toy_set(40, 2, 13, 0.8);
    SweepOptions opts;
    opts.weights = FusionWeights::equal(3);
    const RobustnessTable table =
        robustness_sweep({good1.get(), good2.get(), bad.get()}, {data, data, data},
                         {0.0, 0.5}, opts);
    const auto& majority = table.rows.back();
    const auto& bad_row = table.rows[2];
    CHECK(bad_row.accuracy[1] < 0.5);        // collapsed under attack
    CHECK(majority.accuracy[1] >= 0.9);      // outvoted by the robust pair
}
