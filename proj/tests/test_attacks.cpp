#include "lst/analytic.hpp"
#include "lst/attacks.hpp"
#include "lst/experiments.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lst;
using lst::testing::random_tensor;
using lst::testing::trained_blobs;

namespace {

double ce(const Classifier& m, const Tensor& x, int y) { return -std::log(confidence(m, x, y)); }

double accuracy_under(const std::vector<Tensor>& inputs, const BlobsModel& b) {
    int correct = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) correct += predicted_class(b.model, inputs[i]) == b.data.test[i].label;
    return correct / static_cast<double>(inputs.size());
}

AttackConfig deterministic(double radius, int steps) {
    AttackConfig c = AttackConfig::pgd_defaults(radius);
    c.step_size = radius > 0.0 ? radius / 4 : 0.01;
    c.steps = steps;
    c.random_start = false;
    return c;
}

}  // namespace

TEST(AttackConfig, DefaultsAndValidation) {
    const AttackConfig c = AttackConfig::pgd_defaults(0.2, 9);
    EXPECT_EQ(c.step_size, 0.05);
    EXPECT_EQ(c.steps, 20);
    EXPECT_TRUE(c.random_start);
    EXPECT_EQ(c.seed, 9u);
    AttackConfig bad = c;
    bad.step_size = 0.0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.steps = -1;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.radius = -0.1;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Fgsm, ZeroBudgetIsIdentity) {
    const auto& b = trained_blobs();
    const Tensor x = b.data.test[0].input;
    EXPECT_EQ(fgsm(b.model, x, b.data.test[0].label, 0.0).data(), x.data());
}

TEST(Fgsm, LinearModelMovesEveryCoordinateByTheBudget) {
    std::mt19937_64 rng(1);
    Eigen::VectorXd w(6);
    w << 0.5, -1.0, 2.0, -0.25, 1.5, -0.75;
    const LinearFunctionalClassifier clf({w, 0.1});
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = random_tensor({6}, rng, 0.3, 0.7);
        const Tensor adv = fgsm(clf, x, 0, 0.1);
        // CE for class 0 decreases along w, so the attack moves along -sign(w)
        for (Index i = 0; i < 6; ++i) EXPECT_NEAR(adv.data()[i] - x.data()[i], w[i] > 0 ? -0.1 : 0.1, 1e-15);
        EXPECT_GT(ce(clf, adv, 0), ce(clf, x, 0));
    }
}

TEST(Fgsm, LowersBlobsAccuracy) {
    const auto& b = trained_blobs();
    std::vector<Tensor> clean, adv;
    for (std::size_t i = 0; i < 200; ++i) {
        clean.push_back(b.data.test[i].input);
        adv.push_back(fgsm(b.model, b.data.test[i].input, b.data.test[i].label, 0.1));
    }
    EXPECT_LT(accuracy_under(adv, b), accuracy_under(clean, b));
}

TEST(Pgd, ZeroStepsWithoutRandomStartIsIdentity) {
    const auto& b = trained_blobs();
    const Tensor x = b.data.test[1].input;
    EXPECT_EQ(pgd(b.model, x, b.data.test[1].label, deterministic(0.1, 0)).data(), x.data());
}

TEST(Pgd, AtLeastAsStrongAsFgsm) {
    const auto& b = trained_blobs();
    std::vector<Tensor> f, p;
    // Started at x the PGD path contains the FGSM sign direction; a random
    // start can land in a worse basin of the checkerboard loss.
    AttackConfig cfg = deterministic(0.1, 20);
    cfg.step_size = 0.02;
    for (std::size_t i = 0; i < 200; ++i) {
        const Sample& s = b.data.test[i];
        f.push_back(fgsm(b.model, s.input, s.label, 0.1));
        p.push_back(pgd(b.model, s.input, s.label, cfg));
    }
    EXPECT_LE(accuracy_under(p, b), accuracy_under(f, b));
}

TEST(Pgd, DeterministicForFixedSeed) {
    const auto& b = trained_blobs();
    const Sample& s = b.data.test[2];
    const AttackConfig cfg = AttackConfig::pgd_defaults(0.1, 17);
    EXPECT_EQ(pgd(b.model, s.input, s.label, cfg).data(), pgd(b.model, s.input, s.label, cfg).data());
}

TEST(Attacks, BoxContainmentFuzz) {
    const auto& b = trained_blobs();
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> radius(0.0, 0.5);
    for (int i = 0; i < 1000; ++i) {
        const Tensor x = random_tensor({2}, rng, 0, 1);
        AttackConfig cfg = AttackConfig::pgd_defaults(radius(rng), i);
        cfg.steps = 1 + i % 5;
        const int y = i % 4;
        Tensor outs[] = {fgsm(b.model, x, y, cfg.radius), pgd(b.model, x, y, cfg),
                         targeted_attack(b.model, x, (y + 1) % 4, cfg).input};
        for (const Tensor& o : outs) {
            ASSERT_LE((o.data() - x.data()).lpNorm<Eigen::Infinity>(), cfg.radius);
            ASSERT_GE(o.data().minCoeff(), 0.0);
            ASSERT_LE(o.data().maxCoeff(), 1.0);
        }
    }
}

TEST(Attacks, ProjectionIsExact) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) {
        const Tensor c = random_tensor({16}, rng, 0, 1), v = random_tensor({16}, rng, -2, 3);
        const double r = 1e-3 * (i % 300);
        const Tensor p = project_to_boxes(v, c, r, 0.0, 1.0);
        for (Index k = 0; k < 16; ++k) {
            ASSERT_LE(std::abs(p.data()[k] - c.data()[k]), r);
            ASSERT_GE(p.data()[k], 0.0);
            ASSERT_LE(p.data()[k], 1.0);
        }
    }
}

TEST(Targeted, CurrentClassConfidenceDoesNotDecrease) {
    const auto& b = trained_blobs();
    for (std::size_t i = 0; i < 20; ++i) {
        const Tensor x = b.data.test[i].input;
        const int y = predicted_class(b.model, x);
        const AttackResult r = targeted_attack(b.model, x, y, deterministic(0.1, 10));
        EXPECT_GE(r.target_confidence, confidence(b.model, x, y));
    }
}

TEST(Targeted, ZeroBudgetIsIdentity) {
    const auto& b = trained_blobs();
    const Tensor x = b.data.test[0].input;
    EXPECT_EQ(targeted_attack(b.model, x, 1, deterministic(0.0, 10)).input.data(), x.data());
}

TEST(Targeted, ReachesTargetClassOnBlobs) {
    const auto& b = trained_blobs();
    const auto pairs = select_pairs(b.model, b.data.test, 100, 1, 5);
    int reached = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        AttackConfig cfg = AttackConfig::pgd_defaults(0.3, i);
        cfg.steps = 40;
        reached += targeted_attack(b.model, pairs[i].source, pairs[i].target_label, cfg).target_confidence > 0.5;
    }
    EXPECT_GE(reached, 70);
}

TEST(FeatureAttack, SameReferenceAndZeroBudgetAreIdentity) {
    const auto& b = trained_blobs();
    const Tensor x = b.data.test[0].input;
    const AttackResult same = feature_targeted_attack(b.model, x, x, "penultimate", deterministic(0.1, 10));
    EXPECT_EQ(same.input.data(), x.data());
    EXPECT_EQ(same.objective, 0.0);
    EXPECT_EQ(feature_targeted_attack(b.model, x, b.data.test[1].input, "penultimate", deterministic(0.0, 10))
                  .input.data(),
              x.data());
    EXPECT_THROW(feature_targeted_attack(b.model, x, x, "nope", deterministic(0.1, 1)), LookupError);
}

TEST(FeatureAttack, DecreasesFeatureDistance) {
    const auto& b = trained_blobs();
    const auto pairs = select_pairs(b.model, b.data.test, 100, 1, 6);
    int decreased = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double before = (features(b.model, pairs[i].source, "penultimate").data() -
                               features(b.model, pairs[i].target, "penultimate").data())
                                  .norm();
        AttackConfig cfg = AttackConfig::pgd_defaults(0.2, i);
        cfg.steps = 40;
        const AttackResult r = feature_targeted_attack(b.model, pairs[i].source, pairs[i].target, "penultimate", cfg);
        const double after = (features(b.model, r.input, "penultimate").data() -
                              features(b.model, pairs[i].target, "penultimate").data())
                                 .norm();
        EXPECT_NEAR(after, r.objective, 1e-12);
        decreased += after < before;
    }
    EXPECT_GE(decreased, 95);
}
