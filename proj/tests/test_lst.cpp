#include "lst/analytic.hpp"
#include "lst/experiments.hpp"
#include "lst/lst.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <sstream>

using namespace lst;
using lst::testing::random_tensor;
using lst::testing::trained_blobs;

namespace {

Tensor vec(std::initializer_list<double> v) { return Tensor::from({static_cast<Index>(v.size())}, v); }

Tensor checker_center(int col, int row) { return vec({0.125 + 0.25 * col, 0.125 + 0.25 * row}); }

}  // namespace

TEST(OrthogonalStep, HandExamples) {
    const Tensor x = vec({0, 0});
    EXPECT_EQ(orthogonal_step(x, vec({1, 1}), vec({1, 0}), 1.0).data(), vec({0, 1}).data());
    EXPECT_LT(orthogonal_step(x, vec({2, 4}), vec({1, 2}), 0.7).data().norm(), 1e-15);  // parallel
    EXPECT_LT((orthogonal_step(x, vec({2, -1}), vec({1, 2}), 0.3).data() - 0.3 * vec({2, -1}).data()).norm(),
              1e-15);  // already orthogonal
}

TEST(OrthogonalStep, OrthogonalityFuzz) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 2000; ++i) {
        const Tensor x = random_tensor({30}, rng), t = random_tensor({30}, rng);
        Tensor g = random_tensor({30}, rng);
        if (i % 4 == 0) g = Tensor(g.shape(), (t.data() - x.data()) + 1e-9 * g.data());  // nearly parallel
        const Tensor d = orthogonal_step(x, t, g, 0.01);
        ASSERT_LE(std::abs(d.data().dot(g.data())), 1e-9 * d.data().norm() * g.data().norm() + 1e-300);
    }
}

TEST(OrthogonalStep, DegenerateGradientFallsBackToDirectStep) {
    const Tensor d = orthogonal_step(vec({0, 0}), vec({1, 2}), vec({0, 0}), 0.5);
    EXPECT_EQ(d.data(), vec({0.5, 1.0}).data());
}

TEST(ParallelStep, Examples) {
    const Tensor g = vec({0.5, -0.25, 3.0});
    EXPECT_EQ(parallel_step(vec({0.1, 0.1, 0.1}), g, 0.0, 0.5).data().norm(), 0.0);
    EXPECT_EQ(parallel_step(vec({0, 0, 0}), vec({0.5, -0.25, 1.0}), 0.1, 0.0).data(), vec({-0.05, 0.025, -0.1}).data());
    const Tensor saturated = parallel_step(vec({0, 0, 0}), vec({20, -20, 0}), 0.1, 0.0);
    EXPECT_EQ(saturated.data(), vec({-0.1, 0.1, 0.0}).data());
    // EMA mixing: 0.9 * 0.1 + 0.1 * clamp(0.1 - 0.1 * 3) = 0.09 - 0.01
    EXPECT_NEAR(parallel_step(vec({0.1, 0.1, 0.1}), g, 0.1, 0.9).data()[2], 0.08, 1e-15);
}

TEST(ParallelStep, BudgetFuzz) {
    std::mt19937_64 rng(2);
    Tensor p({10});
    for (int i = 0; i < 5000; ++i) {
        const double eps = 1e-3 * (1 + i % 7);
        for (Index k = 0; k < p.numel(); ++k) p.data()[k] = std::clamp(p.data()[k], -eps, eps);
        p = parallel_step(p, random_tensor({10}, rng, -100, 100), eps, (i % 10) / 10.0);
        ASSERT_LE(p.data().lpNorm<Eigen::Infinity>(), eps);
    }
}

TEST(Config, PresetsAndValidation) {
    const LSTConfig in = LSTConfig::imagenet_preset(), cf = LSTConfig::cifar_preset();
    EXPECT_EQ(in.max_iterations, 400);
    EXPECT_EQ(in.eta, 1e-2);
    EXPECT_EQ(in.epsilon, 2e-3);
    EXPECT_EQ(in.delta, 0.2);
    EXPECT_EQ(cf.max_iterations, 300);
    EXPECT_EQ(cf.delta, 0.25);
    EXPECT_FALSE(in.reproduction().early_stop);
    for (auto mutate : std::vector<std::function<void(LSTConfig&)>>{
             [](LSTConfig& c) { c.max_iterations = 0; }, [](LSTConfig& c) { c.eta = 0; },
             [](LSTConfig& c) { c.epsilon = -1e-3; }, [](LSTConfig& c) { c.delta = 1.5; },
             [](LSTConfig& c) { c.ema_beta = 1.0; }, [](LSTConfig& c) { c.clamp_low = 2.0; }}) {
        LSTConfig c;
        mutate(c);
        EXPECT_THROW(c.validate(), ConfigError);
    }
}

TEST(Traverse, IdentityPairConvergesImmediately) {
    const auto& b = trained_blobs();
    const Tensor x = checker_center(0, 0);
    const LSTResult r = traverse(b.model, x, 0, x, LSTConfig::cifar_preset());
    EXPECT_EQ(r.termination, Termination::Converged);
    EXPECT_EQ(r.iterations, 0);
    EXPECT_EQ(r.output.data(), x.data());
}

TEST(Traverse, Errors) {
    const auto& b = trained_blobs();
    EXPECT_THROW(traverse(b.model, vec({0.1, 0.1}), 0, vec({0.1, 0.1, 0.1}), LSTConfig{}), DimensionError);
    EXPECT_THROW(traverse(b.model, vec({0.1, 0.1}), 9, vec({0.2, 0.2}), LSTConfig{}), IndexError);
}

TEST(Traverse, LinearFunctionalMatchesProjectionWithinTwoOverEta) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd w(10), xs(10), xt(10);
        for (int i = 0; i < 10; ++i) w(i) = g(rng) / std::sqrt(10.0), xs(i) = g(rng), xt(i) = g(rng);
        const LinearFunctionalClassifier clf({w, 0.0});
        LSTConfig cfg = exact_linear_config();
        cfg.record_path = true;
        const LSTResult r = traverse(clf, Tensor::vector(xs), 0, Tensor::vector(xt), cfg);
        EXPECT_LE(r.iterations, static_cast<int>(2.0 / cfg.eta) * 50);
        EXPECT_LT((r.output.data() - level_set_projection(clf.functional(), xs, xt)).norm(), 1e-6);
        // monotone approach to the target
        for (std::size_t k = 1; k < r.trace.size(); ++k) {
            ASSERT_LE(r.trace[k].distance_to_target, r.trace[k - 1].distance_to_target + 1e-12);
        }
    }
}

TEST(Traverse, BlobsPathStaysInsideDenseGridSuperlevelSet) {
    const auto& b = trained_blobs();
    const Tensor xs = checker_center(0, 0), xt = checker_center(1, 0);
    LSTConfig cfg = LSTConfig::cifar_preset();
    cfg.record_path = true;
    const LSTResult r = traverse(b.model, xs, 0, xt, cfg);
    EXPECT_NE(r.termination, Termination::ConfidenceGuard);
    const double threshold = r.source_confidence - cfg.delta;
    EXPECT_GE(confidence(b.model, r.output, 0), threshold);

    constexpr int n = 400;
    const double h = 1.0 / (n - 1);
    std::vector<double> grid(n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) grid[i * n + j] = confidence(b.model, vec({i * h, j * h}), 0);
    auto inside = [&](int i, int j) { return grid[i * n + j] >= threshold; };

    ASSERT_EQ(r.path.size(), static_cast<std::size_t>(r.iterations) + 1);
    for (const Tensor& p : r.path) {
        const int i = std::min(n - 2, static_cast<int>(p.data()[0] / h));
        const int j = std::min(n - 2, static_cast<int>(p.data()[1] / h));
        ASSERT_TRUE(inside(i, j) || inside(i + 1, j) || inside(i, j + 1) || inside(i + 1, j + 1))
            << "path point (" << p.data()[0] << ", " << p.data()[1] << ") outside the grid superlevel set";
    }
}

TEST(Traverse, TraceInvariantsOnBlobs) {
    const auto& b = trained_blobs();
    const auto pairs = select_pairs(b.model, b.data.test, 8, 3, 4);
    for (const auto& pr : pairs) {
        const int y = predicted_class(b.model, pr.source);
        LSTConfig cfg = LSTConfig::imagenet_preset();
        cfg.record_path = true;
        const LSTResult r = traverse(b.model, pr.source, y, pr.target, cfg);
        ASSERT_LE(r.trace.size(), static_cast<std::size_t>(cfg.max_iterations));
        ASSERT_GE(confidence(b.model, r.output, y), r.source_confidence - cfg.delta);
        for (const LSTStep& s : r.trace) {
            if (!s.degenerate_gradient) {
                ASSERT_LE(s.orthogonality_residual, 1e-9 * s.perp_norm * s.gradient_norm + 1e-300);
            }
            ASSERT_LE(s.parallel_linf, cfg.epsilon);
        }
        for (const Tensor& p : r.path) {
            ASSERT_GE(p.data().minCoeff(), 0.0);
            ASSERT_LE(p.data().maxCoeff(), 1.0);
        }
    }
}

TEST(Traverse, GuardReturnsPreviousIterate) {
    const auto& b = trained_blobs();
    LSTConfig cfg = LSTConfig::cifar_preset();
    cfg.delta = 0.0;
    cfg.epsilon = 0.0;
    cfg.eta = 0.5;
    cfg.record_path = true;
    const Tensor xs = b.data.test[0].input;
    const int y = predicted_class(b.model, xs);
    const LSTResult r = traverse(b.model, xs, y, checker_center(3, 3), cfg);
    ASSERT_EQ(r.termination, Termination::ConfidenceGuard);
    EXPECT_EQ(r.output.data(), r.path.back().data());
    EXPECT_GE(confidence(b.model, r.output, y), r.source_confidence);
}

TEST(Regularity, SaturatedAndLinearCases) {
    Model m = Model::initialize(Architecture::mlp(2, {3}, 2), 1);
    auto& p = m.parameters();
    p[p.size() - 2].data().setZero();
    p.back() = vec({20, -20});
    EXPECT_LT(regularity_check(m, vec({0.2, 0.3}), 0), 1e-15);

    Eigen::VectorXd w(3);
    w << 0.3, -0.4, 1.2;
    const LinearFunctionalClassifier clf({w, 0.0});
    const Tensor x0 = Tensor::vector(Eigen::VectorXd::Zero(3));
    // f = 0 gives p = 1/2, so |dCE/df| = 1/2 and the norm is |w| / 2 for class 0
    EXPECT_NEAR(regularity_check(clf, x0, 0), 0.5 * w.norm(), 1e-12);

    const auto& cnn = lst::testing::trained_cnn();
    ASSERT_GE(accuracy(cnn.model, cnn.data), 0.95);
    const Dataset test = lst::testing::stripe_images(5, 2);
    for (const Sample& s : test) EXPECT_GT(regularity_check(cnn.model, s.input, s.label), 1e-8);
}

TEST(Trace, CsvLayout) {
    LSTResult r;
    r.trace.push_back({1, 0.5, 2.5, 0.125, 0.1, 0.75, 0.0, false});
    std::ostringstream os;
    write_trace_csv(os, r);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
              "iteration,confidence,distance_to_target,orthogonality_residual,gradient_norm");
    EXPECT_NE(os.str().find("\n1,0.5,2.5,0.125,0.75\n"), std::string::npos);
}
