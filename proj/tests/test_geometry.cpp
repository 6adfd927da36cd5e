#include "lst/experiments.hpp"
#include "lst/geometry.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace lst;
using lst::testing::trained_blobs;

namespace {

Tensor vec(std::initializer_list<double> v) { return Tensor::from({static_cast<Index>(v.size())}, v); }

// Output independent of the input: logits (1, 0).
Model constant_model() {
    Model m = Model::initialize(Architecture::mlp(2, {4}, 2), 3);
    auto& p = m.parameters();
    p[p.size() - 2].data().setZero();
    p.back() = vec({1, 0});
    return m;
}

const double kConstant = std::exp(1.0) / (1.0 + std::exp(1.0));

}  // namespace

TEST(Interpolate, Examples) {
    const PathSpec spec{vec({0, 0}), vec({2, 4}), 10};
    EXPECT_EQ(interpolate(spec, 0.5).data(), vec({1, 2}).data());
    EXPECT_EQ(interpolate(spec, 1.0).data(), spec.x1.data());
    EXPECT_EQ(interpolate(spec, 0.0).data(), spec.x2.data());
    EXPECT_THROW(interpolate(spec, 1.5), DomainError);
    EXPECT_THROW(interpolate(spec, -0.1), DomainError);
    EXPECT_EQ(interpolate(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1), 0.25), Eigen::Vector2d(0.25, 0.75));
    EXPECT_THROW((PathSpec{vec({0}), vec({1}), 1}.validate()), DomainError);
    EXPECT_THROW(interpolate(PathSpec{vec({0}), vec({1, 2}), 10}, 0.5), DimensionError);
}

TEST(PathProfile, ConstantModelAndDegeneratePath) {
    const Model c = constant_model();
    const PathProfile flat = path_confidence_profile(c, 0, PathSpec{vec({0, 0}), vec({1, 1}), 10});
    ASSERT_EQ(flat.confidences.size(), 10u);
    for (double v : flat.confidences) EXPECT_NEAR(v, kConstant, 1e-15);
    EXPECT_EQ(flat.lambdas.front(), 0.0);
    EXPECT_EQ(flat.lambdas.back(), 1.0);

    const auto& b = trained_blobs();
    const Tensor x = b.data.test[0].input;
    const PathProfile same = path_confidence_profile(b.model, 2, PathSpec{x, x, 7});
    for (double v : same.confidences) EXPECT_EQ(v, confidence(b.model, x, 2));
    EXPECT_NEAR(same.min, same.mean, 1e-15);
}

TEST(PathProfile, SummaryStatistics) {
    const auto& b = trained_blobs();
    const PathProfile p = path_confidence_profile(b.model, 1, PathSpec{b.data.test[0].input, b.data.test[5].input, 10});
    double mn = 1.0, sum = 0.0, interior = 1.0;
    for (std::size_t i = 0; i < p.confidences.size(); ++i) {
        mn = std::min(mn, p.confidences[i]);
        sum += p.confidences[i];
        if (i > 0 && i + 1 < p.confidences.size()) interior = std::min(interior, p.confidences[i]);
    }
    EXPECT_EQ(p.min, mn);
    EXPECT_NEAR(p.mean, sum / 10.0, 1e-15);
    EXPECT_EQ(p.interior_min, interior);
}

TEST(PathProfile, TargetedPgdPathsHaveAValley) {
    const auto& b = trained_blobs();
    const auto pairs = select_pairs(b.model, b.data.test, 100, 1, 11);
    int valleys = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        AttackConfig cfg = AttackConfig::pgd_defaults(0.2, i);
        cfg.steps = 40;
        const Tensor adv = targeted_attack(b.model, pairs[i].source, pairs[i].target_label, cfg).input;
        const PathProfile p = path_confidence_profile(b.model, pairs[i].target_label, PathSpec{pairs[i].target, adv, 10});
        valleys += p.interior_min < std::min(p.confidences.front(), p.confidences.back());
    }
    EXPECT_GT(valleys, 50);
}

TEST(Extremality, ZeroExtrapolationAndConstantModel) {
    const auto& b = trained_blobs();
    const Tensor xs = b.data.test[0].input, xo = b.data.test[9].input;
    const ExtremalityReport r = extremality_probe(b.model, 1, xs, xo, {0.0, 0.1});
    EXPECT_EQ(r.confidences[0], confidence(b.model, xo, 1));
    EXPECT_EQ(r.drops[0], 0.0);
    EXPECT_EQ(r.output_confidence, confidence(b.model, xo, 1));

    const ExtremalityReport c = extremality_probe(constant_model(), 0, xs, xo, {0.0, 0.05, 0.2});
    for (double d : c.drops) EXPECT_NEAR(d, 0.0, 1e-15);
    EXPECT_THROW(extremality_probe(b.model, 0, xs, xo, {-0.1}), DomainError);
}

TEST(Extremality, ClampingIsCounted) {
    const Model c = constant_model();
    const ExtremalityReport r = extremality_probe(c, 0, vec({0.5, 0.5}), vec({0.95, 0.5}), {0.0, 0.05, 0.2});
    EXPECT_EQ(r.clamped_points, 1);  // only 0.5 + 1.2 * 0.45 leaves the box
}

TEST(Extremality, BlobsLstOutputsDropWhenExtrapolated) {
    const auto& b = trained_blobs();
    const auto pairs = select_pairs(b.model, b.data.test, 50, 1, 0);
    const auto runs = traverse_pairs(b.model, pairs, LSTConfig{}, 4);
    std::vector<double> at0, at2;
    for (const auto& r : runs) {
        const ExtremalityReport e = extremality_probe(b.model, r.label, r.pair.source, r.result.output, {0.0, 0.2});
        at0.push_back(e.confidences[0]);
        at2.push_back(e.confidences[1]);
    }
    EXPECT_LT(median(at2), median(at0));
}

TEST(Triangle, SampleCountsAndWeights) {
    const TriangleSpec one{vec({0, 0}), vec({1, 0}), vec({0, 1}), 1};
    const auto v = triangle_samples(one);
    ASSERT_EQ(v.size(), 3u);
    EXPECT_EQ(v[0].point.data(), one.source.data());
    EXPECT_EQ(v[1].point.data(), one.blind2.data());
    EXPECT_EQ(v[2].point.data(), one.blind1.data());

    for (int n = 1; n <= 30; ++n) {
        const TriangleSpec spec{vec({0.1, 0.2}), vec({0.9, 0.3}), vec({0.4, 0.8}), n};
        const auto s = triangle_samples(spec);
        ASSERT_EQ(static_cast<int>(s.size()), (n + 1) * (n + 2) / 2);
        ASSERT_EQ(spec.sample_count(), static_cast<int>(s.size()));
        bool centroid = false;
        for (const auto& t : s) {
            ASSERT_EQ(t.i + t.j + t.k, n);
            ASSERT_GE(std::min({t.i, t.j, t.k}), 0);
            ASSERT_EQ(t.i + t.j + t.k, n);
            ASSERT_DOUBLE_EQ(t.weights.sum(), 1.0);
            const Vector expected = (t.i * spec.source.data() + t.j * spec.blind1.data() + t.k * spec.blind2.data()) / n;
            ASSERT_LT((t.point.data() - expected).norm(), 1e-14);
            centroid |= t.i == t.j && t.j == t.k;
        }
        EXPECT_EQ(centroid, n % 3 == 0) << n;
    }
    EXPECT_EQ((TriangleSpec{vec({0}), vec({0}), vec({0}), 10}.sample_count()), 66);
    EXPECT_THROW(triangle_samples(TriangleSpec{vec({0}), vec({0}), vec({0}), 0}), DomainError);
}

TEST(Triangle, ConstantModelReport) {
    const Model c = constant_model();
    const TriangleReport r = triangle_report(c, 0, TriangleSpec{vec({0, 0}), vec({1, 0}), vec({0, 1}), 10});
    EXPECT_NEAR(r.mean_confidence, kConstant, 1e-15);
    EXPECT_NEAR(r.source_confidence, kConstant, 1e-15);
    for (double f : r.fractions) EXPECT_EQ(f, 1.0);
}

TEST(Triangle, DegenerateTriangleIsTheSource) {
    const auto& b = trained_blobs();
    const Tensor x = b.data.test[4].input;
    const int y = predicted_class(b.model, x);
    const TriangleReport r = triangle_report(b.model, y, TriangleSpec{x, x, x, 10});
    EXPECT_NEAR(r.mean_confidence, r.source_confidence, 1e-14);
    for (double f : r.fractions) EXPECT_EQ(f, 1.0);
}

TEST(Triangle, BlobsReportMatchesBruteForce) {
    const auto& b = trained_blobs();
    const auto pairs = select_pairs(b.model, b.data.test, 3, 2, 12);
    const auto runs = traverse_pairs(b.model, pairs, LSTConfig::cifar_preset(), 2);
    for (std::size_t s = 0; s + 1 < runs.size(); s += 2) {
        const TriangleSpec spec{runs[s].pair.source, runs[s].result.output, runs[s + 1].result.output, 10};
        const int y = runs[s].label;
        const TriangleReport r = triangle_report(b.model, y, spec);

        const double p_src = confidence(b.model, spec.source, y);
        double sum = 0.0;
        std::vector<int> hits(kDefaultDeltas.size(), 0);
        int count = 0;
        for (int j = 0; j <= 10; ++j)
            for (int k = 0; j + k <= 10; ++k) {
                const int i = 10 - j - k;
                const Vector p = (i * spec.source.data() + j * spec.blind1.data() + k * spec.blind2.data()) / 10.0;
                const double c = confidence(b.model, Tensor(spec.source.shape(), p), y);
                sum += c;
                for (std::size_t d = 0; d < kDefaultDeltas.size(); ++d) hits[d] += c >= p_src - kDefaultDeltas[d];
                EXPECT_NEAR(r.confidence_grid(j, j + k), c, 1e-12);
                ++count;
            }
        EXPECT_EQ(count, 66);
        EXPECT_NEAR(r.source_confidence, p_src, 1e-12);
        EXPECT_NEAR(r.mean_confidence, sum / 66.0, 1e-12);
        for (std::size_t d = 0; d < kDefaultDeltas.size(); ++d) {
            EXPECT_NEAR(r.fractions[d], hits[d] / 66.0, 1e-12);
            if (d > 0) EXPECT_GE(r.fractions[d], r.fractions[d - 1]);
        }
        EXPECT_TRUE(std::isnan(r.confidence_grid(10, 0)));
    }
}
