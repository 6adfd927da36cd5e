#include "lst/data_io.hpp"
#include "lst/errors.hpp"
#include "lst/file_util.hpp"
#include "lst/geometry.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lst;
using lst::testing::random_tensor;
using lst::testing::scratch_dir;

namespace {

Dataset random_images(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Dataset d;
    for (int i = 0; i < n; ++i) {
        Tensor x({3, 32, 32});
        for (Index k = 0; k < x.numel(); ++k) x.data()[k] = static_cast<double>(rng() % 256) / 255.0;
        d.push_back({x, static_cast<int>(rng() % 10)});
    }
    return d;
}

Rgb pixel(const Tensor& img, Index r, Index c) {
    const Index h = img.shape()[1], w = img.shape()[2];
    auto q = [&](Index ch) { return quantize(img.data()[(ch * h + r) * w + c]); };
    return {q(0), q(1), q(2)};
}

}  // namespace

TEST(Cifar, ZeroRecordIsBlackClassZero) {
    const Dataset d = decode_cifar10(std::string(kCifarRecordBytes, '\0'));
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].label, 0);
    EXPECT_EQ(d[0].input.shape(), (Shape{3, 32, 32}));
    EXPECT_EQ(d[0].input.data().maxCoeff(), 0.0);
}

TEST(Cifar, LayoutIsPlanar) {
    std::string rec(kCifarRecordBytes, '\0');
    rec[0] = 7;
    rec[1 + 0 * 1024 + 2 * 32 + 5] = static_cast<char>(255);  // R at row 2, col 5
    rec[1 + 2 * 1024 + 31 * 32 + 31] = static_cast<char>(51);  // B at the last pixel
    const Dataset d = decode_cifar10(rec);
    EXPECT_EQ(d[0].label, 7);
    EXPECT_EQ(d[0].input.data()[2 * 32 + 5], 1.0);
    EXPECT_EQ(d[0].input.data()[2 * 1024 + 31 * 32 + 31], 0.2);
}

TEST(Cifar, Errors) {
    EXPECT_THROW(decode_cifar10(std::string(3072, '\0')), FormatError);
    EXPECT_THROW(decode_cifar10(std::string(2 * kCifarRecordBytes - 1, '\0')), FormatError);
    std::string bad(kCifarRecordBytes, '\0');
    bad[0] = 10;
    EXPECT_THROW(decode_cifar10(bad), FormatError);
    EXPECT_THROW(read_cifar10_binary(scratch_dir("cifar_missing") / "none.bin"), FormatError);
    EXPECT_THROW(load_cifar10(scratch_dir("cifar_empty")), FormatError);
}

TEST(Cifar, ByteExactRoundTrip) {
    const Dataset d = random_images(50, 1);
    const std::string bytes = encode_cifar10(d);
    ASSERT_EQ(bytes.size(), 50 * kCifarRecordBytes);
    EXPECT_EQ(encode_cifar10(decode_cifar10(bytes)), bytes);

    const auto dir = scratch_dir("cifar_rt");
    write_cifar10_binary(dir / "data_batch_1.bin", d);
    write_cifar10_binary(dir / "data_batch_2.bin", random_images(20, 2));
    EXPECT_EQ(read_file(dir / "data_batch_1.bin"), bytes);
    const Dataset all = load_cifar10(dir);
    EXPECT_EQ(all.size(), 70u);
    EXPECT_EQ(all[0].input.data(), d[0].input.data());
    EXPECT_EQ(load_cifar10(dir / "data_batch_2.bin").size(), 20u);
}

TEST(Cifar, QuantisationErrorIsHalfAStep) {
    std::mt19937_64 rng(3);
    Dataset d{{random_tensor({3, 32, 32}, rng, 0, 1), 4}};
    const Dataset back = decode_cifar10(encode_cifar10(d));
    EXPECT_LE((back[0].input.data() - d[0].input.data()).lpNorm<Eigen::Infinity>(), 1.0 / 510.0 + 1e-15);
    EXPECT_EQ(quantize(0.5 / 255.0), 1);  // round half up
    EXPECT_EQ(quantize(1.0), 255);
    EXPECT_THROW(quantize(-0.2), RangeError);
    EXPECT_THROW(quantize(1.7), RangeError);
    EXPECT_THROW(encode_ppm(Tensor(Shape{1, 1, 1}, Vector::Constant(1, 2.0))), RangeError);
}

TEST(Cifar, BalancedSubset) {
    Dataset d;
    for (int i = 0; i < 100; ++i) d.push_back({Tensor({1}), i % 10});
    const Dataset s = balanced_subset(d, 10, 3);
    ASSERT_EQ(s.size(), 30u);
    std::vector<int> counts(10, 0);
    for (const auto& x : s) ++counts[x.label];
    for (int c : counts) EXPECT_EQ(c, 3);
    EXPECT_THROW(balanced_subset(d, 10, 11), LookupError);
}

TEST(Blobs, VanishingSpreadSitsOnCentres) {
    BlobDatasetSpec spec = BlobDatasetSpec::checkerboard(0);
    spec.stddev = 1e-15;
    const BlobDataset d = generate_blobs(spec);
    for (const Dataset* part : {&d.train, &d.test})
        for (const Sample& s : *part) {
            bool on_centre = false;
            for (std::size_t c = 0; c < spec.centers.size(); ++c) {
                on_centre |= spec.center_labels[c] == s.label && (s.input.data() - spec.centers[c]).norm() < 1e-13;
            }
            ASSERT_TRUE(on_centre);
        }
}

TEST(Blobs, DeterministicSplitAndLabels) {
    const BlobDataset a = generate_blobs(BlobDatasetSpec::checkerboard(5));
    const BlobDataset b = generate_blobs(BlobDatasetSpec::checkerboard(5));
    ASSERT_EQ(a.train.size(), 1280u);
    ASSERT_EQ(a.test.size(), 320u);
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        ASSERT_EQ(a.train[i].input.data(), b.train[i].input.data());
        ASSERT_EQ(a.train[i].label, static_cast<int>(i % 4));
        ASSERT_GE(a.train[i].input.data().minCoeff(), 0.0);
        ASSERT_LE(a.train[i].input.data().maxCoeff(), 1.0);
    }
    EXPECT_NE(generate_blobs(BlobDatasetSpec::checkerboard(6)).train[0].input.data(), a.train[0].input.data());
}

TEST(Blobs, CheckerboardColouring) {
    const BlobDatasetSpec spec = BlobDatasetSpec::checkerboard(0);
    for (std::size_t a = 0; a < spec.centers.size(); ++a)
        for (std::size_t b = a + 1; b < spec.centers.size(); ++b) {
            const double d = (spec.centers[a] - spec.centers[b]).lpNorm<Eigen::Infinity>();
            if (d < 0.26) EXPECT_NE(spec.center_labels[a], spec.center_labels[b]);
        }
}

TEST(Blobs, TenSigmaClassesAreLinearlySeparable) {
    const BlobDatasetSpec spec = BlobDatasetSpec::two_class(10.0, 1);
    EXPECT_NEAR((spec.centers[1] - spec.centers[0]).norm(), 10 * spec.stddev, 1e-15);
    const BlobDataset d = generate_blobs(spec);
    const Eigen::VectorXd w = spec.centers[1] - spec.centers[0];
    const Eigen::VectorXd mid = 0.5 * (spec.centers[0] + spec.centers[1]);
    for (const Dataset* part : {&d.train, &d.test})
        for (const Sample& s : *part) ASSERT_EQ(w.dot(Eigen::VectorXd(s.input.data()) - mid) > 0, s.label == 1);
}

TEST(Blobs, Validation) {
    BlobDatasetSpec spec = BlobDatasetSpec::two_class(4.0);
    spec.center_labels = {0, 5};
    EXPECT_THROW(spec.validate(), ConfigError);
    spec = BlobDatasetSpec::two_class(4.0);
    spec.stddev = 0.0;
    EXPECT_THROW(spec.validate(), ConfigError);
    spec = BlobDatasetSpec::two_class(4.0);
    spec.centers[1] = spec.centers[0];
    EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Ppm, RoundTripUnderQuantisation) {
    std::mt19937_64 rng(4);
    const Tensor img = random_tensor({3, 7, 5}, rng, 0, 1);
    const std::string bytes = encode_ppm(img);
    EXPECT_EQ(bytes.substr(0, 11), "P6\n5 7\n255\n");
    const Tensor back = decode_ppm(bytes);
    EXPECT_EQ(back.shape(), img.shape());
    EXPECT_LE((back.data() - img.data()).lpNorm<Eigen::Infinity>(), 1.0 / 510.0 + 1e-15);
    EXPECT_EQ(encode_ppm(back), bytes);

    const Tensor grey = random_tensor({1, 3, 3}, rng, 0, 1);
    const Tensor g3 = decode_ppm(encode_ppm(grey));
    EXPECT_EQ(g3.data().segment(0, 9), g3.data().segment(18, 9));
    EXPECT_THROW(decode_ppm("P5\n1 1\n255\n\x01"), FormatError);
    EXPECT_THROW(decode_ppm("P6\n2 2\n255\n\x01\x02"), FormatError);
    EXPECT_THROW(encode_ppm(Tensor({2, 3, 3})), DimensionError);
}

TEST(Heatmap, ColourRampAndZeroGrid) {
    EXPECT_EQ(heat_color(0.0), (Rgb{0, 0, 0}));
    EXPECT_EQ(heat_color(1.0), (Rgb{255, 255, 255}));
    for (int i = 0; i <= 100; ++i) EXPECT_FALSE(heat_color(i / 100.0) == kHeatmapSentinel);
    const Tensor img = render_heatmap(Grid::Zero(4, 4), 3);
    EXPECT_EQ(img.shape(), (Shape{3, 12, 12}));
    EXPECT_EQ(img.data().maxCoeff(), 0.0);
}

TEST(Heatmap, TriangleGridLayout) {
    Grid grid = Grid::Constant(11, 11, std::numeric_limits<double>::quiet_NaN());
    int sampled = 0;
    for (int j = 0; j <= 10; ++j)
        for (int k = 0; j + k <= 10; ++k) grid(j, j + k) = 0.5, ++sampled;
    EXPECT_EQ(sampled, 66);
    const int cell = 4;
    const Tensor img = render_heatmap(grid, cell);
    for (int r = 0; r < 11; ++r)
        for (int c = 0; c < 11; ++c) {
            const Rgb p = pixel(img, r * cell + 1, c * cell + 2);
            if (c >= r) EXPECT_EQ(p, heat_color(0.5)) << r << "," << c;
            else EXPECT_EQ(p, kHeatmapSentinel) << r << "," << c;
        }
    const auto dir = scratch_dir("heatmap");
    write_heatmap(dir / "t.ppm", grid, cell);
    EXPECT_EQ(read_file(dir / "t.ppm"), encode_ppm(img));
}

TEST(Tiles, MosaicLayout) {
    const Tensor black({3, 2, 2}), white(Shape{3, 2, 2}, Vector::Ones(12));
    const Tensor m = tile_images({black, white, white, black}, 2, 2, 1, 0.5);
    EXPECT_EQ(m.shape(), (Shape{3, 5, 5}));
    EXPECT_EQ(pixel(m, 0, 0), (Rgb{0, 0, 0}));
    EXPECT_EQ(pixel(m, 0, 3), (Rgb{255, 255, 255}));
    EXPECT_EQ(pixel(m, 2, 2), (Rgb{128, 128, 128}));
    EXPECT_EQ(pixel(m, 4, 4), (Rgb{0, 0, 0}));
    EXPECT_THROW(tile_images({black}, 2, 2), DimensionError);
}
