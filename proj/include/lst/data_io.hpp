#pragma once

#include "lst/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lst {

// ---------------------------------------------------------------------------
// CIFAR-10 binary batches: records of 1 label byte followed by 3072 pixel
// bytes laid out as three 1024-byte planes (R, G, B), each row-major 32x32.

inline constexpr std::size_t kCifarRecordBytes = 3073;

Dataset decode_cifar10(const std::string& bytes);
std::string encode_cifar10(const Dataset& images);  // pixels quantised with round-half-up
Dataset read_cifar10_binary(const std::filesystem::path& path);
void write_cifar10_binary(const std::filesystem::path& path, const Dataset& images);

// Loads data_batch_*.bin (training split) from a cifar-10-batches-bin directory,
// or a single batch when `path` names a file.
Dataset load_cifar10(const std::filesystem::path& path);

// First `per_class` images of each class, in file order; LookupError if a class is short.
Dataset balanced_subset(const Dataset& data, int num_classes, int per_class);

// ---------------------------------------------------------------------------
// Synthetic Gaussian blobs in [0,1]^d.

struct BlobDatasetSpec {
    int num_classes = 2;
    std::vector<Eigen::VectorXd> centers;  // cluster centres
    std::vector<int> center_labels;        // class of each cluster
    double stddev = 0.03;
    int samples_per_class = 500;
    std::uint64_t seed = 0;

    // 4x4 grid of clusters on [0,1]^2 (pitch 0.25) coloured by the 2x2 tiling
    // class = 2 (row % 2) + (col % 2): four classes of four clusters each, no
    // two same-class clusters adjacent (diagonals included).
    static BlobDatasetSpec checkerboard(std::uint64_t seed = 0);
    // Two clusters separated by `separation` standard deviations.
    static BlobDatasetSpec two_class(double separation_in_std, std::uint64_t seed = 0);

    void validate() const;
};

struct BlobDataset {
    Dataset train;  // first 80% of the generated sequence
    Dataset test;   // remaining 20%
};

// Sample k has class k % num_classes and cycles through that class's clusters;
// coordinates are clamped to [0,1].
BlobDataset generate_blobs(const BlobDatasetSpec& spec);

// ---------------------------------------------------------------------------
// Portable pixmaps (binary P6, maxval 255). Channels [C x H x W] with C = 1
// (replicated to grey) or C = 3. Quantisation is round-half-up of v * 255.

std::uint8_t quantize(double v);
std::string encode_ppm(const Tensor& pixels);
// Decodes a P6 image into a [3 x H x W] tensor of byte / 255.
Tensor decode_ppm(const std::string& bytes);
void write_image(const std::filesystem::path& path, const Tensor& pixels);

// Unsampled cells of a heatmap grid are NaN and render as kHeatmapSentinel.
struct Rgb {
    std::uint8_t r, g, b;
    bool operator==(const Rgb&) const = default;
};

inline constexpr Rgb kHeatmapSentinel{0, 0, 255};

// Black -> red -> yellow -> white ramp; 0 maps to black, 1 to white. Blue is
// never produced, which keeps the sentinel unambiguous.
Rgb heat_color(double v);

using Grid = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One `cell` x `cell` block per grid entry.
Tensor render_heatmap(const Grid& grid, int cell = 8);
void write_heatmap(const std::filesystem::path& path, const Grid& grid, int cell = 8);

// Tiles equally shaped [C x H x W] images row-major into a rows x cols mosaic
// separated by `gap` pixels of `background`.
Tensor tile_images(const std::vector<Tensor>& images, int rows, int cols, int gap = 2, double background = 1.0);

}  // namespace lst
