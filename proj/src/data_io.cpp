#include "lst/data_io.hpp"

#include "lst/errors.hpp"
#include "lst/file_util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <sstream>

namespace lst {

// ---------------------------------------------------------------------------
// CIFAR-10

Dataset decode_cifar10(const std::string& bytes) {
    if (bytes.size() % kCifarRecordBytes != 0) {
        throw FormatError("CIFAR-10 data truncated: " + std::to_string(bytes.size()) + " bytes is not a multiple of " +
                          std::to_string(kCifarRecordBytes));
    }
    const std::size_t records = bytes.size() / kCifarRecordBytes;
    Dataset out;
    out.reserve(records);
    for (std::size_t r = 0; r < records; ++r) {
        const auto* rec = reinterpret_cast<const unsigned char*>(bytes.data()) + r * kCifarRecordBytes;
        if (rec[0] > 9) {
            throw FormatError("CIFAR-10 record " + std::to_string(r) + " has label byte " + std::to_string(rec[0]));
        }
        Sample s;
        s.label = rec[0];
        s.input = Tensor(Shape{3, 32, 32});
        for (Index i = 0; i < 3072; ++i) s.input[i] = static_cast<double>(rec[1 + i]) / 255.0;
        out.push_back(std::move(s));
    }
    return out;
}

std::string encode_cifar10(const Dataset& images) {
    std::string out;
    out.reserve(images.size() * kCifarRecordBytes);
    for (std::size_t r = 0; r < images.size(); ++r) {
        const Sample& s = images[r];
        if (s.label < 0 || s.label > 9) throw FormatError("CIFAR-10 label out of range in record " + std::to_string(r));
        require_same_shape(Shape{3, 32, 32}, s.input.shape(), "CIFAR-10 record");
        out.push_back(static_cast<char>(s.label));
        for (Index i = 0; i < 3072; ++i) out.push_back(static_cast<char>(quantize(s.input[i])));
    }
    return out;
}

Dataset read_cifar10_binary(const std::filesystem::path& path) { return decode_cifar10(read_file(path)); }

void write_cifar10_binary(const std::filesystem::path& path, const Dataset& images) {
    write_file_atomic(path, encode_cifar10(images));
}

Dataset load_cifar10(const std::filesystem::path& path) {
    if (!std::filesystem::is_directory(path)) return read_cifar10_binary(path);
    Dataset all;
    for (int b = 1; b <= 5; ++b) {
        const auto file = path / ("data_batch_" + std::to_string(b) + ".bin");
        if (!std::filesystem::exists(file)) continue;
        Dataset part = read_cifar10_binary(file);
        all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    if (all.empty()) throw FormatError("no data_batch_*.bin files under " + path.string());
    return all;
}

Dataset balanced_subset(const Dataset& data, int num_classes, int per_class) {
    std::vector<int> taken(static_cast<std::size_t>(num_classes), 0);
    Dataset out;
    for (const Sample& s : data) {
        if (s.label < 0 || s.label >= num_classes) continue;
        int& n = taken[static_cast<std::size_t>(s.label)];
        if (n < per_class) {
            out.push_back(s);
            ++n;
        }
    }
    for (int c = 0; c < num_classes; ++c) {
        if (taken[static_cast<std::size_t>(c)] < per_class) {
            throw LookupError("class " + std::to_string(c) + " has only " +
                              std::to_string(taken[static_cast<std::size_t>(c)]) + " images, " +
                              std::to_string(per_class) + " requested");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Blobs

BlobDatasetSpec BlobDatasetSpec::checkerboard(std::uint64_t seed) {
    BlobDatasetSpec spec;
    spec.num_classes = 4;
    spec.stddev = 0.03;
    spec.samples_per_class = 400;
    spec.seed = seed;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            Eigen::VectorXd center(2);
            center << 0.125 + 0.25 * c, 0.125 + 0.25 * r;
            spec.centers.push_back(center);
            spec.center_labels.push_back(2 * (r % 2) + (c % 2));
        }
    }
    return spec;
}

BlobDatasetSpec BlobDatasetSpec::two_class(double separation_in_std, std::uint64_t seed) {
    BlobDatasetSpec spec;
    spec.num_classes = 2;
    spec.stddev = 0.03;
    spec.samples_per_class = 250;
    spec.seed = seed;
    const double half = 0.5 * separation_in_std * spec.stddev;
    Eigen::VectorXd a(2), b(2);
    a << 0.5 - half, 0.5;
    b << 0.5 + half, 0.5;
    spec.centers = {a, b};
    spec.center_labels = {0, 1};
    return spec;
}

void BlobDatasetSpec::validate() const {
    if (num_classes < 1) throw ConfigError("blob dataset needs at least one class");
    if (centers.empty() || centers.size() != center_labels.size()) {
        throw ConfigError("blob dataset needs one label per cluster centre");
    }
    if (!(stddev > 0.0)) throw ConfigError("blob standard deviation must be > 0");
    if (samples_per_class < 1) throw ConfigError("blob dataset needs samples_per_class >= 1");
    const Index d = centers.front().size();
    for (std::size_t i = 0; i < centers.size(); ++i) {
        if (centers[i].size() != d) throw ConfigError("blob centres differ in dimension");
        if (center_labels[i] < 0 || center_labels[i] >= num_classes) throw ConfigError("blob centre label out of range");
        for (std::size_t j = 0; j < i; ++j) {
            if (centers[i] == centers[j]) throw ConfigError("blob centres must be pairwise distinct");
        }
    }
    for (int k = 0; k < num_classes; ++k) {
        if (std::find(center_labels.begin(), center_labels.end(), k) == center_labels.end()) {
            throw ConfigError("class " + std::to_string(k) + " has no blob centre");
        }
    }
}

BlobDataset generate_blobs(const BlobDatasetSpec& spec) {
    spec.validate();
    std::vector<std::vector<std::size_t>> clusters(static_cast<std::size_t>(spec.num_classes));
    for (std::size_t i = 0; i < spec.centers.size(); ++i) {
        clusters[static_cast<std::size_t>(spec.center_labels[i])].push_back(i);
    }
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const Index d = spec.centers.front().size();

    const std::size_t total = static_cast<std::size_t>(spec.samples_per_class) * static_cast<std::size_t>(spec.num_classes);
    Dataset all;
    all.reserve(total);
    for (std::size_t k = 0; k < total; ++k) {
        const int label = static_cast<int>(k % static_cast<std::size_t>(spec.num_classes));
        const std::size_t nth = k / static_cast<std::size_t>(spec.num_classes);
        const auto& owned = clusters[static_cast<std::size_t>(label)];
        const Eigen::VectorXd& center = spec.centers[owned[nth % owned.size()]];
        Vector p(d);
        for (Index i = 0; i < d; ++i) p[i] = std::clamp(center[i] + spec.stddev * noise(rng), 0.0, 1.0);
        all.push_back({Tensor(Shape{d}, std::move(p)), label});
    }
    BlobDataset out;
    const std::size_t split = total * 4 / 5;
    out.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(split));
    out.test.assign(all.begin() + static_cast<std::ptrdiff_t>(split), all.end());
    return out;
}

// ---------------------------------------------------------------------------
// Pixmaps

std::uint8_t quantize(double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
        std::ostringstream os;
        os << "pixel value " << v << " outside [0,1]";
        throw RangeError(os.str());
    }
    return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

std::string encode_ppm(const Tensor& pixels) {
    const Shape& s = pixels.shape();
    if (s.rank() != 3 || (s[0] != 1 && s[0] != 3)) {
        throw DimensionError("pixmaps need [1 x H x W] or [3 x H x W], got " + s.str());
    }
    const Index c = s[0], h = s[1], w = s[2];
    std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    out.reserve(out.size() + static_cast<std::size_t>(3 * h * w));
    for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x)
            for (Index ch = 0; ch < 3; ++ch) {
                const Index plane = c == 1 ? 0 : ch;
                out.push_back(static_cast<char>(quantize(pixels[(plane * h + y) * w + x])));
            }
    return out;
}

Tensor decode_ppm(const std::string& bytes) {
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (start == pos) throw FormatError("truncated pixmap header");
        return bytes.substr(start, pos - start);
    };
    if (token() != "P6") throw FormatError("not a binary P6 pixmap");
    Index w = 0, h = 0, maxval = 0;
    try {
        w = std::stol(token());
        h = std::stol(token());
        maxval = std::stol(token());
    } catch (const std::logic_error&) {
        throw FormatError("bad pixmap header");
    }
    if (w <= 0 || h <= 0 || maxval != 255) throw FormatError("unsupported pixmap geometry or maxval");
    ++pos;  // single whitespace byte before the raster
    if (bytes.size() - std::min(pos, bytes.size()) != static_cast<std::size_t>(3 * w * h)) {
        throw FormatError("pixmap raster size mismatch");
    }
    Tensor out(Shape{3, h, w});
    for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x)
            for (Index ch = 0; ch < 3; ++ch) {
                const auto byte = static_cast<unsigned char>(bytes[pos++]);
                out[(ch * h + y) * w + x] = static_cast<double>(byte) / 255.0;
            }
    return out;
}

void write_image(const std::filesystem::path& path, const Tensor& pixels) {
    write_file_atomic(path, encode_ppm(pixels));
}

Rgb heat_color(double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw RangeError("heatmap value outside [0,1]");
    // three equal segments: black->red, red->yellow, yellow->white
    const double t = 3.0 * v;
    double r = 0.0, g = 0.0, b = 0.0;
    if (t <= 1.0) {
        r = t;
    } else if (t <= 2.0) {
        r = 1.0;
        g = t - 1.0;
    } else {
        r = 1.0;
        g = 1.0;
        b = t - 2.0;
    }
    return Rgb{quantize(r), quantize(g), quantize(b)};
}

Tensor render_heatmap(const Grid& grid, int cell) {
    if (cell < 1) throw DomainError("heatmap cell size must be >= 1");
    const Index h = grid.rows() * cell, w = grid.cols() * cell;
    Tensor img(Shape{3, h, w});
    for (Index r = 0; r < grid.rows(); ++r)
        for (Index c = 0; c < grid.cols(); ++c) {
            const double v = grid(r, c);
            const Rgb color = std::isnan(v) ? kHeatmapSentinel : heat_color(v);
            const double rgb[3] = {color.r / 255.0, color.g / 255.0, color.b / 255.0};
            for (Index y = r * cell; y < (r + 1) * cell; ++y)
                for (Index x = c * cell; x < (c + 1) * cell; ++x)
                    for (Index ch = 0; ch < 3; ++ch) img[(ch * h + y) * w + x] = rgb[ch];
        }
    return img;
}

void write_heatmap(const std::filesystem::path& path, const Grid& grid, int cell) {
    write_image(path, render_heatmap(grid, cell));
}

Tensor tile_images(const std::vector<Tensor>& images, int rows, int cols, int gap, double background) {
    if (images.empty() || static_cast<int>(images.size()) != rows * cols) {
        throw DimensionError("tile_images needs rows * cols images");
    }
    const Shape& s = images.front().shape();
    if (s.rank() != 3) throw DimensionError("tile_images expects [C x H x W] images");
    for (const Tensor& t : images) require_same_shape(s, t.shape(), "tile_images");
    const Index c = s[0], h = s[1], w = s[2];
    const Index big_h = rows * h + (rows - 1) * gap, big_w = cols * w + (cols - 1) * gap;
    Tensor out = Tensor::constant(Shape{c, big_h, big_w}, background);
    for (int r = 0; r < rows; ++r)
        for (int q = 0; q < cols; ++q) {
            const Tensor& img = images[static_cast<std::size_t>(r * cols + q)];
            const Index oy = r * (h + gap), ox = q * (w + gap);
            for (Index ch = 0; ch < c; ++ch)
                for (Index y = 0; y < h; ++y)
                    for (Index x = 0; x < w; ++x) out[(ch * big_h + oy + y) * big_w + ox + x] = img[(ch * h + y) * w + x];
        }
    return out;
}

}  // namespace lst
