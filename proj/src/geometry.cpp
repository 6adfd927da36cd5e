#include "lst/geometry.hpp"

#include "lst/errors.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace lst {

void PathSpec::validate() const {
    if (samples < 2) throw DomainError("a path needs at least 2 samples");
    require_same_shape(x1.shape(), x2.shape(), "path endpoints");
}

Tensor interpolate(const PathSpec& spec, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("interpolation parameter outside [0,1]");
    require_same_shape(spec.x1.shape(), spec.x2.shape(), "path endpoints");
    if (lambda == 1.0) return spec.x1;
    if (lambda == 0.0) return spec.x2;
    return Tensor(spec.x1.shape(), interpolate(spec.x1.data(), spec.x2.data(), lambda));
}

PathProfile path_confidence_profile(const Classifier& model, int cls, const PathSpec& spec) {
    spec.validate();
    PathProfile p;
    p.interior_min = std::numeric_limits<double>::infinity();
    for (int i = 0; i < spec.samples; ++i) {
        const double lambda = spec.lambda(i);
        const double c = confidence(model, interpolate(spec, lambda), cls);
        p.lambdas.push_back(lambda);
        p.confidences.push_back(c);
        if (i > 0 && i + 1 < spec.samples) p.interior_min = std::min(p.interior_min, c);
    }
    p.min = *std::min_element(p.confidences.begin(), p.confidences.end());
    p.mean = std::accumulate(p.confidences.begin(), p.confidences.end(), 0.0) / static_cast<double>(spec.samples);
    if (spec.samples == 2) p.interior_min = p.min;
    return p;
}

ExtremalityReport extremality_probe(const Classifier& model, int cls, const Tensor& source, const Tensor& output,
                                    const std::vector<double>& extrapolations, double clamp_low, double clamp_high) {
    require_same_shape(source.shape(), output.shape(), "extremality probe");
    ExtremalityReport r;
    r.output_confidence = confidence(model, output, cls);
    const Vector direction = output.data() - source.data();
    for (double e : extrapolations) {
        if (!(e >= 0.0)) throw DomainError("extrapolation factor must be >= 0");
        Vector raw = source.data() + (1.0 + e) * direction;
        if (e == 0.0) raw = output.data();
        Vector clamped = raw.cwiseMax(clamp_low).cwiseMin(clamp_high);
        if (clamped != raw) ++r.clamped_points;
        const double c = confidence(model, Tensor(source.shape(), std::move(clamped)), cls);
        r.extrapolations.push_back(e);
        r.confidences.push_back(c);
        r.drops.push_back(r.output_confidence - c);
    }
    return r;
}

std::vector<TriangleSample> triangle_samples(const TriangleSpec& spec) {
    if (spec.subdivisions < 1) throw DomainError("triangle subdivision must be >= 1");
    require_same_shape(spec.source.shape(), spec.blind1.shape(), "triangle vertices");
    require_same_shape(spec.source.shape(), spec.blind2.shape(), "triangle vertices");
    const int n = spec.subdivisions;
    const double inv = 1.0 / static_cast<double>(n);
    const Vector d1 = spec.blind1.data() - spec.source.data();
    const Vector d2 = spec.blind2.data() - spec.source.data();
    std::vector<TriangleSample> out;
    out.reserve(static_cast<std::size_t>(spec.sample_count()));
    for (int j = 0; j <= n; ++j) {
        for (int k = 0; j + k <= n; ++k) {
            TriangleSample s;
            s.i = n - j - k;
            s.j = j;
            s.k = k;
            s.weights = Eigen::Vector3d(s.i, s.j, s.k) * inv;
            // offsets from the source keep x_s and degenerate triangles exact
            s.point = Tensor(spec.source.shape(), spec.source.data() + (static_cast<double>(s.j) * d1 +
                                                                        static_cast<double>(s.k) * d2) *
                                                                           inv);
            out.push_back(std::move(s));
        }
    }
    return out;
}

TriangleReport triangle_report(const Classifier& model, int cls, const TriangleSpec& spec,
                               const std::vector<double>& deltas) {
    const auto samples = triangle_samples(spec);
    TriangleReport r;
    r.source_confidence = confidence(model, spec.source, cls);
    r.deltas = deltas;
    const int n = spec.subdivisions;
    r.confidence_grid = Grid::Constant(n + 1, n + 1, std::numeric_limits<double>::quiet_NaN());
    for (const TriangleSample& s : samples) {
        const double c = confidence(model, s.point, cls);
        r.sample_confidences.push_back(c);
        r.confidence_grid(s.j, s.j + s.k) = c;
    }
    r.mean_confidence = std::accumulate(r.sample_confidences.begin(), r.sample_confidences.end(), 0.0) /
                        static_cast<double>(samples.size());
    for (double d : deltas) {
        // closed superlevel set: ties with the threshold count
        const double threshold = r.source_confidence - d;
        const auto hits = std::count_if(r.sample_confidences.begin(), r.sample_confidences.end(),
                                        [&](double c) { return c >= threshold; });
        r.fractions.push_back(static_cast<double>(hits) / static_cast<double>(samples.size()));
    }
    return r;
}

}  // namespace lst
