#pragma once

#include "lst/data_io.hpp"
#include "lst/model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace lst {

// lambda * x1 + (1 - lambda) * x2 as an Eigen expression.
template <typename A, typename B>
auto interpolate(const Eigen::MatrixBase<A>& x1, const Eigen::MatrixBase<B>& x2, double lambda) {
    return (lambda * x1 + (1.0 - lambda) * x2).eval();
}

struct PathSpec {
    Tensor x1;
    Tensor x2;
    int samples = 10;  // equispaced lambda values, both endpoints included

    void validate() const;
    double lambda(int i) const { return static_cast<double>(i) / static_cast<double>(samples - 1); }
};

// P(lambda) = lambda x1 + (1 - lambda) x2, lambda in [0, 1].
Tensor interpolate(const PathSpec& spec, double lambda);

struct PathProfile {
    std::vector<double> lambdas;
    std::vector<double> confidences;  // f^j(P(lambda_i))
    double min = 0.0;
    double mean = 0.0;
    double interior_min = 0.0;  // over samples strictly between the endpoints
};

PathProfile path_confidence_profile(const Classifier& model, int cls, const PathSpec& spec);

struct ExtremalityReport {
    std::vector<double> extrapolations;   // eps_ext values
    std::vector<double> confidences;      // f^y(x_s + (1 + eps_ext)(x_op - x_s))
    std::vector<double> drops;            // f^y(x_op) - confidence
    double output_confidence = 0.0;       // f^y(x_op)
    int clamped_points = 0;               // probes that needed pixel clamping
};

ExtremalityReport extremality_probe(const Classifier& model, int cls, const Tensor& source, const Tensor& output,
                                    const std::vector<double>& extrapolations, double clamp_low = 0.0,
                                    double clamp_high = 1.0);

struct TriangleSpec {
    Tensor source;
    Tensor blind1;
    Tensor blind2;
    int subdivisions = 10;

    int sample_count() const { return (subdivisions + 1) * (subdivisions + 2) / 2; }
};

struct TriangleSample {
    int i = 0, j = 0, k = 0;  // integer barycentric coordinates, i + j + k = subdivisions
    Eigen::Vector3d weights;  // (i, j, k) / subdivisions
    Tensor point;             // source + (j (blind1 - source) + k (blind2 - source)) / subdivisions
};

// Ordered by j, then k.
std::vector<TriangleSample> triangle_samples(const TriangleSpec& spec);

struct TriangleReport {
    double source_confidence = 0.0;  // p_src
    double mean_confidence = 0.0;
    std::vector<double> deltas;
    std::vector<double> fractions;   // share of samples with confidence >= p_src - delta
    std::vector<double> sample_confidences;
    // (n+1) x (n+1); cell (j, j + k) holds the confidence, other cells NaN.
    Grid confidence_grid;
};

inline const std::vector<double> kDefaultDeltas{0.0, 0.1, 0.2, 0.3};

TriangleReport triangle_report(const Classifier& model, int cls, const TriangleSpec& spec,
                               const std::vector<double>& deltas = kDefaultDeltas);

}  // namespace lst
