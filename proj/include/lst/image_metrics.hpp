#pragma once

#include "lst/errors.hpp"
#include "lst/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace lst {

template <typename A, typename B>
double rmse(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    if (a.size() != b.size() || a.size() == 0) throw DimensionError("rmse: size mismatch");
    return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

template <typename A, typename B>
double l_inf(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    if (a.size() != b.size() || a.size() == 0) throw DimensionError("l_inf: size mismatch");
    return (a - b).cwiseAbs().maxCoeff();
}

double rmse(const Tensor& a, const Tensor& b);
double l_inf(const Tensor& a, const Tensor& b);

// Mean local SSIM of the grey-level images (channel mean for RGB) over an
// 11x11 Gaussian window with sigma 1.5, K1 = 0.01, K2 = 0.03, L = 1. Only
// windows fully inside the image are used. Images narrower than the window in
// either axis are compared with a single uniform window over the whole image.
// Rank-1 inputs are treated as 1 x n images.
struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

double ssim(const Tensor& a, const Tensor& b, const SsimParams& params = {});

// l2 distance between unit-normalised activations of `layer`. Stands in for a
// learned perceptual distance; a zero activation vector stays zero.
double feature_distance(const Classifier& model, const Tensor& a, const Tensor& b, const std::string& layer);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};

MeanStd mean_std(const std::vector<double>& values);

// Distances between pairs (LST output, target). feature_distance replaces
// LPIPS and is labelled as such in every report.
struct DistanceReport {
    MeanStd rmse;
    MeanStd l_inf;
    MeanStd ssim;
    MeanStd feature_distance;
    std::size_t pairs = 0;
    std::string feature_layer;
};

DistanceReport distance_report(const Classifier& model, const std::vector<Tensor>& outputs,
                               const std::vector<Tensor>& targets, const std::string& layer);

}  // namespace lst
