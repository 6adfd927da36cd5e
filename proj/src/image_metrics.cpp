#include "lst/image_metrics.hpp"

#include <numeric>

namespace lst {

double rmse(const Tensor& a, const Tensor& b) {
    require_same_shape(a.shape(), b.shape(), "rmse");
    return rmse(a.data(), b.data());
}

double l_inf(const Tensor& a, const Tensor& b) {
    require_same_shape(a.shape(), b.shape(), "l_inf");
    return l_inf(a.data(), b.data());
}

namespace {

using Image = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Image grey(const Tensor& t) {
    const Shape& s = t.shape();
    if (s.rank() == 1) return t.matrix(1, s[0]);
    if (s.rank() == 2) return t.matrix(s[0], s[1]);
    if (s.rank() != 3) throw DimensionError("ssim expects an image tensor, got " + s.str());
    const Index c = s[0], h = s[1], w = s[2];
    Image out = Image::Zero(h, w);
    for (Index ch = 0; ch < c; ++ch) out += t.data().segment(ch * h * w, h * w).reshaped<Eigen::RowMajor>(h, w);
    return out / static_cast<double>(c);
}

double ssim_term(double mu_a, double mu_b, double var_a, double var_b, double cov, double c1, double c2) {
    return ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, const SsimParams& params) {
    require_same_shape(a.shape(), b.shape(), "ssim");
    const Image x = grey(a);
    const Image y = grey(b);
    const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
    const double c2 = std::pow(params.k2 * params.dynamic_range, 2);
    const Index h = x.rows(), w = x.cols();
    const int win = params.window;

    if (h < win || w < win) {
        const double n = static_cast<double>(x.size());
        const double mu_a = x.sum() / n, mu_b = y.sum() / n;
        const double var_a = x.cwiseProduct(x).sum() / n - mu_a * mu_a;
        const double var_b = y.cwiseProduct(y).sum() / n - mu_b * mu_b;
        const double cov = x.cwiseProduct(y).sum() / n - mu_a * mu_b;
        return ssim_term(mu_a, mu_b, var_a, var_b, cov, c1, c2);
    }

    Image kernel(win, win);
    const double centre = 0.5 * (win - 1);
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double di = i - centre, dj = j - centre;
            kernel(i, j) = std::exp(-(di * di + dj * dj) / (2.0 * params.sigma * params.sigma));
        }
    kernel /= kernel.sum();

    const Image xx = x.cwiseProduct(x), yy = y.cwiseProduct(y), xy = x.cwiseProduct(y);
    double total = 0.0;
    for (Index r = 0; r + win <= h; ++r)
        for (Index c = 0; c + win <= w; ++c) {
            auto weighted = [&](const Image& m) { return kernel.cwiseProduct(m.block(r, c, win, win)).sum(); };
            const double mu_a = weighted(x), mu_b = weighted(y);
            const double var_a = weighted(xx) - mu_a * mu_a;
            const double var_b = weighted(yy) - mu_b * mu_b;
            const double cov = weighted(xy) - mu_a * mu_b;
            total += ssim_term(mu_a, mu_b, var_a, var_b, cov, c1, c2);
        }
    return total / static_cast<double>((h - win + 1) * (w - win + 1));
}

double feature_distance(const Classifier& model, const Tensor& a, const Tensor& b, const std::string& layer) {
    auto unit = [](Vector v) {
        const double n = v.norm();
        return n > 0.0 ? Vector(v / n) : v;
    };
    const Vector fa = unit(features(model, a, layer).data());
    const Vector fb = unit(features(model, b, layer).data());
    return (fa - fb).norm();
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd out;
    if (values.empty()) return out;
    const double n = static_cast<double>(values.size());
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / n);
    return out;
}

DistanceReport distance_report(const Classifier& model, const std::vector<Tensor>& outputs,
                               const std::vector<Tensor>& targets, const std::string& layer) {
    if (outputs.size() != targets.size()) throw DimensionError("distance report needs paired outputs and targets");
    std::vector<double> r, li, s, f;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        r.push_back(rmse(outputs[i], targets[i]));
        li.push_back(l_inf(outputs[i], targets[i]));
        s.push_back(ssim(outputs[i], targets[i]));
        f.push_back(feature_distance(model, outputs[i], targets[i], layer));
    }
    DistanceReport rep;
    rep.rmse = mean_std(r);
    rep.l_inf = mean_std(li);
    rep.ssim = mean_std(s);
    rep.feature_distance = mean_std(f);
    rep.pairs = outputs.size();
    rep.feature_layer = layer;
    return rep;
}

}  // namespace lst
