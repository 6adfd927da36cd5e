#pragma once

#include "lst/errors.hpp"
#include "lst/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

namespace lst {

// f(x) = <w, x> + c. By the Riesz representation every linear functional on
// R^d has exactly this form with a unique w.
template <typename Scalar>
struct BasicLinearFunctional {
    using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    VectorType weights;
    Scalar offset = Scalar(0);

    template <typename Derived>
    Scalar operator()(const Eigen::MatrixBase<Derived>& x) const {
        return weights.dot(x) + offset;
    }
};

using LinearFunctional = BasicLinearFunctional<double>;

// Projects x_t onto the level set {x : f(x) = f(x_s)}, which for a linear
// functional is the affine hyperplane through x_s orthogonal to w.
template <typename Scalar, typename DerivedS, typename DerivedT>
typename BasicLinearFunctional<Scalar>::VectorType level_set_projection(const BasicLinearFunctional<Scalar>& f,
                                                                         const Eigen::MatrixBase<DerivedS>& x_s,
                                                                         const Eigen::MatrixBase<DerivedT>& x_t) {
    const Scalar wn2 = f.weights.squaredNorm();
    if (!(wn2 > Scalar(0))) throw DomainError("level set projection needs a nonzero functional");
    if (x_s.size() != f.weights.size() || x_t.size() != f.weights.size()) {
        throw DimensionError("level set projection: dimension mismatch");
    }
    const Scalar gap = f.weights.dot(x_t - x_s);
    return x_t - f.weights * (gap / wn2);
}

// Rayleigh quotient extreme: value and the unit vector attaining it.
template <typename Scalar>
struct RayleighExtreme {
    Scalar value;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> direction;
};

// Singular value decomposition of a square full-rank matrix by one-sided
// (Hestenes) Jacobi rotations. Singular values are sorted descending.
template <typename Scalar>
class SvdAnalysis {
public:
    using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    static constexpr int kMaxSweeps = 100;

    explicit SvdAnalysis(MatrixType a, Scalar tolerance = Scalar(1e-12)) : a_(std::move(a)) {
        if (a_.rows() != a_.cols() || a_.rows() == 0) {
            throw DimensionError("SVD analysis expects a nonempty square matrix");
        }
        if (!a_.allFinite()) throw NumericError("SVD analysis input has non-finite entries");
        decompose(tolerance);
    }

    const MatrixType& matrix() const noexcept { return a_; }
    const VectorType& singular_values() const noexcept { return sigma_; }
    const MatrixType& left_vectors() const noexcept { return u_; }
    const MatrixType& right_vectors() const noexcept { return v_; }
    int sweeps() const noexcept { return sweeps_; }

    Scalar sigma_max() const { return sigma_(0); }
    Scalar sigma_min() const { return sigma_(sigma_.size() - 1); }

    bool full_rank(Scalar rel_tol = Scalar(1e-10)) const { return sigma_min() > rel_tol * sigma_max(); }

    // Relative gap between neighbouring singular values exceeds tol at index i.
    bool simple(Eigen::Index i, Scalar tol = Scalar(1e-8)) const {
        const Scalar s = sigma_(i);
        auto separated = [&](Eigen::Index j) { return std::abs(s - sigma_(j)) > tol * sigma_max(); };
        return (i == 0 || separated(i - 1)) && (i + 1 == sigma_.size() || separated(i + 1));
    }

private:
    void decompose(Scalar tolerance) {
        const Eigen::Index n = a_.cols();
        MatrixType work = a_;
        MatrixType v = MatrixType::Identity(n, n);
        const Scalar frob2 = a_.squaredNorm();

        sweeps_ = 0;
        while (sweeps_ < kMaxSweeps) {
            // Off-diagonal mass of work^T work, measured before the sweep.
            Scalar off2 = Scalar(0);
            for (Eigen::Index p = 0; p < n; ++p)
                for (Eigen::Index q = p + 1; q < n; ++q) {
                    const Scalar g = work.col(p).dot(work.col(q));
                    off2 += g * g;
                }
            if (std::sqrt(off2) <= tolerance * frob2) break;
            ++sweeps_;
            for (Eigen::Index p = 0; p < n; ++p) {
                for (Eigen::Index q = p + 1; q < n; ++q) {
                    const Scalar alpha = work.col(p).squaredNorm();
                    const Scalar beta = work.col(q).squaredNorm();
                    const Scalar gamma = work.col(p).dot(work.col(q));
                    if (gamma == Scalar(0)) continue;
                    const Scalar zeta = (beta - alpha) / (Scalar(2) * gamma);
                    const Scalar t = (zeta >= 0 ? Scalar(1) : Scalar(-1)) / (std::abs(zeta) + std::sqrt(Scalar(1) + zeta * zeta));
                    const Scalar c = Scalar(1) / std::sqrt(Scalar(1) + t * t);
                    const Scalar s = c * t;
                    for (Eigen::Index r = 0; r < n; ++r) {
                        const Scalar wp = work(r, p), wq = work(r, q);
                        work(r, p) = c * wp - s * wq;
                        work(r, q) = s * wp + c * wq;
                        const Scalar vp = v(r, p), vq = v(r, q);
                        v(r, p) = c * vp - s * vq;
                        v(r, q) = s * vp + c * vq;
                    }
                }
            }
        }
        if (sweeps_ == kMaxSweeps) throw NumericError("Jacobi SVD did not converge");

        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        VectorType norms(n);
        for (Eigen::Index j = 0; j < n; ++j) norms(j) = work.col(j).norm();
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return norms(x) > norms(y); });

        sigma_.resize(n);
        u_.resize(n, n);
        v_.resize(n, n);
        for (Eigen::Index k = 0; k < n; ++k) {
            const Eigen::Index j = order[static_cast<std::size_t>(k)];
            sigma_(k) = norms(j);
            v_.col(k) = v.col(j);
            u_.col(k) = norms(j) > Scalar(0) ? VectorType(work.col(j) / norms(j)) : VectorType::Zero(n);
        }
    }

    MatrixType a_;
    VectorType sigma_;
    MatrixType u_;
    MatrixType v_;
    int sweeps_ = 0;
};

namespace detail {

template <typename Scalar>
void require_full_rank(const SvdAnalysis<Scalar>& s) {
    if (!s.full_rank()) {
        throw SingularityError("matrix is rank deficient (sigma_min <= 1e-10 sigma_max)");
    }
}

}  // namespace detail

// min_{v != 0} |Av|^2 / |v|^2 = sigma_min^2, attained by the last right-singular vector.
template <typename Scalar>
RayleighExtreme<Scalar> min_rayleigh(const SvdAnalysis<Scalar>& s) {
    detail::require_full_rank(s);
    const Eigen::Index last = s.singular_values().size() - 1;
    return {s.sigma_min() * s.sigma_min(), s.right_vectors().col(last).normalized()};
}

template <typename Scalar>
RayleighExtreme<Scalar> max_rayleigh(const SvdAnalysis<Scalar>& s) {
    detail::require_full_rank(s);
    return {s.sigma_max() * s.sigma_max(), s.right_vectors().col(0).normalized()};
}

template <typename Scalar>
Scalar condition_number(const SvdAnalysis<Scalar>& s) {
    detail::require_full_rank(s);
    return s.sigma_max() / s.sigma_min();
}

template <typename Derived>
typename Derived::Scalar rayleigh_quotient(const Eigen::MatrixBase<Derived>& a,
                                           const Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>& v) {
    return (a * v).squaredNorm() / v.squaredNorm();
}

// Two-class classifier whose class-0 logit is f(x) and class-1 logit is 0, so
// that class-0 confidence is the logistic of f and its level sets coincide
// with the level sets of f.
class LinearFunctionalClassifier final : public Classifier {
public:
    explicit LinearFunctionalClassifier(LinearFunctional f);

    const LinearFunctional& functional() const noexcept { return f_; }

    const Shape& input_shape() const override { return shape_; }
    int num_classes() const override { return 2; }
    std::vector<std::string> layer_names() const override { return {"logits"}; }
    std::string default_feature_layer() const override { return "logits"; }
    Var forward(Tape& tape, Var input, std::string_view layer = "logits") const override;

private:
    LinearFunctional f_;
    Shape shape_;
    Tensor weight_;  // [2 x d]
    Tensor bias_;    // [2]
};

}  // namespace lst
