#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace lst {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<Index> extents);
    explicit Shape(std::vector<Index> extents);

    std::size_t rank() const noexcept { return extents_.size(); }
    Index operator[](std::size_t axis) const { return extents_.at(axis); }
    Index numel() const noexcept;
    const std::vector<Index>& extents() const noexcept { return extents_; }

    bool operator==(const Shape& other) const = default;

    std::string str() const;

private:
    std::vector<Index> extents_;
};

// Dense row-major array of doubles. Shapes are row-major: for C x H x W the
// innermost (fastest varying) axis is W.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);  // zero-filled
    Tensor(Shape shape, Vector data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor constant(Shape shape, double value);
    static Tensor from(Shape shape, std::initializer_list<double> values);
    static Tensor vector(const Vector& values);

    const Shape& shape() const noexcept { return shape_; }
    Index numel() const noexcept { return data_.size(); }

    Vector& data() noexcept { return data_; }
    const Vector& data() const noexcept { return data_; }

    double& operator[](Index i) { return data_[i]; }
    double operator[](Index i) const { return data_[i]; }

    // Row-major 2-D views. For rank-1 tensors the view is a column vector.
    MatrixMap matrix();
    ConstMatrixMap matrix() const;
    MatrixMap matrix(Index rows, Index cols);
    ConstMatrixMap matrix(Index rows, Index cols) const;

    Tensor reshaped(Shape shape) const;

    bool all_finite() const { return data_.allFinite(); }

private:
    Shape shape_;
    Vector data_;
};

// Throws DimensionError with the given context when shapes differ.
void require_same_shape(const Shape& a, const Shape& b, const char* context);

}  // namespace lst
