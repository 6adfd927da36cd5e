#include "lst/tensor.hpp"

#include "lst/errors.hpp"

#include <sstream>

namespace lst {

Shape::Shape(std::initializer_list<Index> extents) : Shape(std::vector<Index>(extents)) {}

Shape::Shape(std::vector<Index> extents) : extents_(std::move(extents)) {
    for (Index e : extents_) {
        if (e <= 0) throw DimensionError("shape extents must be positive, got " + str());
    }
}

Index Shape::numel() const noexcept {
    Index n = 1;
    for (Index e : extents_) n *= e;
    return extents_.empty() ? 1 : n;
}

std::string Shape::str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < extents_.size(); ++i) os << (i ? "x" : "") << extents_[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(Vector::Zero(shape_.numel())) {}

Tensor::Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.numel()) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_.str());
    }
}

Tensor Tensor::constant(Shape shape, double value) {
    Tensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
}

Tensor Tensor::from(Shape shape, std::initializer_list<double> values) {
    Vector v(static_cast<Index>(values.size()));
    Index i = 0;
    for (double x : values) v[i++] = x;
    return Tensor(std::move(shape), std::move(v));
}

Tensor Tensor::vector(const Vector& values) { return Tensor(Shape{values.size()}, values); }

MatrixMap Tensor::matrix() {
    if (shape_.rank() == 2) return matrix(shape_[0], shape_[1]);
    return matrix(numel(), 1);
}

ConstMatrixMap Tensor::matrix() const {
    if (shape_.rank() == 2) return matrix(shape_[0], shape_[1]);
    return matrix(numel(), 1);
}

MatrixMap Tensor::matrix(Index rows, Index cols) {
    if (rows * cols != numel()) throw DimensionError("matrix view does not cover tensor " + shape_.str());
    return MatrixMap(data_.data(), rows, cols);
}

ConstMatrixMap Tensor::matrix(Index rows, Index cols) const {
    if (rows * cols != numel()) throw DimensionError("matrix view does not cover tensor " + shape_.str());
    return ConstMatrixMap(data_.data(), rows, cols);
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape.numel() != numel()) {
        throw DimensionError("cannot reshape " + shape_.str() + " to " + shape.str());
    }
    return Tensor(std::move(shape), data_);
}

void require_same_shape(const Shape& a, const Shape& b, const char* context) {
    if (!(a == b)) throw DimensionError(std::string(context) + ": shape " + a.str() + " vs " + b.str());
}

}  // namespace lst
