#pragma once

#include "lst/autodiff.hpp"

#include <functional>

namespace lst {

// Builds a scalar loss on `tape` from the leaf holding the evaluation point.
using ScalarFunction = std::function<Var(Tape& tape, Var input)>;

struct GradientComparison {
    Vector analytic;
    Vector numeric;
    double max_relative_error = 0.0;
    Index worst_coordinate = -1;
};

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h against one reverse
// sweep. Relative error per coordinate uses max(|a|, |b|, 1e-8) as denominator.
GradientComparison compare_gradients(const ScalarFunction& fn, const Tensor& point, double step);

double finite_difference_check(const ScalarFunction& fn, const Tensor& point, double step);

// Value and reverse-mode gradient of fn at point.
std::pair<double, Tensor> value_and_gradient(const ScalarFunction& fn, const Tensor& point);

}  // namespace lst
