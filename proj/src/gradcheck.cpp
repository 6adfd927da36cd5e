#include "lst/gradcheck.hpp"

#include "lst/errors.hpp"

#include <algorithm>
#include <cmath>

namespace lst {

namespace {

double evaluate(const ScalarFunction& fn, const Tensor& point) {
    Tape tape;
    Var x = tape.constant(point);
    const Var out = fn(tape, x);
    if (out.value().numel() != 1) throw TapeError("finite-difference check needs a scalar function");
    const double v = out.value()[0];
    if (!std::isfinite(v)) throw NumericError("function value is not finite");
    return v;
}

}  // namespace

std::pair<double, Tensor> value_and_gradient(const ScalarFunction& fn, const Tensor& point) {
    Tape tape;
    Var x = tape.leaf(point);
    Var out = fn(tape, x);
    tape.backward(out);
    const double v = out.value()[0];
    if (!std::isfinite(v)) throw NumericError("function value is not finite");
    return {v, x.grad()};
}

GradientComparison compare_gradients(const ScalarFunction& fn, const Tensor& point, double step) {
    if (!(step > 0.0)) throw DomainError("finite-difference step must be positive");
    GradientComparison result;
    result.analytic = value_and_gradient(fn, point).second.data();
    result.numeric.resize(point.numel());

    Tensor probe = point;
    for (Index i = 0; i < point.numel(); ++i) {
        const double x0 = point[i];
        probe[i] = x0 + step;
        const double up = evaluate(fn, probe);
        probe[i] = x0 - step;
        const double down = evaluate(fn, probe);
        probe[i] = x0;
        result.numeric[i] = (up - down) / (2.0 * step);

        const double a = result.analytic[i];
        const double b = result.numeric[i];
        const double rel = std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
        if (result.worst_coordinate < 0 || rel > result.max_relative_error) {
            result.max_relative_error = rel;
            result.worst_coordinate = i;
        }
    }
    return result;
}

double finite_difference_check(const ScalarFunction& fn, const Tensor& point, double step) {
    return compare_gradients(fn, point, step).max_relative_error;
}

}  // namespace lst
