#include "lst/analytic.hpp"

namespace lst {

LinearFunctionalClassifier::LinearFunctionalClassifier(LinearFunctional f)
    : f_(std::move(f)), shape_{f_.weights.size()}, weight_(Shape{2, f_.weights.size()}), bias_(Shape{2}) {
    if (f_.weights.size() == 0) throw DimensionError("linear functional needs a nonempty weight vector");
    weight_.matrix().row(0) = f_.weights.transpose();
    bias_[0] = f_.offset;
}

Var LinearFunctionalClassifier::forward(Tape& tape, Var input, std::string_view layer) const {
    if (layer != "logits") throw LookupError("unknown layer '" + std::string(layer) + "'");
    require_same_shape(shape_, input.shape(), "linear functional input");
    return linear(input, tape.constant(weight_), tape.constant(bias_));
}

}  // namespace lst
