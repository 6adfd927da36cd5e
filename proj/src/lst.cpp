#include "lst/lst.hpp"

#include "lst/csv.hpp"
#include "lst/errors.hpp"

#include <cmath>
#include <ostream>

namespace lst {

LSTConfig LSTConfig::imagenet_preset() { return LSTConfig{}; }

LSTConfig LSTConfig::cifar_preset() {
    LSTConfig c;
    c.max_iterations = 300;
    c.delta = 0.25;
    return c;
}

LSTConfig LSTConfig::reproduction() const {
    LSTConfig c = *this;
    c.early_stop = false;
    return c;
}

void LSTConfig::validate() const {
    if (max_iterations <= 0) throw ConfigError("LST needs max_iterations > 0");
    if (!(eta > 0.0)) throw ConfigError("LST needs eta > 0");
    if (!(epsilon >= 0.0)) throw ConfigError("LST needs epsilon >= 0");
    if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("LST needs 0 <= delta <= 1");
    if (!(ema_beta >= 0.0 && ema_beta < 1.0)) throw ConfigError("LST needs 0 <= beta < 1");
    if (!(clamp_low < clamp_high)) throw ConfigError("LST pixel clamp bounds are inverted");
}

std::string to_string(Termination t) {
    switch (t) {
        case Termination::Converged: return "converged";
        case Termination::MaxIterations: return "max-iterations";
        case Termination::ConfidenceGuard: return "confidence-guard";
    }
    return "unknown";
}

Tensor orthogonal_step(const Tensor& x, const Tensor& x_target, const Tensor& gradient, double eta) {
    require_same_shape(x.shape(), x_target.shape(), "orthogonal_step");
    require_same_shape(x.shape(), gradient.shape(), "orthogonal_step");
    const Vector& g = gradient.data();
    const double gn2 = g.squaredNorm();
    Vector dx = x_target.data() - x.data();
    if (std::sqrt(gn2) <= kDegenerateGradient) return Tensor(x.shape(), eta * dx);
    for (int pass = 0; pass < 2; ++pass) dx -= g * (g.dot(dx) / gn2);
    return Tensor(x.shape(), eta * dx);
}

Tensor parallel_step(const Tensor& x_par, const Tensor& gradient, double epsilon, double beta) {
    require_same_shape(x_par.shape(), gradient.shape(), "parallel_step");
    if (!(epsilon >= 0.0)) throw DomainError("parallel step needs epsilon >= 0");
    const Vector raw = (x_par.data() - epsilon * gradient.data()).cwiseMax(-epsilon).cwiseMin(epsilon);
    Vector next = beta * x_par.data() + (1.0 - beta) * raw;
    // A convex combination of two points of the box stays in the box; the clamp
    // only absorbs rounding.
    next = next.cwiseMax(-epsilon).cwiseMin(epsilon);
    return Tensor(x_par.shape(), std::move(next));
}

double regularity_check(const Classifier& model, const Tensor& x, int label) {
    return loss_gradient(model, x, label).gradient.data().norm();
}

LSTResult traverse(const Classifier& model, const Tensor& source, int label, const Tensor& target,
                   const LSTConfig& config) {
    config.validate();
    require_input_shape(model, source);
    require_input_shape(model, target);
    if (label < 0 || label >= model.num_classes()) throw IndexError("traversal label out of range");

    const double tolerance = 1e-3 * std::sqrt(static_cast<double>(source.numel()));
    auto clamp_box = [&](Vector v) {
        return Vector(v.cwiseMax(config.clamp_low).cwiseMin(config.clamp_high));
    };

    LSTResult result;
    Tensor x = source;
    Tensor x_par = Tensor::zeros(source.shape());
    LossGradient at_x = loss_gradient(model, x, label);
    result.source_confidence = at_x.probabilities[label];
    result.output_confidence = result.source_confidence;
    result.termination = Termination::MaxIterations;
    if (config.record_path) result.path.push_back(x);

    for (int it = 0; it < config.max_iterations; ++it) {
        if (config.early_stop && (target.data() - x.data()).norm() < tolerance) {
            result.termination = Termination::Converged;
            break;
        }
        const Tensor& g = at_x.gradient;
        const double gnorm = g.data().norm();
        LSTStep step;
        step.iteration = it;
        step.gradient_norm = gnorm;

        Tensor perp = orthogonal_step(x, target, g, config.eta);
        if (gnorm <= kDegenerateGradient) {
            step.degenerate_gradient = true;
            ++result.degenerate_steps;
        } else {
            x_par = parallel_step(x_par, g, config.epsilon, config.ema_beta);
        }
        step.orthogonality_residual = std::abs(perp.data().dot(g.data()));
        step.perp_norm = perp.data().norm();
        step.parallel_linf = x_par.numel() ? x_par.data().cwiseAbs().maxCoeff() : 0.0;

        Tensor x_new(x.shape(), clamp_box(x.data() + perp.data() + x_par.data()));
        LossGradient at_new = loss_gradient(model, x_new, label);
        const double conf_new = at_new.probabilities[label];
        if (!std::isfinite(conf_new)) throw NumericError("non-finite confidence during traversal");
        step.confidence = conf_new;
        step.distance_to_target = (target.data() - x_new.data()).norm();
        result.trace.push_back(step);

        if (result.source_confidence - conf_new > config.delta) {
            result.termination = Termination::ConfidenceGuard;
            break;
        }
        if (config.record_path) result.path.push_back(x_new);
        x = std::move(x_new);
        at_x = std::move(at_new);
        result.output_confidence = conf_new;
        ++result.iterations;
    }
    result.output = std::move(x);
    return result;
}

void write_trace_csv(std::ostream& os, const LSTResult& result) {
    CsvWriter csv(os, {"iteration", "confidence", "distance_to_target", "orthogonality_residual", "gradient_norm"});
    for (const LSTStep& s : result.trace) {
        csv.row(s.iteration, s.confidence, s.distance_to_target, s.orthogonality_residual, s.gradient_norm);
    }
}

}  // namespace lst
