#include "lst/attacks.hpp"

#include "lst/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace lst {

AttackConfig AttackConfig::pgd_defaults(double radius, std::uint64_t seed) {
    AttackConfig c;
    c.radius = radius;
    c.step_size = radius / 4.0;
    c.steps = 20;
    c.random_start = true;
    c.seed = seed;
    return c;
}

void AttackConfig::validate() const {
    if (!(radius >= 0.0)) throw ConfigError("attack radius must be >= 0");
    if (!(step_size > 0.0)) throw ConfigError("attack step size must be > 0");
    if (steps < 0) throw ConfigError("attack steps must be >= 0");
    if (!(clamp_low < clamp_high)) throw ConfigError("attack pixel bounds are inverted");
}

Tensor project_to_boxes(const Tensor& v, const Tensor& center, double radius, double low, double high) {
    require_same_shape(v.shape(), center.shape(), "project_to_boxes");
    Tensor out(v.shape());
    for (Index i = 0; i < v.numel(); ++i) {
        const double c = center[i];
        double lo = std::max(c - radius, low);
        double hi = std::min(c + radius, high);
        // c +- radius rounds; pull the bounds inward until the distance test holds.
        while (c - lo > radius) lo = std::nextafter(lo, c);
        while (hi - c > radius) hi = std::nextafter(hi, c);
        if (lo > hi) lo = hi = std::clamp(c, low, high);
        out[i] = std::clamp(v[i], lo, hi);
    }
    return out;
}

namespace {

Vector sign(const Vector& g) {
    return g.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

struct Objective {
    double value;
    Tensor gradient;
};

using ObjectiveFn = std::function<Objective(const Tensor&)>;

// Sign-gradient steps in direction `direction` (+1 ascent, -1 descent),
// projected after every step; keeps the best iterate seen.
Tensor projected_sign_steps(const Tensor& x, const AttackConfig& config, double direction, const ObjectiveFn& objective,
                            double* best_value) {
    config.validate();
    Tensor current = x;
    if (config.random_start && config.radius > 0.0) {
        std::mt19937_64 rng(config.seed);
        std::uniform_real_distribution<double> u(-config.radius, config.radius);
        for (Index i = 0; i < current.numel(); ++i) current[i] += u(rng);
    }
    current = project_to_boxes(current, x, config.radius, config.clamp_low, config.clamp_high);

    Objective obj = objective(current);
    Tensor best = current;
    double best_val = obj.value;
    for (int s = 0; s < config.steps; ++s) {
        Tensor stepped(current.shape(), current.data() + (direction * config.step_size) * sign(obj.gradient.data()));
        current = project_to_boxes(stepped, x, config.radius, config.clamp_low, config.clamp_high);
        obj = objective(current);
        if (direction * (obj.value - best_val) > 0.0) {
            best_val = obj.value;
            best = current;
        }
    }
    if (best_value) *best_value = best_val;
    return best;
}

}  // namespace

Tensor fgsm(const Classifier& model, const Tensor& x, int label, double radius) {
    if (!(radius >= 0.0)) throw ConfigError("FGSM radius must be >= 0");
    const LossGradient lg = loss_gradient(model, x, label);
    Tensor stepped(x.shape(), x.data() + radius * sign(lg.gradient.data()));
    return project_to_boxes(stepped, x, radius, 0.0, 1.0);
}

Tensor pgd(const Classifier& model, const Tensor& x, int label, const AttackConfig& config) {
    require_input_shape(model, x);
    return projected_sign_steps(x, config, +1.0, [&](const Tensor& p) {
        LossGradient lg = loss_gradient(model, p, label);
        return Objective{lg.loss, std::move(lg.gradient)};
    }, nullptr);
}

AttackResult targeted_attack(const Classifier& model, const Tensor& x, int target_class, const AttackConfig& config) {
    require_input_shape(model, x);
    if (target_class < 0 || target_class >= model.num_classes()) throw IndexError("target class out of range");
    AttackResult r;
    r.input = projected_sign_steps(x, config, -1.0, [&](const Tensor& p) {
        LossGradient lg = loss_gradient(model, p, target_class);
        return Objective{lg.loss, std::move(lg.gradient)};
    }, &r.objective);
    r.target_confidence = confidence(model, r.input, target_class);
    return r;
}

AttackResult feature_targeted_attack(const Classifier& model, const Tensor& x, const Tensor& reference,
                                     const std::string& layer, const AttackConfig& config) {
    require_input_shape(model, x);
    require_input_shape(model, reference);
    const Tensor goal = features(model, reference, layer);
    AttackResult r;
    r.input = projected_sign_steps(x, config, -1.0, [&](const Tensor& p) {
        Tape tape;
        Var in = tape.leaf(p);
        Var dist2 = squared_norm(sub(model.forward(tape, in, layer), tape.constant(goal)));
        tape.backward(dist2);
        return Objective{std::sqrt(dist2.value()[0]), in.grad()};
    }, &r.objective);
    r.target_confidence = confidence(model, r.input, predicted_class(model, reference));
    return r;
}

}  // namespace lst
