#pragma once

#include "lst/model.hpp"

#include <cstdint>
#include <string>

namespace lst {

struct AttackConfig {
    double radius = 0.1;       // l_inf budget around the clean input
    double step_size = 0.025;  // per-step signed move
    int steps = 20;
    bool random_start = true;
    std::uint64_t seed = 0;
    double clamp_low = 0.0;
    double clamp_high = 1.0;

    // step = radius / 4, 20 steps, random start.
    static AttackConfig pgd_defaults(double radius, std::uint64_t seed = 0);

    void validate() const;
};

struct AttackResult {
    Tensor input;              // perturbed point, inside both boxes
    double objective = 0.0;    // loss for (targeted) attacks, feature distance for feature attacks
    double target_confidence = 0.0;
};

// x + radius * sign(grad_x CE(f(x), y)), projected to the pixel box.
Tensor fgsm(const Classifier& model, const Tensor& x, int label, double radius);

// Untargeted projected sign-gradient ascent on CE(f(.), label). Returns the
// iterate with the largest loss.
Tensor pgd(const Classifier& model, const Tensor& x, int label, const AttackConfig& config);

// Projected sign-gradient descent on CE(f(.), target_class); returns the
// iterate with the smallest loss and its target-class confidence.
AttackResult targeted_attack(const Classifier& model, const Tensor& x, int target_class, const AttackConfig& config);

// Projected sign-gradient descent on |f_L(.) - f_L(reference)|; returns the
// iterate with the smallest feature distance.
AttackResult feature_targeted_attack(const Classifier& model, const Tensor& x, const Tensor& reference,
                                     const std::string& layer, const AttackConfig& config);

// Intersection of the l_inf ball around `center` and [low, high], exact in
// floating point: every returned coordinate satisfies |v - center| <= radius.
Tensor project_to_boxes(const Tensor& v, const Tensor& center, double radius, double low, double high);

}  // namespace lst
