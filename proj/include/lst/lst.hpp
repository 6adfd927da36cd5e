#pragma once

#include "lst/model.hpp"

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace lst {

// Hyperparameters of a level set traversal.
struct LSTConfig {
    int max_iterations = 400;        // m
    double eta = 1e-2;               // scale of the step orthogonal to the gradient
    double epsilon = 2e-3;           // l_inf budget / step of the parallel correction
    double delta = 0.2;              // tolerated drop of source-class confidence
    double ema_beta = 0.9;           // smoothing of the parallel correction; 0 = raw update
    double clamp_low = 0.0;          // pixel box; use +-infinity to disable
    double clamp_high = 1.0;
    bool early_stop = true;          // stop once |x_t - x| < 1e-3 sqrt(d)
    bool record_path = false;        // keep every accepted iterate in LSTResult::path

    // m = 400, eta = 1e-2, eps = 2e-3, delta = 0.2
    static LSTConfig imagenet_preset();
    // m = 300, eta = 1e-2, eps = 2e-3, delta = 0.25
    static LSTConfig cifar_preset();
    // Fixed m with no early exit.
    LSTConfig reproduction() const;

    void validate() const;
};

// Gradient norms at or below this floor are treated as a regularity failure.
inline constexpr double kDegenerateGradient = 1e-12;

enum class Termination { Converged, MaxIterations, ConfidenceGuard };

std::string to_string(Termination t);

struct LSTStep {
    int iteration = 0;
    double confidence = 0.0;            // f^y(x_new)
    double distance_to_target = 0.0;    // |x_t - x_new|_2
    double orthogonality_residual = 0.0;  // |<dx_perp, g>|
    double perp_norm = 0.0;             // |dx_perp|_2
    double gradient_norm = 0.0;         // |g|_2 at x
    double parallel_linf = 0.0;         // |x_par|_inf after the update
    bool degenerate_gradient = false;
};

struct LSTResult {
    Tensor output;
    Termination termination = Termination::MaxIterations;
    double source_confidence = 0.0;  // p_src
    double output_confidence = 0.0;
    int iterations = 0;              // accepted updates
    std::vector<LSTStep> trace;
    int degenerate_steps = 0;
    std::vector<Tensor> path;        // x_s then each accepted iterate, when recorded
};

// eta * (dx - g <dx, g> / |g|^2). The projection is applied twice so the
// result is orthogonal to g to working precision even when dx is nearly
// parallel to g.
Tensor orthogonal_step(const Tensor& x, const Tensor& x_target, const Tensor& gradient, double eta);

// u = clamp(x_par - eps g, -eps, eps); returns beta x_par + (1 - beta) u.
Tensor parallel_step(const Tensor& x_par, const Tensor& gradient, double epsilon, double beta);

// |grad_x CE(f(x), y)|_2
double regularity_check(const Classifier& model, const Tensor& x, int label);

LSTResult traverse(const Classifier& model, const Tensor& source, int label, const Tensor& target,
                   const LSTConfig& config);

// CSV: iteration,confidence,distance_to_target,orthogonality_residual,gradient_norm
void write_trace_csv(std::ostream& os, const LSTResult& result);

}  // namespace lst
