#pragma once

#include "lst/autodiff.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lst {

// One labelled input. Pixels (or 2-D blob coordinates) live in [0,1].
struct Sample {
    Tensor input;
    int label = 0;
};

using Dataset = std::vector<Sample>;

enum class ArchitectureKind { Mlp, Cnn };
enum class Activation { Relu, Softplus };
enum class Pooling { Average, Max };

// Descriptor of one of the two reference families:
//   mlp: input [d] -> (linear, act) x hidden.size() -> linear -> logits
//   cnn: input [C x H x W] -> (conv3x3 pad 1, act, pool 2) x 2 -> flatten -> linear -> logits
struct Architecture {
    ArchitectureKind kind = ArchitectureKind::Mlp;
    Shape input_shape;
    std::vector<Index> widths;  // hidden widths (mlp) or conv channels (cnn)
    int num_classes = 2;
    Activation activation = Activation::Softplus;
    Pooling pooling = Pooling::Average;

    static Architecture mlp(Index input_dim, std::vector<Index> hidden, int num_classes);
    static Architecture cnn(Shape input_shape, std::vector<Index> channels, int num_classes);

    // Single-line text form, e.g. "mlp input=2 widths=64,64 classes=4 activation=softplus pooling=average".
    std::string describe() const;
    static Architecture parse(std::string_view text);

    std::vector<Shape> parameter_shapes() const;
    std::vector<std::string> layer_names() const;
    std::string default_feature_layer() const { return "penultimate"; }

    bool operator==(const Architecture&) const = default;
};

// A differentiable classifier f: input -> softmax over N classes. forward()
// records the computation on a tape and returns the activation of the named
// layer; "logits" is always available.
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual const Shape& input_shape() const = 0;
    virtual int num_classes() const = 0;
    virtual std::vector<std::string> layer_names() const = 0;
    virtual std::string default_feature_layer() const = 0;
    virtual Var forward(Tape& tape, Var input, std::string_view layer = "logits") const = 0;
};

class Model final : public Classifier {
public:
    Model(Architecture arch, std::vector<Tensor> params);

    // He-scaled Gaussian weights, zero biases.
    static Model initialize(const Architecture& arch, std::uint64_t seed);

    const Architecture& architecture() const noexcept { return arch_; }
    const std::vector<Tensor>& parameters() const noexcept { return params_; }
    std::vector<Tensor>& parameters() noexcept { return params_; }

    const Shape& input_shape() const override { return arch_.input_shape; }
    int num_classes() const override { return arch_.num_classes; }
    std::vector<std::string> layer_names() const override { return arch_.layer_names(); }
    std::string default_feature_layer() const override { return arch_.default_feature_layer(); }

    Var forward(Tape& tape, Var input, std::string_view layer = "logits") const override;
    // Forward pass with parameters supplied as tape variables (training).
    Var forward_with(Tape& tape, Var input, std::span<const Var> params, std::string_view layer = "logits") const;

private:
    Architecture arch_;
    std::vector<Tensor> params_;
};

// Softmax probabilities f(x).
Vector predict(const Classifier& model, const Tensor& x);
// argmax_j f^j(x), ties to the lowest index.
int predicted_class(const Classifier& model, const Tensor& x);
double confidence(const Classifier& model, const Tensor& x, int cls);
Tensor features(const Classifier& model, const Tensor& x, std::string_view layer);

struct LossGradient {
    double loss = 0.0;
    Tensor gradient;  // d CE(f(x), label) / dx
    Vector probabilities;
};

LossGradient loss_gradient(const Classifier& model, const Tensor& x, int label);

void require_input_shape(const Classifier& model, const Tensor& x);

double accuracy(const Classifier& model, const Dataset& data);

}  // namespace lst
