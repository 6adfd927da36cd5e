#include "lst/model.hpp"

#include "lst/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace lst {

namespace {

std::string join(const std::vector<Index>& v, char sep) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? std::string(1, sep) : "") << v[i];
    return os.str();
}

std::vector<Index> split_extents(const std::string& s, char sep) {
    std::vector<Index> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        if (item.empty()) throw FormatError("empty extent in '" + s + "'");
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(item, &used);
        } catch (const std::exception&) {
            throw FormatError("bad extent '" + item + "'");
        }
        if (used != item.size() || v <= 0) throw FormatError("bad extent '" + item + "'");
        out.push_back(static_cast<Index>(v));
    }
    return out;
}

Var activate(Activation a, Var x) { return a == Activation::Relu ? relu(x) : softplus(x); }

Var pool(Pooling p, Var x) { return p == Pooling::Max ? max_pool2d(x, 2) : avg_pool2d(x, 2); }

}  // namespace

Architecture Architecture::mlp(Index input_dim, std::vector<Index> hidden, int num_classes) {
    Architecture a;
    a.kind = ArchitectureKind::Mlp;
    a.input_shape = Shape{input_dim};
    a.widths = std::move(hidden);
    a.num_classes = num_classes;
    return a;
}

Architecture Architecture::cnn(Shape input_shape, std::vector<Index> channels, int num_classes) {
    Architecture a;
    a.kind = ArchitectureKind::Cnn;
    a.input_shape = std::move(input_shape);
    a.widths = std::move(channels);
    a.num_classes = num_classes;
    return a;
}

std::string Architecture::describe() const {
    std::ostringstream os;
    os << (kind == ArchitectureKind::Mlp ? "mlp" : "cnn") << " input=" << join(input_shape.extents(), 'x')
       << " widths=" << join(widths, ',') << " classes=" << num_classes
       << " activation=" << (activation == Activation::Relu ? "relu" : "softplus")
       << " pooling=" << (pooling == Pooling::Max ? "max" : "average");
    return os.str();
}

Architecture Architecture::parse(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string kind;
    if (!(is >> kind) || (kind != "mlp" && kind != "cnn")) {
        throw FormatError("architecture must start with 'mlp' or 'cnn': '" + std::string(text) + "'");
    }
    std::map<std::string, std::string> kv;
    for (std::string tok; is >> tok;) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw FormatError("architecture token without '=': " + tok);
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    auto need = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw FormatError(std::string("architecture missing '") + key + "'");
        return it->second;
    };

    Architecture a;
    a.kind = kind == "mlp" ? ArchitectureKind::Mlp : ArchitectureKind::Cnn;
    a.input_shape = Shape(split_extents(need("input"), 'x'));
    a.widths = split_extents(need("widths"), ',');
    try {
        a.num_classes = std::stoi(need("classes"));
    } catch (const std::exception&) {
        throw FormatError("bad class count");
    }
    if (a.num_classes < 2) throw FormatError("architecture needs at least 2 classes");
    if (auto it = kv.find("activation"); it != kv.end()) {
        if (it->second == "relu") a.activation = Activation::Relu;
        else if (it->second == "softplus") a.activation = Activation::Softplus;
        else throw FormatError("unknown activation " + it->second);
    }
    if (auto it = kv.find("pooling"); it != kv.end()) {
        if (it->second == "max") a.pooling = Pooling::Max;
        else if (it->second == "average") a.pooling = Pooling::Average;
        else throw FormatError("unknown pooling " + it->second);
    }
    if (a.kind == ArchitectureKind::Mlp && a.input_shape.rank() != 1) throw FormatError("mlp input must be rank 1");
    if (a.kind == ArchitectureKind::Cnn) {
        if (a.input_shape.rank() != 3 || a.widths.size() != 2) {
            throw FormatError("cnn needs input CxHxW and exactly two conv widths");
        }
        if (a.input_shape[1] % 4 != 0 || a.input_shape[2] % 4 != 0) {
            throw FormatError("cnn spatial extents must be divisible by 4");
        }
    }
    return a;
}

std::vector<Shape> Architecture::parameter_shapes() const {
    std::vector<Shape> shapes;
    const Index k = num_classes;
    if (kind == ArchitectureKind::Mlp) {
        Index fan_in = input_shape[0];
        for (Index w : widths) {
            shapes.push_back(Shape{w, fan_in});
            shapes.push_back(Shape{w});
            fan_in = w;
        }
        shapes.push_back(Shape{k, fan_in});
        shapes.push_back(Shape{k});
    } else {
        const Index c = input_shape[0];
        const Index c1 = widths[0], c2 = widths[1];
        shapes.push_back(Shape{c1, c, 3, 3});
        shapes.push_back(Shape{c1});
        shapes.push_back(Shape{c2, c1, 3, 3});
        shapes.push_back(Shape{c2});
        const Index flat = c2 * (input_shape[1] / 4) * (input_shape[2] / 4);
        shapes.push_back(Shape{k, flat});
        shapes.push_back(Shape{k});
    }
    return shapes;
}

std::vector<std::string> Architecture::layer_names() const {
    std::vector<std::string> names;
    if (kind == ArchitectureKind::Mlp) {
        for (std::size_t i = 0; i < widths.size(); ++i) names.push_back("fc" + std::to_string(i + 1));
    } else {
        names = {"conv1", "conv2"};
    }
    names.push_back("penultimate");
    names.push_back("logits");
    return names;
}

Model::Model(Architecture arch, std::vector<Tensor> params) : arch_(std::move(arch)), params_(std::move(params)) {
    const auto shapes = arch_.parameter_shapes();
    if (shapes.size() != params_.size()) {
        throw DimensionError("architecture expects " + std::to_string(shapes.size()) + " parameter tensors, got " +
                             std::to_string(params_.size()));
    }
    for (std::size_t i = 0; i < shapes.size(); ++i) require_same_shape(shapes[i], params_[i].shape(), "model parameter");
}

Model Model::initialize(const Architecture& arch, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Tensor> params;
    for (const Shape& s : arch.parameter_shapes()) {
        Tensor t(s);
        if (s.rank() > 1) {
            const Index fan_in = s.numel() / s[0];
            std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
            for (Index i = 0; i < t.numel(); ++i) t[i] = dist(rng);
        }
        params.push_back(std::move(t));
    }
    return Model(arch, std::move(params));
}

Var Model::forward(Tape& tape, Var input, std::string_view layer) const {
    std::vector<Var> bound;
    bound.reserve(params_.size());
    for (const Tensor& p : params_) bound.push_back(tape.constant(p));
    return forward_with(tape, input, bound, layer);
}

Var Model::forward_with(Tape&, Var input, std::span<const Var> params, std::string_view layer) const {
    const auto names = layer_names();
    if (std::find(names.begin(), names.end(), layer) == names.end()) {
        throw LookupError("unknown layer '" + std::string(layer) + "'");
    }
    require_same_shape(arch_.input_shape, input.shape(), "model input");

    if (arch_.kind == ArchitectureKind::Mlp) {
        Var h = input;
        std::size_t p = 0;
        for (std::size_t i = 0; i < arch_.widths.size(); ++i, p += 2) {
            Var pre = linear(h, params[p], params[p + 1]);
            if (layer == names[i]) return pre;
            h = activate(arch_.activation, pre);
        }
        if (layer == "penultimate") return h;
        return linear(h, params[p], params[p + 1]);
    }

    Var c1 = add_channel_bias(conv2d(input, params[0], 1, 1), params[1]);
    if (layer == "conv1") return c1;
    Var h1 = pool(arch_.pooling, activate(arch_.activation, c1));
    Var c2 = add_channel_bias(conv2d(h1, params[2], 1, 1), params[3]);
    if (layer == "conv2") return c2;
    Var h2 = pool(arch_.pooling, activate(arch_.activation, c2));
    Var flat = reshape(h2, Shape{h2.value().numel()});
    if (layer == "penultimate") return flat;
    return linear(flat, params[4], params[5]);
}

void require_input_shape(const Classifier& model, const Tensor& x) {
    require_same_shape(model.input_shape(), x.shape(), "classifier input");
}

Vector predict(const Classifier& model, const Tensor& x) {
    require_input_shape(model, x);
    Tape tape;
    Var logits = model.forward(tape, tape.constant(x), "logits");
    return softmax(logits.value().data());
}

int predicted_class(const Classifier& model, const Tensor& x) {
    const Vector p = predict(model, x);
    Index best = 0;
    for (Index j = 1; j < p.size(); ++j)
        if (p[j] > p[best]) best = j;
    return static_cast<int>(best);
}

double confidence(const Classifier& model, const Tensor& x, int cls) {
    const Vector p = predict(model, x);
    if (cls < 0 || cls >= p.size()) throw IndexError("class " + std::to_string(cls) + " out of range");
    return p[cls];
}

Tensor features(const Classifier& model, const Tensor& x, std::string_view layer) {
    require_input_shape(model, x);
    Tape tape;
    return model.forward(tape, tape.constant(x), layer).value();
}

LossGradient loss_gradient(const Classifier& model, const Tensor& x, int label) {
    require_input_shape(model, x);
    Tape tape;
    Var in = tape.leaf(x);
    Var logits = model.forward(tape, in, "logits");
    Var loss = softmax_cross_entropy(logits, label);
    tape.backward(loss);
    LossGradient out;
    out.loss = loss.value()[0];
    out.gradient = in.grad();
    out.probabilities = softmax(logits.value().data());
    if (!out.probabilities.allFinite() || !out.gradient.all_finite()) {
        throw NumericError("non-finite model output or gradient");
    }
    return out;
}

double accuracy(const Classifier& model, const Dataset& data) {
    if (data.empty()) return 0.0;
    std::size_t hits = 0;
    for (const Sample& s : data) hits += predicted_class(model, s.input) == s.label ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace lst
