#include "lst/autodiff.hpp"

#include "lst/errors.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace lst {

const Tensor& Var::value() const { return tape_->value(id_); }
Tensor Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::leaf(Tensor value, bool requires_grad) {
    if (swept_) throw TapeError("cannot record on a tape that has already been swept");
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> parents, Backprop backprop) {
    if (swept_) throw TapeError("cannot record on a tape that has already been swept");
    Node n;
    n.value = std::move(value);
    for (std::size_t p : parents) {
        if (p >= nodes_.size()) throw TapeError("parent node recorded after child");
        n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
    }
    n.parents = std::move(parents);
    if (n.requires_grad) n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(const Var& v) const {
    if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size()) {
        throw TapeError("variable does not belong to this tape");
    }
}

void Tape::backward(Var root) {
    check_owned(root);
    if (swept_) throw TapeError("backward already ran on this tape; record a new forward pass");
    if (nodes_[root.id()].value.numel() != 1) {
        throw TapeError("backward requires a scalar root, got shape " + nodes_[root.id()].value.shape().str());
    }
    swept_ = true;
    if (!nodes_[root.id()].requires_grad) return;
    nodes_[root.id()].grad = Vector::Ones(1);
    for (std::size_t i = root.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || n.grad.size() == 0 || !n.backprop) continue;
        n.backprop(*this, i);
    }
}

Tensor Tape::grad(std::size_t id) const {
    const Node& n = nodes_.at(id);
    if (n.grad.size() == 0) return Tensor::zeros(n.value.shape());
    return Tensor(n.value.shape(), n.grad);
}

Vector* Tape::accumulator(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return nullptr;
    if (n.grad.size() == 0) n.grad = Vector::Zero(n.value.numel());
    return &n.grad;
}

namespace {

Tape& same_tape(const Var& a, const Var& b) {
    if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
        throw TapeError("operands live on different tapes");
    }
    return a.tape();
}

}  // namespace

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.shape(), b.shape(), "add");
    Tensor out(a.shape(), a.value().data() + b.value().data());
    return t.record(std::move(out), {a.id(), b.id()}, [ia = a.id(), ib = b.id()](Tape& tp, std::size_t self) {
        const Vector& up = tp.upstream(self);
        if (Vector* g = tp.accumulator(ia)) *g += up;
        if (Vector* g = tp.accumulator(ib)) *g += up;
    });
}

Var sub(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.shape(), b.shape(), "sub");
    Tensor out(a.shape(), a.value().data() - b.value().data());
    return t.record(std::move(out), {a.id(), b.id()}, [ia = a.id(), ib = b.id()](Tape& tp, std::size_t self) {
        const Vector& up = tp.upstream(self);
        if (Vector* g = tp.accumulator(ia)) *g += up;
        if (Vector* g = tp.accumulator(ib)) *g -= up;
    });
}

Var scale(Var a, double factor) {
    Tensor out(a.shape(), factor * a.value().data());
    return a.tape().record(std::move(out), {a.id()}, [ia = a.id(), factor](Tape& tp, std::size_t self) {
        if (Vector* g = tp.accumulator(ia)) *g += factor * tp.upstream(self);
    });
}

Var sum(Var a) {
    Tensor out(Shape{}, Vector::Constant(1, a.value().data().sum()));
    return a.tape().record(std::move(out), {a.id()}, [ia = a.id()](Tape& tp, std::size_t self) {
        if (Vector* g = tp.accumulator(ia)) g->array() += tp.upstream(self)[0];
    });
}

Var dot(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.shape(), b.shape(), "dot");
    Tensor out(Shape{}, Vector::Constant(1, a.value().data().dot(b.value().data())));
    return t.record(std::move(out), {a.id(), b.id()}, [ia = a.id(), ib = b.id()](Tape& tp, std::size_t self) {
        const double up = tp.upstream(self)[0];
        if (Vector* g = tp.accumulator(ia)) *g += up * tp.value(ib).data();
        if (Vector* g = tp.accumulator(ib)) *g += up * tp.value(ia).data();
    });
}

Var squared_norm(Var a) {
    Tensor out(Shape{}, Vector::Constant(1, a.value().data().squaredNorm()));
    return a.tape().record(std::move(out), {a.id()}, [ia = a.id()](Tape& tp, std::size_t self) {
        if (Vector* g = tp.accumulator(ia)) *g += (2.0 * tp.upstream(self)[0]) * tp.value(ia).data();
    });
}

Var reshape(Var a, Shape shape) {
    Tensor out = a.value().reshaped(std::move(shape));
    return a.tape().record(std::move(out), {a.id()}, [ia = a.id()](Tape& tp, std::size_t self) {
        if (Vector* g = tp.accumulator(ia)) *g += tp.upstream(self);
    });
}

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.rank() != 2 || (sb.rank() != 2 && sb.rank() != 1)) {
        throw DimensionError("matmul expects [m x k] * [k x n], got " + sa.str() + " * " + sb.str());
    }
    const Index m = sa[0], k = sa[1];
    const Index kb = sb[0];
    const Index n = sb.rank() == 2 ? sb[1] : 1;
    if (k != kb) throw DimensionError("matmul inner extents differ: " + sa.str() + " * " + sb.str());

    Shape out_shape = sb.rank() == 2 ? Shape{m, n} : Shape{m};
    Tensor out(out_shape);
    out.matrix(m, n).noalias() = a.value().matrix(m, k) * b.value().matrix(k, n);
    return t.record(std::move(out), {a.id(), b.id()}, [ia = a.id(), ib = b.id(), m, k, n](Tape& tp, std::size_t self) {
        ConstMatrixMap up(tp.upstream(self).data(), m, n);
        if (Vector* g = tp.accumulator(ia)) {
            MatrixMap(g->data(), m, k).noalias() += up * tp.value(ib).matrix(k, n).transpose();
        }
        if (Vector* g = tp.accumulator(ib)) {
            MatrixMap(g->data(), k, n).noalias() += tp.value(ia).matrix(m, k).transpose() * up;
        }
    });
}

Var linear(Var x, Var weight, Var bias) {
    Tape& t = same_tape(x, weight);
    same_tape(x, bias);
    const Shape& sw = weight.shape();
    if (sw.rank() != 2 || x.shape().rank() != 1 || bias.shape().rank() != 1) {
        throw DimensionError("linear expects weight [out x in], x [in], bias [out]");
    }
    const Index out_n = sw[0], in_n = sw[1];
    if (x.shape()[0] != in_n || bias.shape()[0] != out_n) {
        throw DimensionError("linear: weight " + sw.str() + " incompatible with x " + x.shape().str() +
                             " and bias " + bias.shape().str());
    }
    Vector y = bias.value().data();
    y.noalias() += weight.value().matrix(out_n, in_n) * x.value().data();
    Tensor out(Shape{out_n}, std::move(y));
    return t.record(std::move(out), {x.id(), weight.id(), bias.id()},
                    [ix = x.id(), iw = weight.id(), ib = bias.id(), out_n, in_n](Tape& tp, std::size_t self) {
                        const Vector& up = tp.upstream(self);
                        if (Vector* g = tp.accumulator(ix)) {
                            g->noalias() += tp.value(iw).matrix(out_n, in_n).transpose() * up;
                        }
                        if (Vector* g = tp.accumulator(iw)) {
                            MatrixMap(g->data(), out_n, in_n).noalias() += up * tp.value(ix).data().transpose();
                        }
                        if (Vector* g = tp.accumulator(ib)) *g += up;
                    });
}

Var relu(Var a) {
    Tensor out(a.shape(), a.value().data().cwiseMax(0.0));
    return a.tape().record(std::move(out), {a.id()}, [ia = a.id()](Tape& tp, std::size_t self) {
        if (Vector* g = tp.accumulator(ia)) {
            const Vector& x = tp.value(ia).data();
            *g += (x.array() > 0.0).select(tp.upstream(self), 0.0);
        }
    });
}

Var softplus(Var a) {
    const Vector& x = a.value().data();
    // log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
    Vector y = x.cwiseMax(0.0) + (-x.cwiseAbs()).array().exp().log1p().matrix();
    Tensor out(a.shape(), std::move(y));
    return a.tape().record(std::move(out), {a.id()}, [ia = a.id()](Tape& tp, std::size_t self) {
        if (Vector* g = tp.accumulator(ia)) {
            const Vector& x = tp.value(ia).data();
            // logistic(x), split by sign to avoid overflow
            Vector s(x.size());
            for (Index i = 0; i < x.size(); ++i) {
                s[i] = x[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-x[i])) : std::exp(x[i]) / (1.0 + std::exp(x[i]));
            }
            *g += tp.upstream(self).cwiseProduct(s);
        }
    });
}

namespace {

struct ConvGeometry {
    Index c_in, h, w, c_out, kh, kw, h_out, w_out;
    int stride, padding;

    Index patch() const { return c_in * kh * kw; }
    Index positions() const { return h_out * w_out; }
};

ConvGeometry conv_geometry(const Shape& x, const Shape& k, int stride, int padding) {
    if (x.rank() != 3 || k.rank() != 4) {
        throw DimensionError("conv2d expects x [C x H x W] and kernel [Co x Ci x kh x kw], got " + x.str() + ", " +
                             k.str());
    }
    if (stride <= 0 || padding < 0) throw DimensionError("conv2d requires stride > 0 and padding >= 0");
    if (x[0] != k[1]) throw DimensionError("conv2d channel mismatch: " + x.str() + " vs kernel " + k.str());
    ConvGeometry g{x[0], x[1], x[2], k[0], k[2], k[3], 0, 0, stride, padding};
    const Index span_h = g.h + 2 * padding - g.kh;
    const Index span_w = g.w + 2 * padding - g.kw;
    if (span_h < 0 || span_w < 0 || span_h % stride != 0 || span_w % stride != 0) {
        throw DimensionError("conv2d output extent is not integral for input " + x.str() + ", kernel " + k.str() +
                             ", stride " + std::to_string(stride) + ", padding " + std::to_string(padding));
    }
    g.h_out = span_h / stride + 1;
    g.w_out = span_w / stride + 1;
    return g;
}

// cols(r, p): r = (c*kh + i)*kw + j, p = oy*w_out + ox
Matrix im2col(const Vector& x, const ConvGeometry& g) {
    Matrix cols = Matrix::Zero(g.patch(), g.positions());
    for (Index c = 0; c < g.c_in; ++c) {
        for (Index i = 0; i < g.kh; ++i) {
            for (Index j = 0; j < g.kw; ++j) {
                const Index r = (c * g.kh + i) * g.kw + j;
                for (Index oy = 0; oy < g.h_out; ++oy) {
                    const Index iy = oy * g.stride + i - g.padding;
                    if (iy < 0 || iy >= g.h) continue;
                    for (Index ox = 0; ox < g.w_out; ++ox) {
                        const Index ix = ox * g.stride + j - g.padding;
                        if (ix < 0 || ix >= g.w) continue;
                        cols(r, oy * g.w_out + ox) = x[(c * g.h + iy) * g.w + ix];
                    }
                }
            }
        }
    }
    return cols;
}

void col2im_accumulate(const Matrix& cols, const ConvGeometry& g, Vector& dx) {
    for (Index c = 0; c < g.c_in; ++c) {
        for (Index i = 0; i < g.kh; ++i) {
            for (Index j = 0; j < g.kw; ++j) {
                const Index r = (c * g.kh + i) * g.kw + j;
                for (Index oy = 0; oy < g.h_out; ++oy) {
                    const Index iy = oy * g.stride + i - g.padding;
                    if (iy < 0 || iy >= g.h) continue;
                    for (Index ox = 0; ox < g.w_out; ++ox) {
                        const Index ix = ox * g.stride + j - g.padding;
                        if (ix < 0 || ix >= g.w) continue;
                        dx[(c * g.h + iy) * g.w + ix] += cols(r, oy * g.w_out + ox);
                    }
                }
            }
        }
    }
}

}  // namespace

Var conv2d(Var x, Var kernel, int stride, int padding) {
    Tape& t = same_tape(x, kernel);
    const ConvGeometry g = conv_geometry(x.shape(), kernel.shape(), stride, padding);
    auto cols = std::make_shared<const Matrix>(im2col(x.value().data(), g));

    Tensor out(Shape{g.c_out, g.h_out, g.w_out});
    out.matrix(g.c_out, g.positions()).noalias() = kernel.value().matrix(g.c_out, g.patch()) * (*cols);
    return t.record(std::move(out), {x.id(), kernel.id()}, [ix = x.id(), ik = kernel.id(), g, cols](Tape& tp, std::size_t self) {
        ConstMatrixMap up(tp.upstream(self).data(), g.c_out, g.positions());
        if (Vector* gk = tp.accumulator(ik)) {
            MatrixMap(gk->data(), g.c_out, g.patch()).noalias() += up * cols->transpose();
        }
        if (Vector* gx = tp.accumulator(ix)) {
            const Matrix dcols = tp.value(ik).matrix(g.c_out, g.patch()).transpose() * up;
            col2im_accumulate(dcols, g, *gx);
        }
    });
}

Var add_channel_bias(Var x, Var bias) {
    Tape& t = same_tape(x, bias);
    const Shape& s = x.shape();
    if (s.rank() != 3 || bias.shape().rank() != 1 || bias.shape()[0] != s[0]) {
        throw DimensionError("add_channel_bias expects x [C x H x W] and bias [C], got " + s.str() + ", " +
                             bias.shape().str());
    }
    const Index c = s[0], hw = s[1] * s[2];
    Tensor out = x.value();
    out.matrix(c, hw).colwise() += bias.value().data();
    return t.record(std::move(out), {x.id(), bias.id()}, [ix = x.id(), ib = bias.id(), c, hw](Tape& tp, std::size_t self) {
        const Vector& up = tp.upstream(self);
        if (Vector* g = tp.accumulator(ix)) *g += up;
        if (Vector* g = tp.accumulator(ib)) *g += ConstMatrixMap(up.data(), c, hw).rowwise().sum();
    });
}

namespace {

struct PoolGeometry {
    Index c, h, w, h_out, w_out;
    int window;
};

PoolGeometry pool_geometry(const Shape& s, int window) {
    if (s.rank() != 3) throw DimensionError("pooling expects [C x H x W], got " + s.str());
    if (window <= 0 || s[1] % window != 0 || s[2] % window != 0) {
        throw DimensionError("pool window " + std::to_string(window) + " does not tile " + s.str());
    }
    return {s[0], s[1], s[2], s[1] / window, s[2] / window, window};
}

}  // namespace

Var avg_pool2d(Var x, int window) {
    const PoolGeometry g = pool_geometry(x.shape(), window);
    const double inv = 1.0 / static_cast<double>(window * window);
    const Vector& in = x.value().data();
    Tensor out(Shape{g.c, g.h_out, g.w_out});
    for (Index c = 0; c < g.c; ++c)
        for (Index oy = 0; oy < g.h_out; ++oy)
            for (Index ox = 0; ox < g.w_out; ++ox) {
                double acc = 0.0;
                for (int i = 0; i < window; ++i)
                    for (int j = 0; j < window; ++j) acc += in[(c * g.h + oy * window + i) * g.w + ox * window + j];
                out[(c * g.h_out + oy) * g.w_out + ox] = acc * inv;
            }
    return x.tape().record(std::move(out), {x.id()}, [ix = x.id(), g, inv](Tape& tp, std::size_t self) {
        Vector* gx = tp.accumulator(ix);
        if (!gx) return;
        const Vector& up = tp.upstream(self);
        for (Index c = 0; c < g.c; ++c)
            for (Index oy = 0; oy < g.h_out; ++oy)
                for (Index ox = 0; ox < g.w_out; ++ox) {
                    const double v = up[(c * g.h_out + oy) * g.w_out + ox] * inv;
                    for (int i = 0; i < g.window; ++i)
                        for (int j = 0; j < g.window; ++j)
                            (*gx)[(c * g.h + oy * g.window + i) * g.w + ox * g.window + j] += v;
                }
    });
}

Var max_pool2d(Var x, int window) {
    const PoolGeometry g = pool_geometry(x.shape(), window);
    const Vector& in = x.value().data();
    Tensor out(Shape{g.c, g.h_out, g.w_out});
    auto argmax = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(out.numel()));
    for (Index c = 0; c < g.c; ++c)
        for (Index oy = 0; oy < g.h_out; ++oy)
            for (Index ox = 0; ox < g.w_out; ++ox) {
                Index best = (c * g.h + oy * window) * g.w + ox * window;
                for (int i = 0; i < window; ++i)
                    for (int j = 0; j < window; ++j) {
                        const Index k = (c * g.h + oy * window + i) * g.w + ox * window + j;
                        if (in[k] > in[best]) best = k;
                    }
                const Index o = (c * g.h_out + oy) * g.w_out + ox;
                out[o] = in[best];
                (*argmax)[static_cast<std::size_t>(o)] = best;
            }
    return x.tape().record(std::move(out), {x.id()}, [ix = x.id(), argmax](Tape& tp, std::size_t self) {
        Vector* gx = tp.accumulator(ix);
        if (!gx) return;
        const Vector& up = tp.upstream(self);
        for (std::size_t o = 0; o < argmax->size(); ++o) (*gx)[(*argmax)[o]] += up[static_cast<Index>(o)];
    });
}

Vector softmax(const Vector& logits) {
    const double top = logits.maxCoeff();
    Vector e = (logits.array() - top).exp().matrix();
    return e / e.sum();
}

Var softmax_cross_entropy(Var logits, int label) {
    const Shape& s = logits.shape();
    if (s.rank() != 1) throw DimensionError("softmax_cross_entropy expects rank-1 logits, got " + s.str());
    const Index n = s[0];
    if (label < 0 || label >= n) {
        throw IndexError("label " + std::to_string(label) + " out of range for " + std::to_string(n) + " classes");
    }
    const Vector& z = logits.value().data();
    const double top = z.maxCoeff();
    const Vector shifted = z.array() - top;
    const double log_norm = std::log(shifted.array().exp().sum());
    const double loss = log_norm - shifted[label];
    if (!std::isfinite(loss)) throw NumericError("non-finite cross-entropy");

    Tensor out(Shape{}, Vector::Constant(1, loss));
    return logits.tape().record(std::move(out), {logits.id()}, [iz = logits.id(), label](Tape& tp, std::size_t self) {
        Vector* g = tp.accumulator(iz);
        if (!g) return;
        Vector p = softmax(tp.value(iz).data());
        // p[label] - 1 loses everything below 1e-16 once p[label] rounds to 1;
        // the sum of the other probabilities keeps it.
        double rest = 0.0;
        for (Index j = 0; j < p.size(); ++j)
            if (j != label) rest += p[j];
        p[label] = -rest;
        *g += tp.upstream(self)[0] * p;
    });
}

}  // namespace lst
