#include "glassbox/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "glassbox/errors.hpp"

namespace glassbox {

Var GradTape::push(Tensor value, std::function<void(GradTape&)> backprop) {
    Node n;
    n.grad = Tensor::zeros(value.shape);
    n.value = std::move(value);
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

Var GradTape::leaf(Tensor value) { return push(std::move(value), {}); }

Var GradTape::conv1d(Var x, Var w, Var b, std::size_t stride, std::size_t padding) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    if (xv.shape.size() != 2 || wv.shape.size() != 3 || wv.shape[1] != xv.shape[0] ||
        bv.shape.size() != 1 || bv.shape[0] != wv.shape[0]) {
        throw DataError("ShapeMismatch", "conv1d: inconsistent shapes");
    }
    const std::size_t c_in = xv.shape[0], len = xv.shape[1];
    const std::size_t c_out = wv.shape[0], width = wv.shape[2];
    if (len + 2 * padding < width) {
        throw DataError("ShapeMismatch", "conv1d: input shorter than kernel");
    }
    const std::size_t out_len = (len + 2 * padding - width) / stride + 1;

    Tensor out = Tensor::zeros({c_out, out_len});
    for (std::size_t co = 0; co < c_out; ++co) {
        for (std::size_t t = 0; t < out_len; ++t) {
            double acc = bv[co];
            for (std::size_t ci = 0; ci < c_in; ++ci) {
                const double* xrow = &xv.values[ci * len];
                const double* wrow = &wv.values[(co * c_in + ci) * width];
                const std::ptrdiff_t base =
                    static_cast<std::ptrdiff_t>(t * stride) - static_cast<std::ptrdiff_t>(padding);
                for (std::size_t k = 0; k < width; ++k) {
                    const std::ptrdiff_t pos = base + static_cast<std::ptrdiff_t>(k);
                    if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) {
                        acc += xrow[pos] * wrow[k];
                    }
                }
            }
            out.values[co * out_len + t] = acc;
        }
    }

    Var self = push(std::move(out), {});
    nodes_[self].backprop = [self, x, w, b, stride, padding, c_in, len, c_out, width,
                             out_len](GradTape& t) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = t.value(x);
        const Tensor& wv = t.value(w);
        Tensor& gx = t.grad_mut(x);
        Tensor& gw = t.grad_mut(w);
        Tensor& gb = t.grad_mut(b);
        for (std::size_t co = 0; co < c_out; ++co) {
            for (std::size_t ot = 0; ot < out_len; ++ot) {
                const double gy = g.values[co * out_len + ot];
                if (gy == 0.0) continue;
                gb[co] += gy;
                for (std::size_t ci = 0; ci < c_in; ++ci) {
                    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(ot * stride) -
                                                static_cast<std::ptrdiff_t>(padding);
                    for (std::size_t k = 0; k < width; ++k) {
                        const std::ptrdiff_t pos = base + static_cast<std::ptrdiff_t>(k);
                        if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) {
                            gx.values[ci * len + pos] += gy * wv.values[(co * c_in + ci) * width + k];
                            gw.values[(co * c_in + ci) * width + k] += gy * xv.values[ci * len + pos];
                        }
                    }
                }
            }
        }
    };
    return self;
}

Var GradTape::transposed_conv1d(Var y, Var w, Var b, std::size_t stride,
                                std::size_t padding, std::size_t out_len) {
    const Tensor& yv = value(y);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    if (yv.shape.size() != 2 || wv.shape.size() != 3 || wv.shape[0] != yv.shape[0] ||
        bv.shape.size() != 1 || bv.shape[0] != wv.shape[1]) {
        throw DataError("ShapeMismatch", "transposed_conv1d: inconsistent shapes");
    }
    const std::size_t c_out = yv.shape[0], in_len = yv.shape[1];
    const std::size_t c_in = wv.shape[1], width = wv.shape[2];

    Tensor out = Tensor::zeros({c_in, out_len});
    for (std::size_t ci = 0; ci < c_in; ++ci) {
        for (std::size_t p = 0; p < out_len; ++p) out.values[ci * out_len + p] = bv[ci];
    }
    for (std::size_t co = 0; co < c_out; ++co) {
        for (std::size_t t = 0; t < in_len; ++t) {
            const double yval = yv.values[co * in_len + t];
            if (yval == 0.0) continue;
            const std::ptrdiff_t base =
                static_cast<std::ptrdiff_t>(t * stride) - static_cast<std::ptrdiff_t>(padding);
            for (std::size_t ci = 0; ci < c_in; ++ci) {
                for (std::size_t k = 0; k < width; ++k) {
                    const std::ptrdiff_t pos = base + static_cast<std::ptrdiff_t>(k);
                    if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(out_len)) {
                        out.values[ci * out_len + pos] +=
                            yval * wv.values[(co * c_in + ci) * width + k];
                    }
                }
            }
        }
    }

    Var self = push(std::move(out), {});
    nodes_[self].backprop = [self, y, w, b, stride, padding, c_in, c_out, width, in_len,
                             out_len](GradTape& t) {
        const Tensor& g = t.grad(self);
        const Tensor& yv = t.value(y);
        const Tensor& wv = t.value(w);
        Tensor& gy = t.grad_mut(y);
        Tensor& gw = t.grad_mut(w);
        Tensor& gb = t.grad_mut(b);
        for (std::size_t ci = 0; ci < c_in; ++ci) {
            for (std::size_t p = 0; p < out_len; ++p) gb[ci] += g.values[ci * out_len + p];
        }
        for (std::size_t co = 0; co < c_out; ++co) {
            for (std::size_t t2 = 0; t2 < in_len; ++t2) {
                const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(t2 * stride) -
                                            static_cast<std::ptrdiff_t>(padding);
                for (std::size_t ci = 0; ci < c_in; ++ci) {
                    for (std::size_t k = 0; k < width; ++k) {
                        const std::ptrdiff_t pos = base + static_cast<std::ptrdiff_t>(k);
                        if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(out_len)) {
                            const double go = g.values[ci * out_len + pos];
                            gy.values[co * in_len + t2] +=
                                go * wv.values[(co * c_in + ci) * width + k];
                            gw.values[(co * c_in + ci) * width + k] +=
                                go * yv.values[co * in_len + t2];
                        }
                    }
                }
            }
        }
    };
    return self;
}

std::pair<Var, Switches> GradTape::maxpool(Var x, std::size_t window) {
    const Tensor& xv = value(x);
    if (xv.shape.size() != 2 || window == 0) {
        throw DataError("ShapeMismatch", "maxpool: expects [C, L] input and window > 0");
    }
    const std::size_t channels = xv.shape[0], len = xv.shape[1];
    const std::size_t pooled_len = (len + window - 1) / window;

    Switches sw;
    sw.channels = channels;
    sw.pooled_len = pooled_len;
    sw.input_len = len;
    sw.window = window;
    sw.argmax.resize(channels * pooled_len);

    Tensor out = Tensor::zeros({channels, pooled_len});
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t t = 0; t < pooled_len; ++t) {
            const std::size_t begin = t * window;
            const std::size_t end = std::min(begin + window, len);
            double best = -std::numeric_limits<double>::infinity();
            std::size_t best_pos = begin;
            for (std::size_t p = begin; p < end; ++p) {
                if (xv.values[c * len + p] > best) {
                    best = xv.values[c * len + p];
                    best_pos = p;
                }
            }
            out.values[c * pooled_len + t] = best;
            sw.argmax[c * pooled_len + t] = best_pos;
        }
    }

    Var self = push(std::move(out), {});
    const std::vector<std::size_t> argmax = sw.argmax;
    nodes_[self].backprop = [self, x, argmax, channels, pooled_len, len](GradTape& t) {
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad_mut(x);
        for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t p = 0; p < pooled_len; ++p) {
                gx.values[c * len + argmax[c * pooled_len + p]] += g.values[c * pooled_len + p];
            }
        }
    };
    return {self, sw};
}

Var GradTape::unpool(Var pooled, const Switches& sw) {
    const Tensor& pv = value(pooled);
    if (pv.shape.size() != 2 || pv.shape[0] != sw.channels || pv.shape[1] != sw.pooled_len) {
        throw DataError("ShapeMismatch", "unpool: pooled shape does not match switches");
    }
    for (std::size_t i = 0; i < sw.argmax.size(); ++i) {
        if (sw.argmax[i] >= sw.input_len) {
            throw DataError("SwitchOutOfRange", "unpool: switch index outside output");
        }
    }
    Tensor out = Tensor::zeros({sw.channels, sw.input_len});
    for (std::size_t c = 0; c < sw.channels; ++c) {
        for (std::size_t p = 0; p < sw.pooled_len; ++p) {
            out.values[c * sw.input_len + sw.argmax[c * sw.pooled_len + p]] =
                pv.values[c * sw.pooled_len + p];
        }
    }
    Var self = push(std::move(out), {});
    const Switches s2 = sw;
    nodes_[self].backprop = [self, pooled, s2](GradTape& t) {
        const Tensor& g = t.grad(self);
        Tensor& gp = t.grad_mut(pooled);
        for (std::size_t c = 0; c < s2.channels; ++c) {
            for (std::size_t p = 0; p < s2.pooled_len; ++p) {
                gp.values[c * s2.pooled_len + p] +=
                    g.values[c * s2.input_len + s2.argmax[c * s2.pooled_len + p]];
            }
        }
    };
    return self;
}

Var GradTape::dense(Var x, Var w, Var b) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    if (wv.shape.size() != 2 || wv.shape[1] != xv.size() || bv.shape.size() != 1 ||
        bv.shape[0] != wv.shape[0]) {
        throw DataError("ShapeMismatch", "dense: inconsistent shapes");
    }
    const std::size_t out_dim = wv.shape[0], in_dim = wv.shape[1];
    Tensor out = Tensor::zeros({out_dim});
    for (std::size_t o = 0; o < out_dim; ++o) {
        const double* wrow = &wv.values[o * in_dim];
        double acc = bv[o];
        for (std::size_t i = 0; i < in_dim; ++i) acc += wrow[i] * xv.values[i];
        out.values[o] = acc;
    }
    Var self = push(std::move(out), {});
    nodes_[self].backprop = [self, x, w, b, out_dim, in_dim](GradTape& t) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = t.value(x);
        const Tensor& wv = t.value(w);
        Tensor& gx = t.grad_mut(x);
        Tensor& gw = t.grad_mut(w);
        Tensor& gb = t.grad_mut(b);
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double go = g.values[o];
            if (go == 0.0) continue;
            gb[o] += go;
            const double* wrow = &wv.values[o * in_dim];
            double* gwrow = &gw.values[o * in_dim];
            for (std::size_t i = 0; i < in_dim; ++i) {
                gx.values[i] += go * wrow[i];
                gwrow[i] += go * xv.values[i];
            }
        }
    };
    return self;
}

Var GradTape::elu(Var x) {
    const Tensor& xv = value(x);
    Tensor out = xv;
    for (double& v : out.values) {
        if (v < 0.0) v = std::expm1(v);
    }
    Var self = push(std::move(out), {});
    nodes_[self].backprop = [self, x](GradTape& t) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = t.value(x);
        const Tensor& yv = t.value(self);
        Tensor& gx = t.grad_mut(x);
        for (std::size_t i = 0; i < xv.size(); ++i) {
            gx.values[i] += g.values[i] * (xv.values[i] >= 0.0 ? 1.0 : yv.values[i] + 1.0);
        }
    };
    return self;
}

Var GradTape::sigmoid(Var x) {
    const Tensor& xv = value(x);
    Tensor out = xv;
    for (double& v : out.values) v = 1.0 / (1.0 + std::exp(-v));
    Var self = push(std::move(out), {});
    nodes_[self].backprop = [self, x](GradTape& t) {
        const Tensor& g = t.grad(self);
        const Tensor& yv = t.value(self);
        Tensor& gx = t.grad_mut(x);
        for (std::size_t i = 0; i < yv.size(); ++i) {
            gx.values[i] += g.values[i] * yv.values[i] * (1.0 - yv.values[i]);
        }
    };
    return self;
}

Var GradTape::softmax(Var x) {
    const Tensor& xv = value(x);
    Tensor out = xv;
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : out.values) mx = std::max(mx, v);
    double total = 0.0;
    for (double& v : out.values) {
        v = std::exp(v - mx);
        total += v;
    }
    for (double& v : out.values) v /= total;
    Var self = push(std::move(out), {});
    nodes_[self].backprop = [self, x](GradTape& t) {
        const Tensor& g = t.grad(self);
        const Tensor& p = t.value(self);
        Tensor& gx = t.grad_mut(x);
        double dot = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) dot += g.values[i] * p.values[i];
        for (std::size_t i = 0; i < p.size(); ++i) {
            gx.values[i] += p.values[i] * (g.values[i] - dot);
        }
    };
    return self;
}

Var GradTape::add(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) throw DataError("ShapeMismatch", "add: shapes differ");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += bv.values[i];
    Var self = push(std::move(out), {});
    nodes_[self].backprop = [self, a, b](GradTape& t) {
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad_mut(a);
        Tensor& gb = t.grad_mut(b);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga.values[i] += g.values[i];
            gb.values[i] += g.values[i];
        }
    };
    return self;
}

Var GradTape::mul(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) throw DataError("ShapeMismatch", "mul: shapes differ");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= bv.values[i];
    Var self = push(std::move(out), {});
    nodes_[self].backprop = [self, a, b](GradTape& t) {
        const Tensor& g = t.grad(self);
        const Tensor& av = t.value(a);
        const Tensor& bv = t.value(b);
        Tensor& ga = t.grad_mut(a);
        Tensor& gb = t.grad_mut(b);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga.values[i] += g.values[i] * bv.values[i];
            gb.values[i] += g.values[i] * av.values[i];
        }
    };
    return self;
}

Var GradTape::scale(Var a, double c) {
    Tensor out = value(a);
    for (double& v : out.values) v *= c;
    Var self = push(std::move(out), {});
    nodes_[self].backprop = [self, a, c](GradTape& t) {
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga.values[i] += c * g.values[i];
    };
    return self;
}

Var GradTape::reshape(Var a, std::vector<std::size_t> shape) {
    const Tensor& av = value(a);
    if (shape_product(shape) != av.size()) {
        throw DataError("ShapeMismatch", "reshape: element count mismatch");
    }
    Tensor out;
    out.shape = std::move(shape);
    out.values = av.values;
    Var self = push(std::move(out), {});
    nodes_[self].backprop = [self, a](GradTape& t) {
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga.values[i] += g.values[i];
    };
    return self;
}

Var GradTape::sum(Var a) {
    double total = 0.0;
    for (double v : value(a).values) total += v;
    Var self = push(Tensor::scalar(total), {});
    nodes_[self].backprop = [self, a](GradTape& t) {
        const double g = t.grad(self).values[0];
        Tensor& ga = t.grad_mut(a);
        for (double& v : ga.values) v += g;
    };
    return self;
}

Var GradTape::sum_squares(Var a) {
    double total = 0.0;
    for (double v : value(a).values) total += v * v;
    Var self = push(Tensor::scalar(total), {});
    nodes_[self].backprop = [self, a](GradTape& t) {
        const double g = t.grad(self).values[0];
        const Tensor& av = t.value(a);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < av.size(); ++i) ga.values[i] += 2.0 * g * av.values[i];
    };
    return self;
}

Var GradTape::mean_squared_error(Var pred, const Tensor& target) {
    const Tensor& pv = value(pred);
    if (pv.size() != target.size()) {
        throw DataError("ShapeMismatch", "mean_squared_error: size mismatch");
    }
    const double n = static_cast<double>(pv.size());
    double total = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const double d = pv.values[i] - target.values[i];
        total += d * d;
    }
    Var self = push(Tensor::scalar(total / n), {});
    const Tensor tgt = target;
    nodes_[self].backprop = [self, pred, tgt, n](GradTape& t) {
        const double g = t.grad(self).values[0];
        const Tensor& pv = t.value(pred);
        Tensor& gp = t.grad_mut(pred);
        for (std::size_t i = 0; i < pv.size(); ++i) {
            gp.values[i] += g * 2.0 * (pv.values[i] - tgt.values[i]) / n;
        }
    };
    return self;
}

Var GradTape::negative_log_likelihood(Var probs, std::size_t label) {
    const Tensor& pv = value(probs);
    if (label >= pv.size()) {
        throw DataError("ShapeMismatch", "negative_log_likelihood: label out of range");
    }
    const double p = std::max(pv.values[label], 1e-12);
    Var self = push(Tensor::scalar(-std::log(p)), {});
    nodes_[self].backprop = [self, probs, label](GradTape& t) {
        const double g = t.grad(self).values[0];
        const Tensor& pv = t.value(probs);
        Tensor& gp = t.grad_mut(probs);
        gp.values[label] += g * (-1.0 / std::max(pv.values[label], 1e-12));
    };
    return self;
}

void GradTape::zero_grads() {
    for (Node& n : nodes_) {
        std::fill(n.grad.values.begin(), n.grad.values.end(), 0.0);
    }
}

void GradTape::backward(Var output) {
    if (value(output).size() != 1) {
        throw DataError("ShapeMismatch", "backward: output is not scalar");
    }
    backward(output, Tensor::scalar(1.0));
}

void GradTape::backward(Var output, const Tensor& seed) {
    if (!seed.same_shape(value(output))) {
        throw DataError("ShapeMismatch", "backward: seed shape mismatch");
    }
    grad_mut(output) = seed;
    for (std::size_t i = output + 1; i-- > 0;) {
        if (nodes_[i].backprop) nodes_[i].backprop(*this);
    }
}

}  // namespace glassbox
