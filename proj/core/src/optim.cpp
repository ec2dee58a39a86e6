#include "glassbox/optim.hpp"

#include <cmath>
#include <random>

#include "glassbox/errors.hpp"

namespace glassbox {

AdamState AdamState::for_param(const Tensor& param) {
    AdamState s;
    s.m = Tensor::zeros(param.shape);
    s.v = Tensor::zeros(param.shape);
    return s;
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg) {
    if (!param.same_shape(grad) || !param.same_shape(state.m)) {
        throw DataError("ShapeMismatch", "adam_step: param/grad/state shapes differ");
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad.values[i];
        state.m.values[i] = cfg.beta1 * state.m.values[i] + (1.0 - cfg.beta1) * g;
        state.v.values[i] = cfg.beta2 * state.v.values[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = state.m.values[i] / bc1;
        const double v_hat = state.v.values[i] / bc2;
        param.values[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

Tensor glorot_init(const std::vector<std::size_t>& shape, std::uint64_t seed) {
    double fan_in = 1.0, fan_out = 1.0;
    if (shape.size() == 1) {
        fan_in = fan_out = static_cast<double>(shape[0]);
    } else if (shape.size() == 2) {
        fan_out = static_cast<double>(shape[0]);
        fan_in = static_cast<double>(shape[1]);
    } else if (shape.size() == 3) {
        fan_out = static_cast<double>(shape[0] * shape[2]);
        fan_in = static_cast<double>(shape[1] * shape[2]);
    } else {
        throw DataError("ShapeMismatch", "glorot_init: unsupported rank");
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor t = Tensor::zeros(shape);
    for (double& v : t.values) v = dist(rng);
    return t;
}

}  // namespace glassbox
