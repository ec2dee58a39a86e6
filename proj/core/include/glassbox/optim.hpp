#pragma once

#include <cstdint>
#include <vector>

#include "glassbox/tensor.hpp"

namespace glassbox {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// First/second moment estimates for one parameter tensor.
struct AdamState {
    Tensor m;
    Tensor v;
    std::uint64_t step = 0;

    static AdamState for_param(const Tensor& param);
};

// Standard Adam with bias correction. Increments state.step.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg);

// Uniform in +-sqrt(6 / (fan_in + fan_out)). For conv kernels
// [out, in, width] fans include the receptive field; for dense [out, in]
// fan_in = in, fan_out = out; vectors use their length for both fans.
Tensor glorot_init(const std::vector<std::size_t>& shape, std::uint64_t seed);

}  // namespace glassbox
