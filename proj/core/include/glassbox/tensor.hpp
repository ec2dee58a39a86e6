#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace glassbox {

// Dense row-major tensor of 64-bit floats.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> v);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor scalar(double v);
    static Tensor vector1d(std::vector<double> v);

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    // 2-D accessors (shape = [rows, cols]).
    double& at(std::size_t r, std::size_t c) { return values[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * shape[1] + c]; }

    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

// splitmix64; used to derive independent per-worker seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace glassbox
