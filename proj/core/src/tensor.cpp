#include "glassbox/tensor.hpp"

#include <cmath>

#include "glassbox/errors.hpp"

namespace glassbox {

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> v)
    : shape(std::move(s)), values(std::move(v)) {
    if (shape_product(shape) != values.size()) {
        throw DataError("ShapeMismatch", "tensor shape does not match value count");
    }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    Tensor t;
    t.values.assign(shape_product(shape), 0.0);
    t.shape = std::move(shape);
    return t;
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vector1d(std::vector<double> v) {
    Tensor t;
    t.shape = {v.size()};
    t.values = std::move(v);
    return t;
}

bool Tensor::all_finite() const {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace glassbox
