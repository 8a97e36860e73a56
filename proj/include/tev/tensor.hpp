#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "tev/common.hpp"

namespace tev::nn {

/// Dense row-major tensor. float for training, double for gradient checks.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> values;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw ShapeError("tensor extents must be positive");
            n *= static_cast<size_t>(d);
        }
        values.assign(n, T{});
    }

    size_t size() const { return values.size(); }
    T* data() { return values.data(); }
    const T* data() const { return values.data(); }
    void fill(T v) { std::fill(values.begin(), values.end(), v); }
};

template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Parameter() = default;
    Parameter(std::string n, std::vector<int> shape)
        : name(std::move(n)), value(shape), grad(std::move(shape)) {}

    size_t size() const { return value.size(); }
    void zero_grad() { grad.fill(T{}); }
};

} // namespace tev::nn
