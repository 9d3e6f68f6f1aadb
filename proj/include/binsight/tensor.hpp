#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

namespace binsight {

/// Dense row-major tensor of 64-bit reals.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s))
    {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        v.assign(n, 0.0);
    }

    std::size_t size() const { return v.size(); }
    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }
};

} // namespace binsight
