#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "g2dm/errors.hpp"

namespace g2dm {

// Dense row-major tensor of doubles. Rank 0 (scalar), 1 and 2 are the only
// ranks the engine produces.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> s)
        : shape(std::move(s)), values(count(shape), 0.0) {}

    Tensor(std::vector<std::size_t> s, std::vector<double> v)
        : shape(std::move(s)), values(std::move(v)) {
        if (values.size() != count(shape)) {
            throw DimensionError("tensor value count does not match shape");
        }
    }

    static Tensor scalar(double v) { return Tensor({}, {v}); }

    static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    std::size_t size() const { return values.size(); }
    std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 1 : shape[0]) : shape[1]; }

    double& at(std::size_t i, std::size_t j) { return values[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * shape[1] + j]; }

    double item() const {
        if (values.size() != 1) throw DimensionError("item() on non-scalar tensor");
        return values[0];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + ")";
    }
};

}  // namespace g2dm
