#pragma once

#include "pigrid/errors.hpp"

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace pigrid {

// Dense row-major float64 tensor. Sized for desk-scale models; no striding,
// no broadcasting, no views.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
        : shape(std::move(s)),
          data(std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>()), fill) {}

    std::size_t size() const { return data.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }
    std::size_t rank() const { return shape.size(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    double& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    const double& at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    double& at3(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    const double& at3(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }

    double* row2(std::size_t i) { return data.data() + i * shape[1]; }
    const double* row2(std::size_t i) const { return data.data() + i * shape[1]; }

    double* row3(std::size_t i, std::size_t j) { return data.data() + (i * shape[1] + j) * shape[2]; }
    const double* row3(std::size_t i, std::size_t j) const {
        return data.data() + (i * shape[1] + j) * shape[2];
    }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    // NaN/Inf anywhere is a numeric failure
    void check_finite(const std::string& what) const {
        for (double v : data)
            if (!std::isfinite(v)) throw NumericError("non-finite value in " + what);
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

} // namespace pigrid
