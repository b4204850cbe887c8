#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "hsir/errors.hpp"

namespace hsir {

/// Dense row-major tensor of doubles. Feature maps are rank-3 (C, H, W),
/// projection matrices rank-2, scalars rank-0 or rank-1 of size 1.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
        data_.assign(static_cast<size_t>(count(dims_)), 0.0);
    }

    Tensor(std::initializer_list<int> dims) : Tensor(std::vector<int>(dims)) {}

    static Tensor scalar(double v) {
        Tensor t({1});
        t.data_[0] = v;
        return t;
    }

    static Tensor full(std::vector<int> dims, double v) {
        Tensor t(std::move(dims));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    bool empty() const { return data_.empty(); }
    int rank() const { return static_cast<int>(dims_.size()); }
    int dim(int i) const { return dims_[static_cast<size_t>(i)]; }
    const std::vector<int>& dims() const { return dims_; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // (C, H, W) accessors
    double& at(int c, int y, int x) {
        return data_[static_cast<size_t>((static_cast<int64_t>(c) * dims_[1] + y) * dims_[2] + x)];
    }
    double at(int c, int y, int x) const {
        return data_[static_cast<size_t>((static_cast<int64_t>(c) * dims_[1] + y) * dims_[2] + x)];
    }

    // (rows, cols) accessors
    double& at2(int r, int c) {
        return data_[static_cast<size_t>(static_cast<int64_t>(r) * dims_[1] + c)];
    }
    double at2(int r, int c) const {
        return data_[static_cast<size_t>(static_cast<int64_t>(r) * dims_[1] + c)];
    }

    /// Same data, new shape; element count must match.
    Tensor reshaped(std::vector<int> dims) const {
        if (count(dims) != numel())
            throw ConfigError("reshape: element count mismatch " + shape_str() + " -> " +
                              shape_str(dims));
        Tensor t;
        t.dims_ = std::move(dims);
        t.data_ = data_;
        return t;
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const { return shape_str(dims_); }

    static std::string shape_str(const std::vector<int>& dims) {
        std::string s = "(";
        for (size_t i = 0; i < dims.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(dims[i]);
        }
        return s + ")";
    }

    static int64_t count(const std::vector<int>& dims) {
        int64_t n = 1;
        for (int d : dims) n *= d;
        return n;
    }

private:
    std::vector<int> dims_;
    std::vector<double> data_;
};

inline void require_shape(const Tensor& t, const std::vector<int>& dims, const char* what) {
    if (t.dims() != dims)
        throw ConfigError(std::string(what) + ": expected shape " + Tensor::shape_str(dims) +
                          ", got " + t.shape_str());
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw ConfigError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " +
                          b.shape_str());
}

}  // namespace hsir
