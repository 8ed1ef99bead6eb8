#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace egolab {

// Dense row-major array of doubles. Rank 0 (scalar), 1, or 2 is all the
// pipeline needs. Every op that produces an Array must leave it finite;
// check_finite() is the enforcement hook.
struct Array {
    std::vector<int> shape;
    std::vector<double> v;

    Array() = default;

    static Array scalar(double x) {
        Array a;
        a.shape = {};
        a.v = {x};
        return a;
    }
    static Array zeros(int n) {
        Array a;
        a.shape = {n};
        a.v.assign(static_cast<size_t>(n), 0.0);
        return a;
    }
    static Array zeros(int r, int c) {
        Array a;
        a.shape = {r, c};
        a.v.assign(static_cast<size_t>(r) * c, 0.0);
        return a;
    }
    static Array vec(std::vector<double> vals) {
        Array a;
        a.shape = {static_cast<int>(vals.size())};
        a.v = std::move(vals);
        return a;
    }
    static Array mat(int r, int c, std::vector<double> vals) {
        if (static_cast<size_t>(r) * c != vals.size())
            throw std::invalid_argument("Array::mat: size mismatch");
        Array a;
        a.shape = {r, c};
        a.v = std::move(vals);
        return a;
    }

    int rank() const { return static_cast<int>(shape.size()); }
    size_t size() const { return v.size(); }
    int rows() const { return rank() == 2 ? shape[0] : 1; }
    int cols() const { return rank() == 2 ? shape[1] : (rank() == 1 ? shape[0] : 1); }

    double& at(int i) { return v[static_cast<size_t>(i)]; }
    double at(int i) const { return v[static_cast<size_t>(i)]; }
    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols() + c]; }

    bool same_shape(const Array& o) const { return shape == o.shape; }

    // Throws if any entry is NaN or Inf.
    void check_finite(const char* where) const;

    std::string shape_str() const;
};

double dot(const double* a, const double* b, int n);

// out[r,c] = sum_k a[r,k] * b[k,c]
void matmul_into(const Array& a, const Array& b, Array& out);

}  // namespace egolab
