#include "egolab/array.hpp"

#include <cmath>
#include <sstream>

namespace egolab {

void Array::check_finite(const char* where) const {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw std::runtime_error(std::string("non-finite value in ") + where);
        }
    }
}

std::string Array::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void matmul_into(const Array& a, const Array& b, Array& out) {
    const int m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k)
        throw std::invalid_argument("matmul: inner extents " + a.shape_str() + " vs " +
                                    b.shape_str());
    out.shape = {m, n};
    out.v.assign(static_cast<size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        const double* arow = &a.v[static_cast<size_t>(i) * k];
        double* orow = &out.v[static_cast<size_t>(i) * n];
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = &b.v[static_cast<size_t>(p) * n];
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

}  // namespace egolab
