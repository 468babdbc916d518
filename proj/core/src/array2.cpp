#include "odesig/array2.hpp"

#include <cmath>
#include <cstdlib>

#include "odesig/rng.hpp"

namespace odesig {

Array2::Array2(int r, int c, double fill)
    : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
    if (r < 0 || c < 0) throw DimensionError("Array2: negative dimensions");
}

Array2 Array2::eye(int n) {
    Array2 m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Array2 Array2::from(std::initializer_list<std::initializer_list<double>> init) {
    Array2 m(static_cast<int>(init.size()),
             init.size() ? static_cast<int>(init.begin()->size()) : 0);
    int r = 0;
    for (const auto& row : init) {
        if (static_cast<int>(row.size()) != m.cols)
            throw DimensionError("Array2::from: ragged initializer");
        int c = 0;
        for (double v : row) m.at(r, c++) = v;
        ++r;
    }
    return m;
}

Array2 Array2::row(const std::vector<double>& v) {
    Array2 m(1, static_cast<int>(v.size()));
    m.data = v;
    return m;
}

Array2 Array2::col(const std::vector<double>& v) {
    Array2 m(static_cast<int>(v.size()), 1);
    m.data = v;
    return m;
}

bool Array2::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Array2::shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

void require_same_shape(const Array2& a, const Array2& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() +
                             " vs " + b.shape_str());
}

Array2 matmul(const Array2& a, const Array2& b) {
    if (a.cols != b.rows)
        throw DimensionError("matmul: incompatible shapes " + a.shape_str() + " * " +
                             b.shape_str());
    Array2 c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
        double* crow = &c.data[static_cast<size_t>(i) * c.cols];
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
            for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Array2 transpose(const Array2& a) {
    Array2 t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

Array2 hadamard(const Array2& a, const Array2& b) {
    require_same_shape(a, b, "hadamard");
    Array2 c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] *= b.data[i];
    return c;
}

Array2 operator+(const Array2& a, const Array2& b) {
    require_same_shape(a, b, "add");
    Array2 c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Array2 operator-(const Array2& a, const Array2& b) {
    require_same_shape(a, b, "sub");
    Array2 c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

Array2 operator*(double s, const Array2& a) {
    Array2 c = a;
    for (double& v : c.data) v *= s;
    return c;
}

double sum(const Array2& a) {
    double s = 0.0;
    for (double v : a.data) s += v;
    return s;
}

double max_abs_diff(const Array2& a, const Array2& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

Array2 random_uniform(int rows, int cols, double scale, Rng& rng) {
    Array2 m(rows, cols);
    for (double& v : m.data) v = rng.uniform(-scale, scale);
    return m;
}

} // namespace odesig
