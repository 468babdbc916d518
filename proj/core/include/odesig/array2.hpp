#pragma once

#include <initializer_list>
#include <string>
#include <vector>

#include "odesig/errors.hpp"

namespace odesig {

class Rng;

// Dense row-major matrix of 64-bit floats. Vectors are 1xN or Nx1 views of
// the same type.
struct Array2 {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Array2() = default;
    Array2(int r, int c, double fill = 0.0);

    static Array2 eye(int n);
    static Array2 from(std::initializer_list<std::initializer_list<double>> init);
    static Array2 row(const std::vector<double>& v);
    static Array2 col(const std::vector<double>& v);

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    size_t size() const { return data.size(); }
    bool same_shape(const Array2& o) const { return rows == o.rows && cols == o.cols; }
    bool all_finite() const;

    std::string shape_str() const;
};

// Plain (non-differentiable) helpers shared by initialization, oracles and IO.
Array2 matmul(const Array2& a, const Array2& b);
Array2 transpose(const Array2& a);
Array2 hadamard(const Array2& a, const Array2& b);
Array2 operator+(const Array2& a, const Array2& b);
Array2 operator-(const Array2& a, const Array2& b);
Array2 operator*(double s, const Array2& a);
double sum(const Array2& a);
double max_abs_diff(const Array2& a, const Array2& b);

// Entries drawn uniformly from [-scale, scale].
Array2 random_uniform(int rows, int cols, double scale, Rng& rng);

void require_same_shape(const Array2& a, const Array2& b, const char* op);

} // namespace odesig
