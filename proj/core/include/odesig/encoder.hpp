#pragma once

#include <array>
#include <vector>

#include "odesig/array2.hpp"
#include "odesig/tape.hpp"

namespace odesig {

// One ROI's raster as seen by the convolutional encoder: three channels of
// equal length T. Values are zero where unobserved, the mask flags observed
// slots, and tnorm carries timestamps normalized into [0, 1] so irregular
// spacing stays visible after rasterization.
struct EncoderInput {
    std::vector<double> values;
    std::vector<double> mask;
    std::vector<double> tnorm;

    int steps() const { return static_cast<int>(values.size()); }
    void validate() const;
};

// Learnable pieces of the two-stage encoder: F conv filters over the three
// input channels plus biases, and the query/key/value projections of the
// single attention head.
struct EncoderParams {
    std::vector<std::array<Array2, 3>> conv_w; // [filter][channel], each 1 x kernel
    std::vector<Array2> conv_b;                // [filter], each 1x1
    Array2 wq, wk, wv;                         // filters x d_k

    int filters() const { return static_cast<int>(conv_w.size()); }
    int kernel_size() const { return conv_w.empty() ? 0 : conv_w[0][0].cols; }
    int d_k() const { return wq.cols; }
};

// Var mirror of EncoderParams for building differentiable graphs.
struct EncoderLeaves {
    std::vector<std::array<Var, 3>> conv_w;
    std::vector<Var> conv_b;
    Var wq, wk, wv;
};

// Sinusoidal table, rows = positions 0..T-1, cols = d_model (must be even).
Array2 positional_encoding(int T, int d_model);

// Per-filter conv over the three channels, bias, ReLU; stacked to T x F.
Var short_term_encode(Tape& t, const EncoderInput& in, const EncoderLeaves& p);
Array2 short_term_encode(const EncoderInput& in, const EncoderParams& p);

// Adds the positional table (unless disabled), projects to Q/K/V, applies
// scaled dot-product attention and mean-pools the T rows into one vector.
Var long_term_encode(Tape& t, Var f, const EncoderLeaves& p, bool use_positional);
Array2 long_term_encode(const Array2& f, const EncoderParams& p, bool use_positional = true);

} // namespace odesig
