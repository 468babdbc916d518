#include <doctest.h>

#include <cmath>

#include "odesig/encoder.hpp"
#include "odesig/errors.hpp"
#include "odesig/model.hpp"
#include "odesig/rng.hpp"

using namespace odesig;

namespace {

EncoderParams make_params(int F, int k, int d_k, uint64_t seed) {
    Rng rng(seed);
    EncoderParams p;
    p.conv_w.resize(F);
    for (int f = 0; f < F; ++f) {
        for (int c = 0; c < 3; ++c) p.conv_w[f][c] = random_uniform(1, k, 0.5, rng);
        p.conv_b.push_back(random_uniform(1, 1, 0.2, rng));
    }
    p.wq = random_uniform(F, d_k, 0.5, rng);
    p.wk = random_uniform(F, d_k, 0.5, rng);
    p.wv = random_uniform(F, d_k, 0.5, rng);
    return p;
}

EncoderInput ramp_input(int T) {
    EncoderInput in;
    for (int j = 0; j < T; ++j) {
        in.values.push_back(0.5 * j - 1.0);
        in.mask.push_back(1.0);
        in.tnorm.push_back(static_cast<double>(j) / T);
    }
    return in;
}

} // namespace

TEST_SUITE("encoder") {

TEST_CASE("positional encoding closed-form values") {
    const Array2 pe = positional_encoding(4, 6);
    for (int l = 0; 2 * l < 6; ++l) {
        CHECK(pe.at(0, 2 * l) == 0.0);
        CHECK(pe.at(0, 2 * l + 1) == 1.0);
    }
    const Array2 pe2 = positional_encoding(2, 2);
    CHECK(pe2.at(1, 0) == doctest::Approx(0.841471).epsilon(1e-6));
    CHECK(pe2.at(1, 1) == doctest::Approx(0.540302).epsilon(1e-6));
}

TEST_CASE("positional encoding stays within [-1,1] and rejects odd widths") {
    const Array2 pe = positional_encoding(500, 64);
    for (double v : pe.data) {
        CHECK(v <= 1.0);
        CHECK(v >= -1.0);
    }
    CHECK_THROWS_AS(positional_encoding(10, 7), ConfigError);
}

TEST_CASE("short-term encoder: zero input maps to zero features") {
    EncoderParams p = make_params(3, 4, 2, 5);
    for (int f = 0; f < 3; ++f) p.conv_b[f] = Array2(1, 1);
    EncoderInput in;
    in.values.assign(8, 0.0);
    in.mask.assign(8, 0.0);
    in.tnorm.assign(8, 0.0);
    // all-zero channels, zero bias -> zero feature map regardless of kernels
    const Array2 f = short_term_encode(in, p);
    CHECK(f.rows == 8);
    CHECK(f.cols == 3);
    for (double v : f.data) CHECK(v == 0.0);
}

TEST_CASE("short-term encoder: negative bias is rectified away") {
    EncoderParams p = make_params(2, 4, 2, 6);
    for (int f = 0; f < 2; ++f) p.conv_b[f] = Array2(1, 1, -1.0);
    EncoderInput in;
    in.values.assign(6, 0.0);
    in.mask.assign(6, 0.0);
    in.tnorm.assign(6, 0.0);
    const Array2 f = short_term_encode(in, p);
    for (double v : f.data) CHECK(v == 0.0);
}

TEST_CASE("short-term encoder matches a per-position dot-product oracle") {
    const int T = 9, k = 4;
    EncoderParams p = make_params(1, k, 2, 42);
    EncoderInput in = ramp_input(T);
    const Array2 f = short_term_encode(in, p);
    REQUIRE(f.rows == T);
    REQUIRE(f.cols == 1);

    const double* chans[3] = {in.values.data(), in.mask.data(), in.tnorm.data()};
    const int lead = (k - 1) / 2;
    for (int j = 0; j < T; ++j) {
        double acc = p.conv_b[0].at(0, 0);
        for (int c = 0; c < 3; ++c)
            for (int m = 0; m < k; ++m) {
                const int idx = j - lead + m;
                if (idx >= 0 && idx < T) acc += p.conv_w[0][c].at(0, m) * chans[c][idx];
            }
        acc = acc > 0.0 ? acc : 0.0;
        CHECK(f.at(j, 0) == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("short-term encoder rejects too-short inputs") {
    EncoderParams p = make_params(2, 4, 2, 7);
    EncoderInput in = ramp_input(3); // T < kernel
    CHECK_THROWS_AS(short_term_encode(in, p), ConfigError);
}

TEST_CASE("long-term encoder: T=1 output equals the single value row") {
    EncoderParams p = make_params(4, 4, 3, 8);
    Array2 f(1, 4);
    Rng rng(3);
    for (double& v : f.data) v = rng.uniform(-1.0, 1.0);
    const Array2 h = long_term_encode(f, p, false); // softmax of a 1x1 score is 1
    const Array2 v = matmul(f, p.wv);
    CHECK(max_abs_diff(h, v) < 1e-12);
}

TEST_CASE("long-term encoder: identical feature rows collapse to one attention row") {
    EncoderParams p = make_params(4, 4, 3, 9);
    Array2 f(5, 4);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j) f.at(i, j) = 0.3 * j - 0.5;
    const Array2 pooled = long_term_encode(f, p, false);
    Array2 row(1, 4);
    for (int j = 0; j < 4; ++j) row.at(0, j) = f.at(0, j);
    const Array2 single = long_term_encode(row, p, false);
    CHECK(max_abs_diff(pooled, single) < 1e-12);
}

TEST_CASE("long-term encoder matches a hand-rolled attention oracle at T=2") {
    const int F = 2, dk = 2;
    EncoderParams p = make_params(F, 4, dk, 10);
    p.wq = Array2::from({{0.5, -0.25}, {1.0, 0.75}});
    p.wk = Array2::from({{-0.5, 0.25}, {0.25, 1.0}});
    p.wv = Array2::from({{1.5, 0.5}, {-0.5, 2.0}});
    const Array2 f = Array2::from({{0.2, -0.4}, {1.1, 0.3}});

    const Array2 q = matmul(f, p.wq);
    const Array2 k = matmul(f, p.wk);
    const Array2 v = matmul(f, p.wv);
    double scores[2][2];
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            scores[i][j] =
                (q.at(i, 0) * k.at(j, 0) + q.at(i, 1) * k.at(j, 1)) / std::sqrt(2.0);
    Array2 att(2, dk);
    for (int i = 0; i < 2; ++i) {
        const double e0 = std::exp(scores[i][0]);
        const double e1 = std::exp(scores[i][1]);
        const double w0 = e0 / (e0 + e1);
        const double w1 = e1 / (e0 + e1);
        for (int j = 0; j < dk; ++j) att.at(i, j) = w0 * v.at(0, j) + w1 * v.at(1, j);
    }
    Array2 expected(1, dk);
    for (int j = 0; j < dk; ++j) expected.at(0, j) = 0.5 * (att.at(0, j) + att.at(1, j));

    CHECK(max_abs_diff(long_term_encode(f, p, false), expected) < 1e-12);
}

TEST_CASE("projection linearity: scaling features and shrinking W_Q cancels") {
    Rng rng(12);
    const Array2 f = random_uniform(5, 4, 1.0, rng);
    const Array2 w = random_uniform(4, 3, 1.0, rng);
    const double c = 3.7;
    const Array2 q1 = matmul(f, w);
    const Array2 q2 = matmul(c * f, (1.0 / c) * w);
    CHECK(max_abs_diff(q1, q2) < 1e-12);
}

TEST_CASE("attention weights per query sum to one") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        const Array2 scores = random_uniform(6, 6, 4.0, rng);
        const Array2 s = softmax_rows(scores);
        for (int i = 0; i < s.rows; ++i) {
            double sum_row = 0.0;
            for (int j = 0; j < s.cols; ++j) sum_row += s.at(i, j);
            CHECK(std::fabs(sum_row - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("time permutation is a symmetry exactly when the positional encoder is off") {
    const int T = 6, F = 4, dk = 3;
    EncoderParams p = make_params(F, 4, dk, 14);
    Rng rng(15);
    const Array2 f = random_uniform(T, F, 1.0, rng);
    // seeded permutation
    std::vector<int> perm(T);
    for (int i = 0; i < T; ++i) perm[i] = i;
    for (int i = T - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);
    Array2 fp(T, F);
    for (int i = 0; i < T; ++i)
        for (int j = 0; j < F; ++j) fp.at(perm[i], j) = f.at(i, j);

    // mean pooling absorbs the row permutation, so pooled outputs must agree
    CHECK(max_abs_diff(long_term_encode(f, p, false), long_term_encode(fp, p, false)) < 1e-12);
    // with the positional encoder on, order matters
    CHECK(max_abs_diff(long_term_encode(f, p, true), long_term_encode(fp, p, true)) > 1e-6);
}

TEST_CASE("latent initial value is finite and deterministic") {
    EncoderParams p = make_params(4, 4, 3, 16);
    EncoderInput in = ramp_input(12);
    const Array2 f = short_term_encode(in, p);
    const Array2 h1 = long_term_encode(f, p, true);
    const Array2 h2 = long_term_encode(f, p, true);
    CHECK(h1.all_finite());
    CHECK(max_abs_diff(h1, h2) == 0.0);
}

} // TEST_SUITE
