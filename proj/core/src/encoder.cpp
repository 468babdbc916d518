#include "odesig/encoder.hpp"

#include <cmath>
#include <string>

#include "odesig/errors.hpp"
#include "odesig/model.hpp"

namespace odesig {

void EncoderInput::validate() const {
    if (mask.size() != values.size() || tnorm.size() != values.size())
        throw DimensionError("EncoderInput: channel lengths differ");
    double prev = -1.0;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] != 0.0 && mask[i] != 1.0)
            throw ContractError("EncoderInput: mask must be binary");
        if (mask[i] == 1.0) {
            if (tnorm[i] <= prev)
                throw ContractError("EncoderInput: observed timestamps must be increasing");
            prev = tnorm[i];
        }
    }
}

Array2 positional_encoding(int T, int d_model) {
    if (d_model % 2 != 0)
        throw ConfigError("positional_encoding: d_model must be even, got " +
                          std::to_string(d_model));
    if (T < 1 || d_model < 2) throw ConfigError("positional_encoding: empty table requested");
    Array2 pe(T, d_model);
    for (int pos = 0; pos < T; ++pos) {
        for (int l = 0; 2 * l < d_model; ++l) {
            const double freq = std::pow(10000.0, 2.0 * l / d_model);
            pe.at(pos, 2 * l) = std::sin(pos / freq);
            pe.at(pos, 2 * l + 1) = std::cos(pos / freq);
        }
    }
    return pe;
}

Var short_term_encode(Tape& t, const EncoderInput& in, const EncoderLeaves& p) {
    in.validate();
    const int T = in.steps();
    const int F = static_cast<int>(p.conv_w.size());
    const int k = t.value(p.conv_w[0][0]).cols;
    if (T < k)
        throw ConfigError("short_term_encode: input too short, T=" + std::to_string(T) +
                          " < kernel " + std::to_string(k));

    const Var chan[3] = {t.constant(Array2::row(in.values)), t.constant(Array2::row(in.mask)),
                         t.constant(Array2::row(in.tnorm))};
    Var zero_bias = t.constant(Array2(1, 1));
    std::vector<Var> rows;
    rows.reserve(F);
    for (int f = 0; f < F; ++f) {
        Var acc = t.conv1d_same(chan[0], p.conv_w[f][0], p.conv_b[f]);
        acc = acc + t.conv1d_same(chan[1], p.conv_w[f][1], zero_bias);
        acc = acc + t.conv1d_same(chan[2], p.conv_w[f][2], zero_bias);
        rows.push_back(relu(acc));
    }
    return transpose(t.stack_rows(rows)); // T x F
}

Var long_term_encode(Tape& t, Var f, const EncoderLeaves& p, bool use_positional) {
    const Array2& fv = t.value(f);
    const int T = fv.rows;
    const int F = fv.cols;
    if (t.value(p.wq).rows != F)
        throw DimensionError("long_term_encode: features " + fv.shape_str() +
                             " vs projection " + t.value(p.wq).shape_str());
    Var x = f;
    if (use_positional) {
        x = f + t.constant(positional_encoding(T, F));
        forward_counters().positional_encodings.fetch_add(1, std::memory_order_relaxed);
    }
    const int dk = t.value(p.wq).cols;
    Var q = matmul(x, p.wq);
    Var k = matmul(x, p.wk);
    Var v = matmul(x, p.wv);
    Var scores = (1.0 / std::sqrt(static_cast<double>(dk))) * matmul(q, transpose(k));
    Var att = matmul(softmax_rows(scores), v); // T x d_k
    Var pool = t.constant(Array2(1, T, 1.0 / T));
    return matmul(pool, att); // 1 x d_k
}

namespace {

EncoderLeaves leaves_of(Tape& t, const EncoderParams& p) {
    EncoderLeaves l;
    l.conv_w.resize(p.conv_w.size());
    l.conv_b.reserve(p.conv_b.size());
    for (size_t f = 0; f < p.conv_w.size(); ++f) {
        for (int c = 0; c < 3; ++c) l.conv_w[f][c] = t.leaf(p.conv_w[f][c]);
        l.conv_b.push_back(t.leaf(p.conv_b[f]));
    }
    l.wq = t.leaf(p.wq);
    l.wk = t.leaf(p.wk);
    l.wv = t.leaf(p.wv);
    return l;
}

} // namespace

Array2 short_term_encode(const EncoderInput& in, const EncoderParams& p) {
    Tape t;
    return t.value(short_term_encode(t, in, leaves_of(t, p)));
}

Array2 long_term_encode(const Array2& f, const EncoderParams& p, bool use_positional) {
    Tape t;
    return t.value(long_term_encode(t, t.constant(f), leaves_of(t, p), use_positional));
}

} // namespace odesig
