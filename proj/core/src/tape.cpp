#include "odesig/tape.hpp"

#include <cmath>
#include <string>

namespace odesig {

// ---------------------------------------------------------------------------
// shared forward kernels

Array2 softmax_rows(const Array2& m) {
    Array2 out(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i) {
        double mx = m.at(i, 0);
        for (int j = 1; j < m.cols; ++j) mx = std::max(mx, m.at(i, j));
        double denom = 0.0;
        for (int j = 0; j < m.cols; ++j) {
            const double e = std::exp(m.at(i, j) - mx);
            out.at(i, j) = e;
            denom += e;
        }
        for (int j = 0; j < m.cols; ++j) out.at(i, j) /= denom;
    }
    return out;
}

// Cross-correlation with zero padding chosen so the output keeps length T.
// The window for output step j spans x[j - (k-1)/2 .. j + k/2]; for even k
// the extra tap trails.
Array2 conv1d_same(const Array2& x, const Array2& kernel, double bias) {
    if (x.rows != 1 || kernel.rows != 1)
        throw DimensionError("conv1d_same: expects row vectors, got " + x.shape_str() +
                             " and " + kernel.shape_str());
    const int T = x.cols;
    const int k = kernel.cols;
    if (k < 1 || T < 1) throw ConfigError("conv1d_same: empty kernel or signal");
    if (k > 2 * T + 1)
        throw ConfigError("conv1d_same: kernel size " + std::to_string(k) +
                          " exceeds padded input length for T=" + std::to_string(T));
    const int lead = (k - 1) / 2;
    Array2 y(1, T);
    for (int j = 0; j < T; ++j) {
        double acc = bias;
        for (int m = 0; m < k; ++m) {
            const int idx = j - lead + m;
            if (idx >= 0 && idx < T) acc += kernel.at(0, m) * x.at(0, idx);
        }
        y.at(0, j) = acc;
    }
    return y;
}

Array2 row_cosine(const Array2& h) {
    const int n = h.rows;
    std::vector<double> norm(n);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < h.cols; ++j) s += h.at(i, j) * h.at(i, j);
        norm[i] = std::sqrt(s);
        if (norm[i] == 0.0)
            throw ContractError("row_cosine: zero-norm embedding at row " + std::to_string(i));
    }
    Array2 a(n, n);
    for (int i = 0; i < n; ++i) {
        a.at(i, i) = 1.0;
        for (int j = i + 1; j < n; ++j) {
            double dot = 0.0;
            for (int c = 0; c < h.cols; ++c) dot += h.at(i, c) * h.at(j, c);
            const double v = dot / (norm[i] * norm[j]);
            a.at(i, j) = v;
            a.at(j, i) = v;
        }
    }
    return a;
}

// ---------------------------------------------------------------------------
// tape

Var Tape::push(Op op, Array2 value, std::vector<int> parents, double aux) {
    TapeNode n;
    n.op = op;
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.aux = aux;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::check_owned(Var v) const {
    if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
        throw ContractError("Tape: variable does not belong to this tape");
}

Var Tape::leaf(Array2 v) { return push(Op::Leaf, std::move(v), {}); }
Var Tape::constant(Array2 v) { return push(Op::Const, std::move(v), {}); }

Var Tape::add(Var a, Var b) {
    check_owned(a);
    check_owned(b);
    return push(Op::Add, value(a) + value(b), {a.id, b.id});
}

Var Tape::sub(Var a, Var b) {
    check_owned(a);
    check_owned(b);
    return push(Op::Sub, value(a) - value(b), {a.id, b.id});
}

Var Tape::mul(Var a, Var b) {
    check_owned(a);
    check_owned(b);
    return push(Op::Mul, hadamard(value(a), value(b)), {a.id, b.id});
}

Var Tape::mul_scalar(Var a, double s) {
    check_owned(a);
    return push(Op::MulScalar, s * value(a), {a.id}, s);
}

Var Tape::add_scalar(Var m, Var s) {
    check_owned(m);
    check_owned(s);
    if (value(s).rows != 1 || value(s).cols != 1)
        throw DimensionError("add_scalar: addend must be 1x1, got " + value(s).shape_str());
    Array2 out = value(m);
    const double sv = value(s).at(0, 0);
    for (double& x : out.data) x += sv;
    return push(Op::AddScalar, std::move(out), {m.id, s.id});
}

Var Tape::add_rowvec(Var m, Var v) {
    check_owned(m);
    check_owned(v);
    const Array2& mv = value(m);
    const Array2& vv = value(v);
    if (vv.rows != 1 || vv.cols != mv.cols)
        throw DimensionError("add_rowvec: need 1x" + std::to_string(mv.cols) + ", got " +
                             vv.shape_str());
    Array2 out = mv;
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) += vv.at(0, j);
    return push(Op::AddRowVec, std::move(out), {m.id, v.id});
}

Var Tape::matmul(Var a, Var b) {
    check_owned(a);
    check_owned(b);
    return push(Op::Matmul, odesig::matmul(value(a), value(b)), {a.id, b.id});
}

Var Tape::transpose(Var a) {
    check_owned(a);
    return push(Op::Transpose, odesig::transpose(value(a)), {a.id});
}

Var Tape::relu(Var a) {
    check_owned(a);
    Array2 out = value(a);
    for (double& x : out.data) x = x > 0.0 ? x : 0.0;
    return push(Op::Relu, std::move(out), {a.id});
}

Var Tape::tanh(Var a) {
    check_owned(a);
    Array2 out = value(a);
    for (double& x : out.data) x = std::tanh(x);
    return push(Op::Tanh, std::move(out), {a.id});
}

Var Tape::exp(Var a) {
    check_owned(a);
    Array2 out = value(a);
    for (double& x : out.data) x = std::exp(x);
    return push(Op::Exp, std::move(out), {a.id});
}

Var Tape::pow_scalar(Var a, double p) {
    check_owned(a);
    Array2 out = value(a);
    for (double& x : out.data) x = std::pow(x, p);
    return push(Op::PowScalar, std::move(out), {a.id}, p);
}

Var Tape::softmax_rows(Var a) {
    check_owned(a);
    return push(Op::SoftmaxRows, odesig::softmax_rows(value(a)), {a.id});
}

Var Tape::sum_all(Var a) {
    check_owned(a);
    Array2 out(1, 1);
    out.at(0, 0) = sum(value(a));
    return push(Op::SumAll, std::move(out), {a.id});
}

Var Tape::conv1d_same(Var x, Var kernel, Var bias) {
    check_owned(x);
    check_owned(kernel);
    check_owned(bias);
    if (value(bias).rows != 1 || value(bias).cols != 1)
        throw DimensionError("conv1d_same: bias must be 1x1, got " + value(bias).shape_str());
    Array2 out = odesig::conv1d_same(value(x), value(kernel), value(bias).at(0, 0));
    return push(Op::Conv1dSame, std::move(out), {x.id, kernel.id, bias.id});
}

Var Tape::row_cosine(Var h) {
    check_owned(h);
    return push(Op::RowCosine, odesig::row_cosine(value(h)), {h.id});
}

Var Tape::stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw ContractError("stack_rows: no rows");
    std::vector<int> parents;
    parents.reserve(rows.size());
    const int cols = value(rows[0]).cols;
    Array2 out(static_cast<int>(rows.size()), cols);
    for (size_t i = 0; i < rows.size(); ++i) {
        check_owned(rows[i]);
        const Array2& r = value(rows[i]);
        if (r.rows != 1 || r.cols != cols)
            throw DimensionError("stack_rows: row " + std::to_string(i) + " has shape " +
                                 r.shape_str());
        for (int j = 0; j < cols; ++j) out.at(static_cast<int>(i), j) = r.at(0, j);
        parents.push_back(rows[i].id);
    }
    return push(Op::StackRows, std::move(out), std::move(parents));
}

Var Tape::concat_cols(const std::vector<Var>& blocks) {
    if (blocks.empty()) throw ContractError("concat_cols: no blocks");
    const int rows = value(blocks[0]).rows;
    int total_cols = 0;
    std::vector<int> parents;
    parents.reserve(blocks.size());
    for (const Var& b : blocks) {
        check_owned(b);
        if (value(b).rows != rows)
            throw DimensionError("concat_cols: row mismatch " + value(b).shape_str());
        total_cols += value(b).cols;
        parents.push_back(b.id);
    }
    Array2 out(rows, total_cols);
    int off = 0;
    for (const Var& b : blocks) {
        const Array2& v = value(b);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < v.cols; ++j) out.at(i, off + j) = v.at(i, j);
        off += v.cols;
    }
    return push(Op::ConcatCols, std::move(out), std::move(parents));
}

// ---------------------------------------------------------------------------
// backward

namespace {

void accumulate_matmul_da(Array2& da, const Array2& dc, const Array2& b) {
    // da += dc * b^T
    for (int i = 0; i < da.rows; ++i)
        for (int k = 0; k < da.cols; ++k) {
            double s = 0.0;
            for (int j = 0; j < dc.cols; ++j) s += dc.at(i, j) * b.at(k, j);
            da.at(i, k) += s;
        }
}

void accumulate_matmul_db(Array2& db, const Array2& a, const Array2& dc) {
    // db += a^T * dc
    for (int k = 0; k < db.rows; ++k)
        for (int j = 0; j < db.cols; ++j) {
            double s = 0.0;
            for (int i = 0; i < a.rows; ++i) s += a.at(i, k) * dc.at(i, j);
            db.at(k, j) += s;
        }
}

} // namespace

void Tape::backward(Var loss) {
    check_owned(loss);
    const Array2& lv = value(loss);
    if (lv.rows != 1 || lv.cols != 1)
        throw ContractError("backward: loss must be scalar (1x1), got " + lv.shape_str());

    grads_.assign(nodes_.size(), Array2());
    auto grad_ref = [&](int id) -> Array2& {
        Array2& g = grads_[id];
        if (g.data.empty()) g = Array2(nodes_[id].value.rows, nodes_[id].value.cols);
        return g;
    };
    grad_ref(loss.id).at(0, 0) = 1.0;

    for (int id = loss.id; id >= 0; --id) {
        const TapeNode& n = nodes_[id];
        const Array2& g = grads_[id];
        if (g.data.empty()) continue; // unreachable from the loss
        switch (n.op) {
        case Op::Leaf:
        case Op::Const:
            break;
        case Op::Add: {
            Array2& da = grad_ref(n.parents[0]);
            Array2& db = grad_ref(n.parents[1]);
            for (size_t i = 0; i < g.data.size(); ++i) {
                da.data[i] += g.data[i];
                db.data[i] += g.data[i];
            }
            break;
        }
        case Op::Sub: {
            Array2& da = grad_ref(n.parents[0]);
            Array2& db = grad_ref(n.parents[1]);
            for (size_t i = 0; i < g.data.size(); ++i) {
                da.data[i] += g.data[i];
                db.data[i] -= g.data[i];
            }
            break;
        }
        case Op::Mul: {
            const Array2& a = nodes_[n.parents[0]].value;
            const Array2& b = nodes_[n.parents[1]].value;
            Array2& da = grad_ref(n.parents[0]);
            Array2& db = grad_ref(n.parents[1]);
            for (size_t i = 0; i < g.data.size(); ++i) {
                da.data[i] += g.data[i] * b.data[i];
                db.data[i] += g.data[i] * a.data[i];
            }
            break;
        }
        case Op::MulScalar: {
            Array2& da = grad_ref(n.parents[0]);
            for (size_t i = 0; i < g.data.size(); ++i) da.data[i] += n.aux * g.data[i];
            break;
        }
        case Op::AddScalar: {
            Array2& dm = grad_ref(n.parents[0]);
            Array2& ds = grad_ref(n.parents[1]);
            double s = 0.0;
            for (size_t i = 0; i < g.data.size(); ++i) {
                dm.data[i] += g.data[i];
                s += g.data[i];
            }
            ds.at(0, 0) += s;
            break;
        }
        case Op::AddRowVec: {
            Array2& dm = grad_ref(n.parents[0]);
            Array2& dv = grad_ref(n.parents[1]);
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) {
                    dm.at(i, j) += g.at(i, j);
                    dv.at(0, j) += g.at(i, j);
                }
            break;
        }
        case Op::Matmul: {
            const Array2& a = nodes_[n.parents[0]].value;
            const Array2& b = nodes_[n.parents[1]].value;
            accumulate_matmul_da(grad_ref(n.parents[0]), g, b);
            accumulate_matmul_db(grad_ref(n.parents[1]), a, g);
            break;
        }
        case Op::Transpose: {
            Array2& da = grad_ref(n.parents[0]);
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) da.at(j, i) += g.at(i, j);
            break;
        }
        case Op::Relu: {
            const Array2& x = nodes_[n.parents[0]].value;
            Array2& da = grad_ref(n.parents[0]);
            for (size_t i = 0; i < g.data.size(); ++i)
                if (x.data[i] > 0.0) da.data[i] += g.data[i];
            break;
        }
        case Op::Tanh: {
            Array2& da = grad_ref(n.parents[0]);
            for (size_t i = 0; i < g.data.size(); ++i) {
                const double y = n.value.data[i];
                da.data[i] += g.data[i] * (1.0 - y * y);
            }
            break;
        }
        case Op::Exp: {
            Array2& da = grad_ref(n.parents[0]);
            for (size_t i = 0; i < g.data.size(); ++i)
                da.data[i] += g.data[i] * n.value.data[i];
            break;
        }
        case Op::PowScalar: {
            const Array2& x = nodes_[n.parents[0]].value;
            Array2& da = grad_ref(n.parents[0]);
            for (size_t i = 0; i < g.data.size(); ++i)
                da.data[i] += g.data[i] * n.aux * std::pow(x.data[i], n.aux - 1.0);
            break;
        }
        case Op::SoftmaxRows: {
            Array2& da = grad_ref(n.parents[0]);
            for (int i = 0; i < g.rows; ++i) {
                double dot = 0.0;
                for (int j = 0; j < g.cols; ++j) dot += g.at(i, j) * n.value.at(i, j);
                for (int j = 0; j < g.cols; ++j)
                    da.at(i, j) += n.value.at(i, j) * (g.at(i, j) - dot);
            }
            break;
        }
        case Op::SumAll: {
            Array2& da = grad_ref(n.parents[0]);
            const double s = g.at(0, 0);
            for (double& v : da.data) v += s;
            break;
        }
        case Op::Conv1dSame: {
            const Array2& x = nodes_[n.parents[0]].value;
            const Array2& w = nodes_[n.parents[1]].value;
            Array2& dx = grad_ref(n.parents[0]);
            Array2& dw = grad_ref(n.parents[1]);
            Array2& db = grad_ref(n.parents[2]);
            const int T = x.cols;
            const int k = w.cols;
            const int lead = (k - 1) / 2;
            double bias_sum = 0.0;
            for (int j = 0; j < T; ++j) {
                const double gj = g.at(0, j);
                bias_sum += gj;
                for (int m = 0; m < k; ++m) {
                    const int idx = j - lead + m;
                    if (idx >= 0 && idx < T) {
                        dx.at(0, idx) += gj * w.at(0, m);
                        dw.at(0, m) += gj * x.at(0, idx);
                    }
                }
            }
            db.at(0, 0) += bias_sum;
            break;
        }
        case Op::RowCosine: {
            const Array2& h = nodes_[n.parents[0]].value;
            Array2& dh = grad_ref(n.parents[0]);
            const int N = h.rows;
            const int d = h.cols;
            std::vector<double> norm(N);
            for (int i = 0; i < N; ++i) {
                double s = 0.0;
                for (int c = 0; c < d; ++c) s += h.at(i, c) * h.at(i, c);
                norm[i] = std::sqrt(s);
            }
            // dA_ij/dh_i = h_j/(n_i n_j) - A_ij h_i/n_i^2; A is symmetric but
            // the incoming adjoint need not be, so fold in both orientations.
            for (int i = 0; i < N; ++i) {
                for (int j = 0; j < N; ++j) {
                    if (i == j) continue; // diagonal is constant 1
                    const double wgt = g.at(i, j) + g.at(j, i);
                    if (wgt == 0.0) continue;
                    const double aij = n.value.at(i, j);
                    const double inv_ninj = 1.0 / (norm[i] * norm[j]);
                    const double inv_ni2 = 1.0 / (norm[i] * norm[i]);
                    for (int c = 0; c < d; ++c)
                        dh.at(i, c) += wgt * (h.at(j, c) * inv_ninj - aij * h.at(i, c) * inv_ni2);
                }
            }
            break;
        }
        case Op::StackRows: {
            for (size_t r = 0; r < n.parents.size(); ++r) {
                Array2& dr = grad_ref(n.parents[r]);
                for (int j = 0; j < g.cols; ++j) dr.at(0, j) += g.at(static_cast<int>(r), j);
            }
            break;
        }
        case Op::ConcatCols: {
            int off = 0;
            for (int p : n.parents) {
                Array2& dp = grad_ref(p);
                for (int i = 0; i < dp.rows; ++i)
                    for (int j = 0; j < dp.cols; ++j) dp.at(i, j) += g.at(i, off + j);
                off += dp.cols;
            }
            break;
        }
        }
    }
}

} // namespace odesig
