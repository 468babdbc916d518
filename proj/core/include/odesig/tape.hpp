#pragma once

#include <cstdint>
#include <vector>

#include "odesig/array2.hpp"

namespace odesig {

// Reverse-mode differentiation over Array2 values. Operations append nodes to
// an explicit tape; backward() replays adjoints in reverse creation order,
// which is a topological order by construction. Leaf gradients accumulate
// (sum) across all uses, and the accumulation order is fixed, so repeated
// runs on identical inputs produce bit-identical gradients.
//
// A Tape is confined to one thread between construction and backward().
// Values are immutable once produced.

class Tape;

struct Var {
    Tape* tape = nullptr;
    int id = -1;
};

enum class Op : uint8_t {
    Leaf,
    Const,
    Add,
    Sub,
    Mul,        // elementwise
    MulScalar,  // by a compile-time-known double
    AddScalar,  // broadcast a 1x1 node over a matrix
    AddRowVec,  // broadcast a 1xC node over the rows of an RxC matrix
    Matmul,
    Transpose,
    Relu,
    Tanh,
    Exp,
    PowScalar,  // elementwise x^p for constant p, x > 0
    SoftmaxRows,
    SumAll,
    Conv1dSame,
    RowCosine,  // NxN cosine similarity of the rows of an Nxd matrix
    StackRows,  // n-ary: stack 1xC rows into an NxC matrix
    ConcatCols, // n-ary: concatenate RxCi blocks along columns
};

struct TapeNode {
    Op op = Op::Const;
    Array2 value;
    std::vector<int> parents;
    double aux = 0.0; // scalar for MulScalar / PowScalar
};

class Tape {
public:
    Var leaf(Array2 v);
    Var constant(Array2 v);

    const Array2& value(Var v) const { return nodes_[v.id].value; }
    // Valid after backward(); zero matrices for nodes the loss does not reach.
    const Array2& grad(Var v) const { return grads_[v.id]; }

    // Propagates d(loss)/d(node) to every node below `loss` on the tape.
    // `loss` must be 1x1.
    void backward(Var loss);

    size_t size() const { return nodes_.size(); }

    // --- primitives ---
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var mul_scalar(Var a, double s);
    Var add_scalar(Var m, Var s);
    Var add_rowvec(Var m, Var v);
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var relu(Var a);
    Var tanh(Var a);
    Var exp(Var a);
    Var pow_scalar(Var a, double p);
    Var softmax_rows(Var a);
    Var sum_all(Var a);
    Var conv1d_same(Var x, Var kernel, Var bias);
    Var row_cosine(Var h);
    Var stack_rows(const std::vector<Var>& rows);
    Var concat_cols(const std::vector<Var>& blocks);

private:
    Var push(Op op, Array2 value, std::vector<int> parents, double aux = 0.0);
    void check_owned(Var v) const;

    std::vector<TapeNode> nodes_;
    std::vector<Array2> grads_;
};

// Free-function spellings so numeric code reads naturally and so the generic
// RK4 stepper can instantiate over Var.
inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(double s, Var a) { return a.tape->mul_scalar(a, s); }
inline Var mul(Var a, Var b) { return a.tape->mul(a, b); }
inline Var matmul(Var a, Var b) { return a.tape->matmul(a, b); }
inline Var transpose(Var a) { return a.tape->transpose(a); }
inline Var relu(Var a) { return a.tape->relu(a); }
inline Var tanh(Var a) { return a.tape->tanh(a); }
inline Var exp(Var a) { return a.tape->exp(a); }
inline Var softmax_rows(Var a) { return a.tape->softmax_rows(a); }
inline Var sum_all(Var a) { return a.tape->sum_all(a); }

// Forward kernels shared with plain (tape-free) callers.
Array2 softmax_rows(const Array2& m);
Array2 conv1d_same(const Array2& x, const Array2& kernel, double bias);
Array2 row_cosine(const Array2& h);

} // namespace odesig
