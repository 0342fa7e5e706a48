#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace mechsel::ad {

// Minimal index-based reverse-mode tape. Nodes are recorded in evaluation
// order; backward() walks them once in reverse. Besides scalar primitives the
// tape has two fused primitives, affine and dot, so a dense layer records one
// node per neuron instead of one per multiply.
//
// The tape owns no global state; use one instance per gradient evaluation
// (or reset() between evaluations on a reused instance).
class Tape {
 public:
  struct Var {
    std::int32_t i = -1;
  };

  Var leaf(double value) { return push(Op::Leaf, value, 0.0, -1, -1); }
  Var constant(double value) { return leaf(value); }

  Var add(Var a, Var b) { return push(Op::Add, val(a) + val(b), 0.0, a.i, b.i); }
  Var sub(Var a, Var b) { return push(Op::Sub, val(a) - val(b), 0.0, a.i, b.i); }
  Var mul(Var a, Var b) { return push(Op::Mul, val(a) * val(b), 0.0, a.i, b.i); }

  /// a * c for a compile-time-known constant c (no node for the constant).
  Var scale(Var a, double c) { return push(Op::Scale, val(a) * c, c, a.i, -1); }

  Var tanh(Var a) {
    const double h = std::tanh(val(a));
    return push(Op::Tanh, h, 1.0 - h * h, a.i, -1);
  }

  /// 1 - x^2 (the tanh slope as a value the dual chain can multiply with).
  Var one_minus_square(Var a) {
    const double x = val(a);
    return push(Op::OneMinusSquare, 1.0 - x * x, -2.0 * x, a.i, -1);
  }

  Var square(Var a) {
    const double x = val(a);
    return push(Op::Square, x * x, 2.0 * x, a.i, -1);
  }

  /// bias + sum_k w[k] * x[k]; w and x must have equal size.
  Var affine(Var bias, std::span<const Var> w, std::span<const Var> x) {
    const std::int32_t off = static_cast<std::int32_t>(args_.size());
    args_.push_back(bias.i);
    double acc = val(bias);
    for (std::size_t k = 0; k < w.size(); ++k) {
      acc += val(w[k]) * val(x[k]);
      args_.push_back(w[k].i);
      args_.push_back(x[k].i);
    }
    return push(Op::Affine, acc, 0.0, off, static_cast<std::int32_t>(w.size()));
  }

  /// sum_k w[k] * x[k].
  Var dot(std::span<const Var> w, std::span<const Var> x) {
    const std::int32_t off = static_cast<std::int32_t>(args_.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      acc += val(w[k]) * val(x[k]);
      args_.push_back(w[k].i);
      args_.push_back(x[k].i);
    }
    return push(Op::Dot, acc, 0.0, off, static_cast<std::int32_t>(w.size()));
  }

  double value(Var a) const { return nodes_[static_cast<std::size_t>(a.i)].val; }

  /// Accumulates adjoints of every node reachable from `seed` with seed
  /// adjoint 1. Overwrites adjoints from any previous backward pass.
  void backward(Var seed);

  double adjoint(Var a) const { return adj_[static_cast<std::size_t>(a.i)]; }

  std::size_t size() const { return nodes_.size(); }

  /// Drops all nodes but keeps allocated capacity.
  void reset() {
    nodes_.clear();
    args_.clear();
  }

 private:
  enum class Op : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    Scale,
    Tanh,
    OneMinusSquare,
    Square,
    Affine,
    Dot,
  };

  struct Node {
    double val;
    double aux;  // Scale: factor; Tanh: 1-h^2; OneMinusSquare: -2x; Square: 2x
    std::int32_t a;  // parent, or args_ offset for Affine/Dot
    std::int32_t b;  // parent, or pair count for Affine/Dot
    Op op;
  };

  double val(Var a) const { return nodes_[static_cast<std::size_t>(a.i)].val; }

  Var push(Op op, double value, double aux, std::int32_t a, std::int32_t b) {
    nodes_.push_back(Node{value, aux, a, b, op});
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
  std::vector<std::int32_t> args_;
  std::vector<double> adj_;
};

/// Value-semantics handle used by generic arithmetic code (the model
/// right-hand side) so one templated formula serves both the double path and
/// the tape path.
struct Rev {
  Tape* tape = nullptr;
  Tape::Var var;
};

inline Rev operator+(Rev a, Rev b) { return {a.tape, a.tape->add(a.var, b.var)}; }
inline Rev operator-(Rev a, Rev b) { return {a.tape, a.tape->sub(a.var, b.var)}; }
inline Rev operator*(Rev a, Rev b) { return {a.tape, a.tape->mul(a.var, b.var)}; }
inline Rev operator*(double c, Rev a) { return {a.tape, a.tape->scale(a.var, c)}; }
inline Rev operator*(Rev a, double c) { return c * a; }
inline Rev operator+(Rev a, double c) { return {a.tape, a.tape->add(a.var, a.tape->constant(c))}; }
inline Rev operator+(double c, Rev a) { return a + c; }
inline Rev operator-(double c, Rev a) { return {a.tape, a.tape->sub(a.tape->constant(c), a.var)}; }
inline Rev operator-(Rev a, double c) { return {a.tape, a.tape->sub(a.var, a.tape->constant(c))}; }

}  // namespace mechsel::ad
