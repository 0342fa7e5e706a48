#include "mechsel/ad.hpp"

namespace mechsel::ad {

void Tape::backward(Var seed) {
  adj_.assign(nodes_.size(), 0.0);
  adj_[static_cast<std::size_t>(seed.i)] = 1.0;

  for (std::int32_t i = seed.i; i >= 0; --i) {
    const double s = adj_[static_cast<std::size_t>(i)];
    if (s == 0.0) continue;
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Add:
        adj_[static_cast<std::size_t>(n.a)] += s;
        adj_[static_cast<std::size_t>(n.b)] += s;
        break;
      case Op::Sub:
        adj_[static_cast<std::size_t>(n.a)] += s;
        adj_[static_cast<std::size_t>(n.b)] -= s;
        break;
      case Op::Mul:
        adj_[static_cast<std::size_t>(n.a)] += nodes_[static_cast<std::size_t>(n.b)].val * s;
        adj_[static_cast<std::size_t>(n.b)] += nodes_[static_cast<std::size_t>(n.a)].val * s;
        break;
      case Op::Scale:
      case Op::Tanh:
      case Op::OneMinusSquare:
      case Op::Square:
        adj_[static_cast<std::size_t>(n.a)] += n.aux * s;
        break;
      case Op::Affine:
      case Op::Dot: {
        const std::int32_t* a = args_.data() + n.a;
        if (n.op == Op::Affine) {
          adj_[static_cast<std::size_t>(*a)] += s;
          ++a;
        }
        for (std::int32_t k = 0; k < n.b; ++k) {
          const std::int32_t w = a[2 * k];
          const std::int32_t x = a[2 * k + 1];
          adj_[static_cast<std::size_t>(w)] += nodes_[static_cast<std::size_t>(x)].val * s;
          adj_[static_cast<std::size_t>(x)] += nodes_[static_cast<std::size_t>(w)].val * s;
        }
        break;
      }
    }
  }
}

}  // namespace mechsel::ad
