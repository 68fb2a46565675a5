// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Minimal scalar reverse-mode differentiation. Every operation appends one
// node with at most two parents; backward() sweeps the tape once in reverse.
// Used as an oracle independent of the renderer's hand-written adjoints.

#include <cmath>
#include <vector>

namespace pstyle::testing {

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;
  double value = 0.0;
};

class Tape {
 public:
  Var variable(double v) { return push(v, -1, 0.0, -1, 0.0); }
  Var constant(double v) { return push(v, -1, 0.0, -1, 0.0); }

  Var push(double v, int a, double da, int b, double db) {
    nodes_.push_back({a, da, b, db});
    return Var{this, static_cast<int>(nodes_.size()) - 1, v};
  }

  std::vector<double> backward(const Var& out) const {
    std::vector<double> adj(nodes_.size(), 0.0);
    adj[out.id] = 1.0;
    for (int i = out.id; i >= 0; --i) {
      const Node& n = nodes_[i];
      if (adj[i] == 0.0) continue;
      if (n.a >= 0) adj[n.a] += adj[i] * n.da;
      if (n.b >= 0) adj[n.b] += adj[i] * n.db;
    }
    return adj;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    int a;
    double da;
    int b;
    double db;
  };
  std::vector<Node> nodes_;
};

inline Var operator+(const Var& x, const Var& y) { return x.tape->push(x.value + y.value, x.id, 1.0, y.id, 1.0); }
inline Var operator-(const Var& x, const Var& y) { return x.tape->push(x.value - y.value, x.id, 1.0, y.id, -1.0); }
inline Var operator*(const Var& x, const Var& y) {
  return x.tape->push(x.value * y.value, x.id, y.value, y.id, x.value);
}
inline Var operator*(double s, const Var& x) { return x.tape->push(s * x.value, x.id, s, -1, 0.0); }
inline Var operator+(double s, const Var& x) { return x.tape->push(s + x.value, x.id, 1.0, -1, 0.0); }
inline Var exp(const Var& x) {
  const double e = std::exp(x.value);
  return x.tape->push(e, x.id, e, -1, 0.0);
}
inline Var reciprocal(const Var& x) {
  return x.tape->push(1.0 / x.value, x.id, -1.0 / (x.value * x.value), -1, 0.0);
}
inline Var logistic(const Var& z) { return reciprocal(1.0 + exp(-1.0 * z)); }

}  // namespace pstyle::testing
