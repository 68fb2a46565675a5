// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

namespace pstyle {

enum class OptimizerKind { kGradientDescent, kAdam };

OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(OptimizerKind kind);

/// First-order update rule over one float parameter block. State (moments)
/// lives in the optimizer, sized on first use.
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind, double beta1 = 0.9, double beta2 = 0.999,
                     double epsilon = 1e-8);

  /// params -= lr * direction(grads). An all-zero gradient entry never moves
  /// its parameter in either mode.
  void step(std::span<float> params, std::span<const double> grads, double lr);

  OptimizerKind kind() const { return kind_; }
  long steps() const { return steps_; }

 private:
  OptimizerKind kind_;
  double beta1_;
  double beta2_;
  double epsilon_;
  long steps_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace pstyle
