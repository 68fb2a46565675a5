// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include "pstyle/optim.hpp"

#include <cmath>

#include "pstyle/error.hpp"

namespace pstyle {

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd" || name == "gd") return OptimizerKind::kGradientDescent;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd";
}

Optimizer::Optimizer(OptimizerKind kind, double beta1, double beta2, double epsilon)
    : kind_(kind), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void Optimizer::step(std::span<float> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size()) {
    throw ArgumentError("optimizer: " + std::to_string(params.size()) + " params but " +
                        std::to_string(grads.size()) + " gradients");
  }
  ++steps_;
  if (kind_ == OptimizerKind::kGradientDescent) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (grads[i] != 0.0) params[i] = static_cast<float>(params[i] - lr * grads[i]);
    }
    return;
  }
  if (m_.size() != params.size()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
  }
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    if (m_[i] == 0.0) continue;
    const double update = lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + epsilon_);
    params[i] = static_cast<float>(params[i] - update);
  }
}

}  // namespace pstyle
