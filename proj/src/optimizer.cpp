#include "josnc/optimizer.hpp"

#include <cmath>
#include <numbers>

namespace josnc {

Optimizer::Optimizer(std::vector<ad::Var> params, OptimizerConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    first_.emplace_back(p.value().size(), 0.0);
    second_.emplace_back(config_.kind == OptimizerKind::Adam ? p.value().size() : 0, 0.0);
  }
}

void Optimizer::step(double learning_rate) {
  ++steps_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) continue;
    auto& w = p.mutable_value().values();
    const auto& g = p.grad().values();
    auto& m = first_[i];
    if (config_.kind == OptimizerKind::Sgd) {
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double grad = g[j] + config_.weight_decay * w[j];
        m[j] = config_.momentum * m[j] + grad;
        w[j] -= learning_rate * m[j];
      }
    } else {
      auto& v = second_[i];
      const double b1 = config_.momentum;
      const double b2 = config_.beta2;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double grad = g[j] + config_.weight_decay * w[j];
        m[j] = b1 * m[j] + (1.0 - b1) * grad;
        v[j] = b2 * v[j] + (1.0 - b2) * grad * grad;
        w[j] -= learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.adam_eps);
      }
    }
  }
}

double cosine_learning_rate(double base, int epoch, int warmup_epochs, int total_epochs) {
  if (epoch < warmup_epochs || total_epochs <= warmup_epochs) return base;
  const double progress = static_cast<double>(epoch - warmup_epochs) /
                          static_cast<double>(total_epochs - warmup_epochs);
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace josnc
