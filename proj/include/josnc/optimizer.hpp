#pragma once

#include <vector>

#include "josnc/autodiff.hpp"

namespace josnc {

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double momentum = 0.9;  // SGD momentum, Adam beta1
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
};

/// In-place update of tape leaves from their accumulated gradients.
class Optimizer {
 public:
  Optimizer(std::vector<ad::Var> params, OptimizerConfig config);

  void step(double learning_rate);

 private:
  std::vector<ad::Var> params_;
  OptimizerConfig config_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  long steps_ = 0;
};

// Constant `base` through `warmup_epochs`, then cosine annealing to zero at
// `total_epochs`.
double cosine_learning_rate(double base, int epoch, int warmup_epochs, int total_epochs);

}  // namespace josnc
