#pragma once

// Loss terms of the joint objective. Every batched term returns a scalar Var
// averaged over the full batch size N, so masked-out rows still count in the
// denominator.

#include <span>
#include <vector>

#include "josnc/autodiff.hpp"
#include "josnc/embed_queue.hpp"
#include "josnc/labeler.hpp"

namespace josnc {

/// Cross-entropy against positive targets and -log(1 - p_j) for negative
/// targets (natural log), averaged over the batch. `prob` is N x C.
ad::Var classification_loss(const ad::Var& prob, std::span<const TrainingTarget> targets);

/// Mean over the batch of mask_i * (KL(p||p') + KL(p'||p)), in bits.
ad::Var self_consistency_loss(const ad::Var& prob, const ad::Var& prob_prime,
                              std::span<const double> mask);

/// Similarity-weighted mixture of neighbor predictions. Negative similarities
/// are clipped to zero; an all-zero weight vector falls back to uniform.
std::vector<double> neighbor_mixture(std::span<const Neighbor> neighbors);

/// Mean over the batch of mask_i * KL(p_i || mixture_i), in bits. `mixtures`
/// is N x C and is treated as a constant.
ad::Var neighbor_consistency_loss(const ad::Var& prob, const Tensor& mixtures,
                                  std::span<const double> mask);

/// InfoNCE over the pool {own positive key} + queue. `queries` is N x E on
/// the tape, `positive_keys` N x E and `queue_keys` Q x E are constants.
/// Throws std::invalid_argument when there are no positive keys.
ad::Var feature_consistency_loss(const ad::Var& queries, const Tensor& positive_keys,
                                 const Tensor& queue_keys, double temperature);

struct LossWeights {
  double alpha = 0.3;
  double beta = 0.1;
  double gamma = 1e-4;
};

struct LossBreakdown {
  double l_cls = 0.0;
  double l_con_s = 0.0;
  double l_con_n = 0.0;
  double l_con_f = 0.0;
  double total = 0.0;
  LossWeights weights;
};

struct LossParts {
  ad::Var cls;
  ad::Var con_s;
  ad::Var con_n;
  ad::Var con_f;
};

struct TotalLoss {
  ad::Var total;
  LossBreakdown breakdown;
};

// Absent (null) parts count as zero.
TotalLoss total_loss(const LossParts& parts, const LossWeights& weights);

}  // namespace josnc
