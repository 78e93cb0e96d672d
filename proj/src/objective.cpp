#include "josnc/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace josnc {

namespace {

constexpr double kInvLn2 = 1.0 / std::numbers::ln2;

ad::Var mask_column(std::span<const double> mask, std::size_t rows) {
  if (mask.size() != rows) throw std::invalid_argument("mask length differs from batch size");
  return ad::Var::constant(Tensor({rows, 1}, std::vector<double>(mask.begin(), mask.end())));
}

// Per-row KL(p || q) in bits as an N x 1 column.
ad::Var kl_rows(const ad::Var& p, const ad::Var& q) {
  return ad::scale(ad::row_sum(ad::mul(p, ad::sub(ad::log(p), ad::log(q)))), kInvLn2);
}

double value_or_zero(const ad::Var& v) { return v.node() ? v.item() : 0.0; }

}  // namespace

ad::Var classification_loss(const ad::Var& prob, std::span<const TrainingTarget> targets) {
  const std::size_t n = prob.rows();
  const std::size_t classes = prob.cols();
  if (targets.size() != n) throw std::invalid_argument("one target per sample required");
  if (n == 0) throw std::invalid_argument("classification_loss: empty batch");
  Tensor positive = Tensor::matrix(n, classes);
  Tensor negative = Tensor::matrix(n, classes);
  bool any_negative = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i].dist.size() != classes) throw std::invalid_argument("target size mismatch");
    auto& dst = targets[i].kind == TargetKind::Positive ? positive : negative;
    any_negative = any_negative || targets[i].kind == TargetKind::Negative;
    std::copy(targets[i].dist.begin(), targets[i].dist.end(), dst.row_span(i).begin());
  }
  ad::Var loss = ad::sum(ad::mul(ad::Var::constant(std::move(positive)), ad::log(prob)));
  if (any_negative) {
    auto complement = ad::add_scalar(ad::scale(prob, -1.0), 1.0);
    loss = ad::add(loss, ad::sum(ad::mul(ad::Var::constant(std::move(negative)), ad::log(complement))));
  }
  return ad::scale(loss, -1.0 / static_cast<double>(n));
}

ad::Var self_consistency_loss(const ad::Var& prob, const ad::Var& prob_prime,
                              std::span<const double> mask) {
  if (!prob.value().same_shape(prob_prime.value())) {
    throw std::invalid_argument("self_consistency_loss: view shapes differ");
  }
  const std::size_t n = prob.rows();
  auto both = ad::add(kl_rows(prob, prob_prime), kl_rows(prob_prime, prob));
  return ad::scale(ad::sum(ad::mul(both, mask_column(mask, n))), 1.0 / static_cast<double>(n));
}

std::vector<double> neighbor_mixture(std::span<const Neighbor> neighbors) {
  if (neighbors.empty()) throw std::invalid_argument("neighbor_mixture: no neighbors");
  const std::size_t classes = neighbors.front().pred.size();
  std::vector<double> weights(neighbors.size());
  double total = 0.0;
  for (std::size_t j = 0; j < neighbors.size(); ++j) {
    weights[j] = std::max(neighbors[j].similarity, 0.0);
    total += weights[j];
  }
  if (!(total > 0.0)) {
    std::fill(weights.begin(), weights.end(), 1.0);
    total = static_cast<double>(neighbors.size());
  }
  std::vector<double> mix(classes, 0.0);
  for (std::size_t j = 0; j < neighbors.size(); ++j) {
    if (neighbors[j].pred.size() != classes) throw std::invalid_argument("neighbor class mismatch");
    const double w = weights[j] / total;
    for (std::size_t c = 0; c < classes; ++c) mix[c] += w * neighbors[j].pred[c];
  }
  return mix;
}

ad::Var neighbor_consistency_loss(const ad::Var& prob, const Tensor& mixtures,
                                  std::span<const double> mask) {
  if (!prob.value().same_shape(mixtures)) {
    throw std::invalid_argument("neighbor_consistency_loss: mixture shape differs");
  }
  const std::size_t n = prob.rows();
  auto kl = kl_rows(prob, ad::Var::constant(mixtures));
  return ad::scale(ad::sum(ad::mul(kl, mask_column(mask, n))), 1.0 / static_cast<double>(n));
}

ad::Var feature_consistency_loss(const ad::Var& queries, const Tensor& positive_keys,
                                 const Tensor& queue_keys, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  const std::size_t n = queries.rows();
  const std::size_t dim = queries.cols();
  if (n == 0 || positive_keys.size() == 0) {
    throw std::invalid_argument("feature_consistency_loss: empty embedding pool");
  }
  if (!positive_keys.same_shape(queries.value())) {
    throw std::invalid_argument("feature_consistency_loss: positive keys do not match queries");
  }
  const std::size_t pool = queue_keys.size() == 0 ? 0 : queue_keys.rows();
  if (pool > 0 && queue_keys.cols() != dim) {
    throw std::invalid_argument("feature_consistency_loss: queue dimension mismatch");
  }
  auto positive = ad::row_sum(ad::mul(queries, ad::Var::constant(positive_keys)));
  ad::Var logits = positive;
  if (pool > 0) {
    logits = ad::concat_cols(positive, ad::matmul_nt(queries, ad::Var::constant(queue_keys)));
  }
  auto picked = ad::sum(ad::column(ad::log_softmax(logits, temperature), 0));
  return ad::scale(picked, -1.0 / static_cast<double>(n));
}

TotalLoss total_loss(const LossParts& parts, const LossWeights& weights) {
  if (!parts.cls.node()) throw std::invalid_argument("total_loss: classification term required");
  TotalLoss out;
  out.total = parts.cls;
  auto add_term = [&](const ad::Var& term, double w) {
    if (term.node() && w != 0.0) out.total = ad::add(out.total, ad::scale(term, w));
  };
  add_term(parts.con_s, weights.alpha);
  add_term(parts.con_n, weights.beta);
  add_term(parts.con_f, weights.gamma);

  auto& b = out.breakdown;
  b.weights = weights;
  b.l_cls = parts.cls.item();
  b.l_con_s = value_or_zero(parts.con_s);
  b.l_con_n = value_or_zero(parts.con_n);
  b.l_con_f = value_or_zero(parts.con_f);
  b.total = out.total.item();
  return out;
}

}  // namespace josnc
