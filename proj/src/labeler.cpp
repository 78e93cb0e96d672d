#include "josnc/labeler.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace josnc {

std::size_t TrainingTarget::negative_class() const {
  if (kind != TargetKind::Negative) throw std::logic_error("not a negative target");
  return static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
}

TrainingTarget make_lsr_target(std::uint16_t label, std::size_t classes, double epsilon) {
  if (classes < 2) throw std::invalid_argument("label smoothing needs at least two classes");
  if (label >= classes) throw std::invalid_argument("label out of range");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1)");
  TrainingTarget t;
  t.kind = TargetKind::Positive;
  t.dist.assign(classes, epsilon / static_cast<double>(classes - 1));
  t.dist[label] = 1.0 - epsilon;
  return t;
}

ProbVec smoothed_label(std::uint16_t label, std::size_t classes, double epsilon) {
  return ProbVec(make_lsr_target(label, classes, epsilon).dist);
}

TrainingTarget make_pll_target(const ProbVec& teacher_pred, const PartialLabelConfig& config) {
  const std::size_t classes = teacher_pred.size();
  if (config.kappa < 1 || config.kappa > classes) {
    throw std::invalid_argument("kappa must lie in [1, C]");
  }
  if (!(config.temperature_in > 0.0 && config.temperature_out > 0.0)) {
    throw std::invalid_argument("partial-label temperatures must be positive");
  }
  std::vector<std::size_t> order(classes);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return teacher_pred[a] > teacher_pred[b]; });

  TrainingTarget t;
  t.kind = TargetKind::Positive;
  t.partial.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.kappa));
  std::sort(t.partial.begin(), t.partial.end());

  std::vector<double> scaled(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    const bool inside = std::binary_search(t.partial.begin(), t.partial.end(), c);
    scaled[c] = teacher_pred[c] / (inside ? config.temperature_in : config.temperature_out);
  }
  const auto dist = softmax(scaled, 1.0);
  t.dist.assign(dist.begin(), dist.end());
  return t;
}

TrainingTarget make_negative_target(const ProbVec& teacher_pred) {
  const auto vals = teacher_pred.values();
  const auto argmin = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  TrainingTarget t;
  t.kind = TargetKind::Negative;
  t.dist.assign(teacher_pred.size(), 0.0);
  t.dist[argmin] = 1.0;
  return t;
}

}  // namespace josnc
