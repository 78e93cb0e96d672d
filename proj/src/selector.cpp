#include "josnc/selector.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace josnc {

SampleScores score_sample(const ProbVec& p, const ProbVec& p_prime, const ProbVec& y_smoothed,
                          std::uint16_t observed_label,
                          const std::optional<std::vector<Neighbor>>& neighbors) {
  SampleScores s;
  s.p_clean = 1.0 - js_divergence(p, y_smoothed);
  s.p_ood = js_divergence(p, p_prime);
  if (neighbors && !neighbors->empty()) {
    double total = 0.0;
    bool share = true;
    for (const auto& n : *neighbors) {
      total += n.p_clean;
      share = share && n.label == observed_label;
    }
    s.neighbor_mean_p_clean = total / static_cast<double>(neighbors->size());
    s.neighbors_share_label = share;
  }
  return s;
}

const char* to_string(SampleKind kind) {
  switch (kind) {
    case SampleKind::Clean: return "clean";
    case SampleKind::Id: return "id";
    case SampleKind::Ood: return "ood";
  }
  return "?";
}

ThresholdState::ThresholdState(std::size_t classes)
    : tau_clean_(classes, 0.0),
      tau_ood_(classes, 0.0),
      sum_clean_(classes, 0.0),
      sum_ood_(classes, 0.0),
      counts_(classes, 0) {}

void ThresholdState::set(std::size_t c, double tau_clean, double tau_ood) {
  if (!(tau_clean >= 0.0 && tau_clean <= 1.0 && tau_ood >= 0.0 && tau_ood <= 1.0)) {
    throw std::invalid_argument("thresholds must lie in [0, 1]");
  }
  tau_clean_.at(c) = tau_clean;
  tau_ood_.at(c) = tau_ood;
}

void ThresholdState::accumulate(const SampleScores& scores, std::uint16_t observed_label) {
  sum_clean_.at(observed_label) += scores.p_clean;
  sum_ood_.at(observed_label) += scores.p_ood;
  counts_.at(observed_label) += 1;
}

double ThresholdState::mean_p_clean(std::size_t c) const {
  return counts_.at(c) ? sum_clean_[c] / static_cast<double>(counts_[c]) : 0.0;
}

double ThresholdState::mean_p_ood(std::size_t c) const {
  return counts_.at(c) ? sum_ood_[c] / static_cast<double>(counts_[c]) : 0.0;
}

void ThresholdState::roll(double omega) {
  if (!(omega >= 0.0 && omega <= 1.0)) {
    throw std::invalid_argument("threshold EMA factor must lie in [0, 1]");
  }
  for (std::size_t c = 0; c < tau_clean_.size(); ++c) {
    if (counts_[c] == 0) continue;
    tau_clean_[c] = std::clamp(omega * tau_clean_[c] + (1.0 - omega) * mean_p_clean(c), 0.0, 1.0);
    tau_ood_[c] = std::clamp(omega * tau_ood_[c] + (1.0 - omega) * mean_p_ood(c), 0.0, 1.0);
  }
  std::fill(sum_clean_.begin(), sum_clean_.end(), 0.0);
  std::fill(sum_ood_.begin(), sum_ood_.end(), 0.0);
  std::fill(counts_.begin(), counts_.end(), 0);
}

SampleKind classify_sample(const SampleScores& scores, std::uint16_t observed_label,
                           const ThresholdState& thresholds) {
  const double tau_clean = thresholds.tau_clean(observed_label);
  const bool confident = scores.p_clean > tau_clean;
  const bool neighbors_vouch = scores.neighbors_share_label.value_or(false) &&
                               scores.neighbor_mean_p_clean.value_or(0.0) > tau_clean;
  if (confident || neighbors_vouch) return SampleKind::Clean;
  return scores.p_ood > thresholds.tau_ood(observed_label) ? SampleKind::Ood : SampleKind::Id;
}

void Partition::add(std::uint64_t id, SampleKind kind) {
  switch (kind) {
    case SampleKind::Clean: clean_ids.push_back(id); break;
    case SampleKind::Id: id_ids.push_back(id); break;
    case SampleKind::Ood: ood_ids.push_back(id); break;
  }
}

bool Partition::is_sound(std::span<const std::uint64_t> batch_ids) const {
  if (size() != batch_ids.size()) return false;
  std::unordered_set<std::uint64_t> seen;
  for (const auto* set : {&clean_ids, &id_ids, &ood_ids}) {
    for (auto id : *set) {
      if (!seen.insert(id).second) return false;
    }
  }
  for (auto id : batch_ids) {
    if (!seen.contains(id)) return false;
  }
  return true;
}

}  // namespace josnc
