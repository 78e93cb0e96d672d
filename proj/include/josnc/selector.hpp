#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "josnc/divergence.hpp"
#include "josnc/embed_queue.hpp"

namespace josnc {

struct SampleScores {
  double p_clean = 0.0;  // 1 - JS(p || smoothed label)
  double p_ood = 0.0;    // JS(p || p')
  // Present only when K neighbors were available.
  std::optional<double> neighbor_mean_p_clean;
  std::optional<bool> neighbors_share_label;
};

SampleScores score_sample(const ProbVec& p, const ProbVec& p_prime, const ProbVec& y_smoothed,
                          std::uint16_t observed_label,
                          const std::optional<std::vector<Neighbor>>& neighbors);

enum class SampleKind : std::uint8_t { Clean = 0, Id = 1, Ood = 2 };
const char* to_string(SampleKind kind);

/// Per-class adaptive thresholds plus the running means that feed them.
class ThresholdState {
 public:
  explicit ThresholdState(std::size_t classes);

  double tau_clean(std::size_t c) const { return tau_clean_.at(c); }
  double tau_ood(std::size_t c) const { return tau_ood_.at(c); }
  std::span<const double> tau_clean() const { return tau_clean_; }
  std::span<const double> tau_ood() const { return tau_ood_; }
  std::size_t classes() const { return tau_clean_.size(); }

  // Overrides, for experiments that pin the thresholds.
  void set(std::size_t c, double tau_clean, double tau_ood);

  void accumulate(const SampleScores& scores, std::uint16_t observed_label);
  std::size_t count(std::size_t c) const { return counts_.at(c); }
  // Running means this epoch; 0 for classes with no samples yet.
  double mean_p_clean(std::size_t c) const;
  double mean_p_ood(std::size_t c) const;

  // tau <- w * tau + (1 - w) * epoch mean, per class with samples this
  // epoch; other classes keep their threshold. Clears the accumulators.
  void roll(double omega);

 private:
  std::vector<double> tau_clean_;
  std::vector<double> tau_ood_;
  std::vector<double> sum_clean_;
  std::vector<double> sum_ood_;
  std::vector<std::size_t> counts_;
};

SampleKind classify_sample(const SampleScores& scores, std::uint16_t observed_label,
                           const ThresholdState& thresholds);

struct Partition {
  std::vector<std::uint64_t> clean_ids;
  std::vector<std::uint64_t> id_ids;
  std::vector<std::uint64_t> ood_ids;

  void add(std::uint64_t id, SampleKind kind);
  std::size_t size() const { return clean_ids.size() + id_ids.size() + ood_ids.size(); }
  // Disjoint and exactly covering `batch_ids`.
  bool is_sound(std::span<const std::uint64_t> batch_ids) const;
};

}  // namespace josnc
