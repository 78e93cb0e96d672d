#pragma once

#include <span>
#include <vector>

namespace josnc {

/// A discrete probability distribution over C classes.
///
/// Construction validates that every entry is non-negative and that the
/// entries sum to one within 1e-9.
class ProbVec {
 public:
  ProbVec() = default;
  explicit ProbVec(std::vector<double> values);

  // Normalizes `weights` (non-negative, positive sum) into a distribution.
  static ProbVec normalized(std::span<const double> weights);
  static ProbVec uniform(std::size_t classes);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  bool operator==(const ProbVec&) const = default;

 private:
  std::vector<double> values_;
};

inline constexpr double kProbSumTolerance = 1e-9;

/// softmax(logits / temperature). Rejects non-finite logits and
/// non-positive temperatures with std::domain_error / std::invalid_argument.
ProbVec softmax(std::span<const double> logits, double temperature = 1.0);

/// KL(p || q) in bits. Throws std::domain_error when q is zero somewhere p
/// is not; callers are expected to smooth targets before reaching here.
double kl_divergence(const ProbVec& p, const ProbVec& q);

/// Jensen-Shannon divergence in bits; symmetric and bounded in [0, 1].
double js_divergence(const ProbVec& p, const ProbVec& q);

}  // namespace josnc
