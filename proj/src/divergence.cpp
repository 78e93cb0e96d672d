#include "josnc/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "josnc/autodiff.hpp"

namespace josnc {

ProbVec::ProbVec(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("ProbVec: empty distribution");
  double total = 0.0;
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("ProbVec: entry " + std::to_string(v) + " is not a probability");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > kProbSumTolerance) {
    throw std::invalid_argument("ProbVec: entries sum to " + std::to_string(total));
  }
}

ProbVec ProbVec::normalized(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("ProbVec::normalized: non-positive total");
  std::vector<double> v(weights.begin(), weights.end());
  for (auto& x : v) x /= total;
  return ProbVec(std::move(v));
}

ProbVec ProbVec::uniform(std::size_t classes) {
  return ProbVec(std::vector<double>(classes, 1.0 / static_cast<double>(classes)));
}

ProbVec softmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax: temperature must be positive");
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  for (double v : logits) {
    if (!std::isfinite(v)) throw std::domain_error("softmax: non-finite logit");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - mx) / temperature);
    z += out[i];
  }
  for (auto& v : out) v /= z;
  return ProbVec(std::move(out));
}

double kl_divergence(const ProbVec& p, const ProbVec& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) {
      throw std::domain_error("kl_divergence: q has zero mass at class " + std::to_string(i) +
                              " where p does not (unsmoothed target?)");
    }
    kl += p[i] * (std::log2(p[i] + ad::kLogFloor) - std::log2(q[i] + ad::kLogFloor));
  }
  return std::max(kl, 0.0);
}

double js_divergence(const ProbVec& p, const ProbVec& q) {
  if (p.size() != q.size()) throw std::invalid_argument("js_divergence: size mismatch");
  // Summing KL(p||m) and KL(q||m) term by term keeps the result exactly
  // symmetric: swapping p and q only reorders commutative additions.
  double a = 0.0;
  double b = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    const double log_m = std::log2(m + ad::kLogFloor);
    if (p[i] > 0.0) a += p[i] * (std::log2(p[i] + ad::kLogFloor) - log_m);
    if (q[i] > 0.0) b += q[i] * (std::log2(q[i] + ad::kLogFloor) - log_m);
  }
  return std::clamp(0.5 * a + 0.5 * b, 0.0, 1.0);
}

}  // namespace josnc
