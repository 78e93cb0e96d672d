#pragma once

#include <cstdint>
#include <vector>

#include "josnc/divergence.hpp"

namespace josnc {

enum class TargetKind : std::uint8_t { Positive, Negative };

/// Per-sample supervision. Positive targets carry a distribution to fit;
/// negative targets name the one class the sample should not be.
struct TrainingTarget {
  TargetKind kind = TargetKind::Positive;
  std::vector<double> dist;          // ProbVec for Positive, one-hot for Negative
  std::vector<std::size_t> partial;  // candidate set, pseudo-labelled targets only

  std::size_t negative_class() const;
};

// 1 - eps on `label`, eps / (C - 1) elsewhere.
TrainingTarget make_lsr_target(std::uint16_t label, std::size_t classes, double epsilon);
ProbVec smoothed_label(std::uint16_t label, std::size_t classes, double epsilon);

struct PartialLabelConfig {
  std::size_t kappa = 5;
  double temperature_in = 0.1;
  double temperature_out = 1.0;
};

// Candidate set = top-kappa teacher classes (ties to the lower index); the
// target is softmax(teacher_pred[c] / T(c)) with T(c) = temperature_in inside
// the set and temperature_out outside it.
TrainingTarget make_pll_target(const ProbVec& teacher_pred, const PartialLabelConfig& config);

// Complementary label at argmin(teacher_pred), ties to the lower index.
TrainingTarget make_negative_target(const ProbVec& teacher_pred);

}  // namespace josnc
