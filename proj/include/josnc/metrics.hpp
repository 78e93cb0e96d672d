#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "josnc/datagen.hpp"
#include "josnc/selector.hpp"
#include "josnc/trainer.hpp"

namespace josnc {

struct BinaryScore {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Empty problems (no positives, none predicted) score 1 everywhere;
// otherwise a zero denominator scores 0.
BinaryScore score_counts(std::size_t tp, std::size_t fp, std::size_t fn);

struct SelectionScores {
  BinaryScore clean;  // positive class: CLEAN vs tags Clean
  BinaryScore ood;    // positive class: OOD vs tags OodNoisy
};

// Ids missing from `tags` throw std::invalid_argument.
SelectionScores evaluate_selection(std::span<const Partition> partitions,
                                   std::span<const SampleTags> tags);

struct MetricsRow {
  int epoch = 0;
  double train_loss = 0.0;
  double l_cls = 0.0;
  double l_con_s = 0.0;
  double l_con_n = 0.0;
  double l_con_f = 0.0;
  double test_acc = 0.0;
  double clean_precision = 0.0;
  double clean_recall = 0.0;
  double clean_f1 = 0.0;
  double ood_precision = 0.0;
  double ood_recall = 0.0;
  double ood_f1 = 0.0;
  double mean_tau_clean = 0.0;
  double mean_tau_ood = 0.0;
};

MetricsRow make_metrics_row(const EpochRecord& epoch, const SelectionScores& selection);

// Column order of metrics.csv. Fixed.
const std::vector<std::string>& metrics_columns();
std::string metrics_header();
std::string format_metrics_row(const MetricsRow& row);

// Shortest round-tripping decimal form, '.' separator, no locale.
std::string format_number(double v);

}  // namespace josnc
