#include "josnc/metrics.hpp"

#include <charconv>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace josnc {

BinaryScore score_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  BinaryScore s{tp, fp, fn, 0.0, 0.0, 0.0};
  if (tp + fp + fn == 0) {
    s.precision = s.recall = s.f1 = 1.0;
    return s;
  }
  if (tp + fp > 0) s.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) s.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (s.precision + s.recall > 0.0) {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

SelectionScores evaluate_selection(std::span<const Partition> partitions,
                                   std::span<const SampleTags> tags) {
  std::unordered_map<std::uint64_t, NoiseKind> truth;
  truth.reserve(tags.size());
  for (const auto& t : tags) truth.emplace(t.id, t.kind);
  auto kind_of = [&](std::uint64_t id) {
    auto it = truth.find(id);
    if (it == truth.end()) {
      throw std::invalid_argument("evaluate_selection: no tag for sample " + std::to_string(id));
    }
    return it->second;
  };

  std::size_t clean_tp = 0, clean_fp = 0, clean_fn = 0;
  std::size_t ood_tp = 0, ood_fp = 0, ood_fn = 0;
  auto tally = [&](std::uint64_t id, SampleKind predicted) {
    const NoiseKind actual = kind_of(id);
    const bool pc = predicted == SampleKind::Clean, ac = actual == NoiseKind::Clean;
    const bool po = predicted == SampleKind::Ood, ao = actual == NoiseKind::OodNoisy;
    clean_tp += pc && ac;
    clean_fp += pc && !ac;
    clean_fn += !pc && ac;
    ood_tp += po && ao;
    ood_fp += po && !ao;
    ood_fn += !po && ao;
  };
  for (const auto& p : partitions) {
    for (auto id : p.clean_ids) tally(id, SampleKind::Clean);
    for (auto id : p.id_ids) tally(id, SampleKind::Id);
    for (auto id : p.ood_ids) tally(id, SampleKind::Ood);
  }
  return {score_counts(clean_tp, clean_fp, clean_fn), score_counts(ood_tp, ood_fp, ood_fn)};
}

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

MetricsRow make_metrics_row(const EpochRecord& e, const SelectionScores& s) {
  MetricsRow r;
  r.epoch = e.epoch + 1;  // epochs completed
  r.train_loss = e.mean_loss.total;
  r.l_cls = e.mean_loss.l_cls;
  r.l_con_s = e.mean_loss.l_con_s;
  r.l_con_n = e.mean_loss.l_con_n;
  r.l_con_f = e.mean_loss.l_con_f;
  r.test_acc = e.test_accuracy;
  r.clean_precision = s.clean.precision;
  r.clean_recall = s.clean.recall;
  r.clean_f1 = s.clean.f1;
  r.ood_precision = s.ood.precision;
  r.ood_recall = s.ood.recall;
  r.ood_f1 = s.ood.f1;
  r.mean_tau_clean = mean_of(e.tau_clean);
  r.mean_tau_ood = mean_of(e.tau_ood);
  return r;
}

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> columns = {
      "epoch",          "train_loss",   "l_cls",          "l_con_s",
      "l_con_n",        "l_con_f",      "test_acc",       "clean_precision",
      "clean_recall",   "clean_f1",     "ood_precision",  "ood_recall",
      "ood_f1",         "mean_tau_clean", "mean_tau_ood"};
  return columns;
}

std::string metrics_header() {
  std::string out;
  for (const auto& c : metrics_columns()) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out + '\n';
}

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf, end);
}

std::string format_metrics_row(const MetricsRow& r) {
  const double values[] = {r.train_loss,      r.l_cls,        r.l_con_s,  r.l_con_n,
                           r.l_con_f,         r.test_acc,     r.clean_precision,
                           r.clean_recall,    r.clean_f1,     r.ood_precision,
                           r.ood_recall,      r.ood_f1,       r.mean_tau_clean,
                           r.mean_tau_ood};
  std::string out = std::to_string(r.epoch);
  for (double v : values) {
    out += ',';
    out += format_number(v);
  }
  return out + '\n';
}

}  // namespace josnc
