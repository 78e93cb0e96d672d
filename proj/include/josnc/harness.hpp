#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "josnc/config.hpp"
#include "josnc/metrics.hpp"

namespace josnc {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitDivergence = 3 };

const char* build_version();

// Keeps large per-step buffers on the heap instead of fresh mappings. glibc only; no-op elsewhere.
void tune_allocator();

struct RunSummary {
  std::vector<MetricsRow> rows;
  std::size_t partition_violations = 0;
  std::size_t steps = 0;
  bool diverged = false;
  std::string diagnostic;

  double final_test_acc() const;
  double last10_test_acc() const;
  double best_test_acc() const;
};

struct ExperimentData {
  SplitDataset split;
  std::vector<TrainSample> test;
};

// Blobs, noise and the tag split for `config`; deterministic in dataset.seed.
ExperimentData prepare_data(const ExperimentConfig& config);

// Runs one experiment. Artifacts go to `config.output_dir`, or nowhere when
// `write_artifacts` is false. Divergence is reported in the summary, not thrown.
RunSummary run_experiment(const ExperimentConfig& config, bool write_artifacts = true);

// `run <config>`: loads, applies the JOSNC_OUTPUT_DIR override, runs and maps
// failures onto exit codes. Messages go to stderr.
int run_command(const std::string& config_path);

struct MetricsTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(const std::string& name) const;
};

MetricsTable read_metrics(const std::filesystem::path& csv);

struct CompareReport {
  std::vector<std::string> metrics;  // every column but `epoch`
  std::vector<int> epochs;           // epochs present in both runs
  std::vector<std::vector<double>> deltas;  // [epoch][metric], B - A
  std::map<std::string, double> last10_a;
  std::map<std::string, double> last10_b;
  std::map<std::string, double> last10_delta;

  nlohmann::ordered_json to_json() const;
  std::string to_text() const;
};

// Throws std::runtime_error when the two runs do not share a column schema.
CompareReport compare_runs(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b);

// Mean of the last min(10, n) entries; 0 for an empty input.
double last_n_mean(const std::vector<double>& values, std::size_t n = 10);

}  // namespace josnc
