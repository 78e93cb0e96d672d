#include "josnc/harness.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "josnc/rng.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#ifndef JOSNC_VERSION
#define JOSNC_VERSION "unknown"
#endif

namespace josnc {

namespace fs = std::filesystem;

const char* build_version() { return JOSNC_VERSION; }

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

double last_n_mean(const std::vector<double>& values, std::size_t n) {
  if (values.empty()) return 0.0;
  const std::size_t k = std::min(n, values.size());
  return std::accumulate(values.end() - static_cast<std::ptrdiff_t>(k), values.end(), 0.0) /
         static_cast<double>(k);
}

double RunSummary::final_test_acc() const { return rows.empty() ? 0.0 : rows.back().test_acc; }

double RunSummary::last10_test_acc() const {
  std::vector<double> acc;
  for (const auto& r : rows) acc.push_back(r.test_acc);
  return last_n_mean(acc);
}

double RunSummary::best_test_acc() const {
  double best = 0.0;
  for (const auto& r : rows) best = std::max(best, r.test_acc);
  return best;
}

namespace {

class Output {
 public:
  Output() = default;
  Output(const fs::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
  }
  void write(const std::string& s) {
    if (out_.is_open()) {
      out_ << s;
      out_.flush();
    }
  }

 private:
  std::ofstream out_;
};

void write_text(const fs::path& path, const std::string& text) {
  Output(path).write(text);
}

std::string pad_epoch(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d", epoch);
  return buf;
}

}  // namespace

ExperimentData prepare_data(const ExperimentConfig& config) {
  const auto blobs = make_blobs(config.dataset);
  const auto noisy = inject_noise(blobs, config.noise, derive_seed(config.dataset.seed, {0x7a95}));
  return {split_tags(noisy), test_samples(blobs)};
}

RunSummary run_experiment(const ExperimentConfig& config, bool write_artifacts) {
  const fs::path dir = config.output_dir;
  if (write_artifacts) fs::create_directories(dir);

  const auto data = prepare_data(config);
  const auto& split = data.split;

  if (write_artifacts) {
    write_text(dir / "config.resolved.json", to_json(config).dump(2) + "\n");
  }
  Output metrics, steps, thresholds;
  if (write_artifacts) {
    metrics = Output(dir / "metrics.csv");
    steps = Output(dir / "steps.csv");
    thresholds = Output(dir / "thresholds.csv");
  }
  metrics.write(metrics_header());
  steps.write("epoch,step,warmup,loss,l_cls,l_con_s,l_con_n,l_con_f,n_clean,n_id,n_ood\n");
  thresholds.write("epoch,class,tau_clean,tau_ood\n");

  Trainer trainer(config.train, config.model, split.train, data.test);
  RunSummary summary;
  std::vector<Partition> epoch_partitions;

  TrainObserver observer;
  observer.on_step = [&](const StepRecord& s) {
    ++summary.steps;
    const auto& l = s.loss;
    std::string line = std::to_string(s.epoch + 1) + ',' + std::to_string(s.step) + ',' +
                       (s.warmup ? "1" : "0");
    for (double v : {l.total, l.l_cls, l.l_con_s, l.l_con_n, l.l_con_f}) {
      line += ',' + format_number(v);
    }
    line += ',' + std::to_string(s.partition.clean_ids.size()) + ',' +
            std::to_string(s.partition.id_ids.size()) + ',' +
            std::to_string(s.partition.ood_ids.size()) + '\n';
    steps.write(line);
    epoch_partitions.push_back(s.partition);
  };
  observer.on_epoch = [&](const EpochRecord& e) {
    const auto selection = evaluate_selection(epoch_partitions, split.tags);
    epoch_partitions.clear();
    summary.rows.push_back(make_metrics_row(e, selection));
    summary.partition_violations += e.partition_violations;
    metrics.write(format_metrics_row(summary.rows.back()));
    std::string lines;
    for (std::size_t c = 0; c < e.tau_clean.size(); ++c) {
      lines += std::to_string(e.epoch + 1) + ',' + std::to_string(c) + ',' +
               format_number(e.tau_clean[c]) + ',' + format_number(e.tau_ood[c]) + '\n';
    }
    thresholds.write(lines);
    if (write_artifacts && config.checkpoint_every > 0 &&
        (e.epoch + 1) % config.checkpoint_every == 0) {
      write_checkpoint((dir / ("checkpoint_epoch" + pad_epoch(e.epoch + 1))).string(),
                       trainer.state_tensors());
    }
  };
  trainer.set_observer(observer);

  try {
    trainer.fit();
    if (write_artifacts) write_checkpoint((dir / "checkpoint").string(), trainer.state_tensors());
  } catch (const NumericDivergence& e) {
    summary.diverged = true;
    summary.diagnostic = e.what();
    if (write_artifacts) write_checkpoint((dir / "checkpoint_last_good").string(), e.last_good);
  }

  if (write_artifacts) {
    nlohmann::ordered_json manifest;
    manifest["version"] = build_version();
    manifest["method"] = to_string(config.method);
    manifest["dataset_seed"] = config.dataset.seed;
    manifest["train_seed"] = config.train.seed;
    manifest["status"] = summary.diverged ? "diverged" : "completed";
    if (summary.diverged) manifest["diagnostic"] = summary.diagnostic;
    manifest["epochs_completed"] = summary.rows.size();
    manifest["steps"] = summary.steps;
    manifest["partition_violations"] = summary.partition_violations;
    manifest["final_test_acc"] = summary.final_test_acc();
    manifest["last10_mean_test_acc"] = summary.last10_test_acc();
    manifest["best_test_acc"] = summary.best_test_acc();
    manifest["checkpoint"] = summary.diverged ? "checkpoint_last_good" : "checkpoint";
    write_text(dir / "run.json", manifest.dump(2) + "\n");
  }
  return summary;
}

int run_command(const std::string& config_path) {
  ExperimentConfig config;
  try {
    config = load_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return kExitConfig;
  }
  if (const char* dir = std::getenv("JOSNC_OUTPUT_DIR"); dir && *dir) config.output_dir = dir;
  try {
    const auto summary = run_experiment(config);
    if (summary.diverged) {
      std::cerr << "diverged: " << summary.diagnostic << " (last good state in "
                << (fs::path(config.output_dir) / "checkpoint_last_good").string() << ".bin)\n";
      return kExitDivergence;
    }
    char line[160];
    std::snprintf(line, sizeof line,
                  "%s: %zu epochs, final test acc %.4f, last-10 mean %.4f, best %.4f\n",
                  to_string(config.method), summary.rows.size(), summary.final_test_acc(),
                  summary.last10_test_acc(), summary.best_test_acc());
    std::cout << line << "artifacts in " << config.output_dir << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

std::vector<double> MetricsTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::out_of_range("no column " + name);
  const auto idx = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r[idx]);
  return out;
}

MetricsTable read_metrics(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("cannot read " + csv.string());
  MetricsTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(csv.string() + " is empty");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.columns.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    if (row.size() != table.columns.size()) {
      throw std::runtime_error(csv.string() + ": row width differs from header");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

CompareReport compare_runs(const fs::path& dir_a, const fs::path& dir_b) {
  const auto a = read_metrics(dir_a / "metrics.csv");
  const auto b = read_metrics(dir_b / "metrics.csv");
  if (a.columns != b.columns) throw std::runtime_error("metrics schemas differ between runs");
  if (a.columns.empty() || a.columns.front() != "epoch") {
    throw std::runtime_error("metrics.csv must start with an epoch column");
  }

  CompareReport report;
  report.metrics.assign(a.columns.begin() + 1, a.columns.end());
  std::map<int, const std::vector<double>*> b_rows;
  for (const auto& r : b.rows) b_rows[static_cast<int>(r[0])] = &r;
  for (const auto& r : a.rows) {
    auto it = b_rows.find(static_cast<int>(r[0]));
    if (it == b_rows.end()) continue;
    report.epochs.push_back(static_cast<int>(r[0]));
    std::vector<double> d;
    for (std::size_t i = 1; i < r.size(); ++i) d.push_back((*it->second)[i] - r[i]);
    report.deltas.push_back(std::move(d));
  }
  for (const auto& m : report.metrics) {
    report.last10_a[m] = last_n_mean(a.column(m));
    report.last10_b[m] = last_n_mean(b.column(m));
    report.last10_delta[m] = report.last10_b[m] - report.last10_a[m];
  }
  return report;
}

nlohmann::ordered_json CompareReport::to_json() const {
  nlohmann::ordered_json j;
  j["metrics"] = metrics;
  auto& per_epoch = j["per_epoch"] = nlohmann::ordered_json::array();
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    nlohmann::ordered_json row;
    row["epoch"] = epochs[e];
    for (std::size_t m = 0; m < metrics.size(); ++m) row[metrics[m]] = deltas[e][m];
    per_epoch.push_back(row);
  }
  for (const auto& [name, table] :
       {std::pair{"last10_a", &last10_a}, {"last10_b", &last10_b}, {"last10_delta", &last10_delta}}) {
    nlohmann::ordered_json block;
    for (const auto& m : metrics) block[m] = table->at(m);
    j[name] = block;
  }
  return j;
}

std::string CompareReport::to_text() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %12s %12s %12s\n", "metric", "A last10", "B last10",
                "B - A");
  out += line;
  for (const auto& m : metrics) {
    std::snprintf(line, sizeof line, "%-16s %12.6f %12.6f %+12.6f\n", m.c_str(), last10_a.at(m),
                  last10_b.at(m), last10_delta.at(m));
    out += line;
  }
  if (!epochs.empty()) {
    const auto it = std::find(metrics.begin(), metrics.end(), "test_acc");
    if (it != metrics.end()) {
      const auto idx = static_cast<std::size_t>(it - metrics.begin());
      out += "\nper-epoch test_acc delta (B - A)\n";
      for (std::size_t e = 0; e < epochs.size(); ++e) {
        std::snprintf(line, sizeof line, "  epoch %4d  %+.6f\n", epochs[e], deltas[e][idx]);
        out += line;
      }
    }
  }
  return out;
}

}  // namespace josnc
