#pragma once

// Training loop: warmup epochs on smoothed observed labels for every sample,
// then robust epochs that partition each batch into clean / ID / OOD samples,
// assign each part its own target, and add the three consistency terms.
//
// The trainer only ever sees TrainSample (features, observed label, id).

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "josnc/embed_queue.hpp"
#include "josnc/labeler.hpp"
#include "josnc/network.hpp"
#include "josnc/objective.hpp"
#include "josnc/optimizer.hpp"
#include "josnc/sample.hpp"
#include "josnc/selector.hpp"

namespace josnc {

struct TrainConfig {
  int epochs = 60;
  int warmup_epochs = 5;
  std::size_t batch_size = 128;
  double learning_rate = 0.05;
  OptimizerConfig optimizer;
  double epsilon = 0.6;  // label smoothing, also used inside the clean score
  PartialLabelConfig partial;
  std::size_t knn_k = 10;
  LossWeights weights;
  double ema_decay = 0.99;
  double tau_ema_warmup = 0.75;
  double tau_ema_main = 0.975;
  double t_ssl = 0.1;
  std::size_t queue_capacity = 4096;
  AugmentConfig augment;
  std::uint64_t seed = 0;

  // Method switches. `robust = false` trains every epoch in warmup mode.
  bool robust = true;
  bool use_scon = true;
  bool use_ncon = true;
  bool use_fcon = true;
  bool use_queue = true;

  // Pins thresholds instead of adapting them (experiments only).
  std::optional<double> fixed_tau_clean;
  std::optional<double> fixed_tau_ood;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct StepRecord {
  int epoch = 0;
  int step = 0;
  bool warmup = false;
  LossBreakdown loss;
  std::vector<std::uint64_t> batch_ids;
  Partition partition;
  bool partition_sound = true;
  std::vector<SampleScores> scores;  // aligned with batch_ids
};

struct EpochRecord {
  int epoch = 0;
  bool warmup = false;
  double learning_rate = 0.0;
  LossBreakdown mean_loss;
  double test_accuracy = 0.0;
  std::vector<double> tau_clean;
  std::vector<double> tau_ood;
  std::size_t n_clean = 0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
  std::size_t partition_violations = 0;
};

struct TrainObserver {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
};

class NumericDivergence : public std::runtime_error {
 public:
  NumericDivergence(const std::string& what, int epoch, int step,
                    std::vector<NamedTensor> last_good)
      : std::runtime_error(what), epoch(epoch), step(step), last_good(std::move(last_good)) {}
  int epoch;
  int step;
  std::vector<NamedTensor> last_good;  // state at the end of the last finished epoch
};

struct FitResult {
  std::vector<EpochRecord> epochs;
  std::size_t partition_violations = 0;
};

class Trainer {
 public:
  Trainer(TrainConfig config, NetworkShape shape, std::span<const TrainSample> train,
          std::span<const TrainSample> test);

  void warmup_epoch();
  void robust_epoch();
  FitResult fit();

  void set_observer(TrainObserver observer) { observer_ = std::move(observer); }

  int epoch() const { return epoch_; }
  const TrainConfig& config() const { return config_; }
  const ModelParams& student() const { return student_; }
  const TeacherParams& teacher() const { return teacher_; }
  const EmbedQueue& queue() const { return queue_; }
  const ThresholdState& thresholds() const { return thresholds_; }
  ThresholdState& thresholds() { return thresholds_; }
  const std::vector<EpochRecord>& history() const { return history_; }

  double test_accuracy() const;
  std::vector<NamedTensor> state_tensors() const;

 private:
  struct Batch;
  Batch make_batch(std::span<const std::size_t> indices) const;
  void run_epoch(bool warmup);
  LossBreakdown train_step(const Batch& batch, bool warmup, StepRecord& record);

  TrainConfig config_;
  std::size_t classes_;
  std::span<const TrainSample> train_;
  std::span<const TrainSample> test_;
  ModelParams student_;
  TeacherParams teacher_;
  Optimizer optimizer_;
  EmbedQueue queue_;
  ThresholdState thresholds_;
  TrainObserver observer_;
  int epoch_ = 0;
  std::vector<EpochRecord> history_;
  std::vector<NamedTensor> last_good_;
  std::size_t violations_ = 0;
};

}  // namespace josnc
