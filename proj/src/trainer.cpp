#include "josnc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace josnc {

namespace {

void require(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) throw std::invalid_argument("train." + field + " " + rule);
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](double v) { return std::isfinite(v); });
}

ProbVec row_prob(const Tensor& t, std::size_t r) {
  auto row = t.row_span(r);
  return ProbVec(std::vector<double>(row.begin(), row.end()));
}

}  // namespace

void TrainConfig::validate() const {
  require(epochs > 0, "epochs", "must be positive");
  require(warmup_epochs > 0 && warmup_epochs < epochs, "warmup_epochs",
          "must satisfy 0 < warmup_epochs < epochs");
  require(batch_size > 0, "batch_size", "must be positive");
  require(learning_rate > 0.0, "learning_rate", "must be positive");
  require(optimizer.momentum >= 0.0 && optimizer.momentum < 1.0, "momentum", "must lie in [0, 1)");
  require(epsilon >= 0.0 && epsilon < 1.0, "epsilon", "must lie in [0, 1)");
  require(partial.kappa >= 1, "kappa", "must be at least 1");
  require(partial.temperature_in > 0.0 && partial.temperature_out > 0.0, "t_pll",
          "temperatures must be positive");
  require(knn_k >= 1, "knn_k", "must be at least 1");
  require(weights.alpha >= 0.0 && weights.beta >= 0.0 && weights.gamma >= 0.0, "weights",
          "must be non-negative");
  require(ema_decay >= 0.0 && ema_decay <= 1.0, "ema_decay", "must lie in [0, 1]");
  require(tau_ema_warmup >= 0.0 && tau_ema_warmup <= 1.0, "tau_ema_warmup", "must lie in [0, 1]");
  require(tau_ema_main >= 0.0 && tau_ema_main <= 1.0, "tau_ema_main", "must lie in [0, 1]");
  require(t_ssl > 0.0, "t_ssl", "must be positive");
  require(queue_capacity > 0, "queue_capacity", "must be positive");
  require(augment.jitter_sigma >= 0.0, "aug_jitter", "must be non-negative");
  require(augment.mask_rate >= 0.0 && augment.mask_rate < 1.0, "aug_mask_rate",
          "must lie in [0, 1)");
  require(!fixed_tau_clean || (*fixed_tau_clean >= 0.0 && *fixed_tau_clean <= 1.0),
          "fixed_tau_clean", "must lie in [0, 1]");
  require(!fixed_tau_ood || (*fixed_tau_ood >= 0.0 && *fixed_tau_ood <= 1.0), "fixed_tau_ood",
          "must lie in [0, 1]");
}

struct Trainer::Batch {
  std::vector<std::uint64_t> ids;
  std::vector<std::uint16_t> labels;
  Tensor x;
  Tensor v;
  Tensor v_prime;
};

Trainer::Trainer(TrainConfig config, NetworkShape shape, std::span<const TrainSample> train,
                 std::span<const TrainSample> test)
    : config_(std::move(config)),
      classes_(shape.classes),
      train_(train),
      test_(test),
      student_(ModelParams::init(shape, config_.seed)),
      teacher_(TeacherParams::copy_of(student_)),
      optimizer_(student_.tensors, config_.optimizer),
      queue_(config_.queue_capacity, shape.embed_dim, shape.classes),
      thresholds_(shape.classes) {
  config_.validate();
  if (config_.partial.kappa > classes_) {
    throw std::invalid_argument("train.kappa exceeds the number of classes");
  }
  for (const auto& s : train_) {
    if (s.x.size() != shape.input_dim) throw std::invalid_argument("training sample dimension mismatch");
    if (s.label >= classes_) throw std::invalid_argument("training label out of range");
    if (!std::all_of(s.x.begin(), s.x.end(), [](double v) { return std::isfinite(v); })) {
      throw std::invalid_argument("training sample " + std::to_string(s.id) + " has non-finite features");
    }
  }
  last_good_ = state_tensors();
}

std::vector<NamedTensor> Trainer::state_tensors() const {
  auto out = named_tensors(student_, teacher_);
  auto q = queue_.named_tensors();
  out.insert(out.end(), std::make_move_iterator(q.begin()), std::make_move_iterator(q.end()));
  return out;
}

Trainer::Batch Trainer::make_batch(std::span<const std::size_t> indices) const {
  const std::size_t n = indices.size();
  const std::size_t dim = student_.shape.input_dim;
  Batch b;
  b.x = Tensor::matrix(n, dim);
  b.v = Tensor::matrix(n, dim);
  b.v_prime = Tensor::matrix(n, dim);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& s = train_[indices[r]];
    b.ids.push_back(s.id);
    b.labels.push_back(s.label);
    Rng rng(derive_seed(config_.seed, {0xa0a0, s.id, static_cast<std::uint64_t>(epoch_)}));
    auto views = augment_views(s.x, config_.augment, rng);
    std::copy(s.x.begin(), s.x.end(), b.x.row_span(r).begin());
    std::copy(views.v.begin(), views.v.end(), b.v.row_span(r).begin());
    std::copy(views.v_prime.begin(), views.v_prime.end(), b.v_prime.row_span(r).begin());
  }
  return b;
}

LossBreakdown Trainer::train_step(const Batch& batch, bool warmup, StepRecord& record) {
  auto& partition = record.partition;
  const int step = record.step;
  const std::size_t n = batch.ids.size();
  auto view1 = forward(student_, batch.v);
  auto view2 = forward(student_, batch.v_prime);
  auto keys = forward(teacher_, batch.v_prime);
  const Tensor& prob = view1.prob.value();
  const Tensor& prob2 = view2.prob.value();
  const Tensor& key_embed = keys.embedding.value();
  if (!all_finite(prob) || !all_finite(prob2) || !all_finite(key_embed)) {
    throw NumericDivergence("non-finite forward pass at epoch " + std::to_string(epoch_) +
                                " step " + std::to_string(step),
                            epoch_, step, last_good_);
  }

  std::vector<std::optional<std::vector<Neighbor>>> neighbors(n);
  if (!warmup && config_.use_queue && !queue_.empty()) {
    neighbors = queue_.knn_batch(key_embed, config_.knn_k, batch.ids);
  }
  std::optional<Tensor> teacher_prob;
  if (!warmup) teacher_prob = forward(teacher_, batch.x).prob.value();

  std::vector<TrainingTarget> targets;
  targets.reserve(n);
  std::vector<double> rho_s(n, 0.0);
  std::vector<double> rho_n(n, 0.0);
  Tensor mixtures = prob;
  std::vector<QueueEntry> entries;
  entries.reserve(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto label = batch.labels[i];
    const ProbVec p = row_prob(prob, i);
    const ProbVec p2 = row_prob(prob2, i);
    const auto scores =
        score_sample(p, p2, smoothed_label(label, classes_, config_.epsilon), label, neighbors[i]);
    thresholds_.accumulate(scores, label);
    record.scores.push_back(scores);

    const SampleKind kind =
        warmup ? SampleKind::Clean : classify_sample(scores, label, thresholds_);
    partition.add(batch.ids[i], kind);
    switch (kind) {
      case SampleKind::Clean:
        targets.push_back(make_lsr_target(label, classes_, config_.epsilon));
        break;
      case SampleKind::Id:
        targets.push_back(make_pll_target(row_prob(*teacher_prob, i), config_.partial));
        break;
      case SampleKind::Ood:
        targets.push_back(make_negative_target(row_prob(*teacher_prob, i)));
        break;
    }
    if (kind != SampleKind::Ood) rho_s[i] = 1.0;
    if (kind != SampleKind::Ood && neighbors[i]) {
      rho_n[i] = 1.0;
      const auto mix = neighbor_mixture(*neighbors[i]);
      std::copy(mix.begin(), mix.end(), mixtures.row_span(i).begin());
    }
    if (config_.use_queue) {
      auto key = key_embed.row_span(i);
      entries.push_back({{key.begin(), key.end()},
                         label,
                         std::clamp(scores.p_clean, 0.0, 1.0),
                         p,
                         batch.ids[i]});
    }
  }

  LossParts parts;
  parts.cls = classification_loss(view1.prob, targets);
  if (!warmup) {
    if (config_.use_scon) parts.con_s = self_consistency_loss(view1.prob, view2.prob, rho_s);
    if (config_.use_ncon && config_.use_queue) {
      parts.con_n = neighbor_consistency_loss(view1.prob, mixtures, rho_n);
    }
    if (config_.use_fcon && config_.use_queue) {
      parts.con_f = feature_consistency_loss(view1.embedding, key_embed, queue_.keys(), config_.t_ssl);
    }
  }
  auto loss = total_loss(parts, config_.weights);
  if (!std::isfinite(loss.breakdown.total)) {
    throw NumericDivergence("non-finite loss at epoch " + std::to_string(epoch_) + " step " +
                                std::to_string(step),
                            epoch_, step, last_good_);
  }

  student_.zero_grad();
  ad::backward(loss.total);
  optimizer_.step(cosine_learning_rate(config_.learning_rate, epoch_, config_.warmup_epochs,
                                       config_.epochs));
  ema_update(teacher_, student_, config_.ema_decay);
  if (config_.use_queue) queue_.enqueue(entries);
  return loss.breakdown;
}

void Trainer::run_epoch(bool warmup) {
  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(derive_seed(config_.seed, {0x5f0f, static_cast<std::uint64_t>(epoch_)}));
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  EpochRecord record;
  record.epoch = epoch_;
  record.warmup = warmup;
  record.learning_rate =
      cosine_learning_rate(config_.learning_rate, epoch_, config_.warmup_epochs, config_.epochs);
  record.mean_loss.weights = config_.weights;

  int step = 0;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size, ++step) {
    const std::size_t end = std::min(order.size(), start + config_.batch_size);
    const auto batch = make_batch(std::span(order).subspan(start, end - start));

    StepRecord sr;
    sr.epoch = epoch_;
    sr.step = step;
    sr.warmup = warmup;
    try {
      sr.loss = train_step(batch, warmup, sr);
    } catch (const std::domain_error& e) {
      throw NumericDivergence(std::string("numeric failure: ") + e.what(), epoch_, step, last_good_);
    }
    sr.partition_sound = sr.partition.is_sound(batch.ids);
    if (!sr.partition_sound) ++record.partition_violations;
    record.n_clean += sr.partition.clean_ids.size();
    record.n_id += sr.partition.id_ids.size();
    record.n_ood += sr.partition.ood_ids.size();

    auto& m = record.mean_loss;
    m.l_cls += sr.loss.l_cls;
    m.l_con_s += sr.loss.l_con_s;
    m.l_con_n += sr.loss.l_con_n;
    m.l_con_f += sr.loss.l_con_f;
    m.total += sr.loss.total;
    if (observer_.on_step) {
      sr.batch_ids = batch.ids;
      observer_.on_step(sr);
    }
  }
  if (step > 0) {
    auto& m = record.mean_loss;
    const double steps = static_cast<double>(step);
    m.l_cls /= steps;
    m.l_con_s /= steps;
    m.l_con_n /= steps;
    m.l_con_f /= steps;
    m.total /= steps;
  }

  thresholds_.roll(warmup ? config_.tau_ema_warmup : config_.tau_ema_main);
  if (config_.fixed_tau_clean || config_.fixed_tau_ood) {
    for (std::size_t c = 0; c < classes_; ++c) {
      thresholds_.set(c, config_.fixed_tau_clean.value_or(thresholds_.tau_clean(c)),
                      config_.fixed_tau_ood.value_or(thresholds_.tau_ood(c)));
    }
  }
  record.tau_clean.assign(thresholds_.tau_clean().begin(), thresholds_.tau_clean().end());
  record.tau_ood.assign(thresholds_.tau_ood().begin(), thresholds_.tau_ood().end());
  record.test_accuracy = test_accuracy();
  violations_ += record.partition_violations;

  ++epoch_;
  last_good_ = state_tensors();
  history_.push_back(record);
  if (observer_.on_epoch) observer_.on_epoch(history_.back());
}

void Trainer::warmup_epoch() { run_epoch(true); }

void Trainer::robust_epoch() {
  if (epoch_ == 0) {
    throw std::logic_error("robust_epoch needs thresholds from at least one prior epoch");
  }
  run_epoch(false);
}

FitResult Trainer::fit() {
  if (config_.fixed_tau_clean || config_.fixed_tau_ood) {
    for (std::size_t c = 0; c < classes_; ++c) {
      thresholds_.set(c, config_.fixed_tau_clean.value_or(0.0), config_.fixed_tau_ood.value_or(0.0));
    }
  }
  while (epoch_ < config_.epochs) {
    if (config_.robust && epoch_ >= config_.warmup_epochs) {
      robust_epoch();
    } else {
      warmup_epoch();
    }
  }
  return {history_, violations_};
}

double Trainer::test_accuracy() const {
  if (test_.empty()) return 0.0;
  const std::size_t dim = student_.shape.input_dim;
  std::size_t correct = 0;
  constexpr std::size_t kChunk = 512;
  for (std::size_t start = 0; start < test_.size(); start += kChunk) {
    const std::size_t end = std::min(test_.size(), start + kChunk);
    Tensor x = Tensor::matrix(end - start, dim);
    for (std::size_t r = start; r < end; ++r) {
      std::copy(test_[r].x.begin(), test_[r].x.end(), x.row_span(r - start).begin());
    }
    const auto logits = forward(student_, x).logits.value();
    for (std::size_t r = start; r < end; ++r) {
      auto row = logits.row_span(r - start);
      const auto pred = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      if (pred == test_[r].label) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(test_.size());
}

}  // namespace josnc
