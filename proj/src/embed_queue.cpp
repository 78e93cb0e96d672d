#include "josnc/embed_queue.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace josnc {

namespace {
constexpr double kUnitNormTolerance = 1e-9;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
}  // namespace

EmbedQueue::EmbedQueue(std::size_t capacity, std::size_t embed_dim, std::size_t classes)
    : capacity_(capacity),
      embed_dim_(embed_dim),
      classes_(classes),
      keys_(Tensor::matrix(capacity, embed_dim)),
      preds_(Tensor::matrix(capacity, classes)),
      labels_(capacity),
      p_clean_(capacity),
      ids_(capacity),
      seq_(capacity) {
  if (capacity == 0) throw std::invalid_argument("EmbedQueue: capacity must be positive");
}

void EmbedQueue::enqueue(std::span<const QueueEntry> batch) {
  for (const auto& e : batch) {
    if (e.key.size() != embed_dim_) throw std::invalid_argument("enqueue: key dimension mismatch");
    if (e.pred.size() != classes_) throw std::invalid_argument("enqueue: prediction size mismatch");
    double ss = 0.0;
    for (double v : e.key) ss += v * v;
    if (std::abs(std::sqrt(ss) - 1.0) > kUnitNormTolerance) {
      throw std::invalid_argument("enqueue: key for sample " + std::to_string(e.sample_id) +
                                  " is not unit-norm");
    }
    if (!(e.p_clean >= 0.0 && e.p_clean <= 1.0)) {
      throw std::invalid_argument("enqueue: p_clean outside [0, 1]");
    }
  }
  for (const auto& e : batch) {
    const std::size_t slot = head_;
    std::copy(e.key.begin(), e.key.end(), keys_.row_span(slot).begin());
    std::copy(e.pred.begin(), e.pred.end(), preds_.row_span(slot).begin());
    labels_[slot] = e.label;
    p_clean_[slot] = e.p_clean;
    ids_[slot] = e.sample_id;
    seq_[slot] = next_seq_++;
    head_ = (head_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
  }
}

std::size_t EmbedQueue::slot_of(std::size_t age_rank) const {
  const std::size_t oldest = size_ < capacity_ ? 0 : head_;
  return (oldest + age_rank) % capacity_;
}

std::vector<Neighbor> EmbedQueue::select(std::span<const double> sims, std::size_t k,
                                         std::optional<std::uint64_t> exclude_id) const {
  std::vector<std::size_t> candidates;
  candidates.reserve(size_);
  for (std::size_t s = 0; s < size_; ++s) {
    if (!exclude_id || ids_[s] != *exclude_id) candidates.push_back(s);
  }
  if (candidates.size() < k) return {};
  auto before = [&](std::size_t a, std::size_t b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return seq_[a] > seq_[b];
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                    candidates.end(), before);
  std::vector<Neighbor> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t s = candidates[i];
    auto pred = preds_.row_span(s);
    out.push_back({sims[s], ids_[s], labels_[s], p_clean_[s], {pred.begin(), pred.end()}});
  }
  return out;
}

std::optional<std::vector<Neighbor>> EmbedQueue::knn(std::span<const double> query, std::size_t k,
                                                     std::optional<std::uint64_t> exclude_id) const {
  if (query.size() != embed_dim_) throw std::invalid_argument("knn: query dimension mismatch");
  std::vector<double> sims(size_);
  for (std::size_t s = 0; s < size_; ++s) {
    double dot = 0.0;
    auto key = keys_.row_span(s);
    for (std::size_t d = 0; d < embed_dim_; ++d) dot += query[d] * key[d];
    sims[s] = dot;
  }
  auto picked = select(sims, k, exclude_id);
  if (picked.size() < k || k == 0) {
    if (k == 0) return std::vector<Neighbor>{};
    return std::nullopt;
  }
  return picked;
}

std::vector<std::optional<std::vector<Neighbor>>> EmbedQueue::knn_batch(
    const Tensor& queries, std::size_t k, std::span<const std::uint64_t> exclude_ids) const {
  if (queries.cols() != embed_dim_) throw std::invalid_argument("knn: query dimension mismatch");
  if (exclude_ids.size() != queries.rows()) {
    throw std::invalid_argument("knn_batch: one exclude id per query required");
  }
  const auto rows = static_cast<Eigen::Index>(queries.rows());
  const auto dim = static_cast<Eigen::Index>(embed_dim_);
  Eigen::Map<const RowMatrix> q(queries.data().data(), rows, dim);
  Eigen::Map<const RowMatrix> keys(keys_.data().data(), static_cast<Eigen::Index>(size_), dim);
  const RowMatrix sims = q * keys.transpose();

  std::vector<std::optional<std::vector<Neighbor>>> out(queries.rows());
  for (Eigen::Index r = 0; r < rows; ++r) {
    std::span<const double> row(sims.data() + r * sims.cols(), static_cast<std::size_t>(sims.cols()));
    auto picked = select(row, k, exclude_ids[static_cast<std::size_t>(r)]);
    if (picked.size() == k && k > 0) out[static_cast<std::size_t>(r)] = std::move(picked);
  }
  return out;
}

Tensor EmbedQueue::keys() const {
  Tensor out = Tensor::matrix(size_, embed_dim_);
  for (std::size_t i = 0; i < size_; ++i) {
    auto src = keys_.row_span(slot_of(i));
    std::copy(src.begin(), src.end(), out.row_span(i).begin());
  }
  return out;
}

std::vector<QueueEntry> EmbedQueue::entries() const {
  std::vector<QueueEntry> out;
  out.reserve(size_);
  for (std::size_t i = 0; i < size_; ++i) {
    const std::size_t s = slot_of(i);
    auto key = keys_.row_span(s);
    auto pred = preds_.row_span(s);
    out.push_back({{key.begin(), key.end()},
                   labels_[s],
                   p_clean_[s],
                   ProbVec(std::vector<double>(pred.begin(), pred.end())),
                   ids_[s]});
  }
  return out;
}

std::vector<NamedTensor> EmbedQueue::named_tensors() const {
  Tensor preds = Tensor::matrix(size_, classes_);
  Tensor labels({size_}, 0.0);
  Tensor p_clean({size_}, 0.0);
  Tensor ids({size_}, 0.0);
  for (std::size_t i = 0; i < size_; ++i) {
    const std::size_t s = slot_of(i);
    auto src = preds_.row_span(s);
    std::copy(src.begin(), src.end(), preds.row_span(i).begin());
    labels[i] = labels_[s];
    p_clean[i] = p_clean_[s];
    ids[i] = static_cast<double>(ids_[s]);
  }
  return {{"queue/keys", keys()},
          {"queue/preds", std::move(preds)},
          {"queue/labels", std::move(labels)},
          {"queue/p_clean", std::move(p_clean)},
          {"queue/ids", std::move(ids)}};
}

EmbedQueue EmbedQueue::from_named_tensors(const std::vector<NamedTensor>& tensors,
                                          std::size_t capacity) {
  auto find = [&](const std::string& name) -> const Tensor& {
    for (const auto& nt : tensors)
      if (nt.name == name) return nt.tensor;
    throw std::runtime_error("checkpoint is missing " + name);
  };
  const auto& keys = find("queue/keys");
  const auto& preds = find("queue/preds");
  const auto& labels = find("queue/labels");
  const auto& p_clean = find("queue/p_clean");
  const auto& ids = find("queue/ids");
  const std::size_t n = labels.size();
  EmbedQueue q(capacity, keys.cols(), preds.cols());
  std::vector<QueueEntry> batch;
  batch.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto k = keys.row_span(i);
    auto p = preds.row_span(i);
    batch.push_back({{k.begin(), k.end()},
                     static_cast<std::uint16_t>(labels[i]),
                     p_clean[i],
                     ProbVec(std::vector<double>(p.begin(), p.end())),
                     static_cast<std::uint64_t>(ids[i])});
  }
  q.enqueue(batch);
  return q;
}

}  // namespace josnc
