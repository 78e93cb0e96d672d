#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "josnc/divergence.hpp"
#include "josnc/network.hpp"
#include "josnc/tensor.hpp"

namespace josnc {

struct QueueEntry {
  std::vector<double> key;  // unit-norm key embedding
  std::uint16_t label = 0;  // observed label
  double p_clean = 0.0;     // clean likelihood when enqueued
  ProbVec pred;             // prediction when enqueued
  std::uint64_t sample_id = 0;
};

struct Neighbor {
  double similarity = 0.0;
  std::uint64_t sample_id = 0;
  std::uint16_t label = 0;
  double p_clean = 0.0;
  std::vector<double> pred;
};

/// Bounded FIFO of key embeddings. Eviction is strictly oldest-first.
///
/// Nearest-neighbor queries are exact scans by cosine similarity (a dot
/// product, since keys are unit-norm). Equal similarities are ordered newest
/// first.
class EmbedQueue {
 public:
  EmbedQueue(std::size_t capacity, std::size_t embed_dim, std::size_t classes);

  // Throws std::invalid_argument for keys that are not unit-norm within 1e-9
  // or have the wrong dimension; the queue is left unchanged in that case.
  void enqueue(std::span<const QueueEntry> batch);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t embed_dim() const { return embed_dim_; }
  bool empty() const { return size_ == 0; }

  // nullopt when fewer than k entries remain after dropping `exclude_id`.
  std::optional<std::vector<Neighbor>> knn(std::span<const double> query, std::size_t k,
                                           std::optional<std::uint64_t> exclude_id) const;

  // One query per row of `queries`; exclude_ids[i] applies to row i.
  std::vector<std::optional<std::vector<Neighbor>>> knn_batch(
      const Tensor& queries, std::size_t k, std::span<const std::uint64_t> exclude_ids) const;

  // Stored keys, oldest first, as a size x embed_dim matrix.
  Tensor keys() const;
  // Stored entries, oldest first.
  std::vector<QueueEntry> entries() const;

  std::vector<NamedTensor> named_tensors() const;
  static EmbedQueue from_named_tensors(const std::vector<NamedTensor>& tensors,
                                       std::size_t capacity);

 private:
  std::size_t slot_of(std::size_t age_rank) const;  // 0 = oldest
  std::vector<Neighbor> select(std::span<const double> sims, std::size_t k,
                               std::optional<std::uint64_t> exclude_id) const;

  std::size_t capacity_;
  std::size_t embed_dim_;
  std::size_t classes_;
  std::size_t size_ = 0;
  std::size_t head_ = 0;  // next slot to write
  std::uint64_t next_seq_ = 0;

  Tensor keys_;  // capacity x embed_dim ring buffer
  Tensor preds_;  // capacity x classes
  std::vector<std::uint16_t> labels_;
  std::vector<double> p_clean_;
  std::vector<std::uint64_t> ids_;
  std::vector<std::uint64_t> seq_;  // insertion counter, larger = newer
};

}  // namespace josnc
