#include <stdexcept>
#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>

#include "doctest.h"
#include "josnc/embed_queue.hpp"

using namespace josnc;

namespace {

std::vector<double> unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  double ss = 0;
  for (auto& x : v) {
    x = n(rng);
    ss += x * x;
  }
  for (auto& x : v) x /= std::sqrt(ss);
  return v;
}

std::vector<double> basis(std::size_t dim, std::size_t i) {
  std::vector<double> v(dim, 0.0);
  v[i] = 1.0;
  return v;
}

QueueEntry entry(std::vector<double> key, std::uint64_t id, std::uint16_t label = 0,
                 double p_clean = 0.5, std::size_t classes = 3) {
  return {std::move(key), label, p_clean, ProbVec::uniform(classes), id};
}

struct Logged {
  std::vector<double> key;
  std::uint64_t id;
  std::uint64_t seq;
};

// Exhaustive scan over a replayed log of what should still be stored.
std::vector<std::uint64_t> brute_force(const std::deque<Logged>& log, std::span<const double> q,
                                       std::size_t k, std::optional<std::uint64_t> exclude,
                                       std::vector<double>& sims_out) {
  std::vector<std::pair<double, const Logged*>> all;
  for (const auto& e : log) {
    if (exclude && e.id == *exclude) continue;
    double dot = 0.0;
    for (std::size_t d = 0; d < q.size(); ++d) dot += q[d] * e.key[d];
    all.push_back({dot, &e});
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->seq > b.second->seq;
  });
  std::vector<std::uint64_t> ids;
  sims_out.clear();
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) {
    ids.push_back(all[i].second->id);
    sims_out.push_back(all[i].first);
  }
  return ids;
}

}  // namespace

TEST_CASE("FIFO eviction") {
  EmbedQueue q(4, 2, 3);
  std::vector<QueueEntry> batch;
  for (std::uint64_t i = 0; i < 6; ++i) batch.push_back(entry(basis(2, i % 2), i));
  q.enqueue(batch);
  CHECK(q.size() == 4);
  const auto e = q.entries();
  for (std::size_t i = 0; i < 4; ++i) CHECK(e[i].sample_id == i + 2);
}

TEST_CASE("empty batch is a no-op") {
  EmbedQueue q(4, 2, 3);
  q.enqueue(std::vector<QueueEntry>{entry(basis(2, 0), 1)});
  q.enqueue(std::vector<QueueEntry>{});
  CHECK(q.size() == 1);
  CHECK(q.entries()[0].sample_id == 1);
}

TEST_CASE("invalid keys are rejected atomically") {
  EmbedQueue q(4, 2, 3);
  q.enqueue(std::vector<QueueEntry>{entry(basis(2, 0), 1)});
  std::vector<QueueEntry> bad{entry(basis(2, 1), 2), entry({0.5, 0.5}, 3)};
  CHECK_THROWS_AS(q.enqueue(bad), std::invalid_argument);
  CHECK(q.size() == 1);
  CHECK_THROWS_AS(q.enqueue(std::vector<QueueEntry>{entry({1.0, 0.0, 0.0}, 4)}),
                  std::invalid_argument);
  CHECK_THROWS_AS(q.enqueue(std::vector<QueueEntry>{entry(basis(2, 0), 5, 0, 0.5, 4)}),
                  std::invalid_argument);
  CHECK_THROWS_AS(EmbedQueue(0, 2, 3), std::invalid_argument);
}

TEST_CASE("stored ids replay the insertion log") {
  std::mt19937_64 rng(5);
  const std::size_t cap = 37;
  EmbedQueue q(cap, 4, 3);
  std::vector<std::uint64_t> log;
  std::uint64_t next = 100;
  for (int round = 0; round < 200; ++round) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 20)(rng);
    std::vector<QueueEntry> batch;
    for (std::size_t i = 0; i < n; ++i) {
      batch.push_back(entry(unit(4, rng), next));
      log.push_back(next++);
    }
    q.enqueue(batch);
    const std::size_t keep = std::min(cap, log.size());
    std::vector<std::uint64_t> expected(log.end() - static_cast<std::ptrdiff_t>(keep), log.end());
    std::vector<std::uint64_t> stored;
    for (const auto& e : q.entries()) stored.push_back(e.sample_id);
    REQUIRE(stored == expected);
  }
}

TEST_CASE("self similarity") {
  std::mt19937_64 rng(6);
  EmbedQueue q(16, 8, 3);
  std::vector<QueueEntry> batch;
  for (std::uint64_t i = 0; i < 10; ++i) batch.push_back(entry(unit(8, rng), i, i % 3));
  q.enqueue(batch);
  const auto hit = q.knn(batch[4].key, 1, std::nullopt);
  REQUIRE(hit);
  CHECK((*hit)[0].sample_id == 4);
  CHECK((*hit)[0].similarity == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((*hit)[0].label == 1);

  const auto excluded = q.knn(batch[4].key, 1, std::uint64_t{4});
  REQUIRE(excluded);
  CHECK((*excluded)[0].sample_id != 4);
}

TEST_CASE("orthogonal keys tie and fall back to recency") {
  EmbedQueue q(8, 8, 3);
  std::vector<QueueEntry> batch;
  for (std::uint64_t i = 1; i < 6; ++i) batch.push_back(entry(basis(8, i), i));
  q.enqueue(batch);
  const auto r = q.knn(basis(8, 0), 5, std::nullopt);
  REQUIRE(r);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK((*r)[i].similarity == 0.0);
    CHECK((*r)[i].sample_id == 5 - i);
  }
}

TEST_CASE("too few neighbours gives nullopt") {
  EmbedQueue q(8, 2, 3);
  CHECK_FALSE(q.knn(basis(2, 0), 1, std::nullopt));
  q.enqueue(std::vector<QueueEntry>{entry(basis(2, 0), 1), entry(basis(2, 1), 2)});
  CHECK(q.knn(basis(2, 0), 2, std::nullopt));
  CHECK_FALSE(q.knn(basis(2, 0), 2, std::uint64_t{1}));
  CHECK_FALSE(q.knn(basis(2, 0), 3, std::nullopt));
}

TEST_CASE("KNN equals a brute-force scan") {
  std::mt19937_64 rng(42);
  const std::size_t dim = 32, cap = 1000;
  EmbedQueue q(cap, dim, 3);
  std::deque<Logged> log;
  std::uint64_t seq = 0;
  // Overfill so the ring has wrapped.
  for (std::uint64_t i = 0; i < 1300; ++i) {
    auto key = unit(dim, rng);
    q.enqueue(std::vector<QueueEntry>{entry(key, i % 1100)});
    log.push_back({key, i % 1100, seq++});
    if (log.size() > cap) log.pop_front();
  }
  // A few exact duplicates to exercise the tie rule.
  for (int i = 0; i < 5; ++i) {
    const auto key = log[static_cast<std::size_t>(i) * 100].key;
    q.enqueue(std::vector<QueueEntry>{entry(key, 5000 + i)});
    log.push_back({key, 5000u + i, seq++});
    log.pop_front();
  }

  Tensor queries = Tensor::matrix(100, dim);
  std::vector<std::uint64_t> excludes;
  std::size_t mismatched = 0, batch_mismatched = 0;
  for (std::size_t t = 0; t < 100; ++t) {
    const auto query = t % 10 == 0 ? log[t * 7].key : unit(dim, rng);
    std::copy(query.begin(), query.end(), queries.row_span(t).begin());
    const std::optional<std::uint64_t> exclude =
        t % 3 == 0 ? std::optional<std::uint64_t>(log[t].id) : std::nullopt;
    excludes.push_back(exclude.value_or(~std::uint64_t{0}));
    const std::size_t k = 1 + t % 20;
    std::vector<double> sims;
    const auto expected = brute_force(log, query, k, exclude, sims);
    const auto got = q.knn(query, k, exclude);
    REQUIRE(got);
    std::vector<std::uint64_t> ids;
    for (std::size_t i = 0; i < got->size(); ++i) {
      ids.push_back((*got)[i].sample_id);
      if ((*got)[i].similarity != sims[i]) ++mismatched;
    }
    if (ids != expected) ++mismatched;
  }
  CHECK(mismatched == 0);

  const auto batched = q.knn_batch(queries, 10, excludes);
  for (std::size_t t = 0; t < 100; ++t) {
    std::vector<double> sims;
    const std::optional<std::uint64_t> exclude =
        excludes[t] == ~std::uint64_t{0} ? std::nullopt : std::optional(excludes[t]);
    const auto expected = brute_force(log, queries.row_span(t), 10, exclude, sims);
    REQUIRE(batched[t]);
    for (std::size_t i = 0; i < 10; ++i) {
      if ((*batched[t])[i].sample_id != expected[i]) ++batch_mismatched;
      if (std::abs((*batched[t])[i].similarity - sims[i]) > 1e-12) ++batch_mismatched;
    }
  }
  CHECK(batch_mismatched == 0);
}

TEST_CASE("neighbour payload") {
  EmbedQueue q(4, 2, 3);
  QueueEntry e{basis(2, 0), 2, 0.75, ProbVec({0.1, 0.2, 0.7}), 9};
  q.enqueue(std::vector<QueueEntry>{e});
  const auto r = q.knn(basis(2, 0), 1, std::nullopt);
  REQUIRE(r);
  CHECK((*r)[0].label == 2);
  CHECK((*r)[0].p_clean == 0.75);
  CHECK((*r)[0].pred == std::vector<double>{0.1, 0.2, 0.7});
}

TEST_CASE("state round trip") {
  std::mt19937_64 rng(8);
  EmbedQueue q(5, 4, 3);
  std::vector<QueueEntry> batch;
  for (std::uint64_t i = 0; i < 7; ++i) batch.push_back(entry(unit(4, rng), i, i % 3, 0.1 * i));
  q.enqueue(batch);
  const auto restored = EmbedQueue::from_named_tensors(q.named_tensors(), 5);
  CHECK(restored.size() == q.size());
  CHECK(restored.keys() == q.keys());
  const auto a = q.entries(), b = restored.entries();
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].sample_id == b[i].sample_id);
    CHECK(a[i].label == b[i].label);
    CHECK(a[i].p_clean == b[i].p_clean);
  }
}
