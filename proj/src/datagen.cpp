#include "josnc/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "binary_io.hpp"

namespace josnc {

const char* to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::Clean: return "clean";
    case NoiseKind::IdNoisy: return "id_noisy";
    case NoiseKind::OodNoisy: return "ood_noisy";
  }
  return "?";
}

const char* to_string(NoiseType type) {
  return type == NoiseType::Symmetric ? "symmetric" : "asymmetric";
}

BlobDataset make_blobs(const BlobSpec& spec) {
  if (spec.dim < 2) throw std::invalid_argument("make_blobs: dim must be at least 2");
  if (spec.n_id_classes < 1 || spec.n_ood_classes < 0 || spec.test_per_class < 0) {
    throw std::invalid_argument("make_blobs: class counts must be positive");
  }
  if (spec.per_class < spec.knn_k + 1) {
    throw std::invalid_argument("make_blobs: per_class " + std::to_string(spec.per_class) +
                                " leaves fewer than K+1 = " + std::to_string(spec.knn_k + 1) +
                                " samples per class");
  }
  if (!(spec.spread >= 0.0)) throw std::invalid_argument("make_blobs: spread must be >= 0");

  Rng rng(derive_seed(spec.seed, {0xb10b}));
  std::normal_distribution<double> normal(0.0, 1.0);
  const int total_classes = spec.n_id_classes + spec.n_ood_classes;
  const auto dim = static_cast<std::size_t>(spec.dim);

  BlobDataset out;
  out.n_id_classes = spec.n_id_classes;
  out.n_ood_classes = spec.n_ood_classes;
  out.dim = spec.dim;
  out.centroids.assign(total_classes, std::vector<double>(dim));
  for (auto& c : out.centroids)
    for (auto& v : c) v = normal(rng);

  auto draw = [&](int label) {
    LabeledPoint p;
    p.label = label;
    p.x = out.centroids[label];
    for (auto& v : p.x) v += spec.spread * normal(rng);
    return p;
  };

  for (int c = 0; c < total_classes; ++c)
    for (int i = 0; i < spec.per_class; ++i) out.train.push_back(draw(c));
  std::shuffle(out.train.begin(), out.train.end(), rng);
  for (std::size_t i = 0; i < out.train.size(); ++i) out.train[i].id = i;

  for (int c = 0; c < spec.n_id_classes; ++c)
    for (int i = 0; i < spec.test_per_class; ++i) out.test.push_back(draw(c));
  for (std::size_t i = 0; i < out.test.size(); ++i) out.test[i].id = out.train.size() + i;
  return out;
}

NoisyDataset inject_noise(const BlobDataset& data, const NoiseSpec& spec, std::uint64_t seed) {
  if (!(spec.rate_id >= 0.0 && spec.rate_id < 1.0)) {
    throw std::invalid_argument("inject_noise: rate_id must lie in [0, 1)");
  }
  if (spec.ood_class_count != data.n_ood_classes) {
    throw std::invalid_argument("inject_noise: ood_class_count " +
                                std::to_string(spec.ood_class_count) + " but dataset has " +
                                std::to_string(data.n_ood_classes) + " OOD classes");
  }
  const int c_id = data.n_id_classes;
  if (c_id < 2) throw std::invalid_argument("inject_noise: need at least two ID classes");

  Rng rng(derive_seed(seed, {0x9015e}));
  NoisyDataset out;
  out.n_classes = c_id;
  out.dim = data.dim;
  out.samples.reserve(data.train.size());

  std::vector<std::size_t> id_positions;
  for (const auto& p : data.train) {
    NoisySample s;
    s.id = p.id;
    s.x = p.x;
    s.true_label = static_cast<std::uint16_t>(p.label);
    if (p.label < c_id) {
      s.observed_label = s.true_label;
      s.noise_kind = NoiseKind::Clean;
      id_positions.push_back(out.samples.size());
    } else {
      s.noise_kind = NoiseKind::OodNoisy;
      s.observed_label = static_cast<std::uint16_t>(
          std::uniform_int_distribution<int>(0, c_id - 1)(rng));
    }
    out.samples.push_back(std::move(s));
  }

  std::shuffle(id_positions.begin(), id_positions.end(), rng);
  const auto n_flip = static_cast<std::size_t>(
      std::llround(spec.rate_id * static_cast<double>(id_positions.size())));
  std::uniform_int_distribution<int> offset(1, c_id - 1);
  for (std::size_t k = 0; k < n_flip; ++k) {
    auto& s = out.samples[id_positions[k]];
    const int shift = spec.kind == NoiseType::Symmetric ? offset(rng) : 1;
    s.observed_label = static_cast<std::uint16_t>((s.true_label + shift) % c_id);
    s.noise_kind = NoiseKind::IdNoisy;
  }
  return out;
}

SplitDataset split_tags(const NoisyDataset& data) {
  SplitDataset out;
  out.train.reserve(data.samples.size());
  out.tags.reserve(data.samples.size());
  for (const auto& s : data.samples) {
    out.train.push_back({s.id, s.x, s.observed_label});
    out.tags.push_back({s.id, s.true_label, s.noise_kind});
  }
  return out;
}

std::vector<TrainSample> test_samples(const BlobDataset& data) {
  std::vector<TrainSample> out;
  out.reserve(data.test.size());
  for (const auto& p : data.test) out.push_back({p.id, p.x, static_cast<std::uint16_t>(p.label)});
  return out;
}

void write_tags(const std::string& path, const std::vector<SampleTags>& tags,
                std::uint32_t n_classes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  detail::write_header(out, {detail::kSectionTags, tags.size(), n_classes, 0});
  for (const auto& t : tags) {
    detail::put_le(out, t.id);
    detail::put_le(out, t.true_label);
    detail::put_le(out, static_cast<std::uint8_t>(t.kind));
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<SampleTags> read_tags(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  const auto h = detail::read_header(in, detail::kSectionTags, path);
  std::vector<SampleTags> tags(h.count);
  for (auto& t : tags) {
    t.id = detail::get_le<std::uint64_t>(in);
    t.true_label = detail::get_le<std::uint16_t>(in);
    const auto kind = detail::get_le<std::uint8_t>(in);
    if (kind > 2) throw std::runtime_error(path + ": invalid noise kind " + std::to_string(kind));
    t.kind = static_cast<NoiseKind>(kind);
  }
  return tags;
}

}  // namespace josnc
