#pragma once

// Synthetic open-set noisy datasets. Everything here knows the ground truth;
// only `split_tags` output without its tags half may reach the trainer.

#include <cstdint>
#include <string>
#include <vector>

#include "josnc/sample.hpp"

namespace josnc {

enum class NoiseKind : std::uint8_t { Clean = 0, IdNoisy = 1, OodNoisy = 2 };
enum class NoiseType { Symmetric, Asymmetric };

const char* to_string(NoiseKind kind);
const char* to_string(NoiseType type);

struct BlobSpec {
  int n_id_classes = 8;
  int n_ood_classes = 2;
  int per_class = 500;
  int test_per_class = 200;
  int dim = 32;
  double spread = 1.0;
  std::uint64_t seed = 0;
  // Smallest neighbor count K the downstream KNN will ask for.
  int knn_k = 10;
};

struct LabeledPoint {
  std::uint64_t id = 0;
  std::vector<double> x;
  int label = 0;  // ground truth over the full label space, ID classes first
};

struct BlobDataset {
  int n_id_classes = 0;
  int n_ood_classes = 0;
  int dim = 0;
  std::vector<std::vector<double>> centroids;
  std::vector<LabeledPoint> train;
  std::vector<LabeledPoint> test;  // ID classes only
};

// Class centroids ~ N(0, I); samples = centroid + spread * N(0, I).
BlobDataset make_blobs(const BlobSpec& spec);

struct NoiseSpec {
  NoiseType kind = NoiseType::Symmetric;
  double rate_id = 0.0;
  int ood_class_count = 0;
};

struct NoisySample {
  std::uint64_t id = 0;
  std::vector<double> x;
  std::uint16_t observed_label = 0;
  std::uint16_t true_label = 0;
  NoiseKind noise_kind = NoiseKind::Clean;
};

struct NoisyDataset {
  int n_classes = 0;  // known (ID) label space
  int dim = 0;
  std::vector<NoisySample> samples;
};

// Corrupts exactly round(rate_id * N_id) in-distribution labels (symmetric:
// uniform over the other ID classes; asymmetric: c -> (c + 1) mod C_id) and
// gives every OOD sample a uniform ID label.
NoisyDataset inject_noise(const BlobDataset& data, const NoiseSpec& spec, std::uint64_t seed);

struct SampleTags {
  std::uint64_t id = 0;
  std::uint16_t true_label = 0;
  NoiseKind kind = NoiseKind::Clean;
};

struct SplitDataset {
  std::vector<TrainSample> train;
  std::vector<SampleTags> tags;
};

SplitDataset split_tags(const NoisyDataset& data);

// Clean held-out samples with their true labels.
std::vector<TrainSample> test_samples(const BlobDataset& data);

/// `.tags` sidecar: header ("JSNC1", section byte 1, u64 count, u32 classes,
/// u32 dim = 0) then per sample u64 id, u16 true label, u8 noise kind.
void write_tags(const std::string& path, const std::vector<SampleTags>& tags,
                std::uint32_t n_classes);
std::vector<SampleTags> read_tags(const std::string& path);

}  // namespace josnc
