#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "josnc/rng.hpp"

namespace josnc {

/// What the training path is allowed to see about a sample.
struct TrainSample {
  std::uint64_t id = 0;
  std::vector<double> x;
  std::uint16_t label = 0;
};

struct AugmentConfig {
  double jitter_sigma = 0.1;
  double mask_rate = 0.1;
};

struct ViewPair {
  std::vector<double> v;
  std::vector<double> v_prime;
};

/// Draws two independent views, each Gaussian jitter followed by
/// coordinate masking.
ViewPair augment_views(std::span<const double> x, const AugmentConfig& config, Rng& rng);

/// Flat binary sample file: header ("JSNC1", section byte 0, u64 count,
/// u32 classes, u32 dim) then per sample u64 id, u16 observed label and dim
/// little-endian f32 features. Ground-truth tags never appear here.
void write_samples(const std::string& path, std::span<const TrainSample> samples,
                   std::uint32_t n_classes, std::uint32_t dim);

struct SampleFile {
  std::uint32_t n_classes = 0;
  std::uint32_t dim = 0;
  std::vector<TrainSample> samples;
};

SampleFile read_samples(const std::string& path);

}  // namespace josnc
