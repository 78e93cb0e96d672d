#include "josnc/sample.hpp"

#include <fstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace josnc {

ViewPair augment_views(std::span<const double> x, const AugmentConfig& config, Rng& rng) {
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  auto draw = [&] {
    std::vector<double> v(x.begin(), x.end());
    for (auto& c : v) {
      if (config.jitter_sigma > 0.0) c += config.jitter_sigma * jitter(rng);
      if (config.mask_rate > 0.0 && coin(rng) < config.mask_rate) c = 0.0;
    }
    return v;
  };
  ViewPair views;
  views.v = draw();
  views.v_prime = draw();
  return views;
}

void write_samples(const std::string& path, std::span<const TrainSample> samples,
                   std::uint32_t n_classes, std::uint32_t dim) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  detail::write_header(out, {detail::kSectionSamples, samples.size(), n_classes, dim});
  for (const auto& s : samples) {
    if (s.x.size() != dim) throw std::invalid_argument("sample feature length differs from dim");
    detail::put_le(out, s.id);
    detail::put_le(out, s.label);
    for (double v : s.x) detail::put_f32(out, static_cast<float>(v));
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

SampleFile read_samples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  const auto h = detail::read_header(in, detail::kSectionSamples, path);
  SampleFile file{h.n_classes, h.dim, {}};
  file.samples.resize(h.count);
  for (auto& s : file.samples) {
    s.id = detail::get_le<std::uint64_t>(in);
    s.label = detail::get_le<std::uint16_t>(in);
    s.x.resize(h.dim);
    for (auto& v : s.x) v = detail::get_f32(in);
  }
  return file;
}

}  // namespace josnc
