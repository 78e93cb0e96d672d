#include "josnc/network.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "josnc/rng.hpp"

namespace josnc {

namespace {

template <typename Tensors>
ForwardOutput forward_impl(const NetworkShape& shape, const Tensors& params, const Tensor& batch,
                           auto&& as_var) {
  if (batch.cols() != shape.input_dim) {
    throw std::invalid_argument("forward: input has " + std::to_string(batch.cols()) +
                                " features, encoder expects " + std::to_string(shape.input_dim));
  }
  ad::Var h = ad::Var::constant(batch);
  std::size_t k = 0;
  for (std::size_t layer = 0; layer < shape.hidden.size(); ++layer) {
    h = ad::relu(ad::add(ad::matmul(h, as_var(params[k])), as_var(params[k + 1])));
    k += 2;
  }
  ForwardOutput out;
  out.logits = ad::add(ad::matmul(h, as_var(params[k])), as_var(params[k + 1]));
  out.prob = ad::softmax(out.logits, 1.0);
  out.embedding =
      ad::l2_normalize(ad::add(ad::matmul(h, as_var(params[k + 2])), as_var(params[k + 3])));
  return out;
}

void check_congruent(const TeacherParams& teacher, const ModelParams& student) {
  if (!(teacher.shape == student.shape) || teacher.tensors.size() != student.tensors.size()) {
    throw std::invalid_argument("teacher and student structures differ");
  }
  for (std::size_t i = 0; i < teacher.tensors.size(); ++i) {
    if (!teacher.tensors[i].same_shape(student.tensors[i].value())) {
      throw std::invalid_argument("teacher and student shapes differ at tensor " +
                                  std::to_string(i));
    }
  }
}

}  // namespace

std::vector<ParamSlot> param_layout(const NetworkShape& shape) {
  std::vector<ParamSlot> slots;
  std::size_t in = shape.input_dim;
  for (std::size_t i = 0; i < shape.hidden.size(); ++i) {
    const std::string base = "encoder." + std::to_string(i);
    slots.push_back({base + ".weight", {in, shape.hidden[i]}});
    slots.push_back({base + ".bias", {1, shape.hidden[i]}});
    in = shape.hidden[i];
  }
  slots.push_back({"classifier.weight", {in, shape.classes}});
  slots.push_back({"classifier.bias", {1, shape.classes}});
  slots.push_back({"projection.weight", {in, shape.embed_dim}});
  slots.push_back({"projection.bias", {1, shape.embed_dim}});
  return slots;
}

ModelParams ModelParams::init(const NetworkShape& shape, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x1417}));
  std::normal_distribution<double> normal(0.0, 1.0);
  ModelParams p;
  p.shape = shape;
  for (const auto& slot : param_layout(shape)) {
    Tensor t(slot.shape, 0.0);
    if (slot.name.ends_with(".weight")) {
      // He initialization for the ReLU encoder; heads use the same scale.
      const double stddev = std::sqrt(2.0 / static_cast<double>(slot.shape[0]));
      for (auto& v : t.values()) v = stddev * normal(rng);
    }
    p.tensors.push_back(ad::Var::parameter(std::move(t)));
  }
  return p;
}

ModelParams ModelParams::zeros(const NetworkShape& shape) {
  ModelParams p;
  p.shape = shape;
  for (const auto& slot : param_layout(shape)) {
    p.tensors.push_back(ad::Var::parameter(Tensor(slot.shape, 0.0)));
  }
  return p;
}

void ModelParams::zero_grad() {
  for (auto& t : tensors) t.zero_grad();
}

TeacherParams TeacherParams::copy_of(const ModelParams& student) {
  TeacherParams t;
  t.shape = student.shape;
  for (const auto& v : student.tensors) t.tensors.push_back(v.value());
  return t;
}

ForwardOutput forward(const ModelParams& params, const Tensor& batch) {
  return forward_impl(params.shape, params.tensors, batch, [](const ad::Var& v) { return v; });
}

ForwardOutput forward(const TeacherParams& params, const Tensor& batch) {
  return forward_impl(params.shape, params.tensors, batch,
                      [](const Tensor& t) { return ad::Var::constant(t); });
}

void ema_update(TeacherParams& teacher, const ModelParams& student, double decay) {
  if (!(decay >= 0.0 && decay <= 1.0)) throw std::invalid_argument("ema decay must lie in [0, 1]");
  check_congruent(teacher, student);
  for (std::size_t i = 0; i < teacher.tensors.size(); ++i) {
    auto& t = teacher.tensors[i].values();
    const auto& s = student.tensors[i].value().values();
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = decay * t[j] + (1.0 - decay) * s[j];
  }
}

std::vector<NamedTensor> named_tensors(const ModelParams& student, const TeacherParams& teacher) {
  check_congruent(teacher, student);
  const auto layout = param_layout(student.shape);
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    out.push_back({"student/" + layout[i].name, student.tensors[i].value()});
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    out.push_back({"teacher/" + layout[i].name, teacher.tensors[i]});
  }
  return out;
}

void load_named_tensors(const std::vector<NamedTensor>& tensors, ModelParams& student,
                        TeacherParams& teacher) {
  check_congruent(teacher, student);
  const auto layout = param_layout(student.shape);
  auto find = [&](const std::string& name) -> const Tensor& {
    for (const auto& nt : tensors)
      if (nt.name == name) return nt.tensor;
    throw std::runtime_error("checkpoint is missing tensor " + name);
  };
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& s = find("student/" + layout[i].name);
    const auto& t = find("teacher/" + layout[i].name);
    if (s.shape() != layout[i].shape || t.shape() != layout[i].shape) {
      throw std::runtime_error("checkpoint tensor " + layout[i].name + " has the wrong shape");
    }
    student.tensors[i].mutable_value() = s;
    teacher.tensors[i] = t;
  }
}

void write_checkpoint(const std::string& prefix, const std::vector<NamedTensor>& tensors) {
  std::ofstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open " + prefix + ".bin for writing");
  nlohmann::json manifest;
  manifest["format"] = "josnc-checkpoint-1";
  manifest["dtype"] = "f64le";
  auto& entries = manifest["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& nt : tensors) {
    entries.push_back({{"name", nt.name}, {"shape", nt.tensor.shape()}, {"offset", offset}});
    for (double v : nt.tensor.values()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) bin.put(static_cast<char>((bits >> (8 * b)) & 0xff));
    }
    offset += nt.tensor.size();
  }
  manifest["total_elements"] = offset;
  std::ofstream json(prefix + ".json");
  json << manifest.dump(2) << '\n';
  if (!bin || !json) throw std::runtime_error("failed writing checkpoint " + prefix);
}

std::vector<NamedTensor> read_checkpoint(const std::string& prefix) {
  std::ifstream json(prefix + ".json");
  if (!json) throw std::runtime_error("cannot open " + prefix + ".json");
  const auto manifest = nlohmann::json::parse(json);
  std::ifstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open " + prefix + ".bin");
  std::vector<char> raw((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  const std::size_t total = manifest.at("total_elements").get<std::size_t>();
  if (raw.size() != total * 8) throw std::runtime_error(prefix + ".bin size disagrees with manifest");

  std::vector<NamedTensor> out;
  for (const auto& e : manifest.at("tensors")) {
    auto shape = e.at("shape").get<std::vector<std::size_t>>();
    const auto offset = e.at("offset").get<std::size_t>();
    const auto n = shape_numel(shape);
    if (offset + n > total) throw std::runtime_error("checkpoint entry overruns data");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[(offset + i) * 8 + b]))
                << (8 * b);
      }
      data[i] = std::bit_cast<double>(bits);
    }
    out.push_back({e.at("name").get<std::string>(), Tensor(std::move(shape), std::move(data))});
  }
  return out;
}

}  // namespace josnc
