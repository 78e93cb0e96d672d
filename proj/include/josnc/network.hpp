#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "josnc/autodiff.hpp"
#include "josnc/tensor.hpp"

namespace josnc {

struct NetworkShape {
  std::size_t input_dim = 32;
  std::vector<std::size_t> hidden{64, 64};
  std::size_t classes = 8;
  std::size_t embed_dim = 32;

  bool operator==(const NetworkShape&) const = default;
};

struct ParamSlot {
  std::string name;
  std::vector<std::size_t> shape;
};

// Parameter order: encoder.{i}.weight/bias, classifier.weight/bias,
// projection.weight/bias. Weights are (in x out), biases (1 x out).
std::vector<ParamSlot> param_layout(const NetworkShape& shape);

/// Student network: encoder MLP with ReLU feeding a classifier head and an
/// L2-normalized projection head. Parameters live on the autodiff tape.
struct ModelParams {
  NetworkShape shape;
  std::vector<ad::Var> tensors;

  static ModelParams init(const NetworkShape& shape, std::uint64_t seed);
  static ModelParams zeros(const NetworkShape& shape);
  void zero_grad();
};

/// Mean-teacher copy. Plain tensors, never differentiated.
struct TeacherParams {
  NetworkShape shape;
  std::vector<Tensor> tensors;

  static TeacherParams copy_of(const ModelParams& student);
};

struct ForwardOutput {
  ad::Var logits;
  ad::Var prob;       // softmax(logits), one row per sample
  ad::Var embedding;  // unit-norm rows
};

ForwardOutput forward(const ModelParams& params, const Tensor& batch);
ForwardOutput forward(const TeacherParams& params, const Tensor& batch);

// teacher <- decay * teacher + (1 - decay) * student
void ema_update(TeacherParams& teacher, const ModelParams& student, double decay);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

std::vector<NamedTensor> named_tensors(const ModelParams& student, const TeacherParams& teacher);
void load_named_tensors(const std::vector<NamedTensor>& tensors, ModelParams& student,
                        TeacherParams& teacher);

/// Checkpoint: `<prefix>.bin` holds the concatenated little-endian f64 data,
/// `<prefix>.json` the manifest (name, shape, element offset per tensor).
void write_checkpoint(const std::string& prefix, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(const std::string& prefix);

}  // namespace josnc
