#include <stdexcept>
#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "josnc/network.hpp"

using namespace josnc;

namespace {

NetworkShape small_shape() {
  NetworkShape s;
  s.input_dim = 8;
  s.hidden = {16, 12};
  s.classes = 5;
  s.embed_dim = 6;
  return s;
}

Tensor random_batch(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Tensor t = Tensor::matrix(n, d);
  for (auto& v : t.values()) v = normal(rng);
  return t;
}

}  // namespace

TEST_CASE("parameter layout") {
  const auto layout = param_layout(small_shape());
  REQUIRE(layout.size() == 8);
  CHECK(layout[0].name == "encoder.0.weight");
  CHECK(layout[0].shape == std::vector<std::size_t>{8, 16});
  CHECK(layout[3].shape == std::vector<std::size_t>{1, 12});
  CHECK(layout[4].name == "classifier.weight");
  CHECK(layout[4].shape == std::vector<std::size_t>{12, 5});
  CHECK(layout[7].name == "projection.bias");
  CHECK(layout[7].shape == std::vector<std::size_t>{1, 6});
}

TEST_CASE("zero weights give uniform predictions") {
  const auto params = ModelParams::zeros(small_shape());
  const auto out = forward(params, random_batch(10, 8, 1, 3.0));
  for (double p : out.prob.value().values()) CHECK(p == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("rows are independent of their batch") {
  const auto params = ModelParams::init(small_shape(), 3);
  auto batch = random_batch(4, 8, 2);
  for (std::size_t j = 0; j < 8; ++j) batch.at(3, j) = batch.at(1, j);
  const auto out = forward(params, batch);
  for (const auto* t : {&out.logits.value(), &out.prob.value(), &out.embedding.value()}) {
    for (std::size_t j = 0; j < t->cols(); ++j) CHECK(t->at(1, j) == t->at(3, j));
  }
  const auto single = forward(params, Tensor::row(batch.row_span(1)));
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(std::abs(single.prob.value().at(0, j) - out.prob.value().at(1, j)) < 1e-15);
  }
}

TEST_CASE("embeddings are unit norm") {
  const auto params = ModelParams::init(small_shape(), 5);
  const auto out = forward(params, random_batch(1000, 8, 4, 2.0));
  const auto& e = out.embedding.value();
  std::size_t bad = 0;
  for (std::size_t r = 0; r < e.rows(); ++r) {
    double n2 = 0;
    for (double v : e.row_span(r)) n2 += v * v;
    bad += std::abs(std::sqrt(n2) - 1.0) > 1e-9;
  }
  CHECK(bad == 0);
}

TEST_CASE("probabilities are softmax of logits") {
  const auto params = ModelParams::init(small_shape(), 6);
  const auto out = forward(params, random_batch(7, 8, 5));
  for (std::size_t r = 0; r < 7; ++r) {
    double z = 0;
    for (std::size_t j = 0; j < 5; ++j) z += std::exp(out.logits.value().at(r, j));
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(std::abs(out.prob.value().at(r, j) - std::exp(out.logits.value().at(r, j)) / z) <
            1e-12);
    }
  }
}

TEST_CASE("teacher forward matches student and stays off the tape") {
  const auto student = ModelParams::init(small_shape(), 9);
  const auto teacher = TeacherParams::copy_of(student);
  const auto batch = random_batch(6, 8, 8);
  const auto s = forward(student, batch);
  const auto t = forward(teacher, batch);
  CHECK(s.prob.value() == t.prob.value());
  CHECK(s.embedding.value() == t.embedding.value());
  CHECK(s.prob.requires_grad());
  CHECK_FALSE(t.prob.requires_grad());
  CHECK_FALSE(t.embedding.requires_grad());
}

TEST_CASE("mean teacher update") {
  const auto shape = small_shape();
  const auto student = ModelParams::init(shape, 1);
  const auto original = TeacherParams::copy_of(ModelParams::init(shape, 2));

  auto frozen = original;
  ema_update(frozen, student, 1.0);
  CHECK(frozen.tensors == original.tensors);

  auto copied = original;
  ema_update(copied, student, 0.0);
  for (std::size_t i = 0; i < copied.tensors.size(); ++i) {
    CHECK(copied.tensors[i] == student.tensors[i].value());
  }

  auto ones = ModelParams::zeros(shape);
  for (auto& t : ones.tensors)
    for (auto& v : t.mutable_value().values()) v = 1.0;
  auto zero_teacher = TeacherParams::copy_of(ModelParams::zeros(shape));
  ema_update(zero_teacher, ones, 0.99);
  for (const auto& t : zero_teacher.tensors)
    for (double v : t.values()) CHECK(std::abs(v - 0.01) < 1e-15);

  CHECK_THROWS_AS(ema_update(zero_teacher, ones, 1.5), std::invalid_argument);
  auto other = NetworkShape(shape);
  other.hidden = {16};
  CHECK_THROWS_AS(ema_update(zero_teacher, ModelParams::zeros(other), 0.5), std::invalid_argument);
}

TEST_CASE("initialization is seeded") {
  const auto a = ModelParams::init(small_shape(), 11);
  const auto b = ModelParams::init(small_shape(), 11);
  const auto c = ModelParams::init(small_shape(), 12);
  CHECK(a.tensors[0].value() == b.tensors[0].value());
  CHECK_FALSE(a.tensors[0].value() == c.tensors[0].value());
}

TEST_CASE("checkpoint round trip") {
  const auto shape = small_shape();
  const auto student = ModelParams::init(shape, 21);
  auto teacher = TeacherParams::copy_of(student);
  ema_update(teacher, ModelParams::init(shape, 22), 0.5);
  const auto prefix = (std::filesystem::temp_directory_path() / "josnc_test_ckpt").string();
  write_checkpoint(prefix, named_tensors(student, teacher));

  auto student2 = ModelParams::zeros(shape);
  auto teacher2 = TeacherParams::copy_of(student2);
  load_named_tensors(read_checkpoint(prefix), student2, teacher2);
  for (std::size_t i = 0; i < student.tensors.size(); ++i) {
    CHECK(student2.tensors[i].value() == student.tensors[i].value());
    CHECK(teacher2.tensors[i] == teacher.tensors[i]);
  }

  auto wrong = shape;
  wrong.embed_dim = 7;
  auto s3 = ModelParams::zeros(wrong);
  auto t3 = TeacherParams::copy_of(s3);
  CHECK_THROWS(load_named_tensors(read_checkpoint(prefix), s3, t3));
  std::filesystem::remove(prefix + ".bin");
  std::filesystem::remove(prefix + ".json");
  CHECK_THROWS(read_checkpoint(prefix));
}

TEST_CASE("forward rejects wrong input width") {
  const auto params = ModelParams::init(small_shape(), 1);
  CHECK_THROWS_AS(forward(params, random_batch(2, 7, 1)), std::invalid_argument);
}
