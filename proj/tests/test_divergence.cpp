#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "josnc/divergence.hpp"

using namespace josnc;

namespace {

// Plain long-double reference, no floor.
long double ref_kl(const std::vector<double>& p, const std::vector<double>& q) {
  long double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0) s += p[i] * std::log2l(static_cast<long double>(p[i]) / q[i]);
  }
  return s;
}

long double ref_js(const std::vector<double>& p, const std::vector<double>& q) {
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return 0.5L * ref_kl(p, m) + 0.5L * ref_kl(q, m);
}

std::vector<double> dirichlet(std::size_t c, double alpha, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(alpha, 1.0);
  std::vector<double> v(c);
  double s = 0;
  for (auto& x : v) s += (x = g(rng));
  for (auto& x : v) x /= s;
  return v;
}

}  // namespace

TEST_CASE("softmax examples") {
  const std::vector<double> zeros{0, 0, 0};
  const auto uniform = softmax(zeros);
  for (double v : uniform.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const std::vector<double> a{1.0, 2.0};
  const auto p = softmax(a);
  CHECK(std::abs(p[0] - 0.26894) < 1e-5);
  CHECK(std::abs(p[1] - 0.73106) < 1e-5);

  const std::vector<double> shifted{5.5, 5.5 + 0.7, 5.5 + 1.4};
  const std::vector<double> base{0.0, 0.7, 1.4};
  const auto s1 = softmax(shifted), s2 = softmax(base);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(s1[i] - s2[i]) < 1e-12);
}

TEST_CASE("softmax temperature sharpens") {
  const std::vector<double> a{0.2, 0.5, 0.3};
  const auto soft = softmax(a, 1.0), sharp = softmax(a, 0.1);
  CHECK(sharp[1] > soft[1]);
  const std::vector<double> scaled{2.0, 5.0, 3.0};
  const auto ref = softmax(scaled);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(sharp[i] - ref[i]) < 1e-12);
}

TEST_CASE("softmax rejects bad input") {
  const std::vector<double> bad{0.0, NAN};
  CHECK_THROWS_AS(softmax(bad), std::domain_error);
  const std::vector<double> inf{0.0, INFINITY};
  CHECK_THROWS_AS(softmax(inf), std::domain_error);
  const std::vector<double> ok{0.0, 1.0};
  CHECK_THROWS_AS(softmax(ok, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(softmax(ok, -1.0), std::invalid_argument);
}

TEST_CASE("ProbVec validation") {
  CHECK_NOTHROW(ProbVec({0.25, 0.75}));
  CHECK_THROWS_AS(ProbVec({0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(ProbVec({-0.1, 1.1}), std::invalid_argument);
  CHECK_THROWS_AS(ProbVec(std::vector<double>{}), std::invalid_argument);
  const std::vector<double> w{1, 3};
  CHECK(ProbVec::normalized(w)[1] == 0.75);
}

TEST_CASE("kl examples") {
  const ProbVec p({0.5, 0.5}), q({0.75, 0.25});
  CHECK(kl_divergence(p, p) == 0.0);
  CHECK(std::abs(kl_divergence(p, q) - 0.20752) < 1e-5);
  CHECK(std::abs(kl_divergence(p, q) - static_cast<double>(ref_kl({0.5, 0.5}, {0.75, 0.25}))) <
        1e-11);

  const double s = 0.05;
  CHECK(kl_divergence(ProbVec({1 - s, s}), p) > 0.0);
}

TEST_CASE("kl rejects missing support") {
  CHECK_THROWS_AS(kl_divergence(ProbVec({0.5, 0.5}), ProbVec({1.0, 0.0})), std::domain_error);
  CHECK_NOTHROW(kl_divergence(ProbVec({1.0, 0.0}), ProbVec({0.5, 0.5})));
}

TEST_CASE("js examples") {
  const ProbVec p({0.5, 0.5});
  CHECK(js_divergence(p, p) == 0.0);
  CHECK(js_divergence(ProbVec({1, 0}), ProbVec({0, 1})) == doctest::Approx(1.0).epsilon(1e-11));
  CHECK(std::abs(js_divergence(p, ProbVec({1, 0})) - 0.31128) < 1e-5);
}

TEST_CASE("random pairs: bounds, symmetry, identity") {
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<std::size_t> classes(2, 100);
  std::uniform_real_distribution<double> alpha(0.05, 3.0);
  int n_bad_bound = 0, n_bad_sym = 0, n_bad_ref = 0, n_bad_id = 0, n_bad_kl = 0, n_bad_pos = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto c = classes(rng);
    const auto a = alpha(rng);
    const auto pv = dirichlet(c, a, rng), qv = dirichlet(c, a, rng);
    const ProbVec p(pv), q(qv);
    const double js = js_divergence(p, q);
    if (js < 0.0 || js > 1.0) ++n_bad_bound;
    if (std::abs(js - js_divergence(q, p)) > 1e-12) ++n_bad_sym;
    if (std::abs(js - static_cast<double>(ref_js(pv, qv))) > 1e-9) ++n_bad_ref;
    if (js_divergence(p, p) > 1e-12 || kl_divergence(p, p) != 0.0) ++n_bad_id;
    if (js <= 1e-12) ++n_bad_pos;
    bool q_positive = true;
    for (double v : qv) q_positive = q_positive && v > 0.0;
    if (q_positive && kl_divergence(p, q) < 0.0) ++n_bad_kl;
  }
  CHECK(n_bad_bound == 0);
  CHECK(n_bad_sym == 0);
  CHECK(n_bad_ref == 0);
  CHECK(n_bad_id == 0);
  CHECK(n_bad_pos == 0);
  CHECK(n_bad_kl == 0);
}
