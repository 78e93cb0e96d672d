#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "josnc/config.hpp"
#include "josnc/harness.hpp"
#include "josnc/metrics.hpp"

using namespace josnc;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"({
  "method": "josnc",
  "dataset": {
    "n_id_classes": 4,
    "n_ood_classes": 1,
    "per_class": 40,
    "test_per_class": 20,
    "dim": 8,
    "spread": 1.0,
    "seed": 3,
    "noise": {"kind": "symmetric", "rate_id": 0.4}
  },
  "model": {"hidden": [16], "embed_dim": 8},
  "train": {
    "seed": 5,
    "epochs": 5,
    "warmup_epochs": 2,
    "batch_size": 32,
    "kappa": 2,
    "knn_k": 4,
    "queue_capacity": 128
  }
})";

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("josnc_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small(const std::string& dir, Method method = Method::JoSnc) {
  auto c = parse_config(kSmall);
  c.method = method;
  apply_method(c.train, method);
  c.output_dir = dir;
  return c;
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("missing train.seed is named with its line") {
  const auto text = replace(kSmall, "\"seed\": 5,", "");
  try {
    parse_config(text);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("train.seed") != std::string::npos);
    CHECK(msg.find("line 14") != std::string::npos);
  }
}

TEST_CASE("schema violations") {
  CHECK_THROWS_WITH_AS(parse_config(replace(kSmall, "\"epochs\": 5", "\"epochs\": \"5\"")),
                       doctest::Contains("train.epochs"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(replace(kSmall, "\"batch_size\"", "\"batchsize\"")),
                       doctest::Contains("line 18"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(replace(kSmall, "\"josnc\"", "\"magic\"")),
                       doctest::Contains("method"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(replace(kSmall, "\"rate_id\": 0.4", "\"rate_id\": 1.2")),
                       doctest::Contains("dataset.noise.rate_id"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(replace(kSmall, "\"warmup_epochs\": 2", "\"warmup_epochs\": 9")),
                       doctest::Contains("train.warmup_epochs"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(replace(kSmall, "\"dim\": 8", "\"dim\": 1")),
                       doctest::Contains("dataset.dim"), ConfigError);
  CHECK_THROWS_AS(parse_config("{ not json"), ConfigError);
}

TEST_CASE("resolved config round-trips") {
  for (const char* name : {"sym20", "sym50", "sym80", "asym40", "openset-sym40"}) {
    const auto c = preset(name);
    const auto j = to_json(c);
    CHECK(to_json(parse_config(j.dump(2))) == j);
  }
  CHECK_THROWS(preset("nope"));
  const auto os = preset("openset-sym40");
  CHECK(os.dataset.n_id_classes == 8);
  CHECK(os.dataset.n_ood_classes == 2);
  CHECK(os.dataset.per_class == 500);
  CHECK(os.dataset.dim == 32);
  CHECK(os.noise.rate_id == 0.4);
  CHECK(os.train.epochs == 60);
}

TEST_CASE("method switches") {
  TrainConfig t;
  apply_method(t, Method::Standard);
  CHECK_FALSE(t.robust);
  apply_method(t, Method::SelectOnly);
  CHECK(t.robust);
  CHECK_FALSE(t.use_scon);
  CHECK_FALSE(t.use_ncon);
  CHECK_FALSE(t.use_fcon);
  apply_method(t, Method::SCon);
  CHECK(t.use_scon);
  CHECK_FALSE(t.use_ncon);
  apply_method(t, Method::SConNCon);
  CHECK(t.use_ncon);
  CHECK_FALSE(t.use_fcon);
  apply_method(t, Method::JoSnc);
  CHECK(t.use_fcon);
  CHECK(parse_method("scon-ncon") == Method::SConNCon);
}

TEST_CASE("metrics columns are fixed") {
  const std::vector<std::string> expected{
      "epoch",          "train_loss",     "l_cls",        "l_con_s",    "l_con_n",
      "l_con_f",        "test_acc",       "clean_precision", "clean_recall", "clean_f1",
      "ood_precision",  "ood_recall",     "ood_f1",       "mean_tau_clean", "mean_tau_ood"};
  CHECK(metrics_columns() == expected);
  CHECK(metrics_header() == "epoch,train_loss,l_cls,l_con_s,l_con_n,l_con_f,test_acc,"
                            "clean_precision,clean_recall,clean_f1,ood_precision,ood_recall,"
                            "ood_f1,mean_tau_clean,mean_tau_ood\n");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0) == "1");
  CHECK(std::strtod(format_number(1.0 / 3.0).c_str(), nullptr) == 1.0 / 3.0);
}

TEST_CASE("selection metrics") {
  std::vector<SampleTags> tags;
  for (std::uint64_t id = 0; id < 10; ++id) {
    const auto kind = id < 6 ? NoiseKind::Clean : id < 8 ? NoiseKind::IdNoisy : NoiseKind::OodNoisy;
    tags.push_back({id, 0, kind});
  }

  SUBCASE("perfect") {
    Partition p;
    for (const auto& t : tags)
      p.add(t.id, t.kind == NoiseKind::Clean ? SampleKind::Clean
                  : t.kind == NoiseKind::IdNoisy ? SampleKind::Id : SampleKind::Ood);
    const auto s = evaluate_selection(std::vector<Partition>{p}, tags);
    CHECK(s.clean.f1 == 1.0);
    CHECK(s.ood.f1 == 1.0);
  }
  SUBCASE("everything clean") {
    Partition p;
    for (const auto& t : tags) p.add(t.id, SampleKind::Clean);
    const auto s = evaluate_selection(std::vector<Partition>{p}, tags);
    CHECK(s.clean.recall == 1.0);
    CHECK(s.clean.precision == doctest::Approx(0.6));
    CHECK(s.ood.recall == 0.0);
    CHECK(s.ood.f1 == 0.0);
  }
  SUBCASE("unknown ids are rejected") {
    Partition p;
    p.add(99, SampleKind::Clean);
    CHECK_THROWS_AS(evaluate_selection(std::vector<Partition>{p}, tags), std::invalid_argument);
  }
  SUBCASE("confusion-matrix oracle") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> pick(0, 2);
    std::vector<Partition> parts(5);
    int m[3][3] = {};  // [actual][predicted]
    for (int round = 0; round < 5; ++round) {
      for (const auto& t : tags) {
        const int k = pick(rng);
        parts[round].add(t.id, static_cast<SampleKind>(k));
        ++m[static_cast<int>(t.kind)][k];
      }
    }
    const auto s = evaluate_selection(parts, tags);
    auto f1 = [](double tp, double fp, double fn) {
      const double p = tp / (tp + fp), r = tp / (tp + fn);
      return 2 * p * r / (p + r);
    };
    const double ctp = m[0][0], cfp = m[1][0] + m[2][0], cfn = m[0][1] + m[0][2];
    const double otp = m[2][2], ofp = m[0][2] + m[1][2], ofn = m[2][0] + m[2][1];
    CHECK(s.clean.f1 == doctest::Approx(f1(ctp, cfp, cfn)).epsilon(1e-12));
    CHECK(s.clean.precision == doctest::Approx(ctp / (ctp + cfp)).epsilon(1e-12));
    CHECK(s.ood.f1 == doctest::Approx(f1(otp, ofp, ofn)).epsilon(1e-12));
    CHECK(s.ood.recall == doctest::Approx(otp / (otp + ofn)).epsilon(1e-12));
  }
  SUBCASE("empty problem") {
    const auto s = score_counts(0, 0, 0);
    CHECK(s.f1 == 1.0);
    CHECK(score_counts(0, 3, 0).f1 == 0.0);
  }
}

TEST_CASE("run artifacts, determinism and reruns") {
  const auto dir = scratch("run");
  const auto summary = run_experiment(small(dir.string()));
  CHECK_FALSE(summary.diverged);
  CHECK(summary.rows.size() == 5);
  CHECK(summary.partition_violations == 0);
  for (const char* f : {"metrics.csv", "config.resolved.json", "run.json", "steps.csv",
                        "thresholds.csv", "checkpoint.bin", "checkpoint.json"}) {
    CHECK(fs::exists(dir / f));
  }
  const auto manifest = nlohmann::json::parse(slurp(dir / "run.json"));
  CHECK(manifest["train_seed"] == 5);
  CHECK(manifest["status"] == "completed");
  CHECK(manifest["version"].get<std::string>() == build_version());

  const auto again = scratch("run_again");
  run_experiment(small(again.string()));
  CHECK(slurp(dir / "metrics.csv") == slurp(again / "metrics.csv"));

  auto resolved = load_config((dir / "config.resolved.json").string());
  const auto rerun = scratch("rerun");
  resolved.output_dir = rerun.string();
  run_experiment(resolved);
  CHECK(slurp(dir / "metrics.csv") == slurp(rerun / "metrics.csv"));

  const auto table = read_metrics(dir / "metrics.csv");
  CHECK(table.columns == metrics_columns());
  CHECK(table.rows.size() == 5);
  CHECK(table.rows.front()[0] == 1.0);

  for (const auto& d : {dir, again, rerun}) fs::remove_all(d);
}

TEST_CASE("standard runs have no consistency terms") {
  const auto dir = scratch("standard");
  run_experiment(small(dir.string(), Method::Standard));
  const auto table = read_metrics(dir / "metrics.csv");
  for (const char* col : {"l_con_s", "l_con_n", "l_con_f"})
    for (double v : table.column(col)) CHECK(v == 0.0);
  for (double v : table.column("clean_recall")) CHECK(v == 1.0);
  fs::remove_all(dir);
}

TEST_CASE("compare") {
  const auto a = scratch("cmp_a"), b = scratch("cmp_b");
  auto ca = small(a.string());
  ca.train.epochs = 12;
  run_experiment(ca);
  auto cb = small(b.string(), Method::Standard);
  cb.train.epochs = 12;
  run_experiment(cb);

  const auto same = compare_runs(a, a);
  CHECK(same.epochs.size() == 12);
  for (const auto& row : same.deltas)
    for (double d : row) CHECK(d == 0.0);
  for (const auto& [k, v] : same.last10_delta) CHECK(v == 0.0);

  const auto report = compare_runs(b, a);
  const auto acc_a = read_metrics(a / "metrics.csv").column("test_acc");
  double mean = 0;
  for (std::size_t i = acc_a.size() - 10; i < acc_a.size(); ++i) mean += acc_a[i] / 10;
  CHECK(report.last10_b.at("test_acc") == doctest::Approx(mean).epsilon(1e-12));
  const auto j = report.to_json();
  CHECK(j["per_epoch"].size() == 12);
  CHECK(j["last10_delta"].contains("test_acc"));
  CHECK(report.to_text().find("test_acc") != std::string::npos);

  std::ofstream(b / "metrics.csv") << "epoch,test_acc\n1,0.5\n";
  CHECK_THROWS_AS(compare_runs(a, b), std::runtime_error);
  CHECK(last_n_mean({}) == 0.0);
  CHECK(last_n_mean({1.0, 2.0, 3.0}) == 2.0);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("run command exit codes and output override") {
  const auto dir = scratch("cmd");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << replace(kSmall, "\"seed\": 5,", "");
  CHECK(run_command((dir / "bad.json").string()) == kExitConfig);
  CHECK(run_command((dir / "missing.json").string()) == kExitConfig);

  std::ofstream(dir / "good.json") << kSmall;
  const auto out = dir / "override";
  setenv("JOSNC_OUTPUT_DIR", out.c_str(), 1);
  CHECK(run_command((dir / "good.json").string()) == kExitOk);
  unsetenv("JOSNC_OUTPUT_DIR");
  CHECK(fs::exists(out / "metrics.csv"));
  fs::remove_all(dir);
}

TEST_CASE("divergence keeps partial artifacts") {
  const auto dir = scratch("diverge");
  auto c = small(dir.string());
  c.train.learning_rate = 1e300;
  c.train.optimizer.momentum = 0.0;
  const auto summary = run_experiment(c);
  CHECK(summary.diverged);
  CHECK_FALSE(summary.diagnostic.empty());
  CHECK(fs::exists(dir / "metrics.csv"));
  CHECK(fs::exists(dir / "checkpoint_last_good.bin"));
  CHECK(nlohmann::json::parse(slurp(dir / "run.json"))["status"] == "diverged");
  fs::remove_all(dir);
}
