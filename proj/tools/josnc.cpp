#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "josnc/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Open-set noisy-label training on synthetic blobs"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "train one experiment described by a JSON config");
  run->add_option("config", config_path, "config file")->required();

  std::string dir_a, dir_b;
  bool as_json = false;
  auto* compare = app.add_subcommand("compare", "report metric deltas B - A between two runs");
  compare->add_option("dir_a", dir_a, "baseline run directory")->required();
  compare->add_option("dir_b", dir_b, "candidate run directory")->required();
  compare->add_flag("--json", as_json, "machine-readable output");

  std::string preset_name;
  auto* gen_config = app.add_subcommand("gen-config", "print a preset config");
  gen_config->add_option("preset", preset_name, "sym20, sym50, sym80, asym40 or openset-sym40")
      ->required();

  std::string data_config, data_out;
  auto* gen_data = app.add_subcommand("gen-data", "write the noisy training set and its tags");
  gen_data->add_option("config", data_config, "config file")->required();
  gen_data->add_option("output", data_out, "output path (the tags go to <output>.tags)")
      ->required();

  CLI11_PARSE(app, argc, argv);
  josnc::tune_allocator();

  if (*run) return josnc::run_command(config_path);

  try {
    if (*compare) {
      const auto report = josnc::compare_runs(dir_a, dir_b);
      std::cout << (as_json ? report.to_json().dump(2) + "\n" : report.to_text());
      return josnc::kExitOk;
    }
    if (*gen_config) {
      std::cout << josnc::to_json(josnc::preset(preset_name)).dump(2) << "\n";
      return josnc::kExitOk;
    }
    if (*gen_data) {
      const auto config = josnc::load_config(data_config);
      const auto data = josnc::prepare_data(config);
      const auto classes = static_cast<std::uint32_t>(config.dataset.n_id_classes);
      josnc::write_samples(data_out, data.split.train, classes,
                           static_cast<std::uint32_t>(config.dataset.dim));
      josnc::write_tags(data_out + ".tags", data.split.tags, classes);
      std::cout << data.split.train.size() << " samples written to " << data_out << "\n";
      return josnc::kExitOk;
    }
  } catch (const josnc::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return josnc::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return josnc::kExitFailure;
  }
  return josnc::kExitFailure;
}
