#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"

#include "josnc/datagen.hpp"
#include "josnc/network.hpp"
#include "josnc/trainer.hpp"

namespace josnc {

enum class Method { JoSnc, Standard, SelectOnly, SCon, SConNCon };

const char* to_string(Method m);
Method parse_method(const std::string& name);

struct ExperimentConfig {
  Method method = Method::JoSnc;
  std::string output_dir = "runs/default";
  BlobSpec dataset;
  NoiseSpec noise;
  NetworkShape model;
  TrainConfig train;
  int checkpoint_every = 0;  // 0 = final checkpoint only
};

// Sets the loss and selection switches implied by `method`.
void apply_method(TrainConfig& train, Method method);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses and validates a JSON experiment description. Unknown keys, type
/// mismatches and missing required keys (`method`, `dataset.seed`,
/// `train.seed`) raise ConfigError naming the key and, when it appears in
/// the text, its line.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Every field with its resolved value; parse_config(to_json(c)) == c.
nlohmann::ordered_json to_json(const ExperimentConfig& config);

/// Presets: sym20, sym50, sym80, asym40, openset-sym40.
ExperimentConfig preset(const std::string& name);

}  // namespace josnc
