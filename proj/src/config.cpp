#include "josnc/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace josnc {

namespace {

using json = nlohmann::json;

struct MethodName {
  Method method;
  const char* name;
};

constexpr MethodName kMethods[] = {
    {Method::JoSnc, "josnc"},       {Method::Standard, "standard"},
    {Method::SelectOnly, "select-only"}, {Method::SCon, "scon"},
    {Method::SConNCon, "scon-ncon"},
};

// Walks a parsed document while remembering where keys sit in the source.
class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  [[noreturn]] void fail(const std::string& path, const std::string& message) const {
    const int line = line_of(path);
    std::string where = line > 0 ? "line " + std::to_string(line) + ": " : "";
    throw ConfigError(where + "`" + path + "` " + message);
  }

  void allow_only(const json& obj, const std::string& prefix,
                  std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(prefix, "must be an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, value] : obj.items()) {
      if (!allowed.contains(key)) fail(join(prefix, key), "is not a recognized key");
    }
  }

  const json* find(const json& obj, const std::string& key) const {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
  }

  template <typename T>
  T get(const json& obj, const std::string& prefix, const std::string& key, T fallback) const {
    const json* v = find(obj, key);
    return v ? convert<T>(*v, join(prefix, key)) : fallback;
  }

  template <typename T>
  T required(const json& obj, const std::string& prefix, const std::string& key) const {
    const json* v = find(obj, key);
    if (!v) fail(join(prefix, key), "is required but missing");
    return convert<T>(*v, join(prefix, key));
  }

  template <typename T>
  T convert(const json& v, const std::string& path) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(path, "must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(path, "must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(path, "must be an integer");
      if (std::is_unsigned_v<T> && v.get<long long>() < 0) fail(path, "must be non-negative");
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(path, "must be a number");
      return v.get<T>();
    } else {
      if (!v.is_array()) fail(path, "must be an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(convert<typename T::value_type>(v[i], path + "[" + std::to_string(i) + "]"));
      }
      return out;
    }
  }

  static std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
  }

 private:
  // Line of the last path segment, searching each segment after the previous
  // one so repeated names (`seed`) resolve to the right block.
  int line_of(const std::string& path) const {
    std::size_t pos = 0;
    std::stringstream ss(path);
    std::string segment;
    bool found = false;
    while (std::getline(ss, segment, '.')) {
      const auto bracket = segment.find('[');
      if (bracket != std::string::npos) segment.resize(bracket);
      const auto hit = text_.find("\"" + segment + "\"", pos);
      if (hit == std::string::npos) return found ? line_at(pos) : 0;
      pos = hit;
      found = true;
    }
    return found ? line_at(pos) : 0;
  }

  int line_at(std::size_t pos) const {
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
  }

  const std::string& text_;
};

}  // namespace

const char* to_string(Method m) {
  for (const auto& entry : kMethods)
    if (entry.method == m) return entry.name;
  return "?";
}

Method parse_method(const std::string& name) {
  for (const auto& entry : kMethods)
    if (name == entry.name) return entry.method;
  throw ConfigError("unknown method `" + name + "`");
}

void apply_method(TrainConfig& train, Method method) {
  train.robust = method != Method::Standard;
  train.use_queue = method != Method::Standard;
  train.use_scon = method == Method::JoSnc || method == Method::SCon || method == Method::SConNCon;
  train.use_ncon = method == Method::JoSnc || method == Method::SConNCon;
  train.use_fcon = method == Method::JoSnc;
}

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  Reader r(text);
  r.allow_only(doc, "", {"method", "output_dir", "dataset", "model", "train"});

  ExperimentConfig c;
  try {
    c.method = parse_method(r.required<std::string>(doc, "", "method"));
  } catch (const ConfigError& e) {
    if (std::string(e.what()).starts_with("unknown method")) r.fail("method", e.what());
    throw;
  }
  c.output_dir = r.get<std::string>(doc, "", "output_dir", c.output_dir);

  const json empty = json::object();
  const json* ds = r.find(doc, "dataset");
  if (!ds) r.fail("dataset.seed", "is required but missing");
  r.allow_only(*ds, "dataset",
               {"n_id_classes", "n_ood_classes", "per_class", "test_per_class", "dim", "spread",
                "seed", "noise"});
  auto& d = c.dataset;
  d.n_id_classes = r.get<int>(*ds, "dataset", "n_id_classes", d.n_id_classes);
  d.n_ood_classes = r.get<int>(*ds, "dataset", "n_ood_classes", d.n_ood_classes);
  d.per_class = r.get<int>(*ds, "dataset", "per_class", d.per_class);
  d.test_per_class = r.get<int>(*ds, "dataset", "test_per_class", d.test_per_class);
  d.dim = r.get<int>(*ds, "dataset", "dim", d.dim);
  d.spread = r.get<double>(*ds, "dataset", "spread", d.spread);
  d.seed = r.required<std::uint64_t>(*ds, "dataset", "seed");
  if (d.n_id_classes < 2) r.fail("dataset.n_id_classes", "must be at least 2");
  if (d.n_ood_classes < 0) r.fail("dataset.n_ood_classes", "must be non-negative");
  if (d.dim < 2) r.fail("dataset.dim", "must be at least 2");
  if (!(d.spread >= 0.0)) r.fail("dataset.spread", "must be non-negative");
  if (d.test_per_class < 1) r.fail("dataset.test_per_class", "must be positive");

  const json* nz = r.find(*ds, "noise");
  const json& noise = nz ? *nz : empty;
  r.allow_only(noise, "dataset.noise", {"kind", "rate_id"});
  const auto kind = r.get<std::string>(noise, "dataset.noise", "kind", "symmetric");
  if (kind == "symmetric") {
    c.noise.kind = NoiseType::Symmetric;
  } else if (kind == "asymmetric") {
    c.noise.kind = NoiseType::Asymmetric;
  } else {
    r.fail("dataset.noise.kind", "must be \"symmetric\" or \"asymmetric\"");
  }
  c.noise.rate_id = r.get<double>(noise, "dataset.noise", "rate_id", 0.0);
  if (!(c.noise.rate_id >= 0.0 && c.noise.rate_id < 1.0)) {
    r.fail("dataset.noise.rate_id", "must lie in [0, 1)");
  }
  c.noise.ood_class_count = d.n_ood_classes;

  const json* md = r.find(doc, "model");
  const json& model = md ? *md : empty;
  r.allow_only(model, "model", {"hidden", "embed_dim"});
  c.model.hidden = r.get<std::vector<std::size_t>>(model, "model", "hidden", c.model.hidden);
  c.model.embed_dim = r.get<std::size_t>(model, "model", "embed_dim", c.model.embed_dim);
  c.model.input_dim = static_cast<std::size_t>(d.dim);
  c.model.classes = static_cast<std::size_t>(d.n_id_classes);
  if (c.model.embed_dim < 1) r.fail("model.embed_dim", "must be positive");
  for (auto h : c.model.hidden)
    if (h < 1) r.fail("model.hidden", "entries must be positive");

  const json* tr = r.find(doc, "train");
  if (!tr) r.fail("train.seed", "is required but missing");
  r.allow_only(*tr, "train",
               {"seed", "epochs", "warmup_epochs", "batch_size", "learning_rate", "optimizer",
                "momentum", "weight_decay", "epsilon", "kappa", "knn_k", "alpha", "beta", "gamma",
                "ema_decay", "tau_ema_warmup", "tau_ema_main", "t_pll_in", "t_pll_out", "t_ssl",
                "queue_capacity", "aug_jitter", "aug_mask_rate", "checkpoint_every"});
  auto& t = c.train;
  const std::string p = "train";
  t.seed = r.required<std::uint64_t>(*tr, p, "seed");
  t.epochs = r.get<int>(*tr, p, "epochs", t.epochs);
  t.warmup_epochs = r.get<int>(*tr, p, "warmup_epochs", t.warmup_epochs);
  t.batch_size = r.get<std::size_t>(*tr, p, "batch_size", t.batch_size);
  t.learning_rate = r.get<double>(*tr, p, "learning_rate", t.learning_rate);
  const auto opt = r.get<std::string>(*tr, p, "optimizer", "sgd");
  if (opt == "sgd") {
    t.optimizer.kind = OptimizerKind::Sgd;
  } else if (opt == "adam") {
    t.optimizer.kind = OptimizerKind::Adam;
  } else {
    r.fail("train.optimizer", "must be \"sgd\" or \"adam\"");
  }
  t.optimizer.momentum = r.get<double>(*tr, p, "momentum", t.optimizer.momentum);
  t.optimizer.weight_decay = r.get<double>(*tr, p, "weight_decay", t.optimizer.weight_decay);
  t.epsilon = r.get<double>(*tr, p, "epsilon", t.epsilon);
  t.partial.kappa = r.get<std::size_t>(*tr, p, "kappa", t.partial.kappa);
  t.knn_k = r.get<std::size_t>(*tr, p, "knn_k", t.knn_k);
  t.weights.alpha = r.get<double>(*tr, p, "alpha", t.weights.alpha);
  t.weights.beta = r.get<double>(*tr, p, "beta", t.weights.beta);
  t.weights.gamma = r.get<double>(*tr, p, "gamma", t.weights.gamma);
  t.ema_decay = r.get<double>(*tr, p, "ema_decay", t.ema_decay);
  t.tau_ema_warmup = r.get<double>(*tr, p, "tau_ema_warmup", t.tau_ema_warmup);
  t.tau_ema_main = r.get<double>(*tr, p, "tau_ema_main", t.tau_ema_main);
  t.partial.temperature_in = r.get<double>(*tr, p, "t_pll_in", t.partial.temperature_in);
  t.partial.temperature_out = r.get<double>(*tr, p, "t_pll_out", t.partial.temperature_out);
  t.t_ssl = r.get<double>(*tr, p, "t_ssl", t.t_ssl);
  t.queue_capacity = r.get<std::size_t>(*tr, p, "queue_capacity", t.queue_capacity);
  t.augment.jitter_sigma = r.get<double>(*tr, p, "aug_jitter", 0.1 * d.spread);
  t.augment.mask_rate = r.get<double>(*tr, p, "aug_mask_rate", t.augment.mask_rate);
  c.checkpoint_every = r.get<int>(*tr, p, "checkpoint_every", 0);
  if (c.checkpoint_every < 0) r.fail("train.checkpoint_every", "must be non-negative");
  d.knn_k = static_cast<int>(t.knn_k);

  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const auto space = msg.find(' ');
    r.fail(msg.substr(0, space), msg.substr(space + 1));
  }
  if (t.partial.kappa > c.model.classes) r.fail("train.kappa", "exceeds the number of ID classes");
  if (d.per_class < d.knn_k + 1) r.fail("dataset.per_class", "must exceed train.knn_k");
  apply_method(t, c.method);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["method"] = to_string(c.method);
  j["output_dir"] = c.output_dir;
  const auto& d = c.dataset;
  j["dataset"] = {{"n_id_classes", d.n_id_classes},
                  {"n_ood_classes", d.n_ood_classes},
                  {"per_class", d.per_class},
                  {"test_per_class", d.test_per_class},
                  {"dim", d.dim},
                  {"spread", d.spread},
                  {"seed", d.seed},
                  {"noise", {{"kind", to_string(c.noise.kind)}, {"rate_id", c.noise.rate_id}}}};
  j["model"] = {{"hidden", c.model.hidden}, {"embed_dim", c.model.embed_dim}};
  const auto& t = c.train;
  j["train"] = {{"seed", t.seed},
                {"epochs", t.epochs},
                {"warmup_epochs", t.warmup_epochs},
                {"batch_size", t.batch_size},
                {"learning_rate", t.learning_rate},
                {"optimizer", t.optimizer.kind == OptimizerKind::Sgd ? "sgd" : "adam"},
                {"momentum", t.optimizer.momentum},
                {"weight_decay", t.optimizer.weight_decay},
                {"epsilon", t.epsilon},
                {"kappa", t.partial.kappa},
                {"knn_k", t.knn_k},
                {"alpha", t.weights.alpha},
                {"beta", t.weights.beta},
                {"gamma", t.weights.gamma},
                {"ema_decay", t.ema_decay},
                {"tau_ema_warmup", t.tau_ema_warmup},
                {"tau_ema_main", t.tau_ema_main},
                {"t_pll_in", t.partial.temperature_in},
                {"t_pll_out", t.partial.temperature_out},
                {"t_ssl", t.t_ssl},
                {"queue_capacity", t.queue_capacity},
                {"aug_jitter", t.augment.jitter_sigma},
                {"aug_mask_rate", t.augment.mask_rate},
                {"checkpoint_every", c.checkpoint_every}};
  return j;
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.output_dir = "runs/" + name;
  c.dataset.seed = 7;
  c.train.seed = 1;
  c.dataset.n_id_classes = 8;
  c.dataset.n_ood_classes = 0;
  c.noise.kind = NoiseType::Symmetric;
  double jitter = 0.1;  // relative to the blob spread
  if (name == "sym20") {
    c.noise.rate_id = 0.2;
    c.train.tau_ema_main = 0.995;
  } else if (name == "sym50") {
    c.noise.rate_id = 0.5;
  } else if (name == "sym80") {
    c.noise.rate_id = 0.8;
    c.train.tau_ema_main = 0.925;
  } else if (name == "asym40") {
    c.noise.kind = NoiseType::Asymmetric;
    c.noise.rate_id = 0.4;
  } else if (name == "openset-sym40") {
    c.dataset.n_ood_classes = 2;
    c.noise.rate_id = 0.4;
    c.dataset.spread = 1.6;
    c.train.epsilon = 0.4;
    c.train.tau_ema_main = 0.9;
    jitter = 0.3;
  } else {
    throw ConfigError("unknown preset `" + name +
                      "` (expected sym20, sym50, sym80, asym40 or openset-sym40)");
  }
  c.noise.ood_class_count = c.dataset.n_ood_classes;
  c.model.input_dim = static_cast<std::size_t>(c.dataset.dim);
  c.model.classes = static_cast<std::size_t>(c.dataset.n_id_classes);
  c.train.augment.jitter_sigma = jitter * c.dataset.spread;
  // Round trip through the parser so presets obey the same validation.
  return parse_config(to_json(c).dump());
}

}  // namespace josnc
