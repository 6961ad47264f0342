#include "uqsim/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "uqsim/errors.hpp"

namespace uqsim {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Strict object reader: every key present in the document must be declared,
// otherwise the full key path is reported.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void field(const char* key, T& out) {
    known_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + key + ": " + e.what());
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }

  const json& child(const char* key) {
    known_.insert(key);
    return obj_.at(key);
  }

  void reject_unknown() const {
    for (const auto& item : obj_.items())
      if (!known_.contains(item.key())) throw ConfigError("unknown key: " + path_ + item.key());
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> known_;
};

void read_test_grid(const json& j, TestGridSpec& grid) {
  ObjectReader r(j, "test_grid.");
  r.field("count", grid.count);
  r.field("lo", grid.lo);
  r.field("hi", grid.hi);
  r.reject_unknown();
}

template <typename Fn>
void read_block(ObjectReader& root, const char* name, Fn fn) {
  if (!root.has(name)) {
    // Still mark as known when absent.
    (void)name;
    return;
  }
  ObjectReader r(root.child(name), std::string(name) + ".");
  fn(r);
  r.reject_unknown();
}

}  // namespace

std::vector<double> TestGridSpec::points() const {
  std::vector<double> xs(static_cast<std::size_t>(count));
  if (count == 1) {
    xs[0] = lo;
    return xs;
  }
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (int i = 0; i < count; ++i) xs[static_cast<std::size_t>(i)] = lo + step * i;
  return xs;
}

bool is_known_method(const std::string& name) {
  static const std::set<std::string> kMethods = {
      "reference", "deep_ensemble", "bootstrap_ensemble", "mc_dropout", "vi",
      "laplace",   "hmc",           "der",                "gp"};
  return kMethods.contains(name);
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ConfigError("methods: must not be empty");
  std::set<std::string> seen;
  for (const std::string& m : methods) {
    if (!is_known_method(m)) throw ConfigError("methods: unknown method '" + m + "'");
    if (!seen.insert(m).second) throw ConfigError("methods: duplicate '" + m + "'");
  }
  if (sample_sizes.empty()) throw ConfigError("sample_sizes: must not be empty");
  for (int n : sample_sizes)
    if (n <= 0) throw ConfigError("sample_sizes: entries must be positive");
  if (batch_sizes.size() != sample_sizes.size())
    throw ConfigError("batch_sizes: must run parallel to sample_sizes");
  for (int b : batch_sizes)
    if (b <= 0) throw ConfigError("batch_sizes: entries must be positive");

  auto check_distinct = [](const std::vector<std::uint64_t>& xs, const char* name) {
    std::set<std::uint64_t> s(xs.begin(), xs.end());
    if (s.size() != xs.size()) throw ConfigError(std::string(name) + ": seeds must be distinct");
  };
  if (run_seeds.empty()) throw ConfigError("run_seeds: must not be empty");
  check_distinct(run_seeds, "run_seeds");
  check_distinct(dataset_seeds, "dataset_seeds");

  if (n_d < 2 || n_gamma < 2) throw ConfigError("reference protocol needs n_d, n_gamma >= 2");
  if (static_cast<int>(dataset_seeds.size()) < n_d)
    throw ConfigError("dataset_seeds: need at least n_d entries");

  if (test_grid.count <= 0) throw ConfigError("test_grid.count: must be positive");
  if (!(test_grid.lo > 0.0 && test_grid.lo < test_grid.hi && test_grid.hi < 1.0))
    throw ConfigError("test_grid: need 0 < lo < hi < 1");
  if (!(region_split > 0.0 && region_split < 1.0))
    throw ConfigError("region_split: must lie in (0,1)");
  if (parallelism < 0) throw ConfigError("parallelism: must be >= 0");

  const std::size_t sizes = sample_sizes.size();
  auto check_parallel = [sizes](std::size_t got, const char* name) {
    if (got != sizes)
      throw ConfigError(std::string(name) + ": must run parallel to sample_sizes");
  };
  check_parallel(deep_ensemble.epochs.size(), "deep_ensemble.epochs");
  check_parallel(bootstrap_ensemble.epochs.size(), "bootstrap_ensemble.epochs");
  check_parallel(laplace.epochs.size(), "laplace.epochs");
  check_parallel(laplace.batch_sizes.size(), "laplace.batch_sizes");
  check_parallel(hmc.pretrain_epochs.size(), "hmc.pretrain_epochs");
  check_parallel(hmc.batch_sizes.size(), "hmc.batch_sizes");

  if (deep_ensemble.members < 2 || bootstrap_ensemble.members < 2)
    throw ConfigError("ensemble members: need at least 2");
  if (!(bootstrap_ensemble.fraction > 0.0 && bootstrap_ensemble.fraction <= 1.0))
    throw ConfigError("bootstrap_ensemble.fraction: must lie in (0,1]");
  if (!(mc_dropout.rate > 0.0 && mc_dropout.rate < 1.0))
    throw ConfigError("mc_dropout.rate: must lie in (0,1)");
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::string trimmed = text;
  trimmed.erase(0, trimmed.find_first_not_of(" \t\r\n"));
  if (trimmed.empty()) {
    cfg.validate();
    return cfg;
  }

  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  ObjectReader root(doc, "");
  root.field("methods", cfg.methods);
  root.field("sample_sizes", cfg.sample_sizes);
  root.field("batch_sizes", cfg.batch_sizes);
  root.field("run_seeds", cfg.run_seeds);
  root.field("dataset_seeds", cfg.dataset_seeds);
  root.field("n_d", cfg.n_d);
  root.field("n_gamma", cfg.n_gamma);
  root.field("region_split", cfg.region_split);
  root.field("output_dir", cfg.output_dir);
  root.field("parallelism", cfg.parallelism);
  if (root.has("test_grid")) read_test_grid(root.child("test_grid"), cfg.test_grid);

  read_block(root, "deep_ensemble", [&](ObjectReader& r) {
    r.field("members", cfg.deep_ensemble.members);
    r.field("learning_rate", cfg.deep_ensemble.learning_rate);
    r.field("epochs", cfg.deep_ensemble.epochs);
  });
  read_block(root, "bootstrap_ensemble", [&](ObjectReader& r) {
    r.field("members", cfg.bootstrap_ensemble.members);
    r.field("learning_rate", cfg.bootstrap_ensemble.learning_rate);
    r.field("epochs", cfg.bootstrap_ensemble.epochs);
    r.field("fraction", cfg.bootstrap_ensemble.fraction);
  });
  read_block(root, "mc_dropout", [&](ObjectReader& r) {
    r.field("rate", cfg.mc_dropout.rate);
    r.field("learning_rate", cfg.mc_dropout.learning_rate);
    r.field("epochs", cfg.mc_dropout.epochs);
    r.field("passes", cfg.mc_dropout.passes);
  });
  read_block(root, "vi", [&](ObjectReader& r) {
    r.field("learning_rate", cfg.vi.learning_rate);
    r.field("epochs", cfg.vi.epochs);
    r.field("burn_in", cfg.vi.burn_in);
    r.field("beta", cfg.vi.beta);
    r.field("train_mc", cfg.vi.train_mc);
    r.field("test_mc", cfg.vi.test_mc);
  });
  read_block(root, "laplace", [&](ObjectReader& r) {
    r.field("learning_rate", cfg.laplace.learning_rate);
    r.field("epochs", cfg.laplace.epochs);
    r.field("batch_sizes", cfg.laplace.batch_sizes);
    r.field("prior_precision", cfg.laplace.prior_precision);
    r.field("noise", cfg.laplace.noise);
    r.field("posterior_samples", cfg.laplace.posterior_samples);
  });
  read_block(root, "hmc", [&](ObjectReader& r) {
    r.field("pretrain_lr", cfg.hmc.pretrain_lr);
    r.field("pretrain_epochs", cfg.hmc.pretrain_epochs);
    r.field("batch_sizes", cfg.hmc.batch_sizes);
    r.field("n_samples", cfg.hmc.n_samples);
    r.field("step", cfg.hmc.step);
    r.field("leapfrog_steps", cfg.hmc.leapfrog_steps);
    r.field("burn", cfg.hmc.burn);
    r.field("tau", cfg.hmc.tau);
    r.field("inference_samples", cfg.hmc.inference_samples);
    r.field("inference_burn", cfg.hmc.inference_burn);
  });
  read_block(root, "der", [&](ObjectReader& r) {
    r.field("learning_rate", cfg.der.learning_rate);
    r.field("epochs", cfg.der.epochs);
    r.field("lambda", cfg.der.lambda);
  });
  read_block(root, "gp", [&](ObjectReader& r) {
    r.field("inducing", cfg.gp.inducing);
    r.field("learning_rate", cfg.gp.learning_rate);
    r.field("epochs", cfg.gp.epochs);
    r.field("samples", cfg.gp.samples);
  });
  read_block(root, "reference", [&](ObjectReader& r) {
    r.field("learning_rate", cfg.reference.learning_rate);
    r.field("epochs", cfg.reference.epochs);
  });
  root.reject_unknown();

  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string ExperimentConfig::to_json() const {
  ordered_json j;
  j["methods"] = methods;
  j["sample_sizes"] = sample_sizes;
  j["batch_sizes"] = batch_sizes;
  j["run_seeds"] = run_seeds;
  j["dataset_seeds"] = dataset_seeds;
  j["n_d"] = n_d;
  j["n_gamma"] = n_gamma;
  j["test_grid"] = {{"count", test_grid.count}, {"lo", test_grid.lo}, {"hi", test_grid.hi}};
  j["region_split"] = region_split;
  j["output_dir"] = output_dir;
  j["parallelism"] = parallelism;
  j["deep_ensemble"] = {{"members", deep_ensemble.members},
                        {"learning_rate", deep_ensemble.learning_rate},
                        {"epochs", deep_ensemble.epochs}};
  j["bootstrap_ensemble"] = {{"members", bootstrap_ensemble.members},
                             {"learning_rate", bootstrap_ensemble.learning_rate},
                             {"epochs", bootstrap_ensemble.epochs},
                             {"fraction", bootstrap_ensemble.fraction}};
  j["mc_dropout"] = {{"rate", mc_dropout.rate},
                     {"learning_rate", mc_dropout.learning_rate},
                     {"epochs", mc_dropout.epochs},
                     {"passes", mc_dropout.passes}};
  j["vi"] = {{"learning_rate", vi.learning_rate}, {"epochs", vi.epochs},
             {"burn_in", vi.burn_in},             {"beta", vi.beta},
             {"train_mc", vi.train_mc},           {"test_mc", vi.test_mc}};
  j["laplace"] = {{"learning_rate", laplace.learning_rate},
                  {"epochs", laplace.epochs},
                  {"batch_sizes", laplace.batch_sizes},
                  {"prior_precision", laplace.prior_precision},
                  {"noise", laplace.noise},
                  {"posterior_samples", laplace.posterior_samples}};
  j["hmc"] = {{"pretrain_lr", hmc.pretrain_lr},
              {"pretrain_epochs", hmc.pretrain_epochs},
              {"batch_sizes", hmc.batch_sizes},
              {"n_samples", hmc.n_samples},
              {"step", hmc.step},
              {"leapfrog_steps", hmc.leapfrog_steps},
              {"burn", hmc.burn},
              {"tau", hmc.tau},
              {"inference_samples", hmc.inference_samples},
              {"inference_burn", hmc.inference_burn}};
  j["der"] = {{"learning_rate", der.learning_rate}, {"epochs", der.epochs}, {"lambda", der.lambda}};
  j["gp"] = {{"inducing", gp.inducing},
             {"learning_rate", gp.learning_rate},
             {"epochs", gp.epochs},
             {"samples", gp.samples}};
  j["reference"] = {{"learning_rate", reference.learning_rate}, {"epochs", reference.epochs}};
  return j.dump(2) + "\n";
}

}  // namespace uqsim
