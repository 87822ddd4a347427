#include "diffmia/config.hpp"

#include <algorithm>

#include "diffmia/error.hpp"
#include "diffmia/io.hpp"

namespace diffmia {

using nlohmann::json;

namespace {

const std::vector<std::string> kPresets = {"analog-a", "analog-b", "analog-c",
                                          "analog-d", "analog-e"};

const std::vector<std::string> kMethods = {"secmi", "secmi++", "pia", "pfami",
                                           "gsa1",  "gsa2",    "blind"};

void validate(const ExperimentConfig& cfg) {
  if (cfg.H < 4 || cfg.W < 4) throw ConfigError("config: image too small");
  if (cfg.T < 1) throw ConfigError("config: T must be >= 1");
  if (cfg.n_train < 1 || cfg.n_eval_per_side < 1) {
    throw ConfigError("config: sample counts must be positive");
  }
  if (cfg.n_train < 2 * cfg.n_eval_per_side) {
    throw ConfigError("config: n_train must be >= 2 * n_eval_per_side");
  }
  if (!(cfg.budget_hi_pct > cfg.budget_lo_pct && cfg.budget_lo_pct > 0.0 &&
        cfg.budget_hi_pct < 100.0)) {
    throw ConfigError("config: budgets must satisfy 0 < lo < hi < 100");
  }
  if (cfg.grid_size < 1) throw ConfigError("config: grid_size must be >= 1");
  if (cfg.methods.empty()) throw ConfigError("config: no methods listed");
  for (const std::string& m : cfg.methods) {
    if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end()) {
      throw ConfigError("config: unknown method '" + m + "'");
    }
  }
}

}  // namespace

const std::vector<std::string>& preset_names() { return kPresets; }

ExperimentConfig preset_config(const std::string& name, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.seed = seed;
  cfg.preset = name;
  cfg.train.seed = seed;
  cfg.train.batch_size = 32;

  // Members always come from the unshifted spec; the non-member pool carries
  // the preset's distribution shift.
  cfg.member_spec = DistributionSpec{};
  cfg.nonmember_spec = cfg.member_spec;

  if (name == "analog-a") {
    cfg.n_train = 64;
    cfg.n_eval_per_side = 32;
    cfg.train.epochs = 300;
    cfg.train.learning_rate = 2e-2;
    cfg.nonmember_spec.shift_delta = 0.6;
  } else if (name == "analog-b") {
    cfg.n_train = 20000;
    cfg.n_eval_per_side = 500;
    cfg.train.epochs = 1;
    cfg.train.learning_rate = 1e-3;
    cfg.nonmember_spec.shift_delta = 0.6;
  } else if (name == "analog-c") {
    cfg.n_train = 20000;
    cfg.n_eval_per_side = 500;
    cfg.train.epochs = 1;
    cfg.train.learning_rate = 1e-3;
  } else if (name == "analog-d") {
    cfg.n_train = 20000;
    cfg.n_eval_per_side = 500;
    cfg.train.epochs = 1;
    cfg.train.learning_rate = 1e-3;
    cfg.nonmember_spec.shift_delta = 0.15;
  } else if (name == "analog-e") {
    cfg.member_spec.family = "blobs";
    cfg.nonmember_spec.family = "blobs";
    cfg.n_train = 20000;
    cfg.n_eval_per_side = 500;
    cfg.train.epochs = 1;
    cfg.train.learning_rate = 1e-3;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["preset"] = cfg.preset;
  j["image"] = {{"H", cfg.H}, {"W", cfg.W}};
  j["schedule"] = {{"T", cfg.T},
                   {"beta_start", cfg.beta_start},
                   {"beta_end", cfg.beta_end}};
  j["data"] = {{"member_spec", spec_to_json(cfg.member_spec)},
               {"nonmember_spec", spec_to_json(cfg.nonmember_spec)},
               {"n_train", cfg.n_train},
               {"n_eval_per_side", cfg.n_eval_per_side}};
  j["train"] = {{"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"learning_rate", cfg.train.learning_rate}};
  j["methods"] = cfg.methods;
  j["budgets"] = {cfg.budget_hi_pct, cfg.budget_lo_pct};
  j["grid_size"] = cfg.grid_size;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  try {
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("preset") && !j.at("preset").get<std::string>().empty()) {
      cfg = preset_config(j.at("preset").get<std::string>(), cfg.seed);
    }
    if (j.contains("image")) {
      cfg.H = j.at("image").at("H").get<int>();
      cfg.W = j.at("image").at("W").get<int>();
    }
    if (j.contains("schedule")) {
      const json& s = j.at("schedule");
      if (s.contains("T")) cfg.T = s.at("T").get<int>();
      if (s.contains("beta_start")) {
        cfg.beta_start = s.at("beta_start").get<double>();
      }
      if (s.contains("beta_end")) cfg.beta_end = s.at("beta_end").get<double>();
    }
    if (j.contains("data")) {
      const json& d = j.at("data");
      if (d.contains("member_spec")) {
        cfg.member_spec = spec_from_json(d.at("member_spec"));
      }
      if (d.contains("nonmember_spec")) {
        cfg.nonmember_spec = spec_from_json(d.at("nonmember_spec"));
      }
      if (d.contains("n_train")) cfg.n_train = d.at("n_train").get<int>();
      if (d.contains("n_eval_per_side")) {
        cfg.n_eval_per_side = d.at("n_eval_per_side").get<int>();
      }
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      if (t.contains("epochs")) cfg.train.epochs = t.at("epochs").get<int>();
      if (t.contains("batch_size")) {
        cfg.train.batch_size = t.at("batch_size").get<int>();
      }
      if (t.contains("learning_rate")) {
        cfg.train.learning_rate = t.at("learning_rate").get<double>();
      }
    }
    if (j.contains("methods")) {
      cfg.methods = j.at("methods").get<std::vector<std::string>>();
    }
    if (j.contains("budgets")) {
      const auto budgets = j.at("budgets").get<std::vector<double>>();
      if (budgets.size() != 2) {
        throw ConfigError("config: budgets must list exactly [hi, lo]");
      }
      cfg.budget_hi_pct = budgets[0];
      cfg.budget_lo_pct = budgets[1];
    }
    if (j.contains("grid_size")) cfg.grid_size = j.at("grid_size").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.train.seed = cfg.seed;
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  json j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw ConfigError("config: invalid JSON in " + path);
  return config_from_json(j);
}

void save_config(const std::string& path, const ExperimentConfig& cfg) {
  write_text_file(path, config_to_json(cfg).dump(2) + "\n");
}

}  // namespace diffmia
