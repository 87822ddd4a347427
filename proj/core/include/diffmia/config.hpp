#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffmia/data.hpp"
#include "diffmia/train.hpp"

namespace diffmia {

// Fully resolved experiment description. Presets expand into explicit specs
// on load, so a saved config always round-trips without external lookups.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string preset;  // informational id, may be empty for custom configs

  int H = 8, W = 8;
  int T = 100;
  double beta_start = 1e-3;
  double beta_end = 0.2;

  DistributionSpec member_spec;
  DistributionSpec nonmember_spec;
  int n_train = 64;
  int n_eval_per_side = 32;

  TrainConfig train;

  std::vector<std::string> methods = {"secmi", "pia",  "pfami",
                                      "gsa1",  "gsa2", "blind"};
  double budget_hi_pct = 1.0;
  double budget_lo_pct = 0.1;
  int grid_size = 10000;

  bool operator==(const ExperimentConfig&) const = default;
};

// The five benchmark setups:
//   analog-a  over-trained:  64 members, 300 epochs, lr 2e-2, shift 0.6
//   analog-b  one-epoch:     20k members, 1 epoch, lr 1e-3, shift 0.6
//   analog-c  one-epoch, no shift (the fair security-game setup)
//   analog-d  one-epoch, mild shift 0.15
//   analog-e  blobs family, one-epoch, no shift
ExperimentConfig preset_config(const std::string& name, std::uint64_t seed = 1);

const std::vector<std::string>& preset_names();

// Canonical JSON (sorted keys). from-JSON accepts either a "preset" key with
// optional field overrides, or a fully explicit config.
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

ExperimentConfig load_config(const std::string& path);
void save_config(const std::string& path, const ExperimentConfig& cfg);

}  // namespace diffmia
