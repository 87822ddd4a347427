#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "diffmia/data.hpp"
#include "diffmia/train.hpp"

namespace diffmia {

// Attack score; lower = more member-like for every method.
struct MiaScore {
  std::int64_t sample_id = 0;
  double score = 0.0;
  int label = 0;  // 1 = member
};

struct FeatureVector {
  std::int64_t sample_id = 0;
  int label = 0;
  std::vector<double> values;
  std::string schema_id;  // gsa1 | gsa2 | blind
};

// Per-image query cost (model forward / backward evaluations).
struct QueryCount {
  long forward_passes = 0;
  long backward_passes = 0;

  bool operator==(const QueryCount&) const = default;
};

struct SecmiConfig {
  // Ascending inversion targets; node 0 is the implicit start, so the grid
  // lists the right endpoints of each unit of the trajectory. Must contain
  // t_star. Default at T=100: {1..50} with t_star = 5.
  std::vector<int> step_grid;
  int t_star = 5;
  bool plusplus = false;
};

struct PiaConfig {
  // Evaluation grid; entries at t=0 are clamped to t=1 when the model is
  // queried (the grid itself is kept verbatim for query accounting).
  std::vector<int> timesteps;
};

struct PfamiConfig {
  int N = 10;  // neighbor count
  double strength_lo = 0.75, strength_hi = 0.9;
  std::vector<int> loss_grid;
  bool shared_noise = true;  // one eps per t shared across original + crops
};

struct GsaConfig {
  std::vector<int> timesteps;  // t=0 entries clamped to 1 at evaluation
};

struct AttackConfig {
  std::string method;  // secmi | pia | pfami | gsa1 | gsa2 | blind
  SecmiConfig secmi;
  PiaConfig pia;
  PfamiConfig pfami;
  GsaConfig gsa;
  std::uint64_t seed = 1;
};

// Default grids scale as fractions of T so the relative positions hold at any horizon:
// secmi right-endpoints {1..T/2}, t_star = 0.05T; pia {0, 0.01T, .., 0.49T};
// pfami loss grid {1..T}; gsa 21 even nodes over [0, T].
AttackConfig default_attack_config(const std::string& method, int T,
                                   std::uint64_t seed = 1);

// Analytic per-image cost:
//   secmi (N+1 trajectory nodes): 2 * |step_grid| forwards
//   pia:   |timesteps| + 1 forwards
//   pfami: (N + 1) * |loss_grid| forwards
//   gsa1:  |timesteps| forwards + 1 backward
//   gsa2:  |timesteps| forwards + |timesteps| backwards
//   blind: no model access
QueryCount attack_query_count(const AttackConfig& cfg);

// Score functions. Counters (optional) accumulate the instrumented per-image
// cost, which run_attack asserts against attack_query_count for every sample.
MiaScore secmi_score(const ModelCheckpoint& ckpt, const ImageSample& x0,
                     int label, const SecmiConfig& cfg,
                     QueryCount* qc = nullptr);

MiaScore pia_score(const ModelCheckpoint& ckpt, const ImageSample& x0,
                   int label, const PiaConfig& cfg, QueryCount* qc = nullptr);

MiaScore pfami_score(const ModelCheckpoint& ckpt, const ImageSample& x0,
                     int label, const PfamiConfig& cfg, std::uint64_t seed,
                     QueryCount* qc = nullptr);

FeatureVector gsa1_features(const ModelCheckpoint& ckpt, const ImageSample& x0,
                            int label, const GsaConfig& cfg, std::uint64_t seed,
                            QueryCount* qc = nullptr);

FeatureVector gsa2_features(const ModelCheckpoint& ckpt, const ImageSample& x0,
                            int label, const GsaConfig& cfg, std::uint64_t seed,
                            QueryCount* qc = nullptr);

// Deterministic core of both GSA variants with explicit per-node noise (one
// vector per grid timestep, in grid order). The seeded wrappers draw the
// noise from the per-sample stream and delegate here; per_node selects the
// GSA2 layout (per-timestep norms) over GSA1's averaged gradient.
FeatureVector gsa_features_given_noise(const ModelCheckpoint& ckpt,
                                       const ImageSample& x0, int label,
                                       const GsaConfig& cfg,
                                       const std::vector<Eigen::VectorXd>& eps,
                                       bool per_node,
                                       QueryCount* qc = nullptr);

// Model-free pixel features: 16 block means (4x4 pooling) + global mean,
// variance and gradient energy. 19 values.
FeatureVector blind_features(const ImageSample& x0, int label, int H, int W);

// Center crop to area fraction `strength`, resampled back to HxW bilinearly.
Eigen::VectorXd center_crop_resize(const Eigen::VectorXd& pixels, int H, int W,
                                   double strength);

}  // namespace diffmia
