#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace diffmia {

// Seeded synthetic distribution with a single scalar shift knob.
// shift_delta offsets family parameters relative to the stated base values
// (delta = 0 reproduces the base distribution exactly):
//   gaussian-field: mean += delta, smoothness -= 0.5 * delta
//   blobs:          blob_mean += delta
struct DistributionSpec {
  std::string family = "gaussian-field";  // "gaussian-field" | "blobs"

  // gaussian-field params
  double smoothness = 0.9;
  double mean = 0.0;
  double contrast = 0.8;

  // blobs params
  double blob_mean = -0.2;
  double blob_amp = 1.2;
  int blob_min = 2;
  int blob_max = 5;

  double shift_delta = 0.0;

  bool operator==(const DistributionSpec&) const = default;
};

struct ImageSample {
  std::int64_t id = 0;
  Eigen::VectorXd pixels;  // flattened H*W, values in [-1, 1]
  std::string source;      // distribution id (family)
};

struct Dataset {
  int H = 8, W = 8;
  DistributionSpec spec;
  std::uint64_t seed = 0;
  std::vector<ImageSample> samples;
};

// n seeded samples with ids id_base..id_base+n-1. Per-sample streams are
// derived from (seed, id) so generation is order-independent.
Dataset generate_dataset(const DistributionSpec& spec, int n,
                         std::uint64_t seed, int H = 8, int W = 8,
                         std::int64_t id_base = 0);

// Member/non-member pools with balanced, disjoint val/test splits.
struct BenchmarkSplit {
  int H = 8, W = 8;
  std::uint64_t seed = 0;
  DistributionSpec member_spec, nonmember_spec;
  std::vector<ImageSample> train_set;
  std::vector<ImageSample> members_val, nonmembers_val;
  std::vector<ImageSample> members_test, nonmembers_test;
};

// train_set drawn from member_spec; members_val/test disjointly subsampled
// from it; non-member pools freshly drawn from nonmember_spec.
// Requires n_train >= 2 * n_eval_per_side.
BenchmarkSplit make_setup(const DistributionSpec& member_spec,
                          const DistributionSpec& nonmember_spec, int n_train,
                          int n_eval_per_side, std::uint64_t seed, int H = 8,
                          int W = 8);

Eigen::MatrixXd to_matrix(const std::vector<ImageSample>& samples);

}  // namespace diffmia
