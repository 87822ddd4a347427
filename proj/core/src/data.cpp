#include "diffmia/data.hpp"

#include <algorithm>
#include <cmath>

#include "diffmia/error.hpp"
#include "diffmia/rng.hpp"

namespace diffmia {

namespace {

// White noise -> separable 7-tap Gaussian blur (circular boundary) ->
// per-sample zero-center and unit-variance -> mean + contrast * field, clamped.
// Zero-centering makes `mean` an exact per-sample displacement, which the
// shift diagnostic depends on.
Eigen::VectorXd gaussian_field_sample(RngStream& rng, int H, int W,
                                      double smoothness, double mean,
                                      double contrast) {
  Eigen::MatrixXd x(H, W);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) x(i, j) = rng.gaussian();
  }

  double kernel[7];
  double ksum = 0.0;
  const double s = std::max(smoothness, 0.05);
  for (int k = -3; k <= 3; ++k) {
    kernel[k + 3] = std::exp(-0.5 * (k / s) * (k / s));
    ksum += kernel[k + 3];
  }
  for (double& w : kernel) w /= ksum;

  Eigen::MatrixXd tmp(H, W);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      double acc = 0.0;
      for (int k = -3; k <= 3; ++k) {
        acc += kernel[k + 3] * x(((i - k) % H + H) % H, j);
      }
      tmp(i, j) = acc;
    }
  }
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      double acc = 0.0;
      for (int k = -3; k <= 3; ++k) {
        acc += kernel[k + 3] * tmp(i, ((j - k) % W + W) % W);
      }
      x(i, j) = acc;
    }
  }

  const double mu = x.mean();
  x.array() -= mu;
  const double sd = std::sqrt(x.array().square().mean());
  x.array() /= (sd + 1e-12);

  Eigen::VectorXd out(H * W);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      out[i * W + j] = std::clamp(mean + contrast * x(i, j), -1.0, 1.0);
    }
  }
  return out;
}

// Constant background plus a few soft Gaussian bumps of random position,
// radius, amplitude and sign.
Eigen::VectorXd blobs_sample(RngStream& rng, int H, int W, double blob_mean,
                             double amp, int blob_min, int blob_max) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(H, W, blob_mean);
  const int count = rng.uniform_int(blob_min, blob_max);
  for (int bIdx = 0; bIdx < count; ++bIdx) {
    const double cy = rng.uniform_range(0.0, H);
    const double cx = rng.uniform_range(0.0, W);
    const double r = rng.uniform_range(0.8, 2.0);
    const double mag = rng.uniform_range(0.4, 1.0) * amp;
    const double sign = (rng.next_u64() & 1) ? 1.0 : -1.0;
    for (int i = 0; i < H; ++i) {
      for (int j = 0; j < W; ++j) {
        const double d2 = (i - cy) * (i - cy) + (j - cx) * (j - cx);
        x(i, j) += sign * mag * std::exp(-d2 / (2.0 * r * r));
      }
    }
  }
  Eigen::VectorXd out(H * W);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      out[i * W + j] = std::clamp(x(i, j), -1.0, 1.0);
    }
  }
  return out;
}

}  // namespace

Dataset generate_dataset(const DistributionSpec& spec, int n,
                         std::uint64_t seed, int H, int W,
                         std::int64_t id_base) {
  if (n < 1) throw ConfigError("generate_dataset: n must be >= 1");
  if (spec.family != "gaussian-field" && spec.family != "blobs") {
    throw ConfigError("generate_dataset: unknown family '" + spec.family + "'");
  }
  Dataset ds;
  ds.H = H;
  ds.W = W;
  ds.spec = spec;
  ds.seed = seed;
  ds.samples.reserve(n);
  const std::uint64_t tag = stream_tag("gen-data");
  for (int i = 0; i < n; ++i) {
    const std::int64_t id = id_base + i;
    RngStream rng(seed, tag, static_cast<std::uint64_t>(id));
    ImageSample sample;
    sample.id = id;
    sample.source = spec.family;
    if (spec.family == "gaussian-field") {
      sample.pixels = gaussian_field_sample(
          rng, H, W, spec.smoothness - 0.5 * spec.shift_delta,
          spec.mean + spec.shift_delta, spec.contrast);
    } else {
      sample.pixels =
          blobs_sample(rng, H, W, spec.blob_mean + spec.shift_delta,
                       spec.blob_amp, spec.blob_min, spec.blob_max);
    }
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

BenchmarkSplit make_setup(const DistributionSpec& member_spec,
                          const DistributionSpec& nonmember_spec, int n_train,
                          int n_eval_per_side, std::uint64_t seed, int H,
                          int W) {
  if (n_train < 2 * n_eval_per_side) {
    throw ConfigError("make_setup: need n_train >= 2 * n_eval_per_side");
  }
  BenchmarkSplit split;
  split.H = H;
  split.W = W;
  split.seed = seed;
  split.member_spec = member_spec;
  split.nonmember_spec = nonmember_spec;

  Dataset members = generate_dataset(member_spec, n_train, seed, H, W, 0);
  split.train_set = std::move(members.samples);

  // Non-member ids live above the train-id range so id-set audits are trivial.
  Dataset nm = generate_dataset(nonmember_spec, 2 * n_eval_per_side, seed, H, W,
                                n_train);
  for (int i = 0; i < n_eval_per_side; ++i) {
    split.nonmembers_val.push_back(nm.samples[i]);
    split.nonmembers_test.push_back(nm.samples[n_eval_per_side + i]);
  }

  RngStream rng(seed, stream_tag("split"), 0);
  const std::vector<int> perm = rng.permutation(n_train);
  for (int i = 0; i < n_eval_per_side; ++i) {
    split.members_val.push_back(split.train_set[perm[i]]);
    split.members_test.push_back(split.train_set[perm[n_eval_per_side + i]]);
  }
  return split;
}

Eigen::MatrixXd to_matrix(const std::vector<ImageSample>& samples) {
  require(!samples.empty(), "to_matrix: empty sample list");
  Eigen::MatrixXd m(samples.size(), samples[0].pixels.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = samples[i].pixels.transpose();
  }
  return m;
}

}  // namespace diffmia
