#pragma once

// Shared fixtures for the unit suites: tiny nets with hand-set weights,
// seeded vector builders, and a scratch-directory guard.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "diffmia/data.hpp"
#include "diffmia/net.hpp"
#include "diffmia/rng.hpp"

namespace testutil {

// Net with every parameter zeroed (make_net only zeroes the output layer).
inline diffmia::DenoiserNet zero_net(int pixels, int embed,
                                     std::vector<int> hidden,
                                     diffmia::Activation act =
                                         diffmia::Activation::silu) {
  diffmia::NetConfig cfg;
  cfg.pixels = pixels;
  cfg.embed_width = embed;
  cfg.hidden = std::move(hidden);
  cfg.activation = act;
  diffmia::DenoiserNet net = diffmia::make_net(cfg, 1);
  for (auto& W : net.W) W.setZero();
  for (auto& b : net.b) b.setZero();
  return net;
}

// Net with all parameters (including the output layer) drawn from a seeded
// Gaussian, for oracle tests that need a generic nonlinear function.
inline diffmia::DenoiserNet random_net(int pixels, int embed,
                                       std::vector<int> hidden,
                                       std::uint64_t seed, double scale = 0.3,
                                       diffmia::Activation act =
                                           diffmia::Activation::silu) {
  diffmia::DenoiserNet net = zero_net(pixels, embed, std::move(hidden), act);
  diffmia::RngStream rng(seed);
  for (auto& W : net.W) {
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) {
        W(i, j) = scale * rng.gaussian();
      }
    }
  }
  for (auto& b : net.b) {
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = scale * rng.gaussian();
  }
  return net;
}

// Zero-weight net whose output is the constant vector c (last-layer bias).
inline diffmia::DenoiserNet constant_net(int pixels, double c) {
  diffmia::DenoiserNet net = zero_net(pixels, 0, {});
  net.b.back().setConstant(c);
  return net;
}

inline Eigen::VectorXd random_vec(int n, std::uint64_t seed,
                                  double scale = 1.0) {
  diffmia::RngStream rng(seed);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * rng.gaussian();
  return v;
}

// Pixel vector uniform in [-1, 1], the generator's output range.
inline Eigen::VectorXd random_image(int n, std::uint64_t seed) {
  diffmia::RngStream rng(seed);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform_range(-1.0, 1.0);
  return v;
}

inline diffmia::ImageSample sample_of(Eigen::VectorXd pixels,
                                      std::int64_t id = 0) {
  diffmia::ImageSample s;
  s.id = id;
  s.pixels = std::move(pixels);
  s.source = "test";
  return s;
}

// Unique scratch directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("diffmia_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str(const std::string& sub = "") const {
    return sub.empty() ? path.string() : (path / sub).string();
  }
};

inline std::string read_bytes(const std::string& path) {
  std::string out;
  std::ifstream f(path, std::ios::binary);
  out.assign(std::istreambuf_iterator<char>(f),
             std::istreambuf_iterator<char>());
  return out;
}

}  // namespace testutil
