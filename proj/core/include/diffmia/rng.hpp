#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>
#include <vector>

namespace diffmia {

// splitmix64 step: advances `state` and returns a well-mixed 64-bit value.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// FNV-1a over a string; used to derive per-purpose stream tags from names.
inline std::uint64_t stream_tag(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Deterministic derivation of an independent stream seed from
// (run seed, stream tag, sample id). Order-sensitive by construction.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t id) {
  std::uint64_t s = seed;
  std::uint64_t v = splitmix64(s);
  s ^= 0x9e3779b97f4a7c15ull * (stream + 1);
  v ^= splitmix64(s);
  s ^= 0x94d049bb133111ebull * (id + 1);
  v ^= splitmix64(s);
  return v;
}

// Seeded random stream. Gaussians come from a hand-rolled Box-Muller over
// mt19937_64 uniforms so that draws are bit-reproducible across platforms
// (std::normal_distribution is implementation-defined).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}
  RngStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t id)
      : gen_(mix_seed(seed, stream, id)) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1); safe as a log() argument.
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform_range(double lo, double hi) {
    return lo + (hi - lo) * uniform();
  }

  // Inclusive uniform integer. Modulo bias is negligible (range << 2^64)
  // and determinism matters more here than exactness of the distribution.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() %
                                 static_cast<std::uint64_t>(hi - lo + 1));
  }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Fisher-Yates permutation of {0, ..., n-1}.
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) {
      const int j = uniform_int(0, i);
      std::swap(p[i], p[j]);
    }
    return p;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace diffmia
