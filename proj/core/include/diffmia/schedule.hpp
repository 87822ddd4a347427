#pragma once

#include <vector>

namespace diffmia {

// Diffusion noise schedule. betas[i] stores beta_{i+1} for t = 1..T;
// alpha_bars has T+1 entries with the alpha_bar(0) = 1 convention.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;

  double beta(int t) const { return betas[static_cast<std::size_t>(t) - 1]; }
  double alpha(int t) const { return alphas[static_cast<std::size_t>(t) - 1]; }
  double alpha_bar(int t) const {
    return alpha_bars[static_cast<std::size_t>(t)];
  }
};

// Linear beta grid, endpoints inclusive. Throws ConfigError on invalid bounds.
NoiseSchedule build_linear_schedule(int T, double beta_start, double beta_end);

// Default linear-DDPM endpoints rescaled from the T=1000 convention
// (1e-4, 0.02) by 1000/T, capped below 1.
double default_beta_start(int T);
double default_beta_end(int T);
NoiseSchedule default_schedule(int T = 100);

}  // namespace diffmia
