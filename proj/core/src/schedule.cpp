#include "diffmia/schedule.hpp"

#include <algorithm>

#include "diffmia/error.hpp"

namespace diffmia {

NoiseSchedule build_linear_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw ConfigError("schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ConfigError("schedule: need 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.T = T;
  s.betas.resize(T);
  s.alphas.resize(T);
  s.alpha_bars.resize(T + 1);
  s.alpha_bars[0] = 1.0;
  double running = 1.0;
  for (int i = 0; i < T; ++i) {
    const double frac = (T == 1) ? 0.0 : static_cast<double>(i) / (T - 1);
    s.betas[i] = beta_start + (beta_end - beta_start) * frac;
    s.alphas[i] = 1.0 - s.betas[i];
    running *= s.alphas[i];
    s.alpha_bars[i + 1] = running;
  }
  return s;
}

double default_beta_start(int T) { return 1e-4 * (1000.0 / T); }

double default_beta_end(int T) {
  return std::min(0.02 * (1000.0 / T), 0.999);
}

NoiseSchedule default_schedule(int T) {
  return build_linear_schedule(T, default_beta_start(T), default_beta_end(T));
}

}  // namespace diffmia
