#pragma once

#include <Eigen/Dense>

#include "diffmia/net.hpp"
#include "diffmia/schedule.hpp"

namespace diffmia {

// Closed-form forward process: x_t = sqrt(ab_t) x_0 + sqrt(1 - ab_t) eps.
LatentState forward_diffuse(const LatentState& x0, int t,
                            const Eigen::VectorXd& eps,
                            const NoiseSchedule& schedule);

// Deterministic (eta = 0) DDIM reverse step to t_prev < t:
//   x0_hat  = (x_t - sqrt(1 - ab_t) eps_hat) / sqrt(ab_t)
//   x_prev  = sqrt(ab_prev) x0_hat + sqrt(1 - ab_prev) eps_hat
LatentState ddim_step(const DenoiserNet& net, const LatentState& x, int t_prev,
                      const NoiseSchedule& schedule);

// Same algebra run upward to t_next > t (the deterministic inversion step).
LatentState ddim_invert_step(const DenoiserNet& net, const LatentState& x,
                             int t_next, const NoiseSchedule& schedule);

}  // namespace diffmia
