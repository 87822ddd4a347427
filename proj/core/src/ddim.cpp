#include "diffmia/ddim.hpp"

#include <cmath>

#include "diffmia/error.hpp"

namespace diffmia {

LatentState forward_diffuse(const LatentState& x0, int t,
                            const Eigen::VectorXd& eps,
                            const NoiseSchedule& schedule) {
  require(x0.t == 0, "forward_diffuse: input must be at t=0");
  // t=0 is the alpha_bar(0)=1 convention: the closed form reduces to x0.
  require(t >= 0 && t <= schedule.T, "forward_diffuse: t out of range");
  require(eps.size() == x0.values.size(), "forward_diffuse: eps shape mismatch");
  const double ab = schedule.alpha_bar(t);
  LatentState out;
  out.t = t;
  out.values = std::sqrt(ab) * x0.values + std::sqrt(1.0 - ab) * eps;
  return out;
}

namespace {

// Shared two-line eta=0 algebra; direction is enforced by the callers.
LatentState ddim_move(const DenoiserNet& net, const LatentState& x, int t_to,
                      const NoiseSchedule& schedule) {
  const Eigen::VectorXd eps_hat = predict_eps(net, x, schedule);
  const double ab_from = schedule.alpha_bar(x.t);
  const double ab_to = schedule.alpha_bar(t_to);
  const Eigen::VectorXd x0_hat =
      (x.values - std::sqrt(1.0 - ab_from) * eps_hat) / std::sqrt(ab_from);
  LatentState out;
  out.t = t_to;
  out.values = std::sqrt(ab_to) * x0_hat + std::sqrt(1.0 - ab_to) * eps_hat;
  return out;
}

}  // namespace

LatentState ddim_step(const DenoiserNet& net, const LatentState& x, int t_prev,
                      const NoiseSchedule& schedule) {
  require(0 <= t_prev && t_prev < x.t && x.t <= schedule.T,
          "ddim_step: need 0 <= t_prev < t <= T");
  return ddim_move(net, x, t_prev, schedule);
}

LatentState ddim_invert_step(const DenoiserNet& net, const LatentState& x,
                             int t_next, const NoiseSchedule& schedule) {
  require(0 <= x.t && x.t < t_next && t_next <= schedule.T,
          "ddim_invert_step: need 0 <= t < t_next <= T");
  return ddim_move(net, x, t_next, schedule);
}

}  // namespace diffmia
