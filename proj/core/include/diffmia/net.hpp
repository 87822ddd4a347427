#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "diffmia/schedule.hpp"

namespace diffmia {

// A noised image together with its timestep index; values are the flattened
// H*W pixel grid in model space.
struct LatentState {
  Eigen::VectorXd values;
  int t = 0;
};

enum class Activation { silu, tanh };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct NetConfig {
  int pixels = 64;                     // H*W
  int embed_width = 16;                // sinusoidal t-embedding width (even)
  std::vector<int> hidden = {128, 128};
  Activation activation = Activation::silu;

  // {pixels + embed_width, hidden..., pixels}
  std::vector<int> layer_dims() const;
};

// Fully connected epsilon-predictor. W[l] is (in x out); the input is the
// pixel vector concatenated with the timestep embedding.
struct DenoiserNet {
  NetConfig cfg;
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::VectorXd> b;

  int n_layers() const { return static_cast<int>(W.size()); }
  std::size_t n_params() const;
  bool finite() const;
};

// He-initialized hidden layers with a zero-initialized output layer: the
// untrained net predicts eps = 0, which keeps early training stable and the
// zero-net analytic identities easy to hit in tests.
DenoiserNet make_net(const NetConfig& cfg, std::uint64_t seed);

// Sinusoidal features of t/T; width must be even (width 0 disables the
// embedding, which the tiny analytic test nets use).
Eigen::VectorXd timestep_embedding(double t, int T, int width);

// Batched forward pass keeping the intermediates reverse mode needs.
struct BatchTrace {
  Eigen::MatrixXd input0;                  // n x (pixels + embed)
  std::vector<Eigen::MatrixXd> acts;       // post-activation per hidden layer
  std::vector<Eigen::MatrixXd> act_derivs; // activation'(z) per hidden layer
  Eigen::MatrixXd out;                     // n x pixels
};

BatchTrace forward_batch(const DenoiserNet& net, const Eigen::MatrixXd& X,
                         const std::vector<int>& t, int T);

// Per-layer gradients w.r.t. pre-activation outputs, given dL/d(out).
// Returned vector has one n x width matrix per layer; the last entry is dout.
std::vector<Eigen::MatrixXd> backward_batch(const DenoiserNet& net,
                                            const BatchTrace& trace,
                                            const Eigen::MatrixXd& dout);

struct GradientSet {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;

  // sqrt(||dW_l||_F^2 + ||db_l||^2): the per-layer norm GSA aggregates.
  double layer_norm(int l) const;
  void scale(double c);
  void add_scaled(const GradientSet& other, double c);
};

GradientSet zero_gradients(const DenoiserNet& net);

// Batch-summed parameter gradients assembled from a trace and its deltas.
GradientSet grads_from_trace(const DenoiserNet& net, const BatchTrace& trace,
                             const std::vector<Eigen::MatrixXd>& deltas);

// Deterministic single-sample forward pass.
Eigen::VectorXd predict_eps(const DenoiserNet& net, const LatentState& x,
                            const NoiseSchedule& schedule);

// ||eps - eps_hat(x_t, t)||^2 with x_t from the closed-form forward process.
double training_loss(const DenoiserNet& net, const Eigen::VectorXd& x0, int t,
                     const Eigen::VectorXd& eps, const NoiseSchedule& schedule);

// Exact reverse-mode gradients of training_loss w.r.t. every parameter.
GradientSet param_gradients(const DenoiserNet& net, const Eigen::VectorXd& x0,
                            int t, const Eigen::VectorXd& eps,
                            const NoiseSchedule& schedule);

}  // namespace diffmia
