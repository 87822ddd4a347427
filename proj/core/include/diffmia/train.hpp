#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "diffmia/net.hpp"
#include "diffmia/schedule.hpp"

namespace diffmia {

struct TrainConfig {
  int epochs = 1;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;

  bool operator==(const TrainConfig&) const = default;
};

struct TrainingMeta {
  int epochs = 0;
  int train_set_size = 0;
  std::uint64_t seed = 0;
  int passes_per_datapoint = 0;  // = epochs (full-pass epochs)
};

struct ModelCheckpoint {
  DenoiserNet net;
  NoiseSchedule schedule;
  TrainingMeta meta;
};

// Bookkeeping the train loop reports back (update counts, per-epoch losses).
struct TrainStats {
  long updates = 0;
  std::vector<double> epoch_losses;  // mean member loss per epoch
};

// Called after each epoch with (1-based epoch, mean member loss, net).
using EpochCallback =
    std::function<void(int, double, const DenoiserNet&)>;

// Plain mini-batch gradient descent on the eps-MSE with per-sample uniform
// t in [1, T] and fresh Gaussian eps from the seeded training stream.
// Deterministic given cfg.seed; single-threaded by contract.
// Throws NumericError (with the update index) if the loss goes non-finite.
ModelCheckpoint train(DenoiserNet net, const Eigen::MatrixXd& train_set,
                      const TrainConfig& cfg, const NoiseSchedule& schedule,
                      const EpochCallback& on_epoch = {},
                      TrainStats* stats = nullptr);

}  // namespace diffmia
