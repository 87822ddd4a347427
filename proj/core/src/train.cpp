#include "diffmia/train.hpp"

#include <cmath>
#include <string>

#include "diffmia/error.hpp"
#include "diffmia/rng.hpp"

namespace diffmia {

ModelCheckpoint train(DenoiserNet net, const Eigen::MatrixXd& train_set,
                      const TrainConfig& cfg, const NoiseSchedule& schedule,
                      const EpochCallback& on_epoch, TrainStats* stats) {
  const int n = static_cast<int>(train_set.rows());
  if (n < 1) throw ConfigError("train: empty training set");
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  require(train_set.cols() == net.cfg.pixels, "train: pixel dim mismatch");

  RngStream rng(cfg.seed, stream_tag("train"), 0);
  long updates = 0;

  for (int ep = 0; ep < cfg.epochs; ++ep) {
    const std::vector<int> perm = rng.permutation(n);
    double loss_sum = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, n - start);
      Eigen::MatrixXd x0(bsz, net.cfg.pixels);
      for (int i = 0; i < bsz; ++i) x0.row(i) = train_set.row(perm[start + i]);

      std::vector<int> t(bsz);
      for (int i = 0; i < bsz; ++i) t[i] = rng.uniform_int(1, schedule.T);
      Eigen::MatrixXd eps(bsz, net.cfg.pixels);
      for (int i = 0; i < bsz; ++i) {
        for (int j = 0; j < net.cfg.pixels; ++j) eps(i, j) = rng.gaussian();
      }

      Eigen::MatrixXd xt(bsz, net.cfg.pixels);
      for (int i = 0; i < bsz; ++i) {
        const double ab = schedule.alpha_bar(t[i]);
        xt.row(i) =
            std::sqrt(ab) * x0.row(i) + std::sqrt(1.0 - ab) * eps.row(i);
      }

      const BatchTrace tr = forward_batch(net, xt, t, schedule.T);
      const Eigen::MatrixXd resid = tr.out - eps;
      // Batch objective: mean over the batch of per-sample sum-of-squares.
      const double batch_loss = resid.squaredNorm() / bsz;
      ++updates;
      if (!std::isfinite(batch_loss)) {
        throw NumericError("train: loss diverged at update " +
                           std::to_string(updates));
      }
      loss_sum += batch_loss;
      ++batches;

      const Eigen::MatrixXd dout = (2.0 / bsz) * resid;
      const GradientSet g =
          grads_from_trace(net, tr, backward_batch(net, tr, dout));
      for (int l = 0; l < net.n_layers(); ++l) {
        net.W[l] -= cfg.learning_rate * g.dW[l];
        net.b[l] -= cfg.learning_rate * g.db[l];
      }
    }
    const double epoch_loss = loss_sum / batches;
    if (stats) stats->epoch_losses.push_back(epoch_loss);
    if (on_epoch) on_epoch(ep + 1, epoch_loss, net);
  }

  if (stats) stats->updates = updates;

  ModelCheckpoint ckpt;
  ckpt.net = std::move(net);
  ckpt.schedule = schedule;
  ckpt.meta.epochs = cfg.epochs;
  ckpt.meta.train_set_size = n;
  ckpt.meta.seed = cfg.seed;
  ckpt.meta.passes_per_datapoint = cfg.epochs;
  return ckpt;
}

}  // namespace diffmia
