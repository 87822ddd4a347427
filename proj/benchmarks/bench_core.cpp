// Microbenchmarks for the per-sample attack costs and the training-side
// primitives they are built from. Run with --benchmark_filter=<regex> to
// focus on one path.

#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <vector>

#include "diffmia/attacks.hpp"
#include "diffmia/data.hpp"
#include "diffmia/eval.hpp"
#include "diffmia/net.hpp"
#include "diffmia/rng.hpp"
#include "diffmia/schedule.hpp"
#include "diffmia/train.hpp"

using namespace diffmia;

namespace {

// One shared trained-ish model: random weights are fine for timing.
const ModelCheckpoint& checkpoint() {
  static const ModelCheckpoint ckpt = [] {
    ModelCheckpoint c;
    c.net = make_net(NetConfig{}, 1);
    RngStream rng(2);
    for (auto& W : c.net.W) {
      for (Eigen::Index i = 0; i < W.size(); ++i) {
        W.data()[i] += 0.05 * rng.gaussian();
      }
    }
    c.schedule = default_schedule(100);
    return c;
  }();
  return ckpt;
}

ImageSample bench_sample() {
  ImageSample s;
  s.id = 1;
  RngStream rng(3);
  s.pixels.resize(64);
  for (int i = 0; i < 64; ++i) s.pixels[i] = rng.uniform_range(-1.0, 1.0);
  return s;
}

}  // namespace

static void BM_forward_batch(benchmark::State& state) {
  const ModelCheckpoint& ckpt = checkpoint();
  const int n = static_cast<int>(state.range(0));
  Eigen::MatrixXd X(n, 64);
  RngStream rng(4);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.gaussian();
  const std::vector<int> t(n, 50);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_batch(ckpt.net, X, t, 100));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_forward_batch)->Arg(1)->Arg(11)->Arg(32);

static void BM_training_loss(benchmark::State& state) {
  const ModelCheckpoint& ckpt = checkpoint();
  const Eigen::VectorXd x0 = bench_sample().pixels;
  RngStream rng(5);
  Eigen::VectorXd eps(64);
  for (int i = 0; i < 64; ++i) eps[i] = rng.gaussian();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        training_loss(ckpt.net, x0, 50, eps, ckpt.schedule));
  }
}
BENCHMARK(BM_training_loss);

static void BM_param_gradients(benchmark::State& state) {
  const ModelCheckpoint& ckpt = checkpoint();
  const Eigen::VectorXd x0 = bench_sample().pixels;
  RngStream rng(6);
  Eigen::VectorXd eps(64);
  for (int i = 0; i < 64; ++i) eps[i] = rng.gaussian();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        param_gradients(ckpt.net, x0, 50, eps, ckpt.schedule));
  }
}
BENCHMARK(BM_param_gradients);

static void BM_secmi_score(benchmark::State& state) {
  const ModelCheckpoint& ckpt = checkpoint();
  const ImageSample s = bench_sample();
  const SecmiConfig cfg = default_attack_config("secmi", 100).secmi;
  for (auto _ : state) {
    benchmark::DoNotOptimize(secmi_score(ckpt, s, 1, cfg));
  }
}
BENCHMARK(BM_secmi_score);

static void BM_pia_score(benchmark::State& state) {
  const ModelCheckpoint& ckpt = checkpoint();
  const ImageSample s = bench_sample();
  const PiaConfig cfg = default_attack_config("pia", 100).pia;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pia_score(ckpt, s, 1, cfg));
  }
}
BENCHMARK(BM_pia_score);

static void BM_pfami_score(benchmark::State& state) {
  const ModelCheckpoint& ckpt = checkpoint();
  const ImageSample s = bench_sample();
  const PfamiConfig cfg = default_attack_config("pfami", 100).pfami;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pfami_score(ckpt, s, 1, cfg, 1));
  }
}
BENCHMARK(BM_pfami_score);

static void BM_gsa2_features(benchmark::State& state) {
  const ModelCheckpoint& ckpt = checkpoint();
  const ImageSample s = bench_sample();
  const GsaConfig cfg = default_attack_config("gsa2", 100).gsa;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gsa2_features(ckpt, s, 1, cfg, 1));
  }
}
BENCHMARK(BM_gsa2_features);

static void BM_compute_auc(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  RngStream rng(7);
  ScoreSet scores;
  for (int i = 0; i < n; ++i) {
    scores.entries.push_back({i, rng.gaussian() - 0.3, 1});
    scores.entries.push_back({n + i, rng.gaussian(), 0});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_auc(scores));
  }
}
BENCHMARK(BM_compute_auc)->Arg(100)->Arg(1000);

static void BM_train_epoch(benchmark::State& state) {
  const DistributionSpec spec;
  const Dataset data = generate_dataset(spec, 64, 1);
  const Eigen::MatrixXd X = to_matrix(data.samples);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-3;
  const NoiseSchedule schedule = default_schedule(100);
  for (auto _ : state) {
    DenoiserNet net = make_net(NetConfig{}, 1);
    benchmark::DoNotOptimize(train(std::move(net), X, cfg, schedule));
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_train_epoch);

static void BM_generate_dataset(benchmark::State& state) {
  const DistributionSpec spec;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_dataset(spec, 64, 1));
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_generate_dataset);

BENCHMARK_MAIN();
