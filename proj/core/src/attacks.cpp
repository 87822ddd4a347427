#include "diffmia/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "diffmia/ddim.hpp"
#include "diffmia/error.hpp"
#include "diffmia/rng.hpp"

namespace diffmia {

namespace {

void validate_grid(const std::vector<int>& grid, int T, const char* what) {
  if (grid.empty()) throw ConfigError(std::string(what) + ": empty grid");
  for (int t : grid) {
    if (t < 0 || t > T) {
      throw ConfigError(std::string(what) + ": grid entry out of [0, T]");
    }
  }
}

Eigen::VectorXd single_forward(const ModelCheckpoint& ckpt,
                               const Eigen::VectorXd& x, int t,
                               QueryCount* qc) {
  if (qc) ++qc->forward_passes;
  return predict_eps(ckpt.net, {x, t}, ckpt.schedule);
}

Eigen::VectorXd draw_eps(RngStream& rng, int pixels) {
  Eigen::VectorXd e(pixels);
  for (int i = 0; i < pixels; ++i) e[i] = rng.gaussian();
  return e;
}

}  // namespace

AttackConfig default_attack_config(const std::string& method, int T,
                                   std::uint64_t seed) {
  AttackConfig cfg;
  cfg.method = method;
  cfg.seed = seed;
  if (method == "secmi") {
    for (int t = 1; t <= T / 2; ++t) cfg.secmi.step_grid.push_back(t);
    cfg.secmi.t_star = std::max(1, static_cast<int>(std::llround(0.05 * T)));
  } else if (method == "pia") {
    for (int k = 0; k < 50; ++k) {
      cfg.pia.timesteps.push_back(static_cast<int>(std::llround(0.01 * T * k)));
    }
  } else if (method == "pfami") {
    for (int t = 1; t <= T; ++t) cfg.pfami.loss_grid.push_back(t);
  } else if (method == "gsa1" || method == "gsa2") {
    for (int k = 0; k <= 20; ++k) {
      cfg.gsa.timesteps.push_back(static_cast<int>(std::llround(T * k / 20.0)));
    }
  } else if (method != "blind") {
    throw ConfigError("unknown attack method: " + method);
  }
  return cfg;
}

QueryCount attack_query_count(const AttackConfig& cfg) {
  QueryCount qc;
  if (cfg.method == "secmi" || cfg.method == "secmi++") {
    qc.forward_passes = 2 * static_cast<long>(cfg.secmi.step_grid.size());
  } else if (cfg.method == "pia") {
    qc.forward_passes = static_cast<long>(cfg.pia.timesteps.size()) + 1;
  } else if (cfg.method == "pfami") {
    qc.forward_passes = static_cast<long>(cfg.pfami.N + 1) *
                        static_cast<long>(cfg.pfami.loss_grid.size());
  } else if (cfg.method == "gsa1") {
    qc.forward_passes = static_cast<long>(cfg.gsa.timesteps.size());
    qc.backward_passes = 1;
  } else if (cfg.method == "gsa2") {
    qc.forward_passes = static_cast<long>(cfg.gsa.timesteps.size());
    qc.backward_passes = static_cast<long>(cfg.gsa.timesteps.size());
  } else if (cfg.method != "blind") {
    throw ConfigError("unknown attack method: " + cfg.method);
  }
  return qc;
}

MiaScore secmi_score(const ModelCheckpoint& ckpt, const ImageSample& x0,
                     int label, const SecmiConfig& cfg, QueryCount* qc) {
  const int T = ckpt.schedule.T;
  validate_grid(cfg.step_grid, T, "secmi");
  for (std::size_t i = 0; i < cfg.step_grid.size(); ++i) {
    const int prev = (i == 0) ? 0 : cfg.step_grid[i - 1];
    if (cfg.step_grid[i] <= prev) {
      throw ConfigError("secmi: step_grid must ascend from 0");
    }
  }
  if (!cfg.plusplus &&
      std::find(cfg.step_grid.begin(), cfg.step_grid.end(), cfg.t_star) ==
          cfg.step_grid.end()) {
    throw ConfigError("secmi: t_star not on step_grid");
  }

  // Deterministic DDIM inversion along the grid, recording every node.
  const std::size_t K = cfg.step_grid.size();
  std::vector<Eigen::VectorXd> rec(K + 1);
  rec[0] = x0.pixels;
  LatentState cur{x0.pixels, 0};
  for (std::size_t i = 0; i < K; ++i) {
    if (qc) ++qc->forward_passes;
    cur = ddim_invert_step(ckpt.net, cur, cfg.step_grid[i], ckpt.schedule);
    rec[i + 1] = cur.values;
  }

  // One deterministic reverse step per node; distance against the recorded
  // trajectory. Cost is 2 * |step_grid| forwards whether or not plusplus
  // aggregates (plain SecMI reads the t_star node's distance).
  double score = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    const int node = cfg.step_grid[i];
    const int prev = (i == 0) ? 0 : cfg.step_grid[i - 1];
    if (qc) ++qc->forward_passes;
    const LatentState back =
        ddim_step(ckpt.net, {rec[i + 1], node}, prev, ckpt.schedule);
    const double d = (back.values - rec[i]).squaredNorm();
    sum += d;
    if (node == cfg.t_star) score = d;
  }
  if (cfg.plusplus) score = sum / static_cast<double>(K);
  return {x0.id, score, label};
}

MiaScore pia_score(const ModelCheckpoint& ckpt, const ImageSample& x0,
                   int label, const PiaConfig& cfg, QueryCount* qc) {
  const int T = ckpt.schedule.T;
  validate_grid(cfg.timesteps, T, "pia");

  // Shared eps0 from the model at the smallest timestep (t=0 clamped to 1).
  const Eigen::VectorXd eps0 = single_forward(ckpt, x0.pixels, 1, qc);
  double total = 0.0;
  for (int t : cfg.timesteps) {
    const int te = std::max(1, t);
    const double ab = ckpt.schedule.alpha_bar(te);
    const Eigen::VectorXd xt =
        std::sqrt(ab) * x0.pixels + std::sqrt(1.0 - ab) * eps0;
    const Eigen::VectorXd pred = single_forward(ckpt, xt, te, qc);
    total += (pred - eps0).norm();
  }
  return {x0.id, total, label};
}

Eigen::VectorXd center_crop_resize(const Eigen::VectorXd& pixels, int H, int W,
                                   double strength) {
  require(strength > 0.0 && strength <= 1.0,
          "center_crop_resize: strength outside (0, 1]");
  const double root = std::sqrt(strength);
  const auto axis_coords = [root](int n) {
    const double c = (n - 1) / 2.0;
    std::vector<double> coords(n);
    for (int i = 0; i < n; ++i) coords[i] = c + (i - c) * root;
    return coords;
  };
  const std::vector<double> rc = axis_coords(H);
  const std::vector<double> cc = axis_coords(W);

  Eigen::MatrixXd img(H, W);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) img(i, j) = pixels[i * W + j];
  }

  // Separable bilinear resample: rows first, then columns.
  Eigen::MatrixXd rows(H, W);
  for (int i = 0; i < H; ++i) {
    const int i0 = static_cast<int>(std::floor(rc[i]));
    const int i1 = std::min(i0 + 1, H - 1);
    const double f = rc[i] - i0;
    rows.row(i) = (1.0 - f) * img.row(i0) + f * img.row(i1);
  }
  Eigen::MatrixXd out(H, W);
  for (int j = 0; j < W; ++j) {
    const int j0 = static_cast<int>(std::floor(cc[j]));
    const int j1 = std::min(j0 + 1, W - 1);
    const double f = cc[j] - j0;
    out.col(j) = (1.0 - f) * rows.col(j0) + f * rows.col(j1);
  }

  Eigen::VectorXd flat(H * W);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) flat[i * W + j] = out(i, j);
  }
  return flat;
}

MiaScore pfami_score(const ModelCheckpoint& ckpt, const ImageSample& x0,
                     int label, const PfamiConfig& cfg, std::uint64_t seed,
                     QueryCount* qc) {
  const int T = ckpt.schedule.T;
  if (cfg.N < 1) throw ConfigError("pfami: N must be >= 1");
  if (!(cfg.strength_lo > 0.0 && cfg.strength_lo <= cfg.strength_hi &&
        cfg.strength_hi <= 1.0)) {
    throw ConfigError("pfami: strengths must lie in (0, 1]");
  }
  validate_grid(cfg.loss_grid, T, "pfami");

  const int pixels = static_cast<int>(x0.pixels.size());
  const int H = static_cast<int>(std::lround(std::sqrt(double(pixels))));
  require(H * H == pixels, "pfami: non-square image");

  RngStream rng(seed, stream_tag("pfami"), static_cast<std::uint64_t>(x0.id));
  std::vector<Eigen::VectorXd> imgs;
  imgs.push_back(x0.pixels);
  for (int i = 0; i < cfg.N; ++i) {
    const double s = rng.uniform_range(cfg.strength_lo, cfg.strength_hi);
    imgs.push_back(center_crop_resize(x0.pixels, H, H, s));
  }

  const int m = static_cast<int>(imgs.size());
  std::vector<double> losses(m, 0.0);
  for (int t : cfg.loss_grid) {
    const int te = std::max(1, t);
    const double ab = ckpt.schedule.alpha_bar(te);
    Eigen::VectorXd shared;
    if (cfg.shared_noise) shared = draw_eps(rng, pixels);
    Eigen::MatrixXd xt(m, pixels);
    Eigen::MatrixXd eps(m, pixels);
    for (int j = 0; j < m; ++j) {
      eps.row(j) =
          (cfg.shared_noise ? shared : draw_eps(rng, pixels)).transpose();
      xt.row(j) = std::sqrt(ab) * imgs[j].transpose() +
                  std::sqrt(1.0 - ab) * eps.row(j);
    }
    const BatchTrace tr =
        forward_batch(ckpt.net, xt, std::vector<int>(m, te), T);
    if (qc) qc->forward_passes += m;
    for (int j = 0; j < m; ++j) {
      losses[j] += (tr.out.row(j) - eps.row(j)).squaredNorm();
    }
  }

  // Mean-of-differences form of L(x0) - mean_i L(x~_i): identical algebra,
  // but exactly zero whenever every neighbor loss matches the original's
  // (degenerate strength-1 crops, x-independent zero-net losses).
  const double k = static_cast<double>(cfg.loss_grid.size());
  double diff_sum = 0.0;
  for (int j = 1; j < m; ++j) diff_sum += (losses[0] - losses[j]) / k;
  const double score = diff_sum / cfg.N;
  return {x0.id, score, label};
}

FeatureVector gsa_features_given_noise(const ModelCheckpoint& ckpt,
                                       const ImageSample& x0, int label,
                                       const GsaConfig& cfg,
                                       const std::vector<Eigen::VectorXd>& eps,
                                       bool per_node, QueryCount* qc) {
  const int T = ckpt.schedule.T;
  validate_grid(cfg.timesteps, T, "gsa");
  const int K = static_cast<int>(cfg.timesteps.size());
  const int L = ckpt.net.n_layers();
  require(eps.size() == cfg.timesteps.size(),
          "gsa: one noise vector per grid timestep required");

  FeatureVector fv;
  fv.sample_id = x0.id;
  fv.label = label;
  fv.schema_id = per_node ? "gsa2" : "gsa1";

  GradientSet acc = zero_gradients(ckpt.net);
  for (int k = 0; k < K; ++k) {
    const int te = std::max(1, cfg.timesteps[k]);
    const double ab = ckpt.schedule.alpha_bar(te);
    const Eigen::MatrixXd xt =
        (std::sqrt(ab) * x0.pixels + std::sqrt(1.0 - ab) * eps[k]).transpose();
    const BatchTrace tr = forward_batch(ckpt.net, xt, {te}, T);
    if (qc) ++qc->forward_passes;
    const Eigen::MatrixXd dout = 2.0 * (tr.out - eps[k].transpose());
    const GradientSet g =
        grads_from_trace(ckpt.net, tr, backward_batch(ckpt.net, tr, dout));
    if (per_node) {
      if (qc) ++qc->backward_passes;
      for (int l = 0; l < L; ++l) fv.values.push_back(g.layer_norm(l));
    } else {
      acc.add_scaled(g, 1.0 / K);
    }
  }
  if (!per_node) {
    // One reverse evaluation of the node-averaged loss.
    if (qc) ++qc->backward_passes;
    for (int l = 0; l < L; ++l) fv.values.push_back(acc.layer_norm(l));
  }
  return fv;
}

namespace {

// Both variants consume identical noise draws so that GSA1's single gradient
// equals the timestep mean of GSA2's per-node gradients.
std::vector<Eigen::VectorXd> draw_gsa_noise(const GsaConfig& cfg,
                                            const ImageSample& x0,
                                            std::uint64_t seed) {
  RngStream rng(seed, stream_tag("gsa"), static_cast<std::uint64_t>(x0.id));
  std::vector<Eigen::VectorXd> eps;
  eps.reserve(cfg.timesteps.size());
  for (std::size_t k = 0; k < cfg.timesteps.size(); ++k) {
    eps.push_back(draw_eps(rng, static_cast<int>(x0.pixels.size())));
  }
  return eps;
}

}  // namespace

FeatureVector gsa1_features(const ModelCheckpoint& ckpt, const ImageSample& x0,
                            int label, const GsaConfig& cfg, std::uint64_t seed,
                            QueryCount* qc) {
  return gsa_features_given_noise(ckpt, x0, label, cfg,
                                  draw_gsa_noise(cfg, x0, seed), false, qc);
}

FeatureVector gsa2_features(const ModelCheckpoint& ckpt, const ImageSample& x0,
                            int label, const GsaConfig& cfg, std::uint64_t seed,
                            QueryCount* qc) {
  return gsa_features_given_noise(ckpt, x0, label, cfg,
                                  draw_gsa_noise(cfg, x0, seed), true, qc);
}

FeatureVector blind_features(const ImageSample& x0, int label, int H, int W) {
  require(H % 4 == 0 && W % 4 == 0,
          "blind_features: H and W must be multiples of 4");
  require(x0.pixels.size() == H * W, "blind_features: pixel count mismatch");

  FeatureVector fv;
  fv.sample_id = x0.id;
  fv.label = label;
  fv.schema_id = "blind";
  fv.values.reserve(19);

  const int bh = H / 4, bw = W / 4;
  for (int bi = 0; bi < 4; ++bi) {
    for (int bj = 0; bj < 4; ++bj) {
      double acc = 0.0;
      for (int i = 0; i < bh; ++i) {
        for (int j = 0; j < bw; ++j) {
          acc += x0.pixels[(bi * bh + i) * W + (bj * bw + j)];
        }
      }
      fv.values.push_back(acc / (bh * bw));
    }
  }

  const double mean = x0.pixels.mean();
  const double var =
      (x0.pixels.array() - mean).square().sum() / x0.pixels.size();
  fv.values.push_back(mean);
  fv.values.push_back(var);

  double gx = 0.0, gy = 0.0;
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j + 1 < W; ++j) {
      gx += std::abs(x0.pixels[i * W + j + 1] - x0.pixels[i * W + j]);
    }
  }
  for (int i = 0; i + 1 < H; ++i) {
    for (int j = 0; j < W; ++j) {
      gy += std::abs(x0.pixels[(i + 1) * W + j] - x0.pixels[i * W + j]);
    }
  }
  fv.values.push_back(gx / (H * (W - 1)) + gy / ((H - 1) * W));
  return fv;
}

}  // namespace diffmia
