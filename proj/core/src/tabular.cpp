#include "diffmia/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "diffmia/error.hpp"

namespace diffmia {

namespace {

double sigmoid(double m) {
  if (m >= 0.0) return 1.0 / (1.0 + std::exp(-m));
  const double e = std::exp(m);
  return e / (1.0 + e);
}

// Stable logistic loss for label y in {0,1} and margin m:
// softplus(m) - y*m.
double logistic_loss(double m, int y) {
  const double sp = (m > 0.0) ? m + std::log1p(std::exp(-m))
                              : std::log1p(std::exp(m));
  return sp - y * m;
}

}  // namespace

Eigen::VectorXd Standardizer::transform(const Eigen::VectorXd& x) const {
  require(x.size() == mean.size(), "standardizer: dimension mismatch");
  return (x - mean).cwiseQuotient(std);
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& X) const {
  require(X.cols() == mean.size(), "standardizer: dimension mismatch");
  Eigen::MatrixXd out = X;
  out.rowwise() -= mean.transpose();
  out.array().rowwise() /= std.transpose().array();
  return out;
}

Standardizer fit_standardizer(const Eigen::MatrixXd& X) {
  require(X.rows() >= 1, "standardizer: empty input");
  Standardizer s;
  s.mean = X.colwise().mean();
  Eigen::MatrixXd c = X.rowwise() - s.mean.transpose();
  s.std = (c.array().square().colwise().mean()).sqrt().matrix();
  s.std = s.std.cwiseMax(1e-12);
  return s;
}

double Tree::eval(const Eigen::VectorXd& x) const {
  int id = 0;
  while (nodes[id].feature >= 0) {
    const TreeNode& nd = nodes[id];
    id = (x[nd.feature] < nd.threshold) ? nd.left : nd.right;
  }
  return nodes[id].value;
}

double BoostedTrees::predict_margin(const Eigen::VectorXd& x) const {
  require(x.size() == n_features, "boosted trees: feature schema mismatch");
  double m = base_score;
  for (const Tree& t : trees) m += cfg.learning_rate * t.eval(x);
  return m;
}

double BoostedTrees::predict_proba(const Eigen::VectorXd& x) const {
  return sigmoid(predict_margin(x));
}

Eigen::VectorXd BoostedTrees::predict_proba(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd p(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    p[i] = predict_proba(Eigen::VectorXd(X.row(i)));
  }
  return p;
}

double BoostedTrees::training_accuracy(const Eigen::MatrixXd& X,
                                       const std::vector<int>& y) const {
  require(static_cast<std::size_t>(X.rows()) == y.size(),
          "boosted trees: label count mismatch");
  int hits = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const int pred = predict_margin(Eigen::VectorXd(X.row(i))) >= 0.0 ? 1 : 0;
    if (pred == y[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(X.rows());
}

namespace {

struct TreeBuilder {
  const Eigen::MatrixXd& X;
  const Eigen::VectorXd& g;
  const Eigen::VectorXd& h;
  const std::vector<std::vector<int>>& order;  // per-feature sorted indices
  const BoostConfig& cfg;
  std::vector<char> in_node;
  Tree tree;
  std::vector<std::pair<int, double>> leaf_updates;  // (sample, raw value)

  int build(std::vector<int>& idx, int depth) {
    double G = 0.0, H = 0.0;
    for (int i : idx) {
      G += g[i];
      H += h[i];
    }
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    int best_f = -1;
    double best_thr = 0.0, best_gain = 1e-12;
    if (depth < cfg.max_depth && idx.size() >= 2) {
      const double parent = G * G / (H + cfg.lambda);
      for (int i : idx) in_node[i] = 1;
      for (int f = 0; f < X.cols(); ++f) {
        double GL = 0.0, HL = 0.0;
        int prev = -1;
        for (int i : order[f]) {
          if (!in_node[i]) continue;
          if (prev >= 0 && X(i, f) > X(prev, f)) {
            const double GR = G - GL, HR = H - HL;
            const double gain = GL * GL / (HL + cfg.lambda) +
                                GR * GR / (HR + cfg.lambda) - parent;
            if (gain > best_gain) {
              best_gain = gain;
              best_f = f;
              best_thr = 0.5 * (X(prev, f) + X(i, f));
            }
          }
          GL += g[i];
          HL += h[i];
          prev = i;
        }
      }
      for (int i : idx) in_node[i] = 0;
    }

    if (best_f < 0) {
      const double value = -G / (H + cfg.lambda);
      tree.nodes[id].value = value;
      for (int i : idx) leaf_updates.emplace_back(i, value);
      return id;
    }

    std::vector<int> li, ri;
    for (int i : idx) {
      (X(i, best_f) < best_thr ? li : ri).push_back(i);
    }
    const int l = build(li, depth + 1);
    const int r = build(ri, depth + 1);
    tree.nodes[id].feature = best_f;
    tree.nodes[id].threshold = best_thr;
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }
};

}  // namespace

BoostedTrees fit_boosted_trees(const Eigen::MatrixXd& X,
                               const std::vector<int>& y,
                               const BoostConfig& cfg) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  if (n < 2 || static_cast<std::size_t>(n) != y.size()) {
    throw ConfigError("boosted trees: need >= 2 labeled samples");
  }
  if (cfg.n_estimators < 0 || cfg.learning_rate <= 0.0 || cfg.max_depth < 1) {
    throw ConfigError("boosted trees: invalid config");
  }
  double pos = 0.0;
  for (int yi : y) {
    if (yi != 0 && yi != 1) throw ConfigError("boosted trees: labels not 0/1");
    pos += yi;
  }
  if (pos == 0.0 || pos == n) {
    throw ConfigError("boosted trees: both classes required");
  }

  BoostedTrees model;
  model.cfg = cfg;
  model.n_features = d;
  const double prior = pos / n;
  model.base_score = std::log(prior / (1.0 - prior));

  // Presorted per-feature index lists give deterministic exact-greedy scans.
  std::vector<std::vector<int>> order(d);
  for (int f = 0; f < d; ++f) {
    order[f].resize(n);
    std::iota(order[f].begin(), order[f].end(), 0);
    std::stable_sort(order[f].begin(), order[f].end(),
                     [&](int a, int b) { return X(a, f) < X(b, f); });
  }

  Eigen::VectorXd margin = Eigen::VectorXd::Constant(n, model.base_score);
  Eigen::VectorXd g(n), h(n);
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);

  for (int stage = 0; stage < cfg.n_estimators; ++stage) {
    for (int i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      g[i] = p - y[i];
      h[i] = p * (1.0 - p);
    }
    TreeBuilder tb{X, g, h, order, cfg, std::vector<char>(n, 0), {}, {}};
    std::vector<int> idx = all;
    tb.build(idx, 0);
    for (const auto& [i, value] : tb.leaf_updates) {
      margin[i] += cfg.learning_rate * value;
    }
    model.trees.push_back(std::move(tb.tree));

    double loss = 0.0;
    for (int i = 0; i < n; ++i) loss += logistic_loss(margin[i], y[i]);
    model.stage_losses.push_back(loss / n);
  }
  return model;
}

Eigen::Vector3d PcaProjector::project(const Eigen::VectorXd& x) const {
  require(x.size() == mean.size(), "pca: dimension mismatch");
  return components * (x - mean);
}

Eigen::MatrixXd PcaProjector::project(const Eigen::MatrixXd& X) const {
  require(X.cols() == mean.size(), "pca: dimension mismatch");
  return (X.rowwise() - mean.transpose()) * components.transpose();
}

Eigen::VectorXd PcaProjector::reconstruct(const Eigen::VectorXd& x,
                                          int k) const {
  require(k >= 1 && k <= 3, "pca: component count outside 1..3");
  Eigen::VectorXd out = mean;
  const Eigen::VectorXd c = x - mean;
  for (int j = 0; j < k; ++j) {
    out += components.row(j).dot(c) * components.row(j).transpose();
  }
  return out;
}

PcaProjector fit_pca3(const Eigen::MatrixXd& X, double tol, int max_iter) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  if (n < 4) throw ConfigError("pca: need at least 4 samples");
  require(d >= 3, "pca: need at least 3 features");

  PcaProjector pr;
  pr.mean = X.colwise().mean();
  const Eigen::MatrixXd C =
      (X.rowwise() - pr.mean.transpose()).transpose() *
      (X.rowwise() - pr.mean.transpose()) / static_cast<double>(n);

  pr.components = Eigen::MatrixXd::Zero(3, d);
  for (int c = 0; c < 3; ++c) {
    Eigen::VectorXd v =
        Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(double(d)));
    for (int j = 0; j < c; ++j) {
      v -= pr.components.row(j).dot(v) * pr.components.row(j).transpose();
    }
    const double vnorm = v.norm();
    if (vnorm > 1e-12) v /= vnorm;

    const double floor =
        1e-12 * (c == 0 ? 1.0 : std::max(1.0, pr.eigenvalues[0]));
    bool found = true;
    for (int it = 0; it < max_iter; ++it) {
      Eigen::VectorXd w = C * v;
      for (int j = 0; j < c; ++j) {
        w -= pr.components.row(j).dot(w) * pr.components.row(j).transpose();
      }
      const double wn = w.norm();
      if (wn < floor) {
        found = false;
        break;
      }
      w /= wn;
      const double diff = (w - v).norm();
      v = w;
      if (diff < tol) break;
    }

    if (!found) {
      // Residual variance is numerically zero: complete with the first
      // standard-basis vector that survives orthogonalization.
      pr.degenerate = true;
      for (int k = 0; k < d; ++k) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
        e[k] = 1.0;
        for (int j = 0; j < c; ++j) {
          e -= pr.components.row(j).dot(e) * pr.components.row(j).transpose();
        }
        if (e.norm() > 1e-8) {
          v = e / e.norm();
          break;
        }
      }
    }

    // Deterministic sign: first non-negligible coordinate is positive.
    for (int k = 0; k < d; ++k) {
      if (std::abs(v[k]) > 1e-9) {
        if (v[k] < 0.0) v = -v;
        break;
      }
    }
    pr.components.row(c) = v.transpose();
    pr.eigenvalues[c] = v.dot(C * v);
  }
  return pr;
}

LinearHyperplane fit_hyperplane(const Eigen::MatrixXd& Z,
                                const std::vector<int>& y,
                                const HyperplaneConfig& cfg) {
  const int n = static_cast<int>(Z.rows());
  require(Z.cols() == 3, "hyperplane: expected 3-D embeddings");
  if (n < 2 || static_cast<std::size_t>(n) != y.size()) {
    throw ConfigError("hyperplane: need >= 2 labeled points");
  }
  double pos = 0.0;
  for (int yi : y) pos += yi;
  if (pos == 0.0 || pos == n) {
    throw ConfigError("hyperplane: both classes required");
  }

  Eigen::VectorXd yv(n);
  for (int i = 0; i < n; ++i) yv[i] = y[i];
  LinearHyperplane hp;
  for (int it = 0; it < cfg.epochs; ++it) {
    Eigen::VectorXd m = Z * hp.w + Eigen::VectorXd::Constant(n, hp.b);
    Eigen::VectorXd p(n);
    for (int i = 0; i < n; ++i) p[i] = sigmoid(m[i]);
    const Eigen::VectorXd resid = p - yv;
    hp.w -= cfg.lr / n * (Z.transpose() * resid);
    hp.b -= cfg.lr * resid.mean();
  }
  require(hp.w.allFinite() && std::isfinite(hp.b),
          "hyperplane: fit diverged");
  return hp;
}

namespace {

Eigen::MatrixXd feature_matrix(const std::vector<ImageSample>& samples,
                               int label, const FeatureExtractor& extractor) {
  require(!samples.empty(), "shift report: empty sample list");
  Eigen::MatrixXd X;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const FeatureVector fv = extractor(samples[i], label);
    if (i == 0) X.resize(samples.size(), fv.values.size());
    require(static_cast<Eigen::Index>(fv.values.size()) == X.cols(),
            "shift report: ragged feature vectors");
    for (std::size_t j = 0; j < fv.values.size(); ++j) X(i, j) = fv.values[j];
  }
  return X;
}

double detect_rate(const Eigen::MatrixXd& X, const ShiftReport& rep) {
  int hits = 0;
  const Eigen::MatrixXd Z = rep.projector.project(rep.standardizer.transform(X));
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    hits += rep.plane.predict(Z.row(i).transpose().head<3>());
  }
  return static_cast<double>(hits) / static_cast<double>(Z.rows());
}

}  // namespace

ShiftReport shift_report(const BenchmarkSplit& split,
                         const FeatureExtractor& extractor,
                         const HyperplaneConfig& cfg) {
  const Eigen::MatrixXd vm = feature_matrix(split.members_val, 1, extractor);
  const Eigen::MatrixXd vn = feature_matrix(split.nonmembers_val, 0, extractor);
  Eigen::MatrixXd val(vm.rows() + vn.rows(), vm.cols());
  val << vm, vn;

  ShiftReport rep;
  rep.standardizer = fit_standardizer(val);
  rep.projector = fit_pca3(rep.standardizer.transform(val));
  rep.eigenvalues = rep.projector.eigenvalues;
  rep.degenerate = rep.projector.degenerate;

  const Eigen::MatrixXd Z =
      rep.projector.project(rep.standardizer.transform(val));
  std::vector<int> y(val.rows(), 0);
  for (Eigen::Index i = 0; i < vm.rows(); ++i) y[i] = 1;
  rep.plane = fit_hyperplane(Z, y, cfg);

  rep.val_tpr = detect_rate(vm, rep);
  rep.val_fpr = detect_rate(vn, rep);
  rep.val_fnr = 1.0 - rep.val_tpr;
  rep.val_tnr = 1.0 - rep.val_fpr;

  const Eigen::MatrixXd tm = feature_matrix(split.members_test, 1, extractor);
  const Eigen::MatrixXd tn =
      feature_matrix(split.nonmembers_test, 0, extractor);
  rep.test_tpr = detect_rate(tm, rep);
  rep.test_fpr = detect_rate(tn, rep);
  rep.test_fnr = 1.0 - rep.test_tpr;
  rep.test_tnr = 1.0 - rep.test_fpr;
  return rep;
}

}  // namespace diffmia
