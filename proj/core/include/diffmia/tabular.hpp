#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "diffmia/attacks.hpp"
#include "diffmia/data.hpp"

namespace diffmia {

// Per-feature z-score transform fitted on training data. Applied before every
// tabular fit so feature scales never leak into split or hyperplane geometry.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;  // population std, floored at 1e-12

  Eigen::VectorXd transform(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const;
};

Standardizer fit_standardizer(const Eigen::MatrixXd& X);

// One node of a regression tree. Leaves hold the raw Newton value; the
// ensemble applies the learning rate when accumulating margins.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double eval(const Eigen::VectorXd& x) const;
};

struct BoostConfig {
  int n_estimators = 200;
  double learning_rate = 0.1;
  int max_depth = 6;     // depth 1 gives classic stumps
  double lambda = 1e-6;  // L2 on leaf values
};

// Gradient-boosted depth-capped trees with logistic loss and Newton leaf
// values (exact greedy splits over midpoint thresholds).
struct BoostedTrees {
  BoostConfig cfg;
  double base_score = 0.0;  // prior log-odds
  int n_features = 0;
  std::vector<Tree> trees;
  std::vector<double> stage_losses;  // mean logistic loss after each stage

  double predict_margin(const Eigen::VectorXd& x) const;
  double predict_proba(const Eigen::VectorXd& x) const;
  // Batch path loops over the single-sample path: bitwise identical results.
  Eigen::VectorXd predict_proba(const Eigen::MatrixXd& X) const;
  double training_accuracy(const Eigen::MatrixXd& X,
                           const std::vector<int>& y) const;
};

// Fits on raw features (standardize first if scales differ wildly). Labels
// must contain both classes; throws ConfigError otherwise.
BoostedTrees fit_boosted_trees(const Eigen::MatrixXd& X,
                               const std::vector<int>& y,
                               const BoostConfig& cfg = {});

// Top-3 principal components by power iteration with deflation.
struct PcaProjector {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;   // 3 x d, rows orthonormal
  Eigen::Vector3d eigenvalues;  // of the covariance, descending
  bool degenerate = false;      // rank < 3: padded with an orthonormal basis

  Eigen::Vector3d project(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd project(const Eigen::MatrixXd& X) const;
  // Reconstruction from the first k components (k in 1..3), for diagnostics.
  Eigen::VectorXd reconstruct(const Eigen::VectorXd& x, int k) const;
};

PcaProjector fit_pca3(const Eigen::MatrixXd& X, double tol = 1e-10,
                      int max_iter = 1000);

struct HyperplaneConfig {
  int epochs = 2000;
  double lr = 1.0;
};

// Logistic separating plane in the 3-D embedding; w.z + b >= 0 predicts
// class 1.
struct LinearHyperplane {
  Eigen::Vector3d w = Eigen::Vector3d::Zero();
  double b = 0.0;

  double decision(const Eigen::Vector3d& z) const { return w.dot(z) + b; }
  int predict(const Eigen::Vector3d& z) const {
    return decision(z) >= 0.0 ? 1 : 0;
  }
};

LinearHyperplane fit_hyperplane(const Eigen::MatrixXd& Z,
                                const std::vector<int>& y,
                                const HyperplaneConfig& cfg = {});

// Distribution-shift diagnostic: pixel features -> z-score -> PCA(3) ->
// hyperplane, fitted on the validation split and frozen for the test split.
struct ShiftReport {
  double val_tpr = 0.0, val_fpr = 0.0, val_tnr = 0.0, val_fnr = 0.0;
  double test_tpr = 0.0, test_fpr = 0.0, test_tnr = 0.0, test_fnr = 0.0;
  Eigen::Vector3d eigenvalues = Eigen::Vector3d::Zero();
  bool degenerate = false;
  // Frozen pipeline, kept for embedding dumps.
  Standardizer standardizer;
  PcaProjector projector;
  LinearHyperplane plane;
};

using FeatureExtractor = std::function<FeatureVector(const ImageSample&, int)>;

ShiftReport shift_report(const BenchmarkSplit& split,
                         const FeatureExtractor& extractor,
                         const HyperplaneConfig& cfg = {});

}  // namespace diffmia
