#pragma once

#include <string>
#include <vector>

#include "diffmia/attacks.hpp"

namespace diffmia {

// Labeled scores for one (method, split) pair. Lower score = member.
struct ScoreSet {
  std::vector<MiaScore> entries;
  std::string method;
  std::string setup;
};

// Decision rule: predict member iff r <= tau.
struct ThresholdRule {
  double tau = 0.0;
};

struct FprBudget {
  double x_percent = 1.0;  // FPR budget in percent, e.g. 1.0 or 0.1
};

struct ThresholdResult {
  double tpr = 0.0;
  ThresholdRule rule;
  // No candidate threshold met the budget; tau is min(r) - eps, which
  // predicts nothing and trivially satisfies the budget.
  bool infeasible = false;
};

// Stage 1: pick tau maximizing validation TPR subject to empirical
// FPR <= budget. Candidates are grid_size+1 evenly spaced values over
// [min r, max r] plus every distinct score; ties break toward smaller tau.
ThresholdResult optimize_threshold(const ScoreSet& scores,
                                   const FprBudget& budget,
                                   int grid_size = 10000);

struct BlindResult {
  double tpr = 0.0;
  double fpr = 0.0;
};

// Stage 2: apply a frozen rule to untouched scores. Pure counting.
BlindResult blind_test(const ScoreSet& scores, const ThresholdRule& rule);

// AUC with the member-is-lower orientation:
// P(r_member < r_nonmember) + 0.5 * P(tie), via average ranks.
double compute_auc(const ScoreSet& scores);

struct FullEvalOptions {
  double budget_hi = 1.0;   // percent
  double budget_lo = 0.1;   // percent
  int grid_size = 10000;
  // Classifier-backed methods skip threshold optimization and use the
  // fixed rule tau = 0.5 on r = 1 - p for both budgets.
  bool classifier_based = false;
};

struct EvalReport {
  std::string method;
  std::string setup;
  double val_tpr_at_1pct = 0.0;
  double val_tpr_at_01pct = 0.0;
  double val_auc = 0.0;
  double tau_1pct = 0.0;
  double tau_01pct = 0.0;
  double test_tpr_1pct = 0.0;
  double test_fpr_1pct = 0.0;
  double test_tpr_01pct = 0.0;
  double test_fpr_01pct = 0.0;
  std::vector<std::string> flags;

  bool has_flag(const std::string& f) const;
};

// Two-stage protocol: threshold search + AUC on val, blind application of
// the frozen rules on test. Flags record infeasible budgets and test FPR
// exceeding a validation budget.
EvalReport full_eval(const ScoreSet& val, const ScoreSet& test,
                     const FullEvalOptions& opts = {});

}  // namespace diffmia
