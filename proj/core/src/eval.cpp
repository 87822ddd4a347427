#include "diffmia/eval.hpp"

#include <algorithm>
#include <cmath>

#include "diffmia/error.hpp"

namespace diffmia {

namespace {

struct SplitScores {
  std::vector<double> members;     // sorted ascending
  std::vector<double> nonmembers;  // sorted ascending
};

SplitScores split_sorted(const ScoreSet& scores) {
  SplitScores s;
  for (const MiaScore& e : scores.entries) {
    require(std::isfinite(e.score), "eval: non-finite score");
    if (e.label == 1) {
      s.members.push_back(e.score);
    } else if (e.label == 0) {
      s.nonmembers.push_back(e.score);
    } else {
      throw DataError("eval: labels must be 0 or 1");
    }
  }
  std::sort(s.members.begin(), s.members.end());
  std::sort(s.nonmembers.begin(), s.nonmembers.end());
  return s;
}

// Fraction of sorted values <= tau.
double frac_leq(const std::vector<double>& sorted, double tau) {
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), tau);
  return static_cast<double>(it - sorted.begin()) /
         static_cast<double>(sorted.size());
}

}  // namespace

ThresholdResult optimize_threshold(const ScoreSet& scores,
                                   const FprBudget& budget, int grid_size) {
  if (!(budget.x_percent > 0.0 && budget.x_percent < 100.0)) {
    throw ConfigError("threshold: budget must lie in (0, 100) percent");
  }
  if (grid_size < 1) throw ConfigError("threshold: grid_size must be >= 1");
  const SplitScores s = split_sorted(scores);
  if (s.members.empty() || s.nonmembers.empty()) {
    throw DataError("threshold: both classes required");
  }

  const double lo = std::min(s.members.front(), s.nonmembers.front());
  const double hi = std::max(s.members.back(), s.nonmembers.back());

  std::vector<double> cand;
  cand.reserve(grid_size + 1 + scores.entries.size());
  for (int k = 0; k <= grid_size; ++k) {
    cand.push_back(lo + (hi - lo) * k / grid_size);
  }
  for (const MiaScore& e : scores.entries) cand.push_back(e.score);
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

  const double max_fpr = budget.x_percent / 100.0;
  ThresholdResult best;
  bool feasible = false;
  // Ascending scan: the first tau achieving a given TPR is the smallest.
  std::size_t im = 0, in = 0;
  for (double tau : cand) {
    while (im < s.members.size() && s.members[im] <= tau) ++im;
    while (in < s.nonmembers.size() && s.nonmembers[in] <= tau) ++in;
    const double fpr = static_cast<double>(in) / s.nonmembers.size();
    if (fpr > max_fpr) continue;
    const double tpr = static_cast<double>(im) / s.members.size();
    if (!feasible || tpr > best.tpr) {
      feasible = true;
      best.tpr = tpr;
      best.rule.tau = tau;
    }
  }
  if (!feasible) {
    best.tpr = 0.0;
    best.rule.tau = lo - 1e-9 * std::max(1.0, std::abs(lo));
    best.infeasible = true;
  }
  return best;
}

BlindResult blind_test(const ScoreSet& scores, const ThresholdRule& rule) {
  require(std::isfinite(rule.tau), "blind test: non-finite threshold");
  const SplitScores s = split_sorted(scores);
  if (s.members.empty() || s.nonmembers.empty()) {
    throw DataError("blind test: both classes required");
  }
  return {frac_leq(s.members, rule.tau), frac_leq(s.nonmembers, rule.tau)};
}

double compute_auc(const ScoreSet& scores) {
  const SplitScores s = split_sorted(scores);
  if (s.members.empty() || s.nonmembers.empty()) {
    throw DataError("auc: both classes required");
  }
  const std::size_t nm = s.members.size(), nn = s.nonmembers.size();

  // Average ranks over the pooled sorted scores; the Mann-Whitney statistic
  // on nonmember ranks counts pairs with r_member < r_nonmember (ties half).
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(nm + nn);
  for (double v : s.members) pooled.emplace_back(v, 1);
  for (double v : s.nonmembers) pooled.emplace_back(v, 0);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  double rank_sum_non = 0.0;
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) +
                                   static_cast<double>(j));  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].second == 0) rank_sum_non += avg_rank;
    }
    i = j;
  }
  const double u = rank_sum_non - 0.5 * nn * (nn + 1);
  return u / (static_cast<double>(nm) * static_cast<double>(nn));
}

bool EvalReport::has_flag(const std::string& f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

EvalReport full_eval(const ScoreSet& val, const ScoreSet& test,
                     const FullEvalOptions& opts) {
  require(opts.budget_hi > opts.budget_lo,
          "full eval: budgets must be ordered high, low");
  EvalReport rep;
  rep.method = val.method.empty() ? test.method : val.method;
  rep.setup = val.setup.empty() ? test.setup : val.setup;
  rep.val_auc = compute_auc(val);

  ThresholdRule rule_hi, rule_lo;
  if (opts.classifier_based) {
    rule_hi.tau = rule_lo.tau = 0.5;
    const BlindResult v = blind_test(val, rule_hi);
    rep.val_tpr_at_1pct = v.tpr;
    rep.val_tpr_at_01pct = v.tpr;
    rep.flags.push_back("fixed_threshold");
  } else {
    const ThresholdResult hi =
        optimize_threshold(val, {opts.budget_hi}, opts.grid_size);
    const ThresholdResult lo =
        optimize_threshold(val, {opts.budget_lo}, opts.grid_size);
    rule_hi = hi.rule;
    rule_lo = lo.rule;
    rep.val_tpr_at_1pct = hi.tpr;
    rep.val_tpr_at_01pct = lo.tpr;
    if (hi.infeasible) rep.flags.push_back("infeasible_budget_1pct");
    if (lo.infeasible) rep.flags.push_back("infeasible_budget_01pct");
  }
  rep.tau_1pct = rule_hi.tau;
  rep.tau_01pct = rule_lo.tau;

  const BlindResult t_hi = blind_test(test, rule_hi);
  const BlindResult t_lo = blind_test(test, rule_lo);
  rep.test_tpr_1pct = t_hi.tpr;
  rep.test_fpr_1pct = t_hi.fpr;
  rep.test_tpr_01pct = t_lo.tpr;
  rep.test_fpr_01pct = t_lo.fpr;
  if (t_hi.fpr > opts.budget_hi / 100.0) {
    rep.flags.push_back("test_fpr_over_budget_1pct");
  }
  if (t_lo.fpr > opts.budget_lo / 100.0) {
    rep.flags.push_back("test_fpr_over_budget_01pct");
  }
  return rep;
}

}  // namespace diffmia
