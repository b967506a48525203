#pragma once

#include "cal/rng.hpp"
#include "cal/simulator.hpp"
#include "cal/types.hpp"

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cal {

struct ScoreSample {
  std::string name;
  std::vector<double> scores;
};

struct AsoResult {
  double eps_min = 0.5;
  double alpha = 0.05;
  int bootstrap_iters = 0;
  bool degenerate = false;  // identical empirical distributions
  std::string a, b;
};

/// Share of the squared quantile-function gap lying where B's quantiles
/// exceed A's: 0 when A fully dominates B, 1 when B fully dominates A,
/// 0.5 by convention when the distributions coincide. Exact piecewise
/// integration over the merged quantile breakpoints.
double violation_ratio(std::vector<double> a, std::vector<double> b);

/// Almost-stochastic-order comparison of A against B: the one-sided
/// (1 - alpha) bootstrap upper bound of the violation ratio, clipped to
/// [0, 1]. eps_min = 0 claims A stochastically dominant; values below 0.5
/// favor A.
AsoResult aso_test(const ScoreSample& a, const ScoreSample& b, double alpha, int bootstrap_iters,
                   Rng& rng);

enum class BonferroniMode { OrderedPairs, UnorderedPairs, None };

BonferroniMode parse_bonferroni(const std::string& name);

struct AsoGrid {
  std::vector<std::string> names;
  Matrix eps;  // eps(i, j) = eps_min(sample i over sample j); diagonal NaN
  double alpha = 0.05;
  double adjusted_alpha = 0.05;
};

/// Full asymmetric grid over every ordered pair, each cell tested at the
/// Bonferroni-adjusted level.
AsoGrid aso_matrix(const std::vector<ScoreSample>& samples, double alpha, int bootstrap_iters,
                   std::uint64_t seed, BonferroniMode mode = BonferroniMode::OrderedPairs);

void write_aso_grid_csv(std::ostream& out, const AsoGrid& grid, const std::string& provenance);

/// Total number of instances both strategies ended up selecting, summed per
/// seed over the union of all iterations' batches.
long batch_overlap(const RunHistory& a, const RunHistory& b);

/// Selected-ids view used by the CLI: strategy -> seed -> chosen ids.
using SelectionsByStrategy = std::map<std::string, std::map<std::uint64_t, std::set<InstanceId>>>;

struct OverlapReport {
  std::string strategy_a, strategy_b;
  long overlap = 0;
  long total = 0;
};

std::vector<OverlapReport> overlap_reports(const SelectionsByStrategy& selections);
void write_overlap_csv(std::ostream& out, const std::vector<OverlapReport>& reports,
                       const std::string& provenance);

/// Accuracy samples per strategy pooled across seeds and AL iterations
/// 1..n (the seed-only evaluation at iteration 0 predates any acquisition
/// and is excluded).
std::vector<ScoreSample> history_score_samples(const std::vector<HistoryRow>& rows);

/// One grid per iteration, pooling only the per-seed scores of that
/// iteration.
std::vector<std::pair<int, AsoGrid>> aso_per_iteration(const std::vector<HistoryRow>& rows,
                                                       double alpha, int bootstrap_iters,
                                                       std::uint64_t seed, BonferroniMode mode);

/// Acklam's rational approximation of the standard normal quantile.
double inverse_normal_cdf(double p);

}  // namespace cal
