#include "cal/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace cal {

namespace {

void check_sample(const ScoreSample& s) {
  if (s.scores.empty()) throw std::invalid_argument("aso: sample '" + s.name + "' is empty");
  for (double v : s.scores)
    if (!std::isfinite(v))
      throw std::invalid_argument("aso: sample '" + s.name + "' contains a non-finite value");
}

// Violation ratio over sorted samples, breakpoints merged exactly.
double violation_ratio_sorted(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> cuts;
  cuts.reserve(n + m);
  for (std::size_t i = 1; i < n; ++i) cuts.push_back(static_cast<double>(i) / n);
  for (std::size_t j = 1; j < m; ++j) cuts.push_back(static_cast<double>(j) / m);
  cuts.push_back(1.0);
  std::sort(cuts.begin(), cuts.end());

  double total = 0.0, violation = 0.0, prev = 0.0;
  for (double cut : cuts) {
    if (cut <= prev) continue;
    const double mid = 0.5 * (prev + cut);
    const double qa = a[std::min(n - 1, static_cast<std::size_t>(mid * n))];
    const double qb = b[std::min(m - 1, static_cast<std::size_t>(mid * m))];
    const double diff = qb - qa;
    const double width = cut - prev;
    total += diff * diff * width;
    if (diff > 0.0) violation += diff * diff * width;
    prev = cut;
  }
  if (total == 0.0) return 0.5;  // identical empirical distributions
  return violation / total;
}

std::vector<double> resample_sorted(const std::vector<double>& sorted, Rng& rng) {
  std::vector<double> out(sorted.size());
  for (double& v : out)
    v = sorted[std::min(sorted.size() - 1,
                        static_cast<std::size_t>(uniform01(rng) * sorted.size()))];
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

double violation_ratio(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("violation_ratio: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return violation_ratio_sorted(a, b);
}

AsoResult aso_test(const ScoreSample& a, const ScoreSample& b, double alpha, int bootstrap_iters,
                   Rng& rng) {
  check_sample(a);
  check_sample(b);
  if (!(alpha > 0.0 && alpha <= 0.5)) throw std::invalid_argument("aso: alpha must lie in (0, 0.5]");
  if (bootstrap_iters < 100) throw std::invalid_argument("aso: bootstrap_iters must be >= 100");

  AsoResult result;
  result.alpha = alpha;
  result.bootstrap_iters = bootstrap_iters;
  result.a = a.name;
  result.b = b.name;

  std::vector<double> sa = a.scores, sb = b.scores;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  if (sa == sb) {
    // No order exists between identical distributions.
    result.eps_min = 0.5;
    result.degenerate = true;
    return result;
  }

  const double observed = violation_ratio_sorted(sa, sb);
  const double n = static_cast<double>(sa.size());
  const double m = static_cast<double>(sb.size());
  const double scale = std::sqrt(n * m / (n + m));

  // Bootstrap distribution of scale * (ratio* - ratio), population std.
  double sum = 0.0, sumsq = 0.0;
  for (int it = 0; it < bootstrap_iters; ++it) {
    std::vector<double> ra = resample_sorted(sa, rng);
    std::vector<double> rb = resample_sorted(sb, rng);
    const double dev = scale * (violation_ratio_sorted(ra, rb) - observed);
    sum += dev;
    sumsq += dev * dev;
  }
  const double mean = sum / bootstrap_iters;
  const double sigma = std::sqrt(std::max(0.0, sumsq / bootstrap_iters - mean * mean));

  const double bound = observed - sigma / scale * inverse_normal_cdf(alpha);
  result.eps_min = std::clamp(bound, 0.0, 1.0);
  return result;
}

BonferroniMode parse_bonferroni(const std::string& name) {
  if (name == "ordered") return BonferroniMode::OrderedPairs;
  if (name == "unordered") return BonferroniMode::UnorderedPairs;
  if (name == "none") return BonferroniMode::None;
  throw std::invalid_argument("unknown bonferroni mode: " + name);
}

AsoGrid aso_matrix(const std::vector<ScoreSample>& samples, double alpha, int bootstrap_iters,
                   std::uint64_t seed, BonferroniMode mode) {
  if (samples.size() < 2) throw std::invalid_argument("aso_matrix: need at least two samples");
  const std::size_t s = samples.size();
  double comparisons = 1.0;
  if (mode == BonferroniMode::OrderedPairs) comparisons = static_cast<double>(s * (s - 1));
  if (mode == BonferroniMode::UnorderedPairs) comparisons = static_cast<double>(s * (s - 1)) / 2.0;

  AsoGrid grid;
  grid.alpha = alpha;
  grid.adjusted_alpha = alpha / comparisons;
  grid.eps = Matrix::Constant(static_cast<Index>(s), static_cast<Index>(s),
                              std::numeric_limits<double>::quiet_NaN());
  for (const ScoreSample& sample : samples) grid.names.push_back(sample.name);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      if (i == j) continue;
      Rng rng = derive_rng(seed, "aso/" + samples[i].name + "/" + samples[j].name);
      grid.eps(static_cast<Index>(i), static_cast<Index>(j)) =
          aso_test(samples[i], samples[j], grid.adjusted_alpha, bootstrap_iters, rng).eps_min;
    }
  }
  return grid;
}

void write_aso_grid_csv(std::ostream& out, const AsoGrid& grid, const std::string& provenance) {
  if (!provenance.empty()) out << "# " << provenance << "\n";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", grid.adjusted_alpha);
  out << "# alpha=" << grid.alpha << " adjusted_alpha=" << buf << "\n";
  out << "strategy";
  for (const std::string& name : grid.names) out << ',' << name;
  out << "\n";
  for (Index i = 0; i < grid.eps.rows(); ++i) {
    out << grid.names[static_cast<std::size_t>(i)];
    for (Index j = 0; j < grid.eps.cols(); ++j) {
      out << ',';
      if (i != j) {
        std::snprintf(buf, sizeof(buf), "%.9g", grid.eps(i, j));
        out << buf;
      }
    }
    out << "\n";
  }
}

long batch_overlap(const RunHistory& a, const RunHistory& b) {
  if (a.dataset_tag != b.dataset_tag)
    throw std::invalid_argument("batch_overlap: histories come from different datasets");
  if (a.runs.size() != b.runs.size())
    throw std::invalid_argument("batch_overlap: seed lists differ");
  long overlap = 0;
  for (std::size_t r = 0; r < a.runs.size(); ++r) {
    if (a.runs[r].seed != b.runs[r].seed)
      throw std::invalid_argument("batch_overlap: seed lists differ");
    std::set<InstanceId> chosen_a;
    for (const auto& batch : a.runs[r].selected) chosen_a.insert(batch.begin(), batch.end());
    for (const auto& batch : b.runs[r].selected)
      for (InstanceId id : batch) overlap += chosen_a.count(id) ? 1 : 0;
  }
  return overlap;
}

std::vector<OverlapReport> overlap_reports(const SelectionsByStrategy& selections) {
  std::vector<std::string> names;
  for (const auto& [name, _] : selections) names.push_back(name);
  std::vector<OverlapReport> reports;
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = i + 1; j < names.size(); ++j) {
      OverlapReport report;
      report.strategy_a = names[i];
      report.strategy_b = names[j];
      const auto& by_seed_a = selections.at(names[i]);
      const auto& by_seed_b = selections.at(names[j]);
      for (const auto& [seed, ids_a] : by_seed_a) {
        auto it = by_seed_b.find(seed);
        if (it == by_seed_b.end()) continue;
        report.total += static_cast<long>(std::min(ids_a.size(), it->second.size()));
        for (InstanceId id : ids_a) report.overlap += it->second.count(id) ? 1 : 0;
      }
      reports.push_back(report);
    }
  }
  return reports;
}

void write_overlap_csv(std::ostream& out, const std::vector<OverlapReport>& reports,
                       const std::string& provenance) {
  if (!provenance.empty()) out << "# " << provenance << "\n";
  out << "strategy_a,strategy_b,overlap_count,total\n";
  for (const OverlapReport& r : reports)
    out << r.strategy_a << ',' << r.strategy_b << ',' << r.overlap << ',' << r.total << "\n";
}

std::vector<ScoreSample> history_score_samples(const std::vector<HistoryRow>& rows) {
  std::map<std::string, std::vector<double>> pooled;
  for (const HistoryRow& row : rows)
    if (row.iteration > 0) pooled[row.strategy].push_back(row.accuracy);
  std::vector<ScoreSample> samples;
  for (auto& [name, scores] : pooled) samples.push_back({name, std::move(scores)});
  return samples;
}

std::vector<std::pair<int, AsoGrid>> aso_per_iteration(const std::vector<HistoryRow>& rows,
                                                       double alpha, int bootstrap_iters,
                                                       std::uint64_t seed, BonferroniMode mode) {
  std::map<int, std::map<std::string, std::vector<double>>> by_iter;
  for (const HistoryRow& row : rows)
    if (row.iteration > 0) by_iter[row.iteration][row.strategy].push_back(row.accuracy);
  std::vector<std::pair<int, AsoGrid>> grids;
  for (auto& [iteration, pooled] : by_iter) {
    std::vector<ScoreSample> samples;
    for (auto& [name, scores] : pooled) samples.push_back({name, std::move(scores)});
    grids.emplace_back(iteration, aso_matrix(samples, alpha, bootstrap_iters,
                                             seed + static_cast<std::uint64_t>(iteration), mode));
  }
  return grids;
}

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("inverse_normal_cdf: p must be in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425, p_high = 1.0 - p_low;
  double q, r;
  if (p < p_low) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= p_high) {
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  q = std::sqrt(-2.0 * std::log(1.0 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

}  // namespace cal
