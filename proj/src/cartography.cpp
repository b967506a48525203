#include "cal/cartography.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cal {

namespace {

void require_epochs(const DynamicsLog& log) {
  if (log.epochs() < 1) throw std::invalid_argument("DynamicsLog: no epochs recorded");
}

std::string g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

DynamicsLog::DynamicsLog(std::vector<InstanceId> instance_ids) : ids(std::move(instance_ids)) {
  gold_probability.resize(static_cast<Index>(ids.size()), 0);
  correct.resize(static_cast<Index>(ids.size()), 0);
}

void DynamicsLog::append_epoch(const Vector& gold_prob,
                               const std::vector<std::uint8_t>& correct_flags) {
  const Index n = static_cast<Index>(ids.size());
  if (gold_prob.size() != n || static_cast<Index>(correct_flags.size()) != n)
    throw std::invalid_argument("append_epoch: instance count mismatch");
  const Index e = gold_probability.cols();
  gold_probability.conservativeResize(n, e + 1);
  correct.conservativeResize(n, e + 1);
  gold_probability.col(e) = gold_prob;
  for (Index i = 0; i < n; ++i)
    correct(i, e) = correct_flags[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
}

Vector compute_confidence(const DynamicsLog& log) {
  require_epochs(log);
  return log.gold_probability.rowwise().mean();
}

Vector compute_variability(const DynamicsLog& log) {
  require_epochs(log);
  const Index epochs = log.epochs();
  Vector out(log.instances());
  for (Index i = 0; i < log.instances(); ++i) {
    const double mean = log.gold_probability.row(i).mean();
    double sq = 0.0;
    for (Index e = 0; e < epochs; ++e) {
      const double d = log.gold_probability(i, e) - mean;
      sq += d * d;
    }
    // Population standard deviation: divisor is the epoch count.
    out(i) = std::sqrt(sq / static_cast<double>(epochs));
  }
  return out;
}

Vector compute_correctness(const DynamicsLog& log) {
  require_epochs(log);
  return log.correct.rowwise().mean();
}

DataMapStats compute_datamap(const DynamicsLog& log) {
  DataMapStats stats;
  stats.ids = log.ids;
  stats.confidence = compute_confidence(log);
  stats.variability = compute_variability(log);
  stats.correctness = compute_correctness(log);
  return stats;
}

CartographyLabels assign_cartography_labels(const DataMapStats& stats, double t_cor) {
  if (!(t_cor >= 0.0 && t_cor < 1.0))
    throw std::invalid_argument("assign_cartography_labels: t_cor must lie in [0, 1)");
  CartographyLabels out;
  out.threshold = t_cor;
  out.label.resize(static_cast<std::size_t>(stats.instances()));
  for (Index i = 0; i < stats.instances(); ++i)
    out.label[static_cast<std::size_t>(i)] = stats.correctness(i) > t_cor ? 1 : 0;
  return out;
}

void write_datamap_csv(std::ostream& out, const DataMapStats& stats,
                       const CartographyLabels& labels, const std::vector<int>& gold_labels,
                       const std::string& provenance) {
  if (!provenance.empty()) out << "# " << provenance << "\n";
  out << "id,confidence,variability,correctness,gold_label,cartography_label\n";
  for (Index i = 0; i < stats.instances(); ++i) {
    out << stats.ids[static_cast<std::size_t>(i)] << ',' << g9(stats.confidence(i)) << ','
        << g9(stats.variability(i)) << ',' << g9(stats.correctness(i)) << ','
        << gold_labels[static_cast<std::size_t>(i)] << ','
        << int(labels.label[static_cast<std::size_t>(i)]) << "\n";
  }
}

void write_datamap_csv(const std::string& path, const DataMapStats& stats,
                       const CartographyLabels& labels, const std::vector<int>& gold_labels,
                       const std::string& provenance) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_datamap_csv(out, stats, labels, gold_labels, provenance);
  if (!out.good()) throw std::runtime_error("write failed: " + path);
}

std::vector<DataMapRow> read_datamap_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<DataMapRow> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // fixed column order, header is not re-parsed
      continue;
    }
    std::istringstream ss(line);
    std::string field;
    DataMapRow row{};
    std::getline(ss, field, ',');
    row.id = std::stoll(field);
    std::getline(ss, field, ',');
    row.confidence = std::stod(field);
    std::getline(ss, field, ',');
    row.variability = std::stod(field);
    std::getline(ss, field, ',');
    row.correctness = std::stod(field);
    std::getline(ss, field, ',');
    row.gold_label = std::stoi(field);
    std::getline(ss, field, ',');
    row.cartography_label = std::stoi(field);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace cal
