#pragma once

#include "cal/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cal {

/// Per-instance training dynamics: gold-label probability and prediction
/// correctness at the end of each epoch, one column per epoch.
struct DynamicsLog {
  std::vector<InstanceId> ids;
  Matrix gold_probability;  // instances x epochs
  Matrix correct;           // instances x epochs, entries 0/1

  explicit DynamicsLog(std::vector<InstanceId> instance_ids);
  Index epochs() const { return gold_probability.cols(); }
  Index instances() const { return gold_probability.rows(); }
  void append_epoch(const Vector& gold_prob, const std::vector<std::uint8_t>& correct_flags);
};

/// The data map: confidence (mean gold probability), variability (population
/// standard deviation of it) and correctness (fraction of epochs predicted
/// right), one value of each per instance.
struct DataMapStats {
  std::vector<InstanceId> ids;
  Vector confidence;
  Vector variability;
  Vector correctness;

  Index instances() const { return confidence.size(); }
};

Vector compute_confidence(const DynamicsLog& log);
Vector compute_variability(const DynamicsLog& log);
Vector compute_correctness(const DynamicsLog& log);
DataMapStats compute_datamap(const DynamicsLog& log);

/// Binary split of the map at the correctness threshold: 1 ("high-cor") iff
/// correctness is strictly above t_cor, else 0 ("low-cor").
struct CartographyLabels {
  std::vector<std::uint8_t> label;
  double threshold = 0.2;
};

CartographyLabels assign_cartography_labels(const DataMapStats& stats, double t_cor = 0.2);

/// Tabular export, one row per instance:
/// id, confidence, variability, correctness, gold_label, cartography_label.
/// Values are printed at 9 significant digits. A non-empty `provenance`
/// string is emitted first as a '#' comment line.
void write_datamap_csv(std::ostream& out, const DataMapStats& stats,
                       const CartographyLabels& labels, const std::vector<int>& gold_labels,
                       const std::string& provenance = "");
void write_datamap_csv(const std::string& path, const DataMapStats& stats,
                       const CartographyLabels& labels, const std::vector<int>& gold_labels,
                       const std::string& provenance = "");

struct DataMapRow {
  InstanceId id;
  double confidence, variability, correctness;
  int gold_label;
  int cartography_label;
};

std::vector<DataMapRow> read_datamap_csv(const std::string& path);

}  // namespace cal
