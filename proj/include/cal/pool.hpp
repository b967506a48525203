#pragma once

#include "cal/types.hpp"

#include <string>
#include <vector>

namespace cal {

/// Featurized dataset: one feature row per instance, gold labels, and the
/// train/test partition. The labeled/unlabeled split of the train side is
/// owned by the simulation loop, not by the pool.
struct InstancePool {
  Matrix features;                      // (train + test) rows, fixed width
  std::vector<int> labels;              // gold class indices, row-aligned
  std::vector<InstanceId> ids;          // external ids, row-aligned
  std::vector<Index> train_indices;
  std::vector<Index> test_indices;
  std::vector<std::string> label_names;
  std::string tag;                      // dataset identifier for provenance

  Index size() const { return features.rows(); }
  Index feature_dim() const { return features.cols(); }
  int class_count() const { return static_cast<int>(label_names.size()); }
};

}  // namespace cal
