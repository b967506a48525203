#pragma once

#include "cal/acquisition.hpp"
#include "cal/cartography.hpp"
#include "cal/config.hpp"
#include "cal/mlp.hpp"
#include "cal/pool.hpp"
#include "cal/rng.hpp"
#include "cal/types.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cal {

struct EvalRecord {
  int iteration = 0;         // 0 = seed-set model, then one per acquisition
  Index labeled_count = 0;
  double accuracy = 0.0;
};

struct BatchStat {
  int iteration = 0;         // index of the batch the means describe
  double mean_confidence = 0.0;
  double mean_variability = 0.0;
  double mean_correctness = 0.0;
};

/// Everything recorded for one (strategy, seed) run. The model trained on
/// the full budget is evaluated too, so there are iterations+1 eval rows and
/// `iterations` selected batches.
struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<EvalRecord> evals;
  std::vector<std::vector<InstanceId>> selected;   // rank order per iteration
  std::vector<DataMapStats> datamaps;              // one per training iteration
  std::vector<BatchStat> batch_stats;              // iterations - 1 rows
  std::vector<int> fallback_iterations;            // CAL degenerate-label events
};

struct RunHistory {
  std::string strategy;
  std::string dataset_tag;
  Index train_size = 0;
  std::vector<SeedRun> runs;
};

/// Stratified draw: per-class quotas follow the class frequencies of the
/// train split via largest-remainder rounding (remainder ties broken toward
/// the lower class index), uniform without replacement inside each class.
/// Returned row indices are sorted ascending.
std::vector<Index> stratified_seed_sample(const InstancePool& pool, Index size, Rng& rng);

/// Fraction of test instances whose argmax prediction matches gold.
double evaluate(const MlpModel& model, MatrixRef test_features, const std::vector<int>& test_labels);

/// Mean data-map statistics of one selected batch, measured on the data map
/// of the training run that followed its addition.
BatchStat batch_statistic(const std::vector<InstanceId>& batch, const DataMapStats& following_map,
                          int iteration);

/// The full per-seed loop: stratified seed set, then iterate train / eval /
/// acquire / reveal. Fresh parameters every iteration. When `score_log` is
/// given, every iteration's full selection result (score tables included) is
/// appended to it.
SeedRun run_single_seed(const ExperimentConfig& cfg, const InstancePool& pool, Strategy strategy,
                        std::uint64_t seed, std::ostream* log = nullptr,
                        std::vector<std::pair<int, SelectionResult>>* score_log = nullptr);

/// All configured seeds for one strategy.
RunHistory run_experiment(const ExperimentConfig& cfg, const InstancePool& pool,
                          const std::string& strategy, std::ostream* log = nullptr);

/// Protocol-vs-pool checks that need the data: seed-set feasibility and
/// budget not exhausting the unlabeled pool. Throws ConfigError.
void validate_protocol(const ExperimentConfig& cfg, const InstancePool& pool);

/// Build the pool a config describes (synthetic blobs or featurized files).
InstancePool load_pool(const ExperimentConfig& cfg);

// --- file exports (CSV, LF line endings, '#' provenance comment first) ---

void write_history_csv(std::ostream& out, const std::vector<RunHistory>& histories,
                       const std::string& provenance);
void write_selected_csv(std::ostream& out, const std::vector<RunHistory>& histories,
                        const std::string& provenance);
void write_batch_stats_csv(std::ostream& out, const std::vector<RunHistory>& histories,
                           const std::string& provenance);

struct HistoryRow {
  std::string strategy;
  std::uint64_t seed;
  int iteration;
  Index labeled_count;
  double accuracy;
};

struct SelectedRow {
  std::string strategy;
  std::uint64_t seed;
  int iteration;
  int rank;
  InstanceId instance_id;
};

struct HistoryFile {
  std::vector<HistoryRow> rows;
  Index train_size = -1;  // parsed from the provenance comment when present
};

HistoryFile read_history_csv(const std::string& path);
std::vector<SelectedRow> read_selected_csv(const std::string& path);

}  // namespace cal
