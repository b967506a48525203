#pragma once

#include "cal/cartography.hpp"
#include "cal/mlp.hpp"
#include "cal/rng.hpp"
#include "cal/types.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cal {

enum class Strategy { Random, LeastConfidence, MaxEntropy, Bald, Dal, Cal, DalCal };

Strategy parse_strategy(const std::string& name);  // throws on unknown tag
std::string strategy_name(Strategy s);

struct StrategyParams {
  int mc_passes = 10;               // BALD forward passes
  bool bald_information_gain = false;  // optional mutual-information variant
  double t_cor = 0.2;               // cartography correctness threshold
  int disc_epochs = 30;
  Index disc_hidden_dim = 300;
  int disc_hidden_layers = 1;
  double disc_dropout = 0.0;
  double disc_learning_rate = 5e-5;
  double disc_weight_decay = 0.01;
  Index disc_batch_size = 64;
  Index disc_subsample_unlabeled = 0;  // 0 = train the l/u discriminator on all of U
};

/// Everything a query strategy may look at. Gold labels of the unlabeled
/// side are deliberately absent; strategies see features only.
struct AcquisitionRequest {
  const MlpModel* model = nullptr;         // trained main classifier
  const Matrix* features = nullptr;        // full feature table, row-indexed
  const std::vector<InstanceId>* ids = nullptr;  // row -> external id
  std::span<const Index> labeled;          // row indices of L
  std::span<const Index> unlabeled;        // row indices of U
  Index batch_size = 0;                    // k
  StrategyParams params;
  /// Aligned with `labeled`; required by CAL (and the DAL+CAL hybrid).
  const CartographyLabels* cartography = nullptr;
};

struct ScoreTable {
  std::string label;              // strategy tag the scores belong to
  std::vector<InstanceId> ids;    // candidate ids, request order
  std::vector<double> scores;
};

struct SelectionResult {
  std::vector<InstanceId> chosen;       // k distinct ids, rank order
  std::vector<ScoreTable> tables;
};

/// Raised when the cartography labels of L collapse to a single class and
/// the discriminator has nothing to separate. Callers fall back (the
/// simulation loop substitutes least-confidence for that iteration).
struct DegenerateLabelsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

SelectionResult select_random(const AcquisitionRequest& req, Rng& rng);
SelectionResult select_least_confidence(const AcquisitionRequest& req, Rng& rng);
SelectionResult select_max_entropy(const AcquisitionRequest& req, Rng& rng);
SelectionResult select_bald(const AcquisitionRequest& req, Rng& rng);
SelectionResult select_dal(const AcquisitionRequest& req, Rng& rng);
SelectionResult select_cal(const AcquisitionRequest& req, Rng& rng);
/// Split-budget hybrid: DAL fills floor(k/2) slots, CAL the rest; ids already
/// taken by DAL are replaced by the next-ranked CAL candidate.
SelectionResult select_hybrid_dal_cal(const AcquisitionRequest& req, Rng& rng);

SelectionResult select(Strategy strategy, const AcquisitionRequest& req, Rng& rng);

/// The learned representation fed to both discriminators: eval-mode
/// activations of the main classifier's last hidden layer.
Matrix representation_of(const MlpModel& model, MatrixRef features);

/// Binary labeled-vs-unlabeled discriminator (class 1 = unlabeled).
MlpModel train_lu_discriminator(const AcquisitionRequest& req, Rng& rng);

/// Binary high-cor-vs-low-cor discriminator over the representations of L
/// (class 1 = high-cor). Throws DegenerateLabelsError if L is single-class.
MlpModel train_cartography_discriminator(const AcquisitionRequest& req, Rng& rng);

/// Candidate positions ranked by score (descending when higher_better),
/// ties broken by ascending external id.
std::vector<std::size_t> rank_by_score(const std::vector<double>& scores,
                                       const std::vector<InstanceId>& ids, bool higher_better);

void write_scores_csv(std::ostream& out, int iteration, const SelectionResult& result,
                      const std::string& strategy, bool header);

}  // namespace cal
