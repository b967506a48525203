#include "cal/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <unordered_set>

namespace cal {

namespace {

void require_pool(const AcquisitionRequest& req, bool needs_model) {
  if (req.features == nullptr || req.ids == nullptr)
    throw std::invalid_argument("acquisition: request lacks a feature table");
  if (needs_model && req.model == nullptr)
    throw std::invalid_argument("acquisition: request lacks a trained model");
  if (req.batch_size < 1) throw std::invalid_argument("acquisition: batch size must be >= 1");
  if (req.batch_size > static_cast<Index>(req.unlabeled.size()))
    throw std::invalid_argument("acquisition: batch size exceeds the unlabeled pool");
}

std::vector<InstanceId> candidate_ids(const AcquisitionRequest& req) {
  std::vector<InstanceId> ids;
  ids.reserve(req.unlabeled.size());
  for (Index row : req.unlabeled) ids.push_back((*req.ids)[static_cast<std::size_t>(row)]);
  return ids;
}

SelectionResult from_scores(const AcquisitionRequest& req, std::vector<double> scores,
                            bool higher_better, const std::string& label) {
  std::vector<InstanceId> ids = candidate_ids(req);
  std::vector<std::size_t> order = rank_by_score(scores, ids, higher_better);
  SelectionResult result;
  result.chosen.reserve(static_cast<std::size_t>(req.batch_size));
  for (Index r = 0; r < req.batch_size; ++r)
    result.chosen.push_back(ids[order[static_cast<std::size_t>(r)]]);
  result.tables.push_back({label, std::move(ids), std::move(scores)});
  return result;
}

Matrix unlabeled_probs(const AcquisitionRequest& req) {
  Matrix feats = gather_rows(*req.features, req.unlabeled);
  return forward(*req.model, feats, RunMode::Eval).probs;
}

std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

MlpModel train_binary(const Matrix& features, const std::vector<int>& labels,
                      const StrategyParams& p, Rng& rng) {
  MlpConfig cfg;
  cfg.input_dim = features.cols();
  cfg.hidden_dim = p.disc_hidden_dim;
  cfg.hidden_layers = p.disc_hidden_layers;
  cfg.class_count = 2;
  cfg.dropout = p.disc_dropout;
  MlpModel disc(cfg, rng);
  AdamWConfig opt_cfg;
  opt_cfg.learning_rate = p.disc_learning_rate;
  opt_cfg.weight_decay = p.disc_weight_decay;
  AdamWState opt(disc, opt_cfg);
  for (int epoch = 0; epoch < p.disc_epochs; ++epoch)
    train_epoch(disc, opt, features, labels, p.disc_batch_size, rng, epoch);
  return disc;
}

}  // namespace

Strategy parse_strategy(const std::string& name) {
  if (name == "random") return Strategy::Random;
  if (name == "least_confidence") return Strategy::LeastConfidence;
  if (name == "max_entropy") return Strategy::MaxEntropy;
  if (name == "bald") return Strategy::Bald;
  if (name == "dal") return Strategy::Dal;
  if (name == "cal") return Strategy::Cal;
  if (name == "dal_cal") return Strategy::DalCal;
  throw std::invalid_argument("unknown strategy: " + name);
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Random: return "random";
    case Strategy::LeastConfidence: return "least_confidence";
    case Strategy::MaxEntropy: return "max_entropy";
    case Strategy::Bald: return "bald";
    case Strategy::Dal: return "dal";
    case Strategy::Cal: return "cal";
    case Strategy::DalCal: return "dal_cal";
  }
  throw std::invalid_argument("unknown strategy enum");
}

std::vector<std::size_t> rank_by_score(const std::vector<double>& scores,
                                       const std::vector<InstanceId>& ids, bool higher_better) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return higher_better ? scores[a] > scores[b] : scores[a] < scores[b];
    return ids[a] < ids[b];
  });
  return order;
}

SelectionResult select_random(const AcquisitionRequest& req, Rng& rng) {
  require_pool(req, false);
  // Each candidate draws an iid uniform key; the k largest keys form a
  // uniform sample without replacement, and the keys double as scores.
  std::vector<double> keys(req.unlabeled.size());
  for (double& k : keys) k = uniform01(rng);
  return from_scores(req, std::move(keys), true, "random");
}

SelectionResult select_least_confidence(const AcquisitionRequest& req, Rng&) {
  require_pool(req, true);
  Matrix probs = unlabeled_probs(req);
  std::vector<double> scores(static_cast<std::size_t>(probs.rows()));
  for (Index i = 0; i < probs.rows(); ++i)
    scores[static_cast<std::size_t>(i)] = 1.0 - probs.row(i).maxCoeff();
  return from_scores(req, std::move(scores), true, "least_confidence");
}

SelectionResult select_max_entropy(const AcquisitionRequest& req, Rng&) {
  require_pool(req, true);
  Matrix probs = unlabeled_probs(req);
  return from_scores(req, to_std(entropy_bits_rows(probs)), true, "max_entropy");
}

SelectionResult select_bald(const AcquisitionRequest& req, Rng& rng) {
  require_pool(req, true);
  if (req.params.mc_passes < 1)
    throw std::invalid_argument("select_bald: mc_passes must be >= 1");
  Matrix feats = gather_rows(*req.features, req.unlabeled);
  if (!req.params.bald_information_gain) {
    // Entropy of the Monte Carlo mean predictive distribution.
    Matrix mean = mc_dropout_predict(*req.model, feats, req.params.mc_passes, rng);
    return from_scores(req, to_std(entropy_bits_rows(mean)), true, "bald");
  }
  // Mutual-information variant: H(mean) - mean per-pass entropy.
  Matrix sum;
  Vector entropy_sum;
  for (int pass = 0; pass < req.params.mc_passes; ++pass) {
    Matrix probs = forward(*req.model, feats, RunMode::Train, &rng).probs;
    Vector h = entropy_bits_rows(probs);
    if (pass == 0) {
      sum = std::move(probs);
      entropy_sum = std::move(h);
    } else {
      sum += probs;
      entropy_sum += h;
    }
  }
  const double passes = static_cast<double>(req.params.mc_passes);
  Vector gain = entropy_bits_rows(sum / passes) - entropy_sum / passes;
  return from_scores(req, to_std(gain), true, "bald");
}

Matrix representation_of(const MlpModel& model, MatrixRef features) {
  return forward(model, features, RunMode::Eval, nullptr, true).hidden;
}

MlpModel train_lu_discriminator(const AcquisitionRequest& req, Rng& rng) {
  require_pool(req, true);
  if (req.labeled.empty() || req.unlabeled.empty())
    throw std::invalid_argument("train_lu_discriminator: both L and U must be non-empty");

  std::vector<Index> unlabeled_rows(req.unlabeled.begin(), req.unlabeled.end());
  if (req.params.disc_subsample_unlabeled > 0 &&
      static_cast<Index>(unlabeled_rows.size()) > req.params.disc_subsample_unlabeled) {
    auto picked = sample_without_replacement(
        unlabeled_rows.size(), static_cast<std::size_t>(req.params.disc_subsample_unlabeled), rng);
    std::sort(picked.begin(), picked.end());
    std::vector<Index> subset;
    subset.reserve(picked.size());
    for (std::size_t p : picked) subset.push_back(unlabeled_rows[p]);
    unlabeled_rows = std::move(subset);
  }

  std::vector<Index> rows(req.labeled.begin(), req.labeled.end());
  rows.insert(rows.end(), unlabeled_rows.begin(), unlabeled_rows.end());
  Matrix psi = representation_of(*req.model, gather_rows(*req.features, rows));
  std::vector<int> labels(rows.size(), 0);
  for (std::size_t i = req.labeled.size(); i < rows.size(); ++i) labels[i] = 1;  // 1 = unlabeled
  return train_binary(psi, labels, req.params, rng);
}

MlpModel train_cartography_discriminator(const AcquisitionRequest& req, Rng& rng) {
  require_pool(req, true);
  if (req.cartography == nullptr ||
      req.cartography->label.size() != req.labeled.size())
    throw std::invalid_argument(
        "train_cartography_discriminator: cartography labels must align with L");
  std::size_t high = 0;
  for (std::uint8_t l : req.cartography->label) high += l;
  if (high == 0 || high == req.cartography->label.size())
    throw DegenerateLabelsError("cartography labels are single-class (" + std::to_string(high) +
                                "/" + std::to_string(req.cartography->label.size()) +
                                " high-cor)");
  Matrix psi = representation_of(*req.model, gather_rows(*req.features, req.labeled));
  std::vector<int> labels(req.cartography->label.begin(), req.cartography->label.end());
  return train_binary(psi, labels, req.params, rng);
}

SelectionResult select_dal(const AcquisitionRequest& req, Rng& rng) {
  MlpModel disc = train_lu_discriminator(req, rng);
  Matrix psi_u = representation_of(*req.model, gather_rows(*req.features, req.unlabeled));
  Matrix probs = forward(disc, psi_u, RunMode::Eval).probs;
  std::vector<double> scores(static_cast<std::size_t>(probs.rows()));
  for (Index i = 0; i < probs.rows(); ++i)
    scores[static_cast<std::size_t>(i)] = probs(i, 1);  // P(unlabeled)
  return from_scores(req, std::move(scores), true, "dal");
}

SelectionResult select_cal(const AcquisitionRequest& req, Rng& rng) {
  MlpModel disc = train_cartography_discriminator(req, rng);
  Matrix psi_u = representation_of(*req.model, gather_rows(*req.features, req.unlabeled));
  Matrix probs = forward(disc, psi_u, RunMode::Eval).probs;
  // Distance of P(high-cor) from the decision boundary; smaller is better.
  std::vector<double> scores(static_cast<std::size_t>(probs.rows()));
  for (Index i = 0; i < probs.rows(); ++i)
    scores[static_cast<std::size_t>(i)] = std::abs(0.5 - probs(i, 1));
  return from_scores(req, std::move(scores), false, "cal");
}

SelectionResult select_hybrid_dal_cal(const AcquisitionRequest& req, Rng& rng) {
  require_pool(req, true);
  const Index dal_share = req.batch_size / 2;       // CAL keeps the odd slot
  AcquisitionRequest full = req;
  full.batch_size = static_cast<Index>(req.unlabeled.size());
  SelectionResult dal = select_dal(full, rng);
  SelectionResult cal = select_cal(full, rng);

  SelectionResult result;
  std::unordered_set<InstanceId> taken;
  for (Index i = 0; i < dal_share; ++i) {
    result.chosen.push_back(dal.chosen[static_cast<std::size_t>(i)]);
    taken.insert(result.chosen.back());
  }
  for (std::size_t i = 0; i < cal.chosen.size() &&
                          result.chosen.size() < static_cast<std::size_t>(req.batch_size);
       ++i) {
    if (taken.insert(cal.chosen[i]).second) result.chosen.push_back(cal.chosen[i]);
  }
  result.tables.push_back(std::move(dal.tables[0]));
  result.tables.push_back(std::move(cal.tables[0]));
  return result;
}

SelectionResult select(Strategy strategy, const AcquisitionRequest& req, Rng& rng) {
  switch (strategy) {
    case Strategy::Random: return select_random(req, rng);
    case Strategy::LeastConfidence: return select_least_confidence(req, rng);
    case Strategy::MaxEntropy: return select_max_entropy(req, rng);
    case Strategy::Bald: return select_bald(req, rng);
    case Strategy::Dal: return select_dal(req, rng);
    case Strategy::Cal: return select_cal(req, rng);
    case Strategy::DalCal: return select_hybrid_dal_cal(req, rng);
  }
  throw std::invalid_argument("unknown strategy enum");
}

void write_scores_csv(std::ostream& out, int iteration, const SelectionResult& result,
                      const std::string& strategy, bool header) {
  if (header) out << "iteration,strategy,instance_id,score,selected\n";
  std::unordered_set<InstanceId> chosen(result.chosen.begin(), result.chosen.end());
  for (const ScoreTable& table : result.tables) {
    std::string tag = table.label == strategy ? strategy : strategy + ":" + table.label;
    for (std::size_t i = 0; i < table.ids.size(); ++i) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.9g", table.scores[i]);
      out << iteration << ',' << tag << ',' << table.ids[i] << ',' << buf << ','
          << (chosen.count(table.ids[i]) ? 1 : 0) << "\n";
    }
  }
}

}  // namespace cal
