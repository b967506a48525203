#include "cal/acquisition.hpp"

#include "cal/data_io.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

using namespace cal;

namespace {

struct Fixture {
  InstancePool pool;
  std::vector<Index> labeled, unlabeled;
  MlpModel model;

  explicit Fixture(Index train = 60, Index labeled_count = 20, int classes = 3, Index dim = 6,
                   double dropout = 0.0, std::uint64_t seed = 77)
      : pool(make_gaussian_blobs(train, 10, classes, dim, 1.0, 3.0, seed)),
        model(make_model(dim, classes, dropout, seed)) {
    for (Index i = 0; i < labeled_count; ++i) labeled.push_back(pool.train_indices[static_cast<std::size_t>(i)]);
    for (Index i = labeled_count; i < train; ++i)
      unlabeled.push_back(pool.train_indices[static_cast<std::size_t>(i)]);
  }

  static MlpModel make_model(Index dim, int classes, double dropout, std::uint64_t seed) {
    MlpConfig cfg;
    cfg.input_dim = dim;
    cfg.hidden_dim = 16;
    cfg.hidden_layers = 3;
    cfg.class_count = classes;
    cfg.dropout = dropout;
    Rng rng = derive_rng(seed, "model-init");
    return MlpModel(cfg, rng);
  }

  AcquisitionRequest request(Index k) const {
    AcquisitionRequest req;
    req.model = &model;
    req.features = &pool.features;
    req.ids = &pool.ids;
    req.labeled = labeled;
    req.unlabeled = unlabeled;
    req.batch_size = k;
    req.params.disc_hidden_dim = 16;
    req.params.disc_epochs = 10;
    req.params.disc_batch_size = 8;
    return req;
  }
};

std::vector<InstanceId> brute_force_top_k(const std::vector<InstanceId>& ids,
                                          const std::vector<double>& scores, Index k,
                                          bool higher_better) {
  std::vector<std::size_t> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b])
      return higher_better ? scores[a] > scores[b] : scores[a] < scores[b];
    return ids[a] < ids[b];
  });
  std::vector<InstanceId> out;
  for (Index i = 0; i < k; ++i) out.push_back(ids[order[static_cast<std::size_t>(i)]]);
  return out;
}

}  // namespace

TEST_CASE("random selection covers the pool when k equals its size") {
  Fixture fx;
  Rng rng = derive_rng(1, "acquire");
  SelectionResult sel = select_random(fx.request(static_cast<Index>(fx.unlabeled.size())), rng);
  std::set<InstanceId> chosen(sel.chosen.begin(), sel.chosen.end());
  CHECK(chosen.size() == fx.unlabeled.size());
}

TEST_CASE("random selection is deterministic under a fixed seed") {
  Fixture fx;
  Rng a = derive_rng(2, "acquire");
  Rng b = derive_rng(2, "acquire");
  CHECK(select_random(fx.request(5), a).chosen == select_random(fx.request(5), b).chosen);
}

TEST_CASE("random selection rejects oversized batches") {
  Fixture fx;
  Rng rng = derive_rng(3, "acquire");
  CHECK_THROWS_AS(select_random(fx.request(static_cast<Index>(fx.unlabeled.size()) + 1), rng),
                  std::invalid_argument);
}

TEST_CASE("random selection is uniform over a small pool") {
  // 10-element pool, k = 1: every element lands within 0.1 +- 0.01 over 1e4 draws.
  Fixture fx(30, 20, 3, 6);
  REQUIRE(fx.unlabeled.size() == 10);
  std::map<InstanceId, int> counts;
  const int trials = 10000;
  Rng rng = derive_rng(4, "acquire");
  for (int t = 0; t < trials; ++t) counts[select_random(fx.request(1), rng).chosen[0]] += 1;
  for (const auto& [id, count] : counts)
    CHECK(std::abs(count / static_cast<double>(trials) - 0.1) <= 0.01);
}

TEST_CASE("least confidence prefers the flattest prediction") {
  Fixture fx;
  Rng rng = derive_rng(5, "acquire");
  SelectionResult sel = select_least_confidence(fx.request(1), rng);

  // Oracle: exhaustive sort of 1 - max prob over all candidates.
  Matrix probs =
      forward(fx.model, gather_rows(fx.pool.features, fx.unlabeled), RunMode::Eval).probs;
  std::vector<double> scores;
  std::vector<InstanceId> ids;
  for (Index i = 0; i < probs.rows(); ++i) {
    scores.push_back(1.0 - probs.row(i).maxCoeff());
    ids.push_back(
        fx.pool.ids[static_cast<std::size_t>(fx.unlabeled[static_cast<std::size_t>(i)])]);
  }
  CHECK(sel.chosen == brute_force_top_k(ids, scores, 1, true));

  SelectionResult top7 = select_least_confidence(fx.request(7), rng);
  CHECK(top7.chosen == brute_force_top_k(ids, scores, 7, true));
}

TEST_CASE("max entropy matches exhaustive evaluation of the entropy formula") {
  Fixture fx;
  Rng rng = derive_rng(6, "acquire");
  SelectionResult sel = select_max_entropy(fx.request(9), rng);

  Matrix probs =
      forward(fx.model, gather_rows(fx.pool.features, fx.unlabeled), RunMode::Eval).probs;
  std::vector<double> scores;
  std::vector<InstanceId> ids;
  for (Index i = 0; i < probs.rows(); ++i) {
    double h = 0.0;
    for (Index c = 0; c < probs.cols(); ++c)
      if (probs(i, c) > 0.0) h -= probs(i, c) * std::log2(probs(i, c));
    scores.push_back(h);
    ids.push_back(
        fx.pool.ids[static_cast<std::size_t>(fx.unlabeled[static_cast<std::size_t>(i)])]);
  }
  CHECK(sel.chosen == brute_force_top_k(ids, scores, 9, true));
}

TEST_CASE("least confidence and max entropy agree on binary pools") {
  Fixture fx(40, 14, 2, 6);
  Rng rng = derive_rng(7, "acquire");
  SelectionResult lc = select_least_confidence(fx.request(8), rng);
  SelectionResult ent = select_max_entropy(fx.request(8), rng);
  CHECK(lc.chosen == ent.chosen);
}

TEST_CASE("bald with p = 0 collapses to max entropy") {
  Fixture fx(40, 14, 3, 6, 0.0);
  Rng a = derive_rng(8, "acquire");
  Rng b = derive_rng(8, "acquire");
  CHECK(select_bald(fx.request(6), a).chosen == select_max_entropy(fx.request(6), b).chosen);
}

TEST_CASE("bald is deterministic and matches entropy of the logged pass mean") {
  Fixture fx(40, 14, 3, 6, 0.3);
  Rng a = derive_rng(9, "acquire");
  Rng b = derive_rng(9, "acquire");
  SelectionResult first = select_bald(fx.request(5), a);
  SelectionResult second = select_bald(fx.request(5), b);
  CHECK(first.chosen == second.chosen);

  // Recompute: average the ten stochastic passes by hand, then rank entropy.
  Rng c = derive_rng(9, "acquire");
  Matrix feats = gather_rows(fx.pool.features, fx.unlabeled);
  Matrix sum;
  for (int pass = 0; pass < 10; ++pass) {
    Matrix probs = forward(fx.model, feats, RunMode::Train, &c).probs;
    if (pass == 0)
      sum = probs;
    else
      sum += probs;
  }
  Vector h = entropy_bits_rows(sum / 10.0);
  const ScoreTable& table = first.tables[0];
  for (Index i = 0; i < h.size(); ++i)
    CHECK(table.scores[static_cast<std::size_t>(i)] == doctest::Approx(h(i)).epsilon(1e-12));
}

TEST_CASE("bald rejects a non-positive pass count") {
  Fixture fx(40, 14, 3, 6, 0.3);
  AcquisitionRequest req = fx.request(3);
  req.params.mc_passes = 0;
  Rng rng = derive_rng(10, "acquire");
  CHECK_THROWS_AS(select_bald(req, rng), std::invalid_argument);
}

TEST_CASE("dal errors on an empty side") {
  Fixture fx;
  AcquisitionRequest req = fx.request(3);
  req.labeled = {};
  Rng rng = derive_rng(11, "acquire");
  CHECK_THROWS_AS(select_dal(req, rng), std::invalid_argument);
}

TEST_CASE("dal ranks by discriminator P(unlabeled), exhaustively checked") {
  Fixture fx;
  AcquisitionRequest req = fx.request(4);
  Rng a = derive_rng(12, "acquire");
  SelectionResult sel = select_dal(req, a);

  Rng b = derive_rng(12, "acquire");
  MlpModel disc = train_lu_discriminator(req, b);
  Matrix psi = representation_of(fx.model, gather_rows(fx.pool.features, fx.unlabeled));
  Matrix probs = forward(disc, psi, RunMode::Eval).probs;
  std::vector<double> scores;
  std::vector<InstanceId> ids;
  for (Index i = 0; i < probs.rows(); ++i) {
    scores.push_back(probs(i, 1));
    ids.push_back(
        fx.pool.ids[static_cast<std::size_t>(fx.unlabeled[static_cast<std::size_t>(i)])]);
  }
  CHECK(sel.chosen == brute_force_top_k(ids, scores, 4, true));
}

TEST_CASE("dal takes the whole pool when k = |U|") {
  Fixture fx;
  AcquisitionRequest req = fx.request(static_cast<Index>(fx.unlabeled.size()));
  Rng rng = derive_rng(13, "acquire");
  SelectionResult sel = select_dal(req, rng);
  std::set<InstanceId> chosen(sel.chosen.begin(), sel.chosen.end());
  CHECK(chosen.size() == fx.unlabeled.size());
}

TEST_CASE("indistinguishable L and U leave the discriminator near chance") {
  // L and U drawn iid from one blob cloud: held-out accuracy hovers at 0.5.
  InstancePool pool = make_gaussian_blobs(400, 10, 2, 4, 1.0, 0.0, 5150);
  MlpConfig cfg;
  cfg.input_dim = 4;
  cfg.hidden_dim = 16;
  cfg.hidden_layers = 3;
  cfg.class_count = 2;
  cfg.dropout = 0.0;
  Rng init = derive_rng(5150, "model-init");
  MlpModel model(cfg, init);

  AcquisitionRequest req;
  req.model = &model;
  req.features = &pool.features;
  req.ids = &pool.ids;
  std::vector<Index> labeled, unlabeled, holdout_l, holdout_u;
  for (Index i = 0; i < 150; ++i) labeled.push_back(pool.train_indices[static_cast<std::size_t>(i)]);
  for (Index i = 150; i < 300; ++i)
    unlabeled.push_back(pool.train_indices[static_cast<std::size_t>(i)]);
  for (Index i = 300; i < 350; ++i)
    holdout_l.push_back(pool.train_indices[static_cast<std::size_t>(i)]);
  for (Index i = 350; i < 400; ++i)
    holdout_u.push_back(pool.train_indices[static_cast<std::size_t>(i)]);
  req.labeled = labeled;
  req.unlabeled = unlabeled;
  req.batch_size = 10;
  req.params.disc_hidden_dim = 16;
  req.params.disc_epochs = 10;
  req.params.disc_batch_size = 16;

  Rng rng = derive_rng(14, "acquire");
  MlpModel disc = train_lu_discriminator(req, rng);
  Matrix psi_l = representation_of(model, gather_rows(pool.features, holdout_l));
  Matrix psi_u = representation_of(model, gather_rows(pool.features, holdout_u));
  std::vector<int> pred_l = predict_labels(forward(disc, psi_l, RunMode::Eval).probs);
  std::vector<int> pred_u = predict_labels(forward(disc, psi_u, RunMode::Eval).probs);
  int correct = 0;
  for (int p : pred_l) correct += p == 0;
  for (int p : pred_u) correct += p == 1;
  const double accuracy = correct / 100.0;
  CHECK(accuracy > 0.3);
  CHECK(accuracy < 0.7);
}

TEST_CASE("cal needs aligned cartography labels and both classes present") {
  Fixture fx;
  AcquisitionRequest req = fx.request(3);
  Rng rng = derive_rng(15, "acquire");
  CHECK_THROWS_AS(select_cal(req, rng), std::invalid_argument);

  CartographyLabels degenerate;
  degenerate.label.assign(fx.labeled.size(), 1);
  req.cartography = &degenerate;
  CHECK_THROWS_AS(select_cal(req, rng), DegenerateLabelsError);

  degenerate.label.assign(fx.labeled.size(), 0);
  CHECK_THROWS_AS(select_cal(req, rng), DegenerateLabelsError);
}

TEST_CASE("cal picks the candidates closest to the decision boundary") {
  Fixture fx;
  AcquisitionRequest req = fx.request(5);
  CartographyLabels labels;
  labels.label.assign(fx.labeled.size(), 0);
  for (std::size_t i = 0; i < labels.label.size(); i += 2) labels.label[i] = 1;
  req.cartography = &labels;

  Rng a = derive_rng(16, "acquire");
  SelectionResult sel = select_cal(req, a);

  Rng b = derive_rng(16, "acquire");
  MlpModel disc = train_cartography_discriminator(req, b);
  Matrix psi = representation_of(fx.model, gather_rows(fx.pool.features, fx.unlabeled));
  Matrix probs = forward(disc, psi, RunMode::Eval).probs;
  std::vector<double> scores;
  std::vector<InstanceId> ids;
  for (Index i = 0; i < probs.rows(); ++i) {
    scores.push_back(std::abs(0.5 - probs(i, 1)));
    ids.push_back(
        fx.pool.ids[static_cast<std::size_t>(fx.unlabeled[static_cast<std::size_t>(i)])]);
  }
  CHECK(sel.chosen == brute_force_top_k(ids, scores, 5, false));
}

TEST_CASE("rank_by_score tie-breaks by ascending id") {
  std::vector<InstanceId> ids = {9, 4, 7, 1};
  std::vector<double> scores = {0.4, 0.9, 0.4, 0.1};
  std::vector<std::size_t> desc = rank_by_score(scores, ids, true);
  CHECK(ids[desc[0]] == 4);
  CHECK(ids[desc[1]] == 7);  // 0.4 tie: id 7 before id 9
  CHECK(ids[desc[2]] == 9);
  CHECK(ids[desc[3]] == 1);

  // Distance-to-0.5 ties at 0.4 resolve toward the lower id.
  std::vector<InstanceId> abc = {1, 2, 3};
  std::vector<double> dist = {0.4, 0.02, 0.4};
  std::vector<std::size_t> asc = rank_by_score(dist, abc, false);
  CHECK(abc[asc[0]] == 2);
  CHECK(abc[asc[1]] == 1);
  CHECK(abc[asc[2]] == 3);
}

TEST_CASE("ranking is invariant under strictly increasing score transforms") {
  Rng rng = derive_rng(17, "scores");
  std::vector<InstanceId> ids;
  std::vector<double> scores;
  for (int i = 0; i < 50; ++i) {
    ids.push_back(i);
    scores.push_back(uniform01(rng));
  }
  std::vector<double> transformed;
  for (double s : scores) transformed.push_back(3.0 * std::exp(s) + 1.0);
  CHECK(rank_by_score(scores, ids, true) == rank_by_score(transformed, ids, true));
}

TEST_CASE("every strategy returns k distinct ids from U") {
  Fixture fx(60, 20, 3, 6, 0.3);
  CartographyLabels labels;
  labels.label.assign(fx.labeled.size(), 0);
  for (std::size_t i = 0; i < labels.label.size(); i += 3) labels.label[i] = 1;

  std::set<InstanceId> universe;
  for (Index row : fx.unlabeled) universe.insert(fx.pool.ids[static_cast<std::size_t>(row)]);

  for (Strategy strategy : {Strategy::Random, Strategy::LeastConfidence, Strategy::MaxEntropy,
                            Strategy::Bald, Strategy::Dal, Strategy::Cal, Strategy::DalCal}) {
    AcquisitionRequest req = fx.request(7);
    req.cartography = &labels;
    Rng rng = derive_rng(18, "acquire/" + strategy_name(strategy));
    SelectionResult sel = select(strategy, req, rng);
    std::set<InstanceId> chosen(sel.chosen.begin(), sel.chosen.end());
    CHECK(chosen.size() == 7);
    for (InstanceId id : chosen) CHECK(universe.count(id) == 1);
  }
}

TEST_CASE("hybrid splits the budget and dedupes toward the next cal candidate") {
  Fixture fx;
  AcquisitionRequest req = fx.request(6);
  CartographyLabels labels;
  labels.label.assign(fx.labeled.size(), 0);
  for (std::size_t i = 0; i < labels.label.size(); i += 2) labels.label[i] = 1;
  req.cartography = &labels;

  Rng a = derive_rng(19, "acquire");
  SelectionResult hybrid = select_hybrid_dal_cal(req, a);
  CHECK(hybrid.chosen.size() == 6);
  std::set<InstanceId> unique(hybrid.chosen.begin(), hybrid.chosen.end());
  CHECK(unique.size() == 6);

  // Replaying the same stream gives the constituent rankings; the hybrid
  // batch must equal DAL's half concatenated with CAL's dedup-adjusted half.
  Rng b = derive_rng(19, "acquire");
  AcquisitionRequest full = req;
  full.batch_size = static_cast<Index>(fx.unlabeled.size());
  SelectionResult dal = select_dal(full, b);
  SelectionResult cal_sel = select_cal(full, b);
  std::vector<InstanceId> expected(dal.chosen.begin(), dal.chosen.begin() + 3);
  std::set<InstanceId> taken(expected.begin(), expected.end());
  for (InstanceId id : cal_sel.chosen) {
    if (expected.size() == 6) break;
    if (taken.insert(id).second) expected.push_back(id);
  }
  CHECK(hybrid.chosen == expected);
  CHECK(hybrid.tables.size() == 2);
}

TEST_CASE("hybrid with an odd budget gives cal the extra slot") {
  Fixture fx;
  AcquisitionRequest req = fx.request(5);
  CartographyLabels labels;
  labels.label.assign(fx.labeled.size(), 0);
  for (std::size_t i = 0; i < labels.label.size(); i += 2) labels.label[i] = 1;
  req.cartography = &labels;

  Rng a = derive_rng(20, "acquire");
  SelectionResult hybrid = select_hybrid_dal_cal(req, a);
  CHECK(hybrid.chosen.size() == 5);

  Rng b = derive_rng(20, "acquire");
  AcquisitionRequest full = req;
  full.batch_size = static_cast<Index>(fx.unlabeled.size());
  SelectionResult dal = select_dal(full, b);
  // DAL contributes floor(5/2) = 2 picks; the remaining three are CAL's.
  CHECK(hybrid.chosen[0] == dal.chosen[0]);
  CHECK(hybrid.chosen[1] == dal.chosen[1]);
}

TEST_CASE("dal on separable L and U clusters is confident about U") {
  // L sits near +10 on axis 0, U near +10 on axis 1: linearly separable in
  // input space, and a random ReLU map keeps them apart in representation
  // space. The discriminator should put the chosen instances deep in U.
  const Index dim = 6;
  InstancePool pool;
  pool.features = Matrix::Zero(60, dim);
  Rng noise = derive_rng(404, "clusters");
  for (Index i = 0; i < 60; ++i) {
    for (Index d = 0; d < dim; ++d) pool.features(i, d) = 0.3 * standard_normal(noise);
    pool.features(i, i < 30 ? 0 : 1) += 10.0;
    pool.labels.push_back(0);
    pool.ids.push_back(i);
    pool.train_indices.push_back(i);
  }
  pool.label_names = {"a", "b"};

  MlpConfig cfg;
  cfg.input_dim = dim;
  cfg.hidden_dim = 16;
  cfg.hidden_layers = 3;
  cfg.class_count = 2;
  cfg.dropout = 0.0;
  Rng init = derive_rng(404, "model-init");
  MlpModel model(cfg, init);

  std::vector<Index> labeled, unlabeled;
  for (Index i = 0; i < 30; ++i) labeled.push_back(i);
  for (Index i = 30; i < 60; ++i) unlabeled.push_back(i);

  AcquisitionRequest req;
  req.model = &model;
  req.features = &pool.features;
  req.ids = &pool.ids;
  req.labeled = labeled;
  req.unlabeled = unlabeled;
  req.batch_size = 5;
  req.params.disc_hidden_dim = 16;
  req.params.disc_epochs = 30;
  req.params.disc_batch_size = 16;
  req.params.disc_learning_rate = 1e-3;

  Rng select_rng = derive_rng(404, "acquire");
  SelectionResult sel = select_dal(req, select_rng);

  Rng disc_rng = derive_rng(404, "acquire");
  MlpModel disc = train_lu_discriminator(req, disc_rng);
  Matrix psi = representation_of(model, gather_rows(pool.features, unlabeled));
  Matrix probs = forward(disc, psi, RunMode::Eval).probs;
  std::set<InstanceId> chosen(sel.chosen.begin(), sel.chosen.end());
  for (Index i = 0; i < probs.rows(); ++i) {
    const InstanceId id = pool.ids[static_cast<std::size_t>(unlabeled[static_cast<std::size_t>(i)])];
    if (chosen.count(id)) CHECK(probs(i, 1) > 0.9);
  }
}
