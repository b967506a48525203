#include "cal/simulator.hpp"

#include "cal/data_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace cal {

namespace {

std::string g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string purpose(const char* what, int iteration) {
  return std::string(what) + "/iter=" + std::to_string(iteration);
}

}  // namespace

std::vector<Index> stratified_seed_sample(const InstancePool& pool, Index size, Rng& rng) {
  const Index n = static_cast<Index>(pool.train_indices.size());
  if (size > n) throw std::invalid_argument("stratified_seed_sample: size exceeds the train pool");

  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(pool.class_count()));
  for (Index row : pool.train_indices)
    by_class[static_cast<std::size_t>(pool.labels[static_cast<std::size_t>(row)])].push_back(row);

  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < by_class.size(); ++c)
    if (!by_class[c].empty()) present.push_back(c);
  if (size < static_cast<Index>(present.size()))
    throw std::invalid_argument("stratified_seed_sample: size smaller than the class count");

  // Largest-remainder allocation in exact integer arithmetic.
  std::vector<Index> quota(by_class.size(), 0);
  std::vector<std::pair<long long, std::size_t>> remainders;  // (-remainder, class)
  Index assigned = 0;
  for (std::size_t c : present) {
    const long long num = static_cast<long long>(size) * static_cast<long long>(by_class[c].size());
    quota[c] = static_cast<Index>(num / n);
    assigned += quota[c];
    remainders.push_back({-(num % n), c});
  }
  std::sort(remainders.begin(), remainders.end());
  const Index extras = size - assigned;
  for (Index e = 0; e < extras; ++e)
    quota[remainders[static_cast<std::size_t>(e)].second] += 1;

  std::vector<Index> chosen;
  chosen.reserve(static_cast<std::size_t>(size));
  for (std::size_t c : present) {
    auto picked = sample_without_replacement(by_class[c].size(),
                                             static_cast<std::size_t>(quota[c]), rng);
    for (std::size_t p : picked) chosen.push_back(by_class[c][p]);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

double evaluate(const MlpModel& model, MatrixRef test_features,
                const std::vector<int>& test_labels) {
  if (test_features.rows() == 0) throw std::invalid_argument("evaluate: empty test set");
  ForwardResult out = forward(model, test_features, RunMode::Eval);
  const std::vector<int> predicted = predict_labels(out.probs);
  Index correct = 0;
  for (std::size_t i = 0; i < test_labels.size(); ++i)
    if (predicted[i] == test_labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(test_labels.size());
}

BatchStat batch_statistic(const std::vector<InstanceId>& batch, const DataMapStats& following_map,
                          int iteration) {
  std::unordered_map<InstanceId, Index> position;
  for (Index i = 0; i < following_map.instances(); ++i)
    position[following_map.ids[static_cast<std::size_t>(i)]] = i;
  double conf = 0.0, var = 0.0, corr = 0.0;
  for (InstanceId id : batch) {
    auto it = position.find(id);
    if (it == position.end())
      throw std::invalid_argument("batch_statistic: instance " + std::to_string(id) +
                                  " missing from the following data map");
    conf += following_map.confidence(it->second);
    var += following_map.variability(it->second);
    corr += following_map.correctness(it->second);
  }
  const double k = static_cast<double>(batch.size());
  return {iteration, conf / k, var / k, corr / k};
}

void validate_protocol(const ExperimentConfig& cfg, const InstancePool& pool) {
  const Index train = static_cast<Index>(pool.train_indices.size());
  if (cfg.seed_size > train)
    throw ConfigError("seed_size", "exceeds the train pool (" + std::to_string(train) + ")");
  const long budget = static_cast<long>(cfg.batch_size) * static_cast<long>(cfg.iterations);
  if (static_cast<long>(cfg.seed_size) + budget > static_cast<long>(train))
    throw ConfigError("budget", "seed_size + batch_size * iterations exceeds the train pool (" +
                                    std::to_string(train) + ")");
  if (pool.test_indices.empty()) throw ConfigError("dataset_test", "test split is empty");
  if (cfg.seed_size < static_cast<Index>(pool.label_names.size()))
    throw ConfigError("seed_size", "smaller than the class count, cannot stratify");
}

InstancePool load_pool(const ExperimentConfig& cfg) {
  if (cfg.dataset_train == "synthetic") {
    return make_gaussian_blobs(cfg.synthetic_train, cfg.synthetic_test, cfg.synthetic_classes,
                               cfg.synthetic_dim, cfg.synthetic_spread, cfg.synthetic_sep,
                               cfg.synthetic_seed, cfg.synthetic_blobs_per_class);
  }
  RawDataset dataset =
      load_dataset(cfg.dataset_train, cfg.dataset_test, parse_data_format(cfg.data_format));
  Matrix train_features, test_features;
  if (!cfg.embeddings.empty()) {
    EmbeddingTable emb = load_embeddings(cfg.embeddings);
    train_features = featurize(dataset.train, emb, cfg.max_len).features;
    test_features = featurize(dataset.test, emb, cfg.max_len).features;
  } else {
    train_features = featurize_hashed(dataset.train, cfg.hash_dim, cfg.hash_seed);
    test_features = featurize_hashed(dataset.test, cfg.hash_dim, cfg.hash_seed);
  }
  return build_pool(dataset, train_features, test_features, cfg.dataset_train);
}

SeedRun run_single_seed(const ExperimentConfig& cfg, const InstancePool& pool, Strategy strategy,
                        std::uint64_t seed, std::ostream* log,
                        std::vector<std::pair<int, SelectionResult>>* score_log) {
  SeedRun run;
  run.seed = seed;

  Rng sample_rng = derive_rng(seed, "seed-sample");
  std::vector<Index> labeled = stratified_seed_sample(pool, cfg.seed_size, sample_rng);
  std::vector<Index> unlabeled;
  {
    std::vector<char> in_seed(static_cast<std::size_t>(pool.size()), 0);
    for (Index row : labeled) in_seed[static_cast<std::size_t>(row)] = 1;
    for (Index row : pool.train_indices)
      if (!in_seed[static_cast<std::size_t>(row)]) unlabeled.push_back(row);
  }

  const Matrix test_features = gather_rows(pool.features, pool.test_indices);
  std::vector<int> test_labels;
  test_labels.reserve(pool.test_indices.size());
  for (Index row : pool.test_indices)
    test_labels.push_back(pool.labels[static_cast<std::size_t>(row)]);

  MlpConfig model_cfg;
  model_cfg.input_dim = pool.feature_dim();
  model_cfg.hidden_dim = cfg.hidden_dim;
  model_cfg.hidden_layers = cfg.hidden_layers;
  model_cfg.class_count = pool.class_count();
  model_cfg.dropout = cfg.dropout;

  AdamWConfig opt_cfg;
  opt_cfg.learning_rate = cfg.learning_rate;
  opt_cfg.weight_decay = cfg.weight_decay;

  for (int iter = 0; iter <= cfg.iterations; ++iter) {
    // Fresh parameters every iteration.
    Rng init_rng = derive_rng(seed, purpose("theta-init", iter));
    MlpModel model(model_cfg, init_rng);
    AdamWState opt(model, opt_cfg);

    Matrix x_labeled = gather_rows(pool.features, labeled);
    std::vector<int> y_labeled;
    std::vector<InstanceId> labeled_ids;
    y_labeled.reserve(labeled.size());
    labeled_ids.reserve(labeled.size());
    for (Index row : labeled) {
      y_labeled.push_back(pool.labels[static_cast<std::size_t>(row)]);
      labeled_ids.push_back(pool.ids[static_cast<std::size_t>(row)]);
    }

    DynamicsLog dynamics(labeled_ids);
    Rng train_rng = derive_rng(seed, purpose("theta-train", iter));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      EpochDynamics ep =
          train_epoch(model, opt, x_labeled, y_labeled, cfg.train_batch, train_rng, epoch);
      dynamics.append_epoch(ep.gold_probability, ep.correct);
    }
    run.datamaps.push_back(compute_datamap(dynamics));

    const double accuracy = evaluate(model, test_features, test_labels);
    run.evals.push_back({iter, static_cast<Index>(labeled.size()), accuracy});
    if (log)
      *log << "[seed " << seed << "] iteration " << iter << ": |L|=" << labeled.size()
           << " accuracy=" << g9(accuracy) << "\n";

    if (iter == cfg.iterations) break;

    AcquisitionRequest req;
    req.model = &model;
    req.features = &pool.features;
    req.ids = &pool.ids;
    req.labeled = labeled;
    req.unlabeled = unlabeled;
    req.batch_size = cfg.batch_size;
    req.params = cfg.params;
    CartographyLabels cartography;
    if (strategy == Strategy::Cal || strategy == Strategy::DalCal) {
      cartography = assign_cartography_labels(run.datamaps.back(), cfg.params.t_cor);
      req.cartography = &cartography;
    }

    Rng acquire_rng = derive_rng(seed, purpose("acquire", iter));
    SelectionResult selection;
    try {
      selection = select(strategy, req, acquire_rng);
    } catch (const DegenerateLabelsError& e) {
      // Single-class cartography map; least confidence keeps the loop total.
      if (log)
        *log << "[seed " << seed << "] iteration " << iter
             << ": falling back to least_confidence (" << e.what() << ")\n";
      run.fallback_iterations.push_back(iter);
      selection = select_least_confidence(req, acquire_rng);
    }

    if (score_log) score_log->push_back({iter, selection});

    // Reveal the withheld labels: move the batch from U to L in rank order.
    std::unordered_map<InstanceId, Index> row_of;
    for (Index row : unlabeled) row_of[pool.ids[static_cast<std::size_t>(row)]] = row;
    std::vector<char> picked(static_cast<std::size_t>(pool.size()), 0);
    for (InstanceId id : selection.chosen) {
      const Index row = row_of.at(id);
      picked[static_cast<std::size_t>(row)] = 1;
      labeled.push_back(row);
    }
    std::vector<Index> remaining;
    remaining.reserve(unlabeled.size() - selection.chosen.size());
    for (Index row : unlabeled)
      if (!picked[static_cast<std::size_t>(row)]) remaining.push_back(row);
    unlabeled = std::move(remaining);
    run.selected.push_back(std::move(selection.chosen));
  }

  // Batch means come from the data map of the training run after the batch
  // joined L; the last batch has no following run in the protocol.
  for (int iter = 0; iter + 1 < cfg.iterations; ++iter)
    run.batch_stats.push_back(batch_statistic(
        run.selected[static_cast<std::size_t>(iter)],
        run.datamaps[static_cast<std::size_t>(iter + 1)], iter));
  return run;
}

RunHistory run_experiment(const ExperimentConfig& cfg, const InstancePool& pool,
                          const std::string& strategy, std::ostream* log) {
  validate_protocol(cfg, pool);
  RunHistory history;
  history.strategy = strategy;
  history.dataset_tag = pool.tag;
  history.train_size = static_cast<Index>(pool.train_indices.size());
  const Strategy tag = parse_strategy(strategy);
  for (std::uint64_t seed : cfg.seeds) {
    if (log) *log << "== strategy " << strategy << ", seed " << seed << " ==\n";
    history.runs.push_back(run_single_seed(cfg, pool, tag, seed, log));
  }
  return history;
}

void write_history_csv(std::ostream& out, const std::vector<RunHistory>& histories,
                       const std::string& provenance) {
  if (!provenance.empty()) out << "# " << provenance << "\n";
  out << "strategy,seed,iteration,labeled_count,accuracy\n";
  for (const RunHistory& h : histories)
    for (const SeedRun& run : h.runs)
      for (const EvalRecord& e : run.evals)
        out << h.strategy << ',' << run.seed << ',' << e.iteration << ',' << e.labeled_count
            << ',' << g9(e.accuracy) << "\n";
}

void write_selected_csv(std::ostream& out, const std::vector<RunHistory>& histories,
                        const std::string& provenance) {
  if (!provenance.empty()) out << "# " << provenance << "\n";
  out << "strategy,seed,iteration,rank,instance_id\n";
  for (const RunHistory& h : histories)
    for (const SeedRun& run : h.runs)
      for (std::size_t iter = 0; iter < run.selected.size(); ++iter)
        for (std::size_t rank = 0; rank < run.selected[iter].size(); ++rank)
          out << h.strategy << ',' << run.seed << ',' << iter << ',' << rank << ','
              << run.selected[iter][rank] << "\n";
}

void write_batch_stats_csv(std::ostream& out, const std::vector<RunHistory>& histories,
                           const std::string& provenance) {
  if (!provenance.empty()) out << "# " << provenance << "\n";
  out << "strategy,seed,iteration,mean_confidence,mean_variability,mean_correctness\n";
  for (const RunHistory& h : histories)
    for (const SeedRun& run : h.runs)
      for (const BatchStat& b : run.batch_stats)
        out << h.strategy << ',' << run.seed << ',' << b.iteration << ','
            << g9(b.mean_confidence) << ',' << g9(b.mean_variability) << ','
            << g9(b.mean_correctness) << "\n";
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

Index train_size_from_comment(const std::string& line) {
  const std::string key = "train_size=";
  const std::size_t at = line.find(key);
  if (at == std::string::npos) return -1;
  return static_cast<Index>(std::stoll(line.substr(at + key.size())));
}

}  // namespace

HistoryFile read_history_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open history file: " + path);
  HistoryFile file;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (file.train_size < 0) file.train_size = train_size_from_comment(line);
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> f = split_fields(line);
    if (f.size() != 5)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 5 fields");
    file.rows.push_back({f[0], std::stoull(f[1]), std::stoi(f[2]),
                         static_cast<Index>(std::stoll(f[3])), std::stod(f[4])});
  }
  return file;
}

std::vector<SelectedRow> read_selected_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open selected-ids file: " + path);
  std::vector<SelectedRow> rows;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> f = split_fields(line);
    if (f.size() != 5)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 5 fields");
    rows.push_back({f[0], std::stoull(f[1]), std::stoi(f[2]), std::stoi(f[3]),
                    static_cast<InstanceId>(std::stoll(f[4]))});
  }
  return rows;
}

}  // namespace cal
