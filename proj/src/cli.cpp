#include "cal/cli.hpp"

#include "cal/config.hpp"
#include "cal/data_io.hpp"
#include "cal/simulator.hpp"
#include "cal/stats.hpp"
#include "cal/svg.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace cal::cli {

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;  // key=value
  std::string seed_list;
  int jobs = 1;
};

ExperimentConfig load_config(const CommonOptions& opts) {
  ExperimentConfig cfg = parse_config_file(opts.config_path);
  for (const std::string& entry : opts.overrides) {
    const std::size_t eq = entry.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set", "expected key=value, got '" + entry + "'");
    apply_config_entry(cfg, entry.substr(0, eq), entry.substr(eq + 1));
  }
  if (!opts.seed_list.empty()) apply_config_entry(cfg, "seeds", opts.seed_list);
  if (!cfg.disc_batch_set) cfg.params.disc_batch_size = cfg.train_batch;
  validate_config(cfg);
  return cfg;
}

/// Temp-and-rename so partially written files never land under their final
/// name.
void write_atomic(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out << contents;
    if (!out.good()) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_config = true) {
  if (with_config)
    cmd->add_option("--config", opts.config_path, "experiment config file")->required();
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--set", opts.overrides, "config override key=value (repeatable)");
  cmd->add_option("--seed-list", opts.seed_list, "comma-separated seed override");
  cmd->add_option("--jobs", opts.jobs, "parallel (strategy x seed) workers")
      ->check(CLI::PositiveNumber);
}

int cmd_run(const CommonOptions& opts) {
  ExperimentConfig cfg = load_config(opts);
  InstancePool pool = load_pool(cfg);
  validate_protocol(cfg, pool);
  fs::create_directories(opts.out_dir);

  struct Task {
    std::size_t strategy_index;
    std::size_t seed_index;
  };
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < cfg.strategies.size(); ++s)
    for (std::size_t r = 0; r < cfg.seeds.size(); ++r) tasks.push_back({s, r});

  std::vector<RunHistory> histories(cfg.strategies.size());
  for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
    histories[s].strategy = cfg.strategies[s];
    histories[s].dataset_tag = pool.tag;
    histories[s].train_size = static_cast<Index>(pool.train_indices.size());
    histories[s].runs.resize(cfg.seeds.size());
  }
  std::vector<std::vector<std::pair<int, SelectionResult>>> score_logs(tasks.size());

  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      if (failure) return;
      const Task task = tasks[t];
      try {
        std::ostringstream local_log;
        SeedRun run = run_single_seed(cfg, pool, parse_strategy(cfg.strategies[task.strategy_index]),
                                      cfg.seeds[task.seed_index], &local_log,
                                      cfg.export_scores ? &score_logs[t] : nullptr);
        histories[task.strategy_index].runs[task.seed_index] = std::move(run);
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cerr << "== strategy " << cfg.strategies[task.strategy_index] << ", seed "
                  << cfg.seeds[task.seed_index] << " ==\n"
                  << local_log.str();
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const int jobs = std::max(1, std::min<int>(opts.jobs, static_cast<int>(tasks.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  const std::string provenance =
      provenance_line(cfg, static_cast<Index>(pool.train_indices.size()));
  std::ostringstream history_out, selected_out, stats_out;
  write_history_csv(history_out, histories, provenance);
  write_selected_csv(selected_out, histories, provenance);
  write_batch_stats_csv(stats_out, histories, provenance);
  write_atomic(fs::path(opts.out_dir) / "history.csv", history_out.str());
  write_atomic(fs::path(opts.out_dir) / "selected_ids.csv", selected_out.str());
  write_atomic(fs::path(opts.out_dir) / "batch_stats.csv", stats_out.str());

  if (cfg.export_scores) {
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      const std::string& strategy = cfg.strategies[tasks[t].strategy_index];
      std::ostringstream out;
      out << "# " << provenance << "\n";
      bool header = true;
      for (const auto& [iteration, result] : score_logs[t]) {
        write_scores_csv(out, iteration, result, strategy, header);
        header = false;
      }
      write_atomic(fs::path(opts.out_dir) /
                       ("scores_" + strategy + "_" + std::to_string(cfg.seeds[tasks[t].seed_index]) +
                        ".csv"),
                   out.str());
    }
  }
  return 0;
}

int cmd_datamap(const CommonOptions& opts) {
  ExperimentConfig cfg = load_config(opts);
  InstancePool pool = load_pool(cfg);
  fs::create_directories(opts.out_dir);

  const std::uint64_t seed = cfg.seeds.front();
  std::vector<Index> rows;
  if (cfg.map_split == "seed") {
    if (cfg.seed_size < static_cast<Index>(pool.label_names.size()))
      throw ConfigError("seed_size", "smaller than the class count, cannot stratify");
    Rng rng = derive_rng(seed, "seed-sample");
    rows = stratified_seed_sample(pool, cfg.seed_size, rng);
  } else {
    rows = pool.train_indices;
  }

  Matrix features = gather_rows(pool.features, rows);
  std::vector<int> labels;
  std::vector<InstanceId> ids;
  for (Index row : rows) {
    labels.push_back(pool.labels[static_cast<std::size_t>(row)]);
    ids.push_back(pool.ids[static_cast<std::size_t>(row)]);
  }

  MlpConfig model_cfg;
  model_cfg.input_dim = pool.feature_dim();
  model_cfg.hidden_dim = cfg.hidden_dim;
  model_cfg.hidden_layers = cfg.hidden_layers;
  model_cfg.class_count = pool.class_count();
  model_cfg.dropout = cfg.dropout;
  Rng init_rng = derive_rng(seed, "datamap-init");
  MlpModel model(model_cfg, init_rng);
  AdamWConfig opt_cfg;
  opt_cfg.learning_rate = cfg.learning_rate;
  opt_cfg.weight_decay = cfg.weight_decay;
  AdamWState opt(model, opt_cfg);

  DynamicsLog dynamics(ids);
  Rng train_rng = derive_rng(seed, "datamap-train");
  for (int epoch = 0; epoch < cfg.map_epochs; ++epoch) {
    EpochDynamics ep = train_epoch(model, opt, features, labels, cfg.train_batch, train_rng, epoch);
    dynamics.append_epoch(ep.gold_probability, ep.correct);
    std::cerr << "datamap epoch " << epoch << ": loss " << ep.mean_loss << "\n";
  }
  DataMapStats stats = compute_datamap(dynamics);
  CartographyLabels cart = assign_cartography_labels(stats, cfg.params.t_cor);

  const std::string provenance =
      provenance_line(cfg, static_cast<Index>(pool.train_indices.size()));
  std::ostringstream csv;
  write_datamap_csv(csv, stats, cart, labels, provenance);
  write_atomic(fs::path(opts.out_dir) / "datamap.csv", csv.str());
  std::ostringstream svg;
  emit_svg_datamap(svg, stats, cfg.map_epochs, pool.tag);
  write_atomic(fs::path(opts.out_dir) / "datamap.svg", svg.str());
  return 0;
}

std::vector<HistoryRow> read_all_history(const std::vector<std::string>& paths, Index* train_size) {
  std::vector<HistoryRow> rows;
  for (const std::string& path : paths) {
    HistoryFile file = read_history_csv(path);
    if (train_size && *train_size < 0) *train_size = file.train_size;
    rows.insert(rows.end(), file.rows.begin(), file.rows.end());
  }
  return rows;
}

int cmd_aso(const std::vector<std::string>& files, double alpha, int bootstrap,
            std::uint64_t seed, const std::string& bonferroni, bool per_iteration,
            const std::string& out_dir) {
  std::vector<HistoryRow> rows = read_all_history(files, nullptr);
  std::vector<ScoreSample> samples = history_score_samples(rows);
  if (samples.size() < 2)
    throw ConfigError("aso", "need histories of at least two strategies, got " +
                                 std::to_string(samples.size()));
  const BonferroniMode mode = parse_bonferroni(bonferroni);
  AsoGrid grid = aso_matrix(samples, alpha, bootstrap, seed, mode);
  fs::create_directories(out_dir);
  std::ostringstream out;
  write_aso_grid_csv(out, grid, "");
  write_atomic(fs::path(out_dir) / "aso_grid.csv", out.str());

  if (per_iteration) {
    std::ostringstream per;
    per << "iteration,strategy_a,strategy_b,eps_min\n";
    for (const auto& [iteration, g] : aso_per_iteration(rows, alpha, bootstrap, seed, mode)) {
      for (Index i = 0; i < g.eps.rows(); ++i)
        for (Index j = 0; j < g.eps.cols(); ++j) {
          if (i == j) continue;
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%.9g", g.eps(i, j));
          per << iteration << ',' << g.names[static_cast<std::size_t>(i)] << ','
              << g.names[static_cast<std::size_t>(j)] << ',' << buf << "\n";
        }
    }
    write_atomic(fs::path(out_dir) / "aso_per_iteration.csv", per.str());
  }
  return 0;
}

int cmd_overlap(const std::vector<std::string>& files, const std::string& out_dir) {
  SelectionsByStrategy selections;
  for (const std::string& path : files)
    for (const SelectedRow& row : read_selected_csv(path))
      selections[row.strategy][row.seed].insert(row.instance_id);
  if (selections.size() < 2)
    throw ConfigError("overlap", "need selections of at least two strategies, got " +
                                     std::to_string(selections.size()));
  std::vector<OverlapReport> reports = overlap_reports(selections);
  fs::create_directories(out_dir);
  std::ostringstream out;
  write_overlap_csv(out, reports, "");
  write_atomic(fs::path(out_dir) / "overlap.csv", out.str());
  return 0;
}

int cmd_plot(const std::vector<std::string>& files, const std::string& out_dir) {
  Index train_size = -1;
  std::vector<HistoryRow> rows = read_all_history(files, &train_size);
  if (rows.empty()) throw ConfigError("plot", "history files contain no rows");

  // Regroup rows into per-strategy histories.
  std::map<std::string, std::map<std::uint64_t, std::vector<HistoryRow>>> grouped;
  for (const HistoryRow& row : rows) grouped[row.strategy][row.seed].push_back(row);
  std::vector<RunHistory> histories;
  for (auto& [strategy, by_seed] : grouped) {
    RunHistory h;
    h.strategy = strategy;
    h.train_size = train_size > 0 ? train_size : 0;
    for (auto& [seed, seed_rows] : by_seed) {
      std::sort(seed_rows.begin(), seed_rows.end(),
                [](const HistoryRow& a, const HistoryRow& b) { return a.iteration < b.iteration; });
      SeedRun run;
      run.seed = seed;
      for (const HistoryRow& row : seed_rows)
        run.evals.push_back({row.iteration, row.labeled_count, row.accuracy});
      h.runs.push_back(std::move(run));
    }
    histories.push_back(std::move(h));
  }
  fs::create_directories(out_dir);
  std::ostringstream svg;
  emit_svg_curves(svg, histories, "accuracy over acquisition iterations");
  write_atomic(fs::path(out_dir) / "curves.svg", svg.str());
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"pool-based active-learning lab with data-map-driven acquisition"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  CLI::App* run_cmd = app.add_subcommand("run", "run the acquisition simulation");
  add_common(run_cmd, run_opts);

  CommonOptions map_opts;
  CLI::App* map_cmd = app.add_subcommand("datamap", "train once and export the data map");
  add_common(map_cmd, map_opts);

  CommonOptions validate_opts;
  CLI::App* validate_cmd = app.add_subcommand("validate-config", "check a config file");
  add_common(validate_cmd, validate_opts);

  std::vector<std::string> aso_files;
  double aso_alpha = 0.05;
  int aso_bootstrap = 1000;
  std::uint64_t aso_seed = 90210;
  std::string bonferroni = "ordered";
  bool per_iteration = false;
  std::string aso_out = "out";
  CLI::App* aso_cmd = app.add_subcommand("aso", "pairwise stochastic-order grid from histories");
  aso_cmd->add_option("files", aso_files, "history.csv files")->required()->expected(-1);
  aso_cmd->add_option("--alpha", aso_alpha, "significance level");
  aso_cmd->add_option("--bootstrap", aso_bootstrap, "bootstrap iterations");
  aso_cmd->add_option("--rng-seed", aso_seed, "bootstrap RNG seed");
  aso_cmd->add_option("--bonferroni", bonferroni, "ordered | unordered | none");
  aso_cmd->add_flag("--per-iteration", per_iteration, "also emit per-iteration grids");
  aso_cmd->add_option("--out", aso_out, "output directory");

  std::vector<std::string> overlap_files;
  std::string overlap_out = "out";
  CLI::App* overlap_cmd = app.add_subcommand("overlap", "pairwise selected-instance overlap");
  overlap_cmd->add_option("files", overlap_files, "selected_ids.csv files")
      ->required()
      ->expected(-1);
  overlap_cmd->add_option("--out", overlap_out, "output directory");

  std::vector<std::string> plot_files;
  std::string plot_out = "out";
  CLI::App* plot_cmd = app.add_subcommand("plot", "accuracy curves from histories");
  plot_cmd->add_option("files", plot_files, "history.csv files")->required()->expected(-1);
  plot_cmd->add_option("--out", plot_out, "output directory");

  std::vector<std::string> argv_store = {"cal"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_opts);
    if (map_cmd->parsed()) return cmd_datamap(map_opts);
    if (validate_cmd->parsed()) {
      // Same checks as run, including the ones that need the data.
      ExperimentConfig cfg = load_config(validate_opts);
      validate_protocol(cfg, load_pool(cfg));
      std::cout << "config ok\n";
      return 0;
    }
    if (aso_cmd->parsed())
      return cmd_aso(aso_files, aso_alpha, aso_bootstrap, aso_seed, bonferroni, per_iteration,
                     aso_out);
    if (overlap_cmd->parsed()) return cmd_overlap(overlap_files, overlap_out);
    if (plot_cmd->parsed()) return cmd_plot(plot_files, plot_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace cal::cli
