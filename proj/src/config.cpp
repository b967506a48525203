#include "cal/config.hpp"

#include "cal/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace cal {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected an integer, got '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    std::uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a non-negative integer, got '" + value + "'");
  }
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw ConfigError(key, "expected 0/1/true/false, got '" + value + "'");
}

std::string g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::ostringstream out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ',';
    out << values[i];
  }
  return out.str();
}

}  // namespace

void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "dataset_train") cfg.dataset_train = value;
  else if (key == "dataset_test") cfg.dataset_test = value;
  else if (key == "data_format") cfg.data_format = value;
  else if (key == "embeddings") cfg.embeddings = value;
  else if (key == "hash_dim") cfg.hash_dim = parse_int(key, value);
  else if (key == "hash_seed") cfg.hash_seed = parse_u64(key, value);
  else if (key == "max_len") cfg.max_len = parse_int(key, value);
  else if (key == "synthetic_classes") cfg.synthetic_classes = static_cast<int>(parse_int(key, value));
  else if (key == "synthetic_train") cfg.synthetic_train = parse_int(key, value);
  else if (key == "synthetic_test") cfg.synthetic_test = parse_int(key, value);
  else if (key == "synthetic_dim") cfg.synthetic_dim = parse_int(key, value);
  else if (key == "synthetic_spread") cfg.synthetic_spread = parse_real(key, value);
  else if (key == "synthetic_sep") cfg.synthetic_sep = parse_real(key, value);
  else if (key == "synthetic_blobs_per_class")
    cfg.synthetic_blobs_per_class = static_cast<int>(parse_int(key, value));
  else if (key == "synthetic_seed") cfg.synthetic_seed = parse_u64(key, value);
  else if (key == "strategy") cfg.strategies = split_list(value);
  else if (key == "seed_size") cfg.seed_size = parse_int(key, value);
  else if (key == "batch_size") cfg.batch_size = parse_int(key, value);
  else if (key == "iterations") cfg.iterations = static_cast<int>(parse_int(key, value));
  else if (key == "budget") cfg.budget = parse_int(key, value);
  else if (key == "seeds") {
    cfg.seeds.clear();
    for (const std::string& s : split_list(value)) cfg.seeds.push_back(parse_u64(key, s));
  }
  else if (key == "epochs") cfg.epochs = static_cast<int>(parse_int(key, value));
  else if (key == "train_batch") cfg.train_batch = parse_int(key, value);
  else if (key == "hidden_dim") cfg.hidden_dim = parse_int(key, value);
  else if (key == "hidden_layers") cfg.hidden_layers = static_cast<int>(parse_int(key, value));
  else if (key == "dropout") cfg.dropout = parse_real(key, value);
  else if (key == "learning_rate") cfg.learning_rate = parse_real(key, value);
  else if (key == "weight_decay") cfg.weight_decay = parse_real(key, value);
  else if (key == "mc_passes") cfg.params.mc_passes = static_cast<int>(parse_int(key, value));
  else if (key == "bald_information_gain") cfg.params.bald_information_gain = parse_bool(key, value);
  else if (key == "t_cor") cfg.params.t_cor = parse_real(key, value);
  else if (key == "disc_epochs") cfg.params.disc_epochs = static_cast<int>(parse_int(key, value));
  else if (key == "disc_hidden_dim") cfg.params.disc_hidden_dim = parse_int(key, value);
  else if (key == "disc_hidden_layers")
    cfg.params.disc_hidden_layers = static_cast<int>(parse_int(key, value));
  else if (key == "disc_dropout") cfg.params.disc_dropout = parse_real(key, value);
  else if (key == "disc_learning_rate") cfg.params.disc_learning_rate = parse_real(key, value);
  else if (key == "disc_weight_decay") cfg.params.disc_weight_decay = parse_real(key, value);
  else if (key == "disc_batch") {
    cfg.params.disc_batch_size = parse_int(key, value);
    cfg.disc_batch_set = true;
  }
  else if (key == "disc_subsample_unlabeled")
    cfg.params.disc_subsample_unlabeled = parse_int(key, value);
  else if (key == "aso_alpha") cfg.aso_alpha = parse_real(key, value);
  else if (key == "aso_bootstrap") cfg.aso_bootstrap = static_cast<int>(parse_int(key, value));
  else if (key == "aso_seed") cfg.aso_seed = parse_u64(key, value);
  else if (key == "bonferroni") cfg.bonferroni = value;
  else if (key == "export_scores") cfg.export_scores = parse_bool(key, value);
  else if (key == "map_epochs") cfg.map_epochs = static_cast<int>(parse_int(key, value));
  else if (key == "map_split") cfg.map_split = value;
  else throw ConfigError(key, "unknown key");
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open file: " + path);
  ExperimentConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config", "line " + std::to_string(line_no) + ": expected key=value");
    apply_config_entry(cfg, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  if (!cfg.disc_batch_set) cfg.params.disc_batch_size = cfg.train_batch;
  return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.dataset_train.empty())
    throw ConfigError("dataset_train", "required (a file path or 'synthetic')");
  if (cfg.dataset_train != "synthetic") {
    if (cfg.data_format != "jsonl" && cfg.data_format != "csv")
      throw ConfigError("data_format", "must be jsonl or csv");
  } else {
    if (cfg.synthetic_classes < 2) throw ConfigError("synthetic_classes", "must be >= 2");
    if (cfg.synthetic_dim < cfg.synthetic_classes)
      throw ConfigError("synthetic_dim", "must be >= synthetic_classes");
    if (cfg.synthetic_train < 1 || cfg.synthetic_test < 1)
      throw ConfigError("synthetic_train", "splits must be non-empty");
    if (!(cfg.synthetic_spread > 0.0)) throw ConfigError("synthetic_spread", "must be > 0");
    if (cfg.synthetic_blobs_per_class < 1)
      throw ConfigError("synthetic_blobs_per_class", "must be >= 1");
  }
  if (cfg.hash_dim < 2) throw ConfigError("hash_dim", "must be >= 2");
  if (cfg.max_len < 1) throw ConfigError("max_len", "must be >= 1");
  if (cfg.strategies.empty()) throw ConfigError("strategy", "at least one strategy required");
  {
    std::set<std::string> seen;
    for (const std::string& s : cfg.strategies) {
      try {
        parse_strategy(s);
      } catch (const std::exception& e) {
        throw ConfigError("strategy", e.what());
      }
      if (!seen.insert(s).second) throw ConfigError("strategy", "duplicate strategy: " + s);
    }
  }
  if (cfg.seed_size < 1) throw ConfigError("seed_size", "must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (cfg.iterations < 1) throw ConfigError("iterations", "must be >= 1");
  if (cfg.budget >= 0 &&
      cfg.budget != static_cast<long>(cfg.batch_size) * static_cast<long>(cfg.iterations))
    throw ConfigError("budget", "must equal batch_size * iterations");
  if (cfg.seeds.empty()) throw ConfigError("seeds", "at least one seed required");
  {
    std::set<std::uint64_t> seen(cfg.seeds.begin(), cfg.seeds.end());
    if (seen.size() != cfg.seeds.size()) throw ConfigError("seeds", "seeds must be distinct");
  }
  if (cfg.epochs < 1) throw ConfigError("epochs", "must be >= 1");
  if (cfg.train_batch < 1) throw ConfigError("train_batch", "must be >= 1");
  if (cfg.hidden_dim < 1) throw ConfigError("hidden_dim", "must be >= 1");
  if (cfg.hidden_layers < 1) throw ConfigError("hidden_layers", "must be >= 1");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw ConfigError("dropout", "must lie in [0, 1)");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate", "must be > 0");
  if (cfg.weight_decay < 0.0) throw ConfigError("weight_decay", "must be >= 0");
  if (cfg.params.mc_passes < 1) throw ConfigError("mc_passes", "must be >= 1");
  if (!(cfg.params.t_cor >= 0.0 && cfg.params.t_cor < 1.0))
    throw ConfigError("t_cor", "must lie in [0, 1)");
  if (cfg.params.disc_epochs < 1) throw ConfigError("disc_epochs", "must be >= 1");
  if (cfg.params.disc_hidden_dim < 1) throw ConfigError("disc_hidden_dim", "must be >= 1");
  if (cfg.params.disc_hidden_layers < 1) throw ConfigError("disc_hidden_layers", "must be >= 1");
  if (!(cfg.params.disc_dropout >= 0.0 && cfg.params.disc_dropout < 1.0))
    throw ConfigError("disc_dropout", "must lie in [0, 1)");
  if (!(cfg.params.disc_learning_rate > 0.0))
    throw ConfigError("disc_learning_rate", "must be > 0");
  if (cfg.params.disc_batch_size < 1) throw ConfigError("disc_batch", "must be >= 1");
  if (!(cfg.aso_alpha > 0.0 && cfg.aso_alpha <= 0.5))
    throw ConfigError("aso_alpha", "must lie in (0, 0.5]");
  if (cfg.aso_bootstrap < 100) throw ConfigError("aso_bootstrap", "must be >= 100");
  if (cfg.bonferroni != "ordered" && cfg.bonferroni != "unordered" && cfg.bonferroni != "none")
    throw ConfigError("bonferroni", "must be ordered, unordered or none");
  if (cfg.map_epochs < 1) throw ConfigError("map_epochs", "must be >= 1");
  if (cfg.map_split != "train" && cfg.map_split != "seed")
    throw ConfigError("map_split", "must be train or seed");
}

std::string canonical_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "aso_alpha=" << g9(cfg.aso_alpha) << "\n"
      << "aso_bootstrap=" << cfg.aso_bootstrap << "\n"
      << "aso_seed=" << cfg.aso_seed << "\n"
      << "bald_information_gain=" << (cfg.params.bald_information_gain ? 1 : 0) << "\n"
      << "batch_size=" << cfg.batch_size << "\n"
      << "bonferroni=" << cfg.bonferroni << "\n"
      << "budget=" << cfg.budget << "\n"
      << "data_format=" << cfg.data_format << "\n"
      << "dataset_test=" << cfg.dataset_test << "\n"
      << "dataset_train=" << cfg.dataset_train << "\n"
      << "disc_batch=" << cfg.params.disc_batch_size << "\n"
      << "disc_dropout=" << g9(cfg.params.disc_dropout) << "\n"
      << "disc_epochs=" << cfg.params.disc_epochs << "\n"
      << "disc_hidden_dim=" << cfg.params.disc_hidden_dim << "\n"
      << "disc_hidden_layers=" << cfg.params.disc_hidden_layers << "\n"
      << "disc_learning_rate=" << g9(cfg.params.disc_learning_rate) << "\n"
      << "disc_subsample_unlabeled=" << cfg.params.disc_subsample_unlabeled << "\n"
      << "disc_weight_decay=" << g9(cfg.params.disc_weight_decay) << "\n"
      << "dropout=" << g9(cfg.dropout) << "\n"
      << "embeddings=" << cfg.embeddings << "\n"
      << "epochs=" << cfg.epochs << "\n"
      << "export_scores=" << (cfg.export_scores ? 1 : 0) << "\n"
      << "hash_dim=" << cfg.hash_dim << "\n"
      << "hash_seed=" << cfg.hash_seed << "\n"
      << "hidden_dim=" << cfg.hidden_dim << "\n"
      << "hidden_layers=" << cfg.hidden_layers << "\n"
      << "iterations=" << cfg.iterations << "\n"
      << "learning_rate=" << g9(cfg.learning_rate) << "\n"
      << "map_epochs=" << cfg.map_epochs << "\n"
      << "map_split=" << cfg.map_split << "\n"
      << "max_len=" << cfg.max_len << "\n"
      << "mc_passes=" << cfg.params.mc_passes << "\n"
      << "seed_size=" << cfg.seed_size << "\n"
      << "seeds=" << join(cfg.seeds) << "\n"
      << "strategy=" << join(cfg.strategies) << "\n"
      << "synthetic_blobs_per_class=" << cfg.synthetic_blobs_per_class << "\n"
      << "synthetic_classes=" << cfg.synthetic_classes << "\n"
      << "synthetic_dim=" << cfg.synthetic_dim << "\n"
      << "synthetic_seed=" << cfg.synthetic_seed << "\n"
      << "synthetic_sep=" << g9(cfg.synthetic_sep) << "\n"
      << "synthetic_spread=" << g9(cfg.synthetic_spread) << "\n"
      << "synthetic_test=" << cfg.synthetic_test << "\n"
      << "synthetic_train=" << cfg.synthetic_train << "\n"
      << "t_cor=" << g9(cfg.params.t_cor) << "\n"
      << "train_batch=" << cfg.train_batch << "\n"
      << "weight_decay=" << g9(cfg.weight_decay) << "\n";
  return out.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_config(cfg))));
  return buf;
}

std::string provenance_line(const ExperimentConfig& cfg, Index train_size) {
  std::ostringstream out;
  out << "config=" << config_hash(cfg) << " seeds=" << join(cfg.seeds);
  if (train_size >= 0) out << " train_size=" << train_size;
  return out.str();
}

}  // namespace cal
