#pragma once

#include "cal/acquisition.hpp"
#include "cal/types.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cal {

struct ConfigError : std::runtime_error {
  std::string key;
  ConfigError(std::string key_name, const std::string& what)
      : std::runtime_error("config key '" + key_name + "': " + what), key(std::move(key_name)) {}
};

/// Everything a run needs, parsed from a flat key=value file. Defaults follow
/// the AGNews-style protocol; see README for the full key reference.
struct ExperimentConfig {
  // data
  std::string dataset_train;        // file path, or "synthetic" for blobs
  std::string dataset_test;
  std::string data_format = "jsonl";
  std::string embeddings;           // word-vector text file; empty = hashed features
  Index hash_dim = 300;
  std::uint64_t hash_seed = 13;
  Index max_len = 200;
  int synthetic_classes = 4;
  Index synthetic_train = 2000;
  Index synthetic_test = 1000;
  Index synthetic_dim = 32;
  double synthetic_spread = 1.0;
  double synthetic_sep = 3.0;
  int synthetic_blobs_per_class = 1;
  std::uint64_t synthetic_seed = 7;

  // acquisition protocol
  std::vector<std::string> strategies = {"cal"};
  Index seed_size = 1000;
  Index batch_size = 50;            // k
  int iterations = 30;              // n
  long budget = -1;                 // optional; must equal k * n when given
  std::vector<std::uint64_t> seeds = {398048, 127003, 259479, 869323, 570852};

  // main classifier
  int epochs = 30;
  Index train_batch = 64;
  Index hidden_dim = 300;
  int hidden_layers = 3;
  double dropout = 0.3;
  double learning_rate = 1e-4;
  double weight_decay = 0.01;

  // strategy-specific knobs
  StrategyParams params;
  bool disc_batch_set = false;      // disc_batch_size falls back to train_batch

  // analysis
  double aso_alpha = 0.05;
  int aso_bootstrap = 1000;
  std::uint64_t aso_seed = 90210;
  std::string bonferroni = "ordered";
  bool export_scores = false;

  // datamap subcommand
  int map_epochs = 10;
  std::string map_split = "train";  // train | seed
};

/// Apply one `key=value` assignment; unknown keys and malformed values throw
/// ConfigError naming the key.
void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Parse a flat key=value file ('#' comments and blank lines allowed).
ExperimentConfig parse_config_file(const std::string& path);

/// Structural validation shared by every subcommand (the single validation
/// code path behind validate-config and run).
void validate_config(const ExperimentConfig& cfg);

/// Canonical serialization: every key in fixed order, normalized values.
std::string canonical_config(const ExperimentConfig& cfg);

/// FNV-1a hash of the canonical serialization, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

std::string provenance_line(const ExperimentConfig& cfg, Index train_size = -1);

}  // namespace cal
