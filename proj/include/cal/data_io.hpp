#pragma once

#include "cal/pool.hpp"
#include "cal/rng.hpp"
#include "cal/types.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace cal {

enum class DataFormat { Jsonl, Csv };

DataFormat parse_data_format(const std::string& name);

struct RawRecord {
  InstanceId id = -1;
  std::string text;
  std::string label;
};

/// Text dataset before featurization. Label vocabulary is the sorted set of
/// labels seen in the train split; test labels must be covered by it.
struct RawDataset {
  std::vector<RawRecord> train;
  std::vector<RawRecord> test;
  std::vector<std::string> labels;

  int label_index(const std::string& label) const;
  int class_count() const { return static_cast<int>(labels.size()); }
};

/// One file's records. JSONL rows carry keys `text`, `label` and an optional
/// integer `id`; CSV files start with the exact header `id,text,label`.
/// Missing ids become the line order, offset by `auto_id_base`.
std::vector<RawRecord> load_records(const std::string& path, DataFormat format,
                                    InstanceId auto_id_base = 0);

/// Assemble a dataset from loaded splits, building the vocabulary and
/// checking id uniqueness across both.
RawDataset make_dataset(std::vector<RawRecord> train, std::vector<RawRecord> test);

/// Load a train split (and optional test split) from disk.
RawDataset load_dataset(const std::string& train_path, const std::string& test_path,
                        DataFormat format);

/// Lowercase, split on whitespace, strip leading/trailing punctuation;
/// tokens that strip to nothing are dropped.
std::vector<std::string> tokenize(const std::string& text);

/// token -> fixed-width vector map in the word-vector text layout: one line
/// per token, values space-separated, optional `count dim` header line.
struct EmbeddingTable {
  std::unordered_map<std::string, Vector> vectors;
  Index dim = 0;

  const Vector* find(const std::string& token) const;
};

EmbeddingTable load_embeddings(const std::string& path);

/// Sum-pooled token embeddings over the first `max_len` tokens. Unknown
/// tokens contribute nothing; a text with no tokens maps to the zero vector
/// (warned once per call site via the returned counter).
struct FeaturizeReport {
  Matrix features;
  Index empty_texts = 0;
};

FeaturizeReport featurize(const std::vector<RawRecord>& records, const EmbeddingTable& emb,
                          Index max_len);

/// Signed hashed bag of words: each token hashes to (index, sign), the
/// profile is scaled by 1/sqrt(token count). Self-contained fallback when no
/// embedding table is available.
Matrix featurize_hashed(const std::vector<RawRecord>& records, Index dim, std::uint64_t seed);

/// Assemble an InstancePool from a featurized dataset.
InstancePool build_pool(const RawDataset& dataset, const Matrix& train_features,
                        const Matrix& test_features, const std::string& tag);

/// Balanced Gaussian blobs with isotropic noise `spread`, labels cycling
/// round-robin. With one blob per class, class c sits at sep * e_c (scaled
/// basis vector, so dim must be >= classes); with several, each class owns
/// `blobs_per_class` centers drawn uniformly from [-sep, sep]^dim and its
/// instances cycle through them. Deterministic in `seed`.
InstancePool make_gaussian_blobs(Index train_count, Index test_count, int classes, Index dim,
                                 double spread, double sep, std::uint64_t seed,
                                 int blobs_per_class = 1);

}  // namespace cal
