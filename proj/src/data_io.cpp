#include "cal/data_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace cal {

namespace {

using nlohmann::json;

[[noreturn]] void line_error(const std::string& path, std::size_t line, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

// Minimal CSV field splitter: handles double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::vector<RawRecord> load_jsonl(const std::string& path, std::ifstream& in,
                                  InstanceId auto_id_base) {
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  InstanceId next_auto = auto_id_base;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      line_error(path, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!row.is_object()) line_error(path, line_no, "expected a JSON object");
    RawRecord rec;
    if (!row.contains("text") || !row["text"].is_string())
      line_error(path, line_no, "missing string field 'text'");
    rec.text = row["text"].get<std::string>();
    if (!row.contains("label")) line_error(path, line_no, "missing field 'label'");
    if (row["label"].is_string())
      rec.label = row["label"].get<std::string>();
    else if (row["label"].is_number_integer())
      rec.label = std::to_string(row["label"].get<long long>());
    else
      line_error(path, line_no, "field 'label' must be a string or integer");
    if (row.contains("id")) {
      if (!row["id"].is_number_integer())
        line_error(path, line_no, "field 'id' must be an integer");
      rec.id = row["id"].get<InstanceId>();
    } else {
      rec.id = next_auto++;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<RawRecord> load_csv(const std::string& path, std::ifstream& in,
                                InstanceId auto_id_base) {
  std::vector<RawRecord> records;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty CSV file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id,text,label")
    throw std::runtime_error(path + ": CSV header must be exactly 'id,text,label'");
  std::size_t line_no = 1;
  InstanceId next_auto = auto_id_base;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != 3) line_error(path, line_no, "expected 3 fields");
    RawRecord rec;
    if (fields[0].empty()) {
      rec.id = next_auto++;
    } else {
      try {
        rec.id = std::stoll(fields[0]);
      } catch (const std::exception&) {
        line_error(path, line_no, "id is not an integer: " + fields[0]);
      }
    }
    rec.text = std::move(fields[1]);
    rec.label = std::move(fields[2]);
    if (rec.label.empty()) line_error(path, line_no, "empty label");
    records.push_back(std::move(rec));
  }
  return records;
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

}  // namespace

DataFormat parse_data_format(const std::string& name) {
  if (name == "jsonl") return DataFormat::Jsonl;
  if (name == "csv") return DataFormat::Csv;
  throw std::invalid_argument("unknown data format: " + name);
}

int RawDataset::label_index(const std::string& label) const {
  auto it = std::lower_bound(labels.begin(), labels.end(), label);
  if (it == labels.end() || *it != label)
    throw std::runtime_error("unknown label: " + label);
  return static_cast<int>(it - labels.begin());
}

std::vector<RawRecord> load_records(const std::string& path, DataFormat format,
                                    InstanceId auto_id_base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  return format == DataFormat::Jsonl ? load_jsonl(path, in, auto_id_base)
                                     : load_csv(path, in, auto_id_base);
}

RawDataset make_dataset(std::vector<RawRecord> train, std::vector<RawRecord> test) {
  RawDataset ds;
  std::unordered_set<InstanceId> seen;
  for (const auto& rec : train)
    if (!seen.insert(rec.id).second)
      throw std::runtime_error("duplicate instance id: " + std::to_string(rec.id));
  for (const auto& rec : test)
    if (!seen.insert(rec.id).second)
      throw std::runtime_error("duplicate instance id across splits: " + std::to_string(rec.id));

  std::set<std::string> vocab;
  for (const auto& rec : train) vocab.insert(rec.label);
  ds.labels.assign(vocab.begin(), vocab.end());
  ds.train = std::move(train);
  ds.test = std::move(test);
  for (const auto& rec : ds.test) ds.label_index(rec.label);  // must be covered
  return ds;
}

RawDataset load_dataset(const std::string& train_path, const std::string& test_path,
                        DataFormat format) {
  std::vector<RawRecord> train = load_records(train_path, format, 0);
  std::vector<RawRecord> test;
  if (!test_path.empty())
    test = load_records(test_path, format, static_cast<InstanceId>(train.size()));
  return make_dataset(std::move(train), std::move(test));
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream ss(text);
  std::string word;
  while (ss >> word) {
    std::size_t begin = 0, end = word.size();
    while (begin < end && std::ispunct(static_cast<unsigned char>(word[begin]))) ++begin;
    while (end > begin && std::ispunct(static_cast<unsigned char>(word[end - 1]))) --end;
    if (begin == end) continue;
    std::string token = word.substr(begin, end - begin);
    for (char& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    tokens.push_back(std::move(token));
  }
  return tokens;
}

const Vector* EmbeddingTable::find(const std::string& token) const {
  auto it = vectors.find(token);
  return it == vectors.end() ? nullptr : &it->second;
}

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    if (first) {
      first = false;
      // Optional `count dim` header: exactly two integer fields.
      std::istringstream probe(line);
      long long count = 0, dim = 0;
      std::string rest;
      if (probe >> count >> dim && !(probe >> rest) && count > 0 && dim > 0) continue;
    }
    std::string token;
    ss >> token;
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    if (values.empty()) line_error(path, line_no, "no vector values for token " + token);
    if (table.dim == 0) table.dim = static_cast<Index>(values.size());
    if (static_cast<Index>(values.size()) != table.dim)
      line_error(path, line_no, "vector dimension mismatch");
    if (table.vectors.count(token)) line_error(path, line_no, "duplicate token " + token);
    table.vectors.emplace(token, Eigen::Map<Vector>(values.data(), table.dim));
  }
  if (table.vectors.empty()) throw std::runtime_error(path + ": no embeddings loaded");
  return table;
}

FeaturizeReport featurize(const std::vector<RawRecord>& records, const EmbeddingTable& emb,
                          Index max_len) {
  if (emb.dim < 1) throw std::invalid_argument("featurize: embedding table is empty");
  if (max_len < 1) throw std::invalid_argument("featurize: max_len must be >= 1");
  FeaturizeReport report;
  report.features = Matrix::Zero(static_cast<Index>(records.size()), emb.dim);
  for (std::size_t r = 0; r < records.size(); ++r) {
    std::vector<std::string> tokens = tokenize(records[r].text);
    if (tokens.empty()) {
      ++report.empty_texts;
      continue;
    }
    const std::size_t limit = std::min<std::size_t>(tokens.size(), static_cast<std::size_t>(max_len));
    for (std::size_t t = 0; t < limit; ++t)
      if (const Vector* vec = emb.find(tokens[t]))
        report.features.row(static_cast<Index>(r)) += vec->transpose();
  }
  return report;
}

Matrix featurize_hashed(const std::vector<RawRecord>& records, Index dim, std::uint64_t seed) {
  if (dim < 2) throw std::invalid_argument("featurize_hashed: dim must be >= 2");
  Matrix features = Matrix::Zero(static_cast<Index>(records.size()), dim);
  for (std::size_t r = 0; r < records.size(); ++r) {
    std::vector<std::string> tokens = tokenize(records[r].text);
    if (tokens.empty()) continue;
    for (const std::string& token : tokens) {
      const std::uint64_t h = mix64(fnv1a64(token) ^ seed);
      const Index idx = static_cast<Index>(h % static_cast<std::uint64_t>(dim));
      const double sign = (h >> 63) ? 1.0 : -1.0;
      features(static_cast<Index>(r), idx) += sign;
    }
    features.row(static_cast<Index>(r)) /= std::sqrt(static_cast<double>(tokens.size()));
  }
  return features;
}

InstancePool build_pool(const RawDataset& dataset, const Matrix& train_features,
                        const Matrix& test_features, const std::string& tag) {
  const Index n_train = static_cast<Index>(dataset.train.size());
  const Index n_test = static_cast<Index>(dataset.test.size());
  if (train_features.rows() != n_train || (n_test > 0 && test_features.rows() != n_test))
    throw std::invalid_argument("build_pool: feature row counts do not match the dataset");

  InstancePool pool;
  pool.tag = tag;
  pool.label_names = dataset.labels;
  pool.features.resize(n_train + n_test, train_features.cols());
  pool.features.topRows(n_train) = train_features;
  if (n_test > 0) pool.features.bottomRows(n_test) = test_features;
  pool.labels.reserve(static_cast<std::size_t>(n_train + n_test));
  pool.ids.reserve(static_cast<std::size_t>(n_train + n_test));
  for (const auto& rec : dataset.train) {
    pool.labels.push_back(dataset.label_index(rec.label));
    pool.ids.push_back(rec.id);
  }
  for (const auto& rec : dataset.test) {
    pool.labels.push_back(dataset.label_index(rec.label));
    pool.ids.push_back(rec.id);
  }
  pool.train_indices.resize(static_cast<std::size_t>(n_train));
  for (Index i = 0; i < n_train; ++i) pool.train_indices[static_cast<std::size_t>(i)] = i;
  pool.test_indices.resize(static_cast<std::size_t>(n_test));
  for (Index i = 0; i < n_test; ++i)
    pool.test_indices[static_cast<std::size_t>(i)] = n_train + i;
  return pool;
}

InstancePool make_gaussian_blobs(Index train_count, Index test_count, int classes, Index dim,
                                 double spread, double sep, std::uint64_t seed,
                                 int blobs_per_class) {
  if (classes < 2) throw std::invalid_argument("make_gaussian_blobs: classes must be >= 2");
  if (dim < classes)
    throw std::invalid_argument("make_gaussian_blobs: dim must be >= class count");
  if (train_count < classes || test_count < 1)
    throw std::invalid_argument("make_gaussian_blobs: too few instances");
  if (blobs_per_class < 1)
    throw std::invalid_argument("make_gaussian_blobs: blobs_per_class must be >= 1");

  Matrix centers(static_cast<Index>(classes) * blobs_per_class, dim);
  if (blobs_per_class == 1) {
    centers.setZero();
    for (int c = 0; c < classes; ++c) centers(c, c) = sep;
  } else {
    Rng center_rng = derive_rng(seed, "blob-centers");
    for (Index b = 0; b < centers.rows(); ++b)
      for (Index d = 0; d < dim; ++d) centers(b, d) = sep * (2.0 * uniform01(center_rng) - 1.0);
  }

  Rng rng = derive_rng(seed, "blobs");
  const Index total = train_count + test_count;
  InstancePool pool;
  pool.tag = "synthetic-blobs";
  pool.features.resize(total, dim);
  pool.labels.resize(static_cast<std::size_t>(total));
  pool.ids.resize(static_cast<std::size_t>(total));
  for (Index i = 0; i < total; ++i) {
    const int cls = static_cast<int>(i % classes);
    const int blob = static_cast<int>((i / classes) % blobs_per_class);
    const Index center = static_cast<Index>(cls) * blobs_per_class + blob;
    for (Index d = 0; d < dim; ++d)
      pool.features(i, d) = spread * standard_normal(rng) + centers(center, d);
    pool.labels[static_cast<std::size_t>(i)] = cls;
    pool.ids[static_cast<std::size_t>(i)] = i;
  }
  for (int c = 0; c < classes; ++c) pool.label_names.push_back("class" + std::to_string(c));
  pool.train_indices.resize(static_cast<std::size_t>(train_count));
  for (Index i = 0; i < train_count; ++i) pool.train_indices[static_cast<std::size_t>(i)] = i;
  pool.test_indices.resize(static_cast<std::size_t>(test_count));
  for (Index i = 0; i < test_count; ++i)
    pool.test_indices[static_cast<std::size_t>(i)] = train_count + i;
  return pool;
}

}  // namespace cal
