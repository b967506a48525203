#include "cal/data_io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

using namespace cal;

namespace {

namespace fs = std::filesystem;

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& name, const std::string& contents)
      : path(fs::temp_directory_path() / name) {
    std::ofstream out(path);
    out << contents;
  }
  ~TempFile() { fs::remove(path); }
  std::string str() const { return path.string(); }
};

double cosine(const Vector& a, const Vector& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

}  // namespace

TEST_CASE("jsonl records load in order with line-derived ids") {
  TempFile file("cal_io_a.jsonl",
                "{\"text\": \"one two\", \"label\": \"x\"}\n"
                "{\"text\": \"three\", \"label\": \"y\"}\n"
                "{\"text\": \"four\", \"label\": \"x\"}\n");
  std::vector<RawRecord> records = load_records(file.str(), DataFormat::Jsonl);
  REQUIRE(records.size() == 3);
  CHECK(records[0].id == 0);
  CHECK(records[2].id == 2);
  CHECK(records[1].text == "three");
  CHECK(records[1].label == "y");
}

TEST_CASE("jsonl parse errors carry the line number") {
  TempFile file("cal_io_b.jsonl",
                "{\"text\": \"ok\", \"label\": \"x\"}\n"
                "{not json}\n");
  CHECK_THROWS_WITH_AS(load_records(file.str(), DataFormat::Jsonl), doctest::Contains(":2:"),
                       std::runtime_error);

  TempFile missing("cal_io_c.jsonl", "{\"text\": \"ok\"}\n");
  CHECK_THROWS_WITH_AS(load_records(missing.str(), DataFormat::Jsonl),
                       doctest::Contains("label"), std::runtime_error);
}

TEST_CASE("duplicate explicit ids are rejected") {
  TempFile file("cal_io_d.jsonl",
                "{\"id\": 7, \"text\": \"a\", \"label\": \"x\"}\n"
                "{\"id\": 7, \"text\": \"b\", \"label\": \"x\"}\n");
  std::vector<RawRecord> records = load_records(file.str(), DataFormat::Jsonl);
  CHECK_THROWS_WITH_AS(make_dataset(std::move(records), {}), doctest::Contains("duplicate"),
                       std::runtime_error);
}

TEST_CASE("vocabulary is sorted and class counts follow the file") {
  TempFile agnews_like("cal_io_e.csv",
                       "id,text,label\n"
                       "0,alpha,world\n"
                       "1,beta,sports\n"
                       "2,gamma,business\n"
                       "3,delta,sci_tech\n"
                       "4,epsilon,world\n");
  RawDataset four = load_dataset(agnews_like.str(), "", DataFormat::Csv);
  CHECK(four.class_count() == 4);

  TempFile trec_like("cal_io_f.csv",
                     "id,text,label\n"
                     "0,q,ABBR\n1,q,DESC\n2,q,ENTY\n3,q,HUM\n4,q,LOC\n5,q,NUM\n");
  RawDataset six = load_dataset(trec_like.str(), "", DataFormat::Csv);
  CHECK(six.class_count() == 6);
  CHECK(six.labels.front() == "ABBR");  // sorted vocabulary
}

TEST_CASE("test labels missing from the train vocabulary are an error") {
  TempFile train("cal_io_g.csv", "id,text,label\n0,a,x\n1,b,y\n");
  TempFile test("cal_io_h.csv", "id,text,label\n10,c,z\n");
  CHECK_THROWS_WITH_AS(load_dataset(train.str(), test.str(), DataFormat::Csv),
                       doctest::Contains("unknown label"), std::runtime_error);
}

TEST_CASE("csv requires the exact header") {
  TempFile file("cal_io_i.csv", "text,label\nhello,x\n");
  CHECK_THROWS_AS(load_records(file.str(), DataFormat::Csv), std::runtime_error);
}

TEST_CASE("tokenizer lowercases and strips boundary punctuation") {
  std::vector<std::string> tokens = tokenize("Hello, World!  (really) -- yes...");
  REQUIRE(tokens.size() == 4);
  CHECK(tokens[0] == "hello");
  CHECK(tokens[1] == "world");
  CHECK(tokens[2] == "really");
  CHECK(tokens[3] == "yes");
  CHECK(tokenize("?!? ...").empty());
  CHECK(tokenize("don't").size() == 1);  // interior punctuation survives
}

TEST_CASE("embedding table parses the optional header and checks dimensions") {
  TempFile file("cal_io_j.vec",
                "3 4\n"
                "alpha 1 0 0 0\n"
                "beta 0 1 0 0\n"
                "gamma 0.5 0.5 0 1\n");
  EmbeddingTable table = load_embeddings(file.str());
  CHECK(table.dim == 4);
  CHECK(table.vectors.size() == 3);
  REQUIRE(table.find("beta") != nullptr);
  CHECK((*table.find("beta"))(1) == 1.0);
  CHECK(table.find("unknown") == nullptr);

  TempFile ragged("cal_io_k.vec", "alpha 1 0\nbeta 1\n");
  CHECK_THROWS_WITH_AS(load_embeddings(ragged.str()), doctest::Contains("dimension"),
                       std::runtime_error);

  TempFile dup("cal_io_l.vec", "alpha 1 0\nalpha 0 1\n");
  CHECK_THROWS_WITH_AS(load_embeddings(dup.str()), doctest::Contains("duplicate"),
                       std::runtime_error);
}

TEST_CASE("sum pooling adds exactly the token vectors") {
  TempFile file("cal_io_m.vec",
                "red 1 2 3\n"
                "blue 10 20 30\n");
  EmbeddingTable emb = load_embeddings(file.str());

  std::vector<RawRecord> records = {{0, "red", "x"},
                                    {1, "red blue", "x"},
                                    {2, "red unknowntoken", "x"},
                                    {3, "", "x"}};
  FeaturizeReport report = featurize(records, emb, 200);
  CHECK(report.features.row(0) == Eigen::RowVector3d(1, 2, 3));
  CHECK(report.features.row(1) == Eigen::RowVector3d(11, 22, 33));
  CHECK(report.features.row(2) == Eigen::RowVector3d(1, 2, 3));  // OOV adds zero
  CHECK(report.features.row(3).norm() == 0.0);
  CHECK(report.empty_texts == 1);
}

TEST_CASE("truncation keeps only the first max_len tokens") {
  TempFile file("cal_io_n.vec", "a 1 0\nb 0 1\n");
  EmbeddingTable emb = load_embeddings(file.str());
  std::vector<RawRecord> full = {{0, "a a b b b", "x"}};
  std::vector<RawRecord> head = {{0, "a a", "x"}};
  Matrix truncated = featurize(full, emb, 2).features;
  Matrix reference = featurize(head, emb, 2).features;
  CHECK(truncated == reference);

  // Within the window, token order does not matter.
  std::vector<RawRecord> left = {{0, "a b", "x"}};
  std::vector<RawRecord> right = {{0, "b a", "x"}};
  CHECK(featurize(left, emb, 10).features == featurize(right, emb, 10).features);
}

TEST_CASE("hashed featurizer is deterministic and separates unrelated texts") {
  std::vector<RawRecord> records = {
      {0, "the quick brown fox jumps over the lazy dog", "x"},
      {1, "the quick brown fox jumps over a lazy dog", "x"},
      {2, "completely different words about finance markets", "x"},
      {3, "", "x"}};
  Matrix a = featurize_hashed(records, 64, 13);
  Matrix b = featurize_hashed(records, 64, 13);
  CHECK(a == b);
  CHECK(a.row(3).norm() == 0.0);

  const double near = cosine(a.row(0).transpose(), a.row(1).transpose());
  const double far = cosine(a.row(0).transpose(), a.row(2).transpose());
  CHECK(near > far);

  CHECK_THROWS_AS(featurize_hashed(records, 1, 13), std::invalid_argument);
}

TEST_CASE("gaussian blobs are balanced, deterministic and split cleanly") {
  InstancePool pool = make_gaussian_blobs(100, 40, 4, 8, 1.0, 3.0, 123);
  CHECK(pool.size() == 140);
  CHECK(pool.feature_dim() == 8);
  CHECK(pool.class_count() == 4);
  CHECK(pool.train_indices.size() == 100);
  CHECK(pool.test_indices.size() == 40);

  std::map<int, int> counts;
  for (Index row : pool.train_indices) counts[pool.labels[static_cast<std::size_t>(row)]] += 1;
  CHECK(counts[0] == 25);
  CHECK(counts[3] == 25);

  InstancePool again = make_gaussian_blobs(100, 40, 4, 8, 1.0, 3.0, 123);
  CHECK(pool.features == again.features);

  CHECK_THROWS_AS(make_gaussian_blobs(100, 40, 4, 3, 1.0, 3.0, 1), std::invalid_argument);
}
