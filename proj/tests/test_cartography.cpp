#include "cal/cartography.hpp"

#include "cal/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cal;

namespace {

DynamicsLog log_from(const Matrix& probs, const Matrix& correct) {
  std::vector<InstanceId> ids;
  for (Index i = 0; i < probs.rows(); ++i) ids.push_back(i);
  DynamicsLog log(ids);
  for (Index e = 0; e < probs.cols(); ++e) {
    std::vector<std::uint8_t> flags;
    for (Index i = 0; i < probs.rows(); ++i)
      flags.push_back(correct(i, e) > 0.5 ? 1 : 0);
    log.append_epoch(probs.col(e), flags);
  }
  return log;
}

}  // namespace

TEST_CASE("confidence examples") {
  Matrix probs(3, 3);
  probs << 0.7, 0.7, 0.7, 0.2, 0.4, 0.6, 0.1, 0.5, 0.9;
  DynamicsLog log = log_from(probs, Matrix::Zero(3, 3));
  Vector mu = compute_confidence(log);
  CHECK(mu(0) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(mu(1) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(mu(2) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("confidence of a single epoch is the value itself") {
  Matrix probs(1, 1);
  probs << 0.33;
  DynamicsLog log = log_from(probs, Matrix::Zero(1, 1));
  CHECK(compute_confidence(log)(0) == doctest::Approx(0.33).epsilon(1e-12));
  CHECK(compute_variability(log)(0) == 0.0);
}

TEST_CASE("variability is the population standard deviation") {
  Matrix probs(3, 3);
  probs << 0.5, 0.5, 0.5,   // constant -> 0
      0.2, 0.4, 0.6,        // sqrt(0.08 / 3)
      0.0, 1.0, 0.0;
  DynamicsLog log = log_from(probs, Matrix::Zero(3, 3));
  Vector sigma = compute_variability(log);
  CHECK(sigma(0) == 0.0);
  CHECK(sigma(1) == doctest::Approx(std::sqrt(0.08 / 3.0)).epsilon(1e-12));
  CHECK(sigma(1) == doctest::Approx(0.163299).epsilon(1e-5));
}

TEST_CASE("alternating 0/1 over an even epoch count hits the 0.5 maximum") {
  Matrix probs(1, 4);
  probs << 0.0, 1.0, 0.0, 1.0;
  DynamicsLog log = log_from(probs, Matrix::Zero(1, 4));
  CHECK(compute_variability(log)(0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("correctness counts epochs predicted right") {
  Matrix correct(3, 10);
  correct.setZero();
  correct.row(0).leftCols(3).setOnes();  // 3 of 10
  correct.row(2).setOnes();              // always
  DynamicsLog log = log_from(Matrix::Constant(3, 10, 0.5), correct);
  Vector phi = compute_correctness(log);
  CHECK(phi(0) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(phi(1) == 0.0);
  CHECK(phi(2) == 1.0);
}

TEST_CASE("data map matches a naive double loop on random matrices") {
  Rng rng = derive_rng(21, "cartography");
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 1 + static_cast<Index>(uniform_index(rng, 20));
    const Index epochs = 1 + static_cast<Index>(uniform_index(rng, 12));
    Matrix probs(n, epochs), correct(n, epochs);
    for (Index i = 0; i < n; ++i)
      for (Index e = 0; e < epochs; ++e) {
        probs(i, e) = uniform01(rng);
        correct(i, e) = uniform01(rng) < 0.5 ? 0.0 : 1.0;
      }
    DynamicsLog log = log_from(probs, correct);
    DataMapStats stats = compute_datamap(log);
    for (Index i = 0; i < n; ++i) {
      double mean = 0.0;
      for (Index e = 0; e < epochs; ++e) mean += probs(i, e);
      mean /= static_cast<double>(epochs);
      double sq = 0.0, frac = 0.0;
      for (Index e = 0; e < epochs; ++e) {
        sq += (probs(i, e) - mean) * (probs(i, e) - mean);
        frac += correct(i, e);
      }
      CHECK(std::abs(stats.confidence(i) - mean) < 1e-12);
      CHECK(std::abs(stats.variability(i) - std::sqrt(sq / static_cast<double>(epochs))) < 1e-12);
      CHECK(std::abs(stats.correctness(i) - frac / static_cast<double>(epochs)) < 1e-12);
    }
  }
}

TEST_CASE("variance identity: sigma^2 + mu^2 equals the mean square") {
  Rng rng = derive_rng(22, "cartography");
  Matrix probs(30, 7);
  for (Index i = 0; i < probs.rows(); ++i)
    for (Index e = 0; e < probs.cols(); ++e) probs(i, e) = uniform01(rng);
  DynamicsLog log = log_from(probs, Matrix::Zero(30, 7));
  Vector mu = compute_confidence(log);
  Vector sigma = compute_variability(log);
  for (Index i = 0; i < probs.rows(); ++i) {
    const double mean_square = probs.row(i).array().square().mean();
    CHECK(std::abs(sigma(i) * sigma(i) + mu(i) * mu(i) - mean_square) < 1e-12);
  }
}

TEST_CASE("cartography labels use a strict threshold") {
  DataMapStats stats;
  stats.ids = {0, 1, 2};
  stats.confidence = Vector::Zero(3);
  stats.variability = Vector::Zero(3);
  stats.correctness = Vector(3);
  stats.correctness << 0.2, 0.3, 0.0;

  CartographyLabels at_02 = assign_cartography_labels(stats, 0.2);
  CHECK(at_02.label[0] == 0);  // boundary value stays low-cor
  CHECK(at_02.label[1] == 1);
  CHECK(at_02.label[2] == 0);

  CartographyLabels at_00 = assign_cartography_labels(stats, 0.0);
  CHECK(at_00.label[2] == 0);  // zero correctness is the only low-cor class
  CHECK(at_00.label[0] == 1);

  CHECK_THROWS_AS(assign_cartography_labels(stats, 1.0), std::invalid_argument);

  // Exhaustive and exclusive: every instance gets exactly one of {0, 1}.
  for (std::uint8_t l : at_02.label) CHECK((l == 0 || l == 1));
}

TEST_CASE("datamap csv round trip") {
  Rng rng = derive_rng(23, "cartography");
  Matrix probs(5, 4), correct(5, 4);
  for (Index i = 0; i < 5; ++i)
    for (Index e = 0; e < 4; ++e) {
      probs(i, e) = uniform01(rng);
      correct(i, e) = uniform01(rng) < 0.5 ? 0.0 : 1.0;
    }
  DynamicsLog log = log_from(probs, correct);
  DataMapStats stats = compute_datamap(log);
  CartographyLabels labels = assign_cartography_labels(stats, 0.2);
  std::vector<int> gold = {2, 0, 1, 3, 1};

  const std::string path =
      (std::filesystem::temp_directory_path() / "cal_datamap_roundtrip.csv").string();
  write_datamap_csv(path, stats, labels, gold, "test fixture");

  std::vector<DataMapRow> rows = read_datamap_csv(path);
  REQUIRE(rows.size() == 5);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].id == stats.ids[i]);
    CHECK(rows[i].gold_label == gold[i]);
    CHECK(rows[i].cartography_label == labels.label[i]);
    // 9 significant digits survive the round trip.
    CHECK(std::abs(rows[i].confidence - stats.confidence(static_cast<Index>(i))) < 1e-9);
    CHECK(std::abs(rows[i].variability - stats.variability(static_cast<Index>(i))) < 1e-9);
    CHECK(std::abs(rows[i].correctness - stats.correctness(static_cast<Index>(i))) < 1e-9);
  }

  // Re-writing the parsed values changes nothing at the declared precision.
  DataMapStats reparsed = stats;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    reparsed.confidence(static_cast<Index>(i)) = rows[i].confidence;
    reparsed.variability(static_cast<Index>(i)) = rows[i].variability;
    reparsed.correctness(static_cast<Index>(i)) = rows[i].correctness;
  }
  std::ostringstream first, second;
  write_datamap_csv(first, stats, labels, gold, "test fixture");
  write_datamap_csv(second, reparsed, labels, gold, "test fixture");
  CHECK(first.str() == second.str());
  std::filesystem::remove(path);
}

TEST_CASE("empty stats write a header-only file") {
  DataMapStats stats;
  stats.confidence = Vector(0);
  stats.variability = Vector(0);
  stats.correctness = Vector(0);
  std::ostringstream out;
  write_datamap_csv(out, stats, CartographyLabels{}, {});
  CHECK(out.str() == "id,confidence,variability,correctness,gold_label,cartography_label\n");
}
