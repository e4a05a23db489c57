#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "esncv/data.hpp"
#include "esncv/errors.hpp"

using namespace esncv;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("esncv_test_" + name);
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

}  // namespace

TEST_CASE("load_univariate_csv") {
  const SeriesDataset d = load_univariate_csv(write_temp("a.csv", "1\n2\n3\n"));
  REQUIRE(d.length() == 3);
  CHECK(d.values(0, 0) == 1.0);
  CHECK(d.values(0, 2) == 3.0);

  const SeriesDataset h = load_univariate_csv(write_temp("b.csv", "value\r\n1.5\r\n-2e-1\r\n"));
  REQUIRE(h.length() == 2);
  CHECK(h.values(0, 1) == doctest::Approx(-0.2));

  try {
    load_univariate_csv(write_temp("c.csv", "1\nabc\n3\n"));
    FAIL("expected a load error");
  } catch (const load_error& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_univariate_csv(write_temp("d.csv", "1\n\n3\n")), load_error);
  CHECK_THROWS_AS(load_univariate_csv(write_temp("e.csv", "1\nnan\n3\n")), load_error);
  CHECK_THROWS_AS(load_univariate_csv(fs::temp_directory_path() / "esncv_missing.csv"), load_error);
}

TEST_CASE("load_paired_csv") {
  const SeriesDataset d = load_paired_csv(write_temp("p.csv", "u,y\n0.5,1\n0.25,0\n"));
  REQUIRE(d.values.rows() == 2);
  CHECK(d.values(0, 1) == 0.25);
  CHECK(d.values(1, 0) == 1.0);
  CHECK_THROWS_AS(load_paired_csv(write_temp("q.csv", "1,2,3\n")), load_error);
}

TEST_CASE("read_sequence_blocks") {
  std::string text;
  for (int b = 0; b < 2; ++b) {
    for (int l = 0; l < 3; ++l) {
      for (int i = 0; i < 12; ++i) text += std::to_string(b * 100 + l * 10 + i) + " ";
      text += "\n";
    }
    text += "\n";
  }
  const auto blocks = read_sequence_blocks(write_temp("blocks.txt", text));
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[1].rows() == 12);
  CHECK(blocks[1].cols() == 3);
  CHECK(blocks[1](4, 2) == 124.0);
  CHECK_THROWS_AS(read_sequence_blocks(write_temp("bad.txt", "1 2 3\n\n")), load_error);
}

TEST_CASE("Japanese Vowels files") {
  const fs::path dir = fs::path(ESNCV_DATA_DIR) / "japanese_vowels";
  if (!fs::exists(dir / "ae.train")) {
    MESSAGE("dataset not present; run tools/prepare_datasets.py");
    return;
  }
  const SequenceDataset d = load_japanese_vowels(dir / "ae.train", dir / "ae.test");
  CHECK(d.train_sequences.size() == 270);
  CHECK(d.test_sequences.size() == 370);
  std::vector<int> train_counts(9, 0), test_counts(9, 0);
  for (int l : d.train_labels) ++train_counts[static_cast<std::size_t>(l - 1)];
  for (int l : d.test_labels) ++test_counts[static_cast<std::size_t>(l - 1)];
  for (int c : train_counts) CHECK(c == 30);
  for (int i = 0; i < 9; ++i) CHECK(test_counts[static_cast<std::size_t>(i)] == kVowelTestCounts[i]);
  for (const auto& s : d.train_sequences) {
    CHECK(s.rows() == 12);
    CHECK(s.cols() >= 1);
  }
}

TEST_CASE("Sunspots file length") {
  const fs::path p = fs::path(ESNCV_DATA_DIR) / "sunspots_monthly.csv";
  if (!fs::exists(p)) return;
  CHECK(load_univariate_csv(p).length() == 3177);
}

TEST_CASE("annotation_targets") {
  const VectorXd t = annotation_targets(30, {10});
  CHECK(t(10) == 1.0);
  CHECK(t(9) == doctest::Approx(0.8));
  CHECK(t(11) == doctest::Approx(0.8));
  CHECK(t(4) == 0.0);
  CHECK(t(16) == 0.0);
  CHECK(annotation_targets(20, {}).isZero());
  const VectorXd two = annotation_targets(30, {10, 13});
  for (Index i = 0; i < 30; ++i) {
    const double a = std::max(0.0, 1.0 - std::abs(static_cast<double>(i - 10)) / 5.0);
    const double b = std::max(0.0, 1.0 - std::abs(static_cast<double>(i - 13)) / 5.0);
    CHECK(two(i) == doctest::Approx(std::max(a, b)));
  }
}

TEST_CASE("normalize fits on trainval only") {
  SeriesDataset d;
  d.values = MatrixXd(1, 10);
  d.values << 1, 2, 3, 4, 5, 6, 7, 8, 50, 100;
  d.test_len = 2;
  const SeriesDataset none = normalize(d, NormMethod::none);
  CHECK(none.values == d.values);

  const SeriesDataset mm = normalize(d, NormMethod::minmax);
  CHECK(mm.values(0, 0) == doctest::Approx(0.0));
  CHECK(mm.values(0, 7) == doctest::Approx(1.0));
  CHECK(mm.values(0, 9) > 1.0);

  const SeriesDataset z = normalize(d, NormMethod::zscore);
  CHECK(z.values.leftCols(8).mean() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK((z.normalization.invert(z.values) - d.values).cwiseAbs().maxCoeff() <= 1e-12);

  // Changing the test values leaves the fitted parameters untouched.
  SeriesDataset e = d;
  e.values(0, 9) = -1e6;
  CHECK(normalize(e, NormMethod::zscore).normalization.offset == z.normalization.offset);

  SeriesDataset flat = d;
  flat.values.leftCols(8).setConstant(3.0);
  CHECK_THROWS(normalize(flat, NormMethod::zscore));
}

TEST_CASE("dataset validation") {
  SeriesDataset d;
  d.values = MatrixXd::Zero(1, 10);
  d.test_len = 5;
  d.washout = 5;
  CHECK_THROWS_AS(d.validate(), config_error);
  d.washout = 4;
  CHECK_NOTHROW(d.validate());
}
