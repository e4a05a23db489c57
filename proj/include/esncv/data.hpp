#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace esncv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class NormMethod { none, zscore, minmax };

/// Per-row affine map x' = (x - offset) / scale, fitted on the trainval columns only.
struct Normalization {
  NormMethod method = NormMethod::none;
  VectorXd offset;
  VectorXd scale;

  MatrixXd apply(const MatrixXd& values) const;
  MatrixXd invert(const MatrixXd& values) const;
};

struct SeriesDataset {
  std::string name;
  MatrixXd values;  // n_dims x T
  Index test_len = 0;
  Index washout = 0;
  Normalization normalization;

  Index length() const { return values.cols(); }
  Index trainval_len() const { return values.cols() - test_len; }
  /// Throws config_error unless T > test_len + washout.
  void validate() const;
};

struct SequenceDataset {
  std::vector<MatrixXd> train_sequences;  // 12 x L_s each
  std::vector<int> train_labels;
  std::vector<MatrixXd> test_sequences;
  std::vector<int> test_labels;
  int n_classes = 9;
};

/// One numeric value per row; a non-numeric first row is taken as a header.
SeriesDataset load_univariate_csv(const std::filesystem::path& path);

/// Two numeric columns: input, target. values is 2 x T.
SeriesDataset load_paired_csv(const std::filesystem::path& path);

/// Utterance blocks of `dims` whitespace-separated reals per line, blank-line terminated.
std::vector<MatrixXd> read_sequence_blocks(const std::filesystem::path& path, Index dims = 12);

/// The UCI Japanese Vowels files (ae.train / ae.test). Speakers follow block order:
/// 30 training blocks per speaker, and the benchmark's fixed test counts per speaker.
SequenceDataset load_japanese_vowels(const std::filesystem::path& train_path,
                                     const std::filesystem::path& test_path);

/// Number of test utterances per speaker in the Japanese Vowels benchmark.
inline constexpr int kVowelTestCounts[9] = {31, 35, 88, 44, 29, 24, 40, 50, 29};

/// Indicator target: 1 at each event, fading linearly to 0 `fade` steps away.
/// Overlapping ramps are merged by pointwise maximum.
VectorXd annotation_targets(Index length, const std::vector<Index>& events, Index fade = 5);

/// Fits the normalization on the first trainval_len() columns and applies it to all of them.
SeriesDataset normalize(const SeriesDataset& dataset, NormMethod method);

NormMethod parse_norm_method(const std::string& s);
std::string to_string(NormMethod m);

}  // namespace esncv
