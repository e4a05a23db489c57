#include "esncv/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "esncv/errors.hpp"

namespace esncv {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string_view unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return trim(s);
}

bool parse_double(std::string_view s, double& out) {
  s = unquote(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == ',' && !quoted) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  out.push_back(line.substr(start));
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw load_error("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

/// Numeric CSV with exactly `columns` fields per row; returns columns x rows.
MatrixXd read_numeric_csv(const std::filesystem::path& path, std::size_t columns) {
  const auto lines = read_lines(path);
  std::vector<double> values;
  std::size_t first = 0;
  if (!lines.empty()) {
    const auto fields = split_fields(lines.front());
    double probe = 0.0;
    const bool numeric = std::all_of(fields.begin(), fields.end(),
                                     [&](std::string_view f) { return parse_double(f, probe); });
    if (!numeric) first = 1;
  }
  for (std::size_t i = first; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (trim(lines[i]).empty()) throw load_error(path.string() + ": blank row", line_no);
    const auto fields = split_fields(lines[i]);
    if (fields.size() != columns) {
      throw load_error(path.string() + ": expected " + std::to_string(columns) + " column(s), found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    for (std::string_view f : fields) {
      double v = 0.0;
      if (!parse_double(f, v)) {
        throw load_error(path.string() + ": cannot parse '" + std::string(trim(f)) + "' as a number", line_no);
      }
      values.push_back(v);
    }
  }
  if (values.empty()) throw load_error(path.string() + ": no data rows");
  const auto rows = static_cast<Index>(values.size() / columns);
  return Eigen::Map<const MatrixXd>(values.data(), static_cast<Index>(columns), rows);
}

}  // namespace

MatrixXd Normalization::apply(const MatrixXd& values) const {
  if (method == NormMethod::none) return values;
  return ((values.colwise() - offset).array().colwise() / scale.array()).matrix();
}

MatrixXd Normalization::invert(const MatrixXd& values) const {
  if (method == NormMethod::none) return values;
  return ((values.array().colwise() * scale.array()).matrix().colwise() + offset);
}

void SeriesDataset::validate() const {
  if (test_len < 0 || washout < 0) throw config_error(name + ": test_len and washout must be >= 0");
  if (length() <= test_len + washout) {
    throw config_error(name + ": series length " + std::to_string(length()) + " must exceed test_len + washout (" +
                       std::to_string(test_len + washout) + ")");
  }
}

SeriesDataset load_univariate_csv(const std::filesystem::path& path) {
  SeriesDataset d;
  d.name = path.stem().string();
  d.values = read_numeric_csv(path, 1);
  return d;
}

SeriesDataset load_paired_csv(const std::filesystem::path& path) {
  SeriesDataset d;
  d.name = path.stem().string();
  d.values = read_numeric_csv(path, 2);
  return d;
}

std::vector<MatrixXd> read_sequence_blocks(const std::filesystem::path& path, Index dims) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw load_error("cannot open " + path.string());
  std::vector<MatrixXd> blocks;
  std::vector<double> current;
  auto flush = [&] {
    if (current.empty()) return;
    const auto steps = static_cast<Index>(current.size()) / dims;
    blocks.emplace_back(Eigen::Map<const MatrixXd>(current.data(), dims, steps));
    current.clear();
  };
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) {
      flush();
      continue;
    }
    std::istringstream fields{std::string(trim(line))};
    Index count = 0;
    for (std::string tok; fields >> tok; ++count) {
      double v = 0.0;
      if (!parse_double(tok, v)) throw load_error(path.string() + ": cannot parse '" + tok + "'", line_no);
      current.push_back(v);
    }
    if (count != dims) {
      throw load_error(path.string() + ": expected " + std::to_string(dims) + " coefficients, found " +
                           std::to_string(count),
                       line_no);
    }
  }
  flush();
  return blocks;
}

SequenceDataset load_japanese_vowels(const std::filesystem::path& train_path,
                                     const std::filesystem::path& test_path) {
  SequenceDataset d;
  d.train_sequences = read_sequence_blocks(train_path, 12);
  d.test_sequences = read_sequence_blocks(test_path, 12);
  for (std::size_t i = 0; i < d.train_sequences.size(); ++i) {
    const int label = static_cast<int>(i / 30) + 1;
    if (label > d.n_classes) throw load_error(train_path.string() + ": more than 270 training utterances");
    d.train_labels.push_back(label);
  }
  int speaker = 0;
  int seen = 0;
  for (std::size_t i = 0; i < d.test_sequences.size(); ++i) {
    while (speaker < d.n_classes && seen == kVowelTestCounts[speaker]) {
      ++speaker;
      seen = 0;
    }
    if (speaker == d.n_classes) throw load_error(test_path.string() + ": more than 370 test utterances");
    d.test_labels.push_back(speaker + 1);
    ++seen;
  }
  return d;
}

VectorXd annotation_targets(Index length, const std::vector<Index>& events, Index fade) {
  if (fade < 1) throw contract_error("annotation_targets: fade must be >= 1");
  VectorXd y = VectorXd::Zero(length);
  for (Index e : events) {
    if (e < 0 || e >= length) throw contract_error("annotation_targets: event index out of range");
    for (Index d = -fade; d <= fade; ++d) {
      const Index n = e + d;
      if (n < 0 || n >= length) continue;
      const double v = 1.0 - static_cast<double>(std::abs(d)) / static_cast<double>(fade);
      y(n) = std::max(y(n), v);
    }
  }
  return y;
}

SeriesDataset normalize(const SeriesDataset& dataset, NormMethod method) {
  dataset.validate();
  SeriesDataset out = dataset;
  Normalization n;
  n.method = method;
  const Index dims = dataset.values.rows();
  n.offset = VectorXd::Zero(dims);
  n.scale = VectorXd::Ones(dims);
  const auto fit = dataset.values.leftCols(dataset.trainval_len());
  for (Index d = 0; d < dims; ++d) {
    switch (method) {
      case NormMethod::none:
        break;
      case NormMethod::zscore: {
        const double mean = fit.row(d).mean();
        const double sd = std::sqrt((fit.row(d).array() - mean).square().mean());
        if (!(sd > 0.0)) throw config_error(dataset.name + ": zero variance in dimension " + std::to_string(d));
        n.offset(d) = mean;
        n.scale(d) = sd;
        break;
      }
      case NormMethod::minmax: {
        const double lo = fit.row(d).minCoeff();
        const double hi = fit.row(d).maxCoeff();
        if (!(hi > lo)) throw config_error(dataset.name + ": constant dimension " + std::to_string(d));
        n.offset(d) = lo;
        n.scale(d) = hi - lo;
        break;
      }
    }
  }
  out.values = n.apply(dataset.values);
  out.normalization = std::move(n);
  return out;
}

NormMethod parse_norm_method(const std::string& s) {
  if (s == "none") return NormMethod::none;
  if (s == "zscore") return NormMethod::zscore;
  if (s == "minmax") return NormMethod::minmax;
  throw config_error("unknown normalization '" + s + "' (expected none, zscore or minmax)");
}

std::string to_string(NormMethod m) {
  switch (m) {
    case NormMethod::none: return "none";
    case NormMethod::zscore: return "zscore";
    case NormMethod::minmax: return "minmax";
  }
  return "?";
}

}  // namespace esncv
