#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <json.hpp>

#include "coaplab/capture.hpp"
#include "coaplab/dataset.hpp"
#include "coaplab/matrix.hpp"
#include "coaplab/windows.hpp"

namespace coaplab {

enum class ColumnKind { Categorical, Numeric };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::string description;
};

inline constexpr std::size_t kSchemaWidth = 42;
inline constexpr std::size_t kSelectedWidth = 16;

/// Ethernet (3), IPv4 (12), TCP (10), UDP (4) and CoAP-derived (13) columns.
class FeatureSchema {
 public:
  static const FeatureSchema& canonical();
  explicit FeatureSchema(std::vector<Column> columns);

  std::size_t size() const { return columns_.size(); }
  const Column& operator[](std::size_t i) const { return columns_[i]; }
  std::span<const Column> columns() const { return columns_; }
  /// Throws DataError for an unknown name.
  std::size_t index_of(std::string_view name) const;

 private:
  std::vector<Column> columns_;
};

struct Absent {
  bool operator==(const Absent&) const = default;
};
using Cell = std::variant<Absent, std::string, double>;

struct RawFeatureRow {
  std::vector<Cell> values;
  bool operator==(const RawFeatureRow&) const = default;
};

RawFeatureRow extract_features(const PacketRecord& p, const FeatureSchema& schema = FeatureSchema::canonical());

/// Column subset of a fixed-width schema.
class FeatureMask {
 public:
  FeatureMask() = default;
  explicit FeatureMask(std::size_t width, std::uint64_t bits = 0);
  static FeatureMask all(std::size_t width);
  static FeatureMask from_indices(std::size_t width, std::span<const std::size_t> indices);

  std::size_t width() const { return width_; }
  std::uint64_t bits() const { return bits_; }
  bool test(std::size_t i) const { return (bits_ >> i) & 1U; }
  void set(std::size_t i, bool on = true);
  std::size_t popcount() const;
  std::vector<std::size_t> indices() const;

  auto operator<=>(const FeatureMask&) const = default;

 private:
  std::size_t width_ = 0;
  std::uint64_t bits_ = 0;
};

/// The 16 default columns; the sixteenth (udp.dport) is a configuration choice.
FeatureMask default_mask(const FeatureSchema& schema = FeatureSchema::canonical());
std::vector<std::string> mask_column_names(const FeatureMask& mask,
                                           const FeatureSchema& schema = FeatureSchema::canonical());
FeatureMask mask_from_names(std::span<const std::string> names,
                            const FeatureSchema& schema = FeatureSchema::canonical());

void check_mask_width(const FeatureMask& mask, std::size_t row_width);

template <typename T>
std::vector<T> project_selected(std::span<const T> row, const FeatureMask& mask) {
  check_mask_width(mask, row.size());
  std::vector<T> out;
  out.reserve(mask.popcount());
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (mask.test(i)) out.push_back(row[i]);
  }
  return out;
}

RawFeatureRow project_selected(const RawFeatureRow& row, const FeatureMask& mask);

enum class VocabMode { Grow, Frozen };

/// Per categorical column, distinct values in first-seen order. Token = 1 + position; 0 = absent/unseen.
class TokenVocabulary {
 public:
  TokenVocabulary() = default;
  explicit TokenVocabulary(const FeatureSchema& schema);

  std::size_t width() const { return kinds_.size(); }
  bool categorical(std::size_t column) const { return kinds_[column] == ColumnKind::Categorical; }
  /// Grow appends unseen values; Frozen maps them to 0.
  double token(std::size_t column, const std::string& value, VocabMode mode);
  /// nullptr for token 0 or an unknown token.
  const std::string* value(std::size_t column, std::size_t token) const;
  std::span<const std::string> values(std::size_t column) const { return values_[column]; }

  nlohmann::json to_json() const;
  static TokenVocabulary from_json(const nlohmann::json& doc);

  bool operator==(const TokenVocabulary& other) const { return kinds_ == other.kinds_ && values_ == other.values_; }

 private:
  std::vector<ColumnKind> kinds_;
  std::vector<std::vector<std::string>> values_;
  std::vector<std::unordered_map<std::string, std::size_t>> lookup_;
};

/// Categorical cells become tokens, numeric cells pass through, absent cells become 0.
std::vector<std::vector<double>> tokenize(std::span<const RawFeatureRow> rows, TokenVocabulary& vocab,
                                          VocabMode mode = VocabMode::Grow);
std::vector<double> tokenize_row(const RawFeatureRow& row, TokenVocabulary& vocab, VocabMode mode = VocabMode::Grow);

/// Inverse lookup: tokens back to strings, 0 back to Absent, numeric values unchanged.
std::vector<RawFeatureRow> detokenize(std::span<const std::vector<double>> rows, const TokenVocabulary& vocab);

/// Ragged windows (rows_j x width) with aligned labels.
struct WindowTensor {
  std::vector<Matrix> windows;
  std::vector<int> labels;

  std::size_t max_rows() const;
  bool uniform() const;
};

/// Appends copies of pad_row until every window has max_rows() rows.
WindowTensor pad_windows(WindowTensor t, std::span<const double> pad_row);
/// Pads to an explicit row count (at least max_rows()).
WindowTensor pad_windows_to(WindowTensor t, std::span<const double> pad_row, std::size_t rows);

/// A / ||A||_F; throws NormalizationError for an all-zero matrix.
Matrix frobenius_normalize(const Matrix& a);
double frobenius_norm(const Matrix& a);

std::vector<double> flatten_window(const Matrix& w);
Matrix unflatten_window(std::span<const double> flat, std::size_t cols);

/// Extracts, tokenizes (full schema) and projects every packet of every window.
WindowTensor window_features(std::span<const LabeledWindow> windows, TokenVocabulary& vocab, VocabMode mode,
                             const FeatureMask& mask = default_mask());

FeatureDataset flatten_tensor(const WindowTensor& t);
SequenceDataset as_sequences(const WindowTensor& t);

/// Binary layout: three little-endian uint64 {window_count, rows, cols} then float64 values row-major.
void write_tensor(const WindowTensor& t, const std::filesystem::path& path);
WindowTensor read_tensor(const std::filesystem::path& path, std::vector<int> labels = {});

}  // namespace coaplab
