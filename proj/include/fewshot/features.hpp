#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fewshot/common.hpp"

namespace fewshot {

/// Feature vectors with one class label per row, as read from CSV.
struct FeatureTable {
  Matrix rows;
  std::vector<std::string> labels;
  std::vector<std::string> columns;  ///< feature column names, without "label"
  std::string source;
  std::string checksum;  ///< FNV-1a 64 of the raw file bytes, hex

  Eigen::Index size() const { return rows.rows(); }
  Eigen::Index width() const { return rows.cols(); }

  /// Rows whose label equals (or, with `invert`, differs from) `label`.
  Matrix select(std::string_view label, bool invert = false) const;
  std::size_t count(std::string_view label) const;
};

/// Parses CSV text: header row, numeric feature columns, trailing "label"
/// column. Errors carry ErrorCode::InputData with line and column numbers.
FeatureTable parse_feature_csv(std::string_view text, std::string source = "<memory>");

FeatureTable ingest_feature_csv(const std::filesystem::path& path);

/// Writes in the same format with 17 significant digits per value.
std::string feature_csv(const FeatureTable& table);

std::string fnv1a64_hex(std::string_view bytes);

/// Reads a whole file; Error(Io) when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace fewshot
