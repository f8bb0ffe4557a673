#include "fewshot/features.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

namespace fewshot {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

[[noreturn]] void input_error(const std::string& source, std::size_t line, const std::string& what) {
  std::ostringstream msg;
  msg << source << ":" << line << ": " << what;
  throw Error(ErrorCode::InputData, msg.str());
}

}  // namespace

Matrix FeatureTable::select(std::string_view label, bool invert) const {
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if ((labels[i] == label) != invert) keep.push_back(static_cast<Eigen::Index>(i));
  Matrix out(static_cast<Eigen::Index>(keep.size()), rows.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows.row(keep[i]);
  return out;
}

std::size_t FeatureTable::count(std::string_view label) const {
  std::size_t n = 0;
  for (const auto& l : labels) n += l == label;
  return n;
}

FeatureTable parse_feature_csv(std::string_view text, std::string source) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

  std::vector<std::pair<std::size_t, std::string_view>> lines;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    if (!trim(line).empty()) lines.emplace_back(line_no, line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  if (lines.empty()) input_error(source, 1, "missing header row");

  const auto header = split_commas(lines.front().second);
  if (header.size() < 2 || header.back() != "label")
    input_error(source, lines.front().first, "header must list feature columns followed by \"label\"");

  FeatureTable table;
  table.source = std::move(source);
  table.checksum = fnv1a64_hex(text);
  for (std::size_t i = 0; i + 1 < header.size(); ++i) table.columns.emplace_back(header[i]);

  const std::size_t width = header.size() - 1;
  const std::size_t n = lines.size() - 1;
  if (n == 0) input_error(table.source, lines.front().first, "empty body");

  table.rows.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
  table.labels.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto [ln, line] = lines[r + 1];
    const auto cells = split_commas(line);
    if (cells.size() != header.size()) {
      std::ostringstream msg;
      msg << "expected " << header.size() << " columns, found " << cells.size();
      input_error(table.source, ln, msg.str());
    }
    for (std::size_t c = 0; c < width; ++c) {
      const auto cell = cells[c];
      double value = 0.0;
      const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (cell.empty() || ec != std::errc() || end != cell.data() + cell.size() || !std::isfinite(value)) {
        std::ostringstream msg;
        msg << "column " << (c + 1) << " (" << header[c] << "): not a finite number: \"" << cell << "\"";
        input_error(table.source, ln, msg.str());
      }
      table.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = value;
    }
    if (cells.back().empty()) input_error(table.source, ln, "empty label");
    table.labels.emplace_back(cells.back());
  }
  return table;
}

FeatureTable ingest_feature_csv(const std::filesystem::path& path) {
  return parse_feature_csv(read_file(path), path.string());
}

std::string feature_csv(const FeatureTable& table) {
  std::string out;
  for (const auto& name : table.columns) out += name + ",";
  out += "label\n";
  char buf[40];
  for (Eigen::Index r = 0; r < table.rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.rows.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g,", table.rows(r, c));
      out += buf;
    }
    out += table.labels[static_cast<std::size_t>(r)];
    out += '\n';
  }
  return out;
}

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::Io, "cannot move report into place: " + path.string());
  }
}

}  // namespace fewshot
