#pragma once

// Deterministic text output: CSV tables with 12 significant digits and LF
// line endings, JSON documents with a fixed key order.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rydjc/errors.hpp"

namespace rydjc::io {

/// Named columns of equal length.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

  const std::vector<double>& column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return columns[i];
    throw ArgumentError("Table: no column named '" + std::string(name) + "'");
  }
};

inline void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  if (ec != std::errc{}) throw IoError("cannot format number");
  out.append(buf, ptr);
}

inline std::string format_csv(const Table& t) {
  if (t.header.size() != t.columns.size()) throw ArgumentError("format_csv: header and column counts differ");
  for (const auto& c : t.columns)
    if (c.size() != t.rows()) throw ArgumentError("format_csv: columns differ in length");
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + t.header[i];
  out += '\n';
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      if (c) out += ',';
      append_number(out, t.columns[c][r]);
    }
    out += '\n';
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write to " + path.string() + " failed");
}

inline void write_csv(const Table& t, const std::filesystem::path& path) { write_text(path, format_csv(t)); }

inline void write_json(const nlohmann::ordered_json& j, const std::filesystem::path& path) {
  write_text(path, j.dump(2) + "\n");
}

inline Table parse_csv(std::string_view text) {
  Table t;
  std::size_t pos = 0, line_no = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = nl + 1;
    ++line_no;
    return true;
  };
  auto split = [](std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) return cells;
      start = comma + 1;
    }
  };
  std::string_view line;
  if (!next_line(line) || line.empty()) throw IoError("CSV has no header");
  for (auto cell : split(line)) t.header.emplace_back(cell);
  t.columns.resize(t.header.size());
  while (next_line(line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size())
      throw IoError("CSV line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) + " fields");
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), v);
      if (ec != std::errc{} || ptr != cells[c].data() + cells[c].size())
        throw IoError("CSV line " + std::to_string(line_no) + ": cannot parse '" + std::string(cells[c]) + "'");
      t.columns[c].push_back(v);
    }
  }
  return t;
}

inline Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str());
}

}  // namespace rydjc::io
