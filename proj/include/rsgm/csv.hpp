#pragma once

// Minimal table writer: comment header lines, one CSV row per record,
// shortest round-trip decimal for doubles, optional JSON mirror.

#include "rsgm/types.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

namespace rsgm {

using Cell = std::variant<double, std::int64_t, std::uint64_t, bool, std::string>;

/// Shortest decimal string that parses back to exactly `x`.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  if (res.ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, res.ptr);
}

inline std::string format_cell(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, double>) return format_double(v);
        else if constexpr (std::is_same_v<V, bool>) return v ? "true" : "false";
        else if constexpr (std::is_same_v<V, std::string>) return v;
        else return std::to_string(v);
      },
      c);
}

struct Table {
  std::vector<std::string> comments;  // written as "# <line>" before the header
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::string> trailer;   // written as "# <line>" after the rows

  void add_row(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw ContractError("row width does not match the column count");
    rows.push_back(std::move(row));
  }

  std::string to_csv() const {
    std::string out;
    for (const auto& c : comments) out += "# " + c + "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
    out += "\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_cell(row[i]);
      out += "\n";
    }
    for (const auto& c : trailer) out += "# " + c + "\n";
    return out;
  }

  /// Rows as a JSON array of objects keyed by column name.
  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& row : rows) {
      nlohmann::json obj = nlohmann::json::object();
      for (std::size_t i = 0; i < row.size(); ++i)
        std::visit([&](const auto& v) { obj[columns[i]] = v; }, row[i]);
      arr.push_back(std::move(obj));
    }
    return arr;
  }
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace rsgm
