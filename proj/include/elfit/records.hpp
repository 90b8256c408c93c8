#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace elfit {

inline constexpr int kSchemaVersion = 1;

/// Empty cells serialize as an empty CSV field / JSON null.
using Cell = std::variant<std::monostate, std::int64_t, double, std::string>;

/// Rows of one experiment run. Every file starts with the fixed prefix
/// columns schema_version, library_version, command, config, row, followed by
/// the command's metric columns.
class RecordTable {
 public:
  RecordTable(std::string command, std::vector<std::pair<std::string, std::string>> config,
              std::vector<std::string> columns);

  /// `row_kind` is "trial" or "summary"; cells follow the metric columns.
  void add_row(std::string row_kind, std::vector<Cell> cells);
  void set_wall_time_ms(std::optional<long long> ms) { wall_time_ms_ = ms; }

  const std::vector<std::string>& columns() const { return columns_; }
  std::vector<std::string> header() const;
  std::size_t size() const { return rows_.size(); }

  std::string to_csv() const;
  std::string to_json() const;

 private:
  std::string command_;
  std::vector<std::pair<std::string, std::string>> config_;
  std::vector<std::string> columns_;
  std::vector<std::pair<std::string, std::vector<Cell>>> rows_;
  std::optional<long long> wall_time_ms_;
};

/// Shortest round-trip representation with at most 17 significant digits.
std::string format_real(double v);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partial file. Throws std::runtime_error on I/O failure.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace elfit
