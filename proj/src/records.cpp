#include "elfit/records.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <system_error>

#include <unistd.h>

#include <json.hpp>

#include "elfit/config.hpp"

namespace elfit {

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

RecordTable::RecordTable(std::string command, std::vector<std::pair<std::string, std::string>> config,
                         std::vector<std::string> columns)
    : command_(std::move(command)), config_(std::move(config)), columns_(std::move(columns)) {}

void RecordTable::add_row(std::string row_kind, std::vector<Cell> cells) {
  if (cells.size() != columns_.size()) throw std::invalid_argument("RecordTable: row width does not match columns");
  rows_.emplace_back(std::move(row_kind), std::move(cells));
}

std::vector<std::string> RecordTable::header() const {
  std::vector<std::string> h = {"schema_version", "library_version", "command", "config", "row"};
  h.insert(h.end(), columns_.begin(), columns_.end());
  h.push_back("wall_time_ms");
  return h;
}

namespace {

std::string cell_text(const Cell& c) {
  struct {
    std::string operator()(std::monostate) const { return ""; }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(double v) const { return format_real(v); }
    std::string operator()(const std::string& v) const { return v; }
  } visit;
  return std::visit(visit, c);
}

nlohmann::ordered_json cell_json(const Cell& c) {
  if (std::holds_alternative<std::monostate>(c)) return nullptr;
  if (auto* i = std::get_if<std::int64_t>(&c)) return *i;
  if (auto* s = std::get_if<std::string>(&c)) return *s;
  const double v = std::get<double>(c);
  // JSON has no inf/nan; keep them as strings so nothing is lost.
  if (!std::isfinite(v)) return format_real(v);
  return v;
}

}  // namespace

std::string RecordTable::to_csv() const {
  std::string config_text;
  for (std::size_t i = 0; i < config_.size(); ++i)
    config_text += (i ? ";" : "") + config_[i].first + "=" + config_[i].second;
  const std::string wall = wall_time_ms_ ? std::to_string(*wall_time_ms_) : "";

  std::string out;
  const auto h = header();
  for (std::size_t i = 0; i < h.size(); ++i) out += (i ? "," : "") + h[i];
  out += "\n";
  for (const auto& [kind, cells] : rows_) {
    out += std::to_string(kSchemaVersion) + "," + kLibraryVersion + "," + command_ + "," + config_text + "," + kind;
    for (const auto& c : cells) out += "," + cell_text(c);
    out += "," + wall + "\n";
  }
  return out;
}

std::string RecordTable::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["library_version"] = kLibraryVersion;
  j["command"] = command_;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config_) cfg[k] = v;
  j["config"] = cfg;
  j["columns"] = header();
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& [kind, cells] : rows_) {
    nlohmann::ordered_json row;
    row["row"] = kind;
    for (std::size_t i = 0; i < cells.size(); ++i) row[columns_[i]] = cell_json(cells[i]);
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  j["wall_time_ms"] = wall_time_ms_ ? nlohmann::ordered_json(*wall_time_ms_) : nlohmann::ordered_json(nullptr);
  // Round-trip doubles: nlohmann prints with max_digits10.
  return j.dump(2) + "\n";
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  const std::filesystem::path tmp =
      dir / ("." + path.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write output: failed to open " + tmp.string());
    out.write(content.data(), std::streamsize(content.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("cannot write output: write to " + tmp.string() + " failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error("cannot write output: rename to " + path.string() + " failed");
  }
}

}  // namespace elfit
