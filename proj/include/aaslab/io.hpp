#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aaslab/common.hpp"

// CSV and JSON artifacts stamped with the hash of the configuration that produced them.
namespace aaslab::io {

inline constexpr std::string_view kHashPrefix = "# config_hash: ";

struct CsvTable {
  std::string config_hash;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    fail(ErrorKind::data, "missing CSV column '" + std::string(name) + "'");
  }
};

inline std::string join(const std::vector<std::string>& fields, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += sep;
    out += fields[i];
  }
  return out;
}

inline std::string to_csv(const CsvTable& t) {
  std::string out;
  if (!t.config_hash.empty()) out += std::string(kHashPrefix) + t.config_hash + "\n";
  out += join(t.header) + "\n";
  for (const auto& r : t.rows) out += join(r) + "\n";
  return out;
}

inline CsvTable parse_csv(std::string_view text, const std::string& origin = "<csv>") {
  CsvTable t;
  bool have_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.starts_with(kHashPrefix)) {
      t.config_hash = std::string(line.substr(kHashPrefix.size()));
      continue;
    }
    if (line.front() == '#') continue;
    std::vector<std::string> fields;
    for (auto f : split(line, ',')) fields.emplace_back(f);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
    } else {
      if (fields.size() != t.header.size())
        fail(ErrorKind::data, origin + ": row has " + std::to_string(fields.size()) + " fields, header has " +
                                  std::to_string(t.header.size()));
      t.rows.push_back(std::move(fields));
    }
  }
  if (!have_header) fail(ErrorKind::data, origin + ": no header row");
  return t;
}

inline void check_hash(const std::string& found, const std::string& expected, const std::string& origin) {
  if (found != expected)
    fail(ErrorKind::staleness, origin + " was produced under config hash '" + found + "', current stage hash is '" +
                                   expected + "'; rerun the producing stage");
}

inline CsvTable read_csv(const std::string& path, const std::string& expected_hash = {}) {
  auto t = parse_csv(read_file(path), path);
  if (!expected_hash.empty()) check_hash(t.config_hash, expected_hash, path);
  return t;
}

inline void write_csv(const std::string& path, const CsvTable& t) { write_file(path, to_csv(t)); }

/// JSON documents carry their hash under "config_hash".
inline void write_json(const std::string& path, nlohmann::json doc, const std::string& config_hash = {}) {
  if (!config_hash.empty()) doc["config_hash"] = config_hash;
  write_file(path, doc.dump(2) + "\n");
}

inline nlohmann::json read_json(const std::string& path, const std::string& expected_hash = {}) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::data, path + ": " + e.what());
  }
  if (!expected_hash.empty()) check_hash(doc.value("config_hash", std::string{}), expected_hash, path);
  return doc;
}

inline bool exists(const std::string& path) { return std::filesystem::exists(path); }

inline void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) fail(ErrorKind::io, "cannot create directory '" + path + "': " + ec.message());
}

}  // namespace aaslab::io
