#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mlkmc/errors.hpp"

namespace mlkmc {

/// Round-trip formatting for doubles in CSV.
inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// UTC timestamp; SOURCE_DATE_EPOCH pins it for reproducible output.
inline std::string output_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* e = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    long long v = std::strtoll(e, &end, 10);
    if (end && *end == '\0' && end != e) t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Metadata {
  std::string tool = "mlkmc";
  std::string command;
  std::string git_describe;
  std::string timestamp;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = tool;
    j["command"] = command;
    j["git_describe"] = git_describe;
    j["timestamp"] = timestamp;
    j["seed"] = seed;
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config) c[k] = v;
    j["config"] = c;
    return j;
  }

  void write_csv_header(std::ostream& os) const {
    os << "# tool: " << tool << "\n";
    os << "# command: " << command << "\n";
    os << "# git_describe: " << git_describe << "\n";
    os << "# timestamp: " << timestamp << "\n";
    os << "# seed: " << seed << "\n";
    for (const auto& [k, v] : config) os << "# config: " << k << "=" << v << "\n";
  }
};

/// CSV file with the metadata block, a column header and %.17g numbers.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const Metadata& meta, const std::vector<std::string>& columns)
      : os_(path) {
    if (!os_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    meta.write_csv_header(os_);
    for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
    os_ << "\n";
  }

  CsvWriter& cell(double v) { return raw(fmt17(v)); }
  CsvWriter& cell(std::uint64_t v) { return raw(std::to_string(v)); }
  CsvWriter& cell(int v) { return raw(std::to_string(v)); }
  CsvWriter& cell(const std::string& v) { return raw(v); }
  CsvWriter& cell(const char* v) { return raw(v); }
  void end_row() {
    os_ << "\n";
    first_ = true;
  }
  void close() {
    os_.close();
    if (!os_) throw std::runtime_error("error while writing CSV output");
  }

 private:
  CsvWriter& raw(const std::string& s) {
    if (!first_) os_ << ",";
    os_ << s;
    first_ = false;
    return *this;
  }
  std::ofstream os_;
  bool first_ = true;
};

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << j.dump(2) << "\n";
  if (!os) throw std::runtime_error("error while writing " + path.string());
}

}  // namespace mlkmc
