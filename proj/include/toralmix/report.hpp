#pragma once

#include <fmt/format.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "config.hpp"
#include "core.hpp"

#ifndef TORALMIX_VERSION
#define TORALMIX_VERSION "0.0.0"
#endif

namespace toralmix {

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest failed");
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

// Write to a sibling temp file, then rename over the target.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp + " for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    if (!f) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

// Shortest round-trip text, '.' decimal regardless of locale.
inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{}", x);
}
inline std::string num(long long x) { return fmt::format("{}", x); }
inline std::string num(int x) { return fmt::format("{}", x); }
inline std::string num(std::size_t x) { return fmt::format("{}", x); }
inline std::string num(long x) { return fmt::format("{}", x); }
inline std::string num(bool b) { return b ? "true" : "false"; }
inline std::string num(const std::string& s) { return s; }
inline std::string num(const char* s) { return s; }

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  template <class... Ts>
  void add(const Ts&... vals) {
    if (sizeof...(Ts) != header.size()) throw std::logic_error("CsvTable: row width differs from header");
    rows.push_back({num(vals)...});
  }

  std::string csv() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out += ',';
        const bool quote = r[i].find_first_of(",\"\n") != std::string::npos;
        if (quote) {
          out += '"';
          for (char ch : r[i]) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
          out += '"';
        } else {
          out += r[i];
        }
      }
      out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }

  // whitespace separated, header as a comment
  std::string dat() const {
    std::string out = "#";
    for (const auto& h : header) out += ' ' + h;
    out += '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out += ' ';
        out += r[i].find(' ') == std::string::npos && !r[i].empty() ? r[i] : "\"" + r[i] + "\"";
      }
      out += '\n';
    }
    return out;
  }
};

struct CheckRecord {
  std::string name;
  std::string measured;
  std::string tolerance;
  bool pass = false;
  std::string detail;
};

class Manifest {
 public:
  Manifest(std::string command, const ExperimentConfig& cfg, std::filesystem::path out_dir)
      : command_(std::move(command)), config_(to_json(cfg)), out_(std::move(out_dir)),
        start_(std::chrono::steady_clock::now()) {}

  const std::filesystem::path& out_dir() const { return out_; }

  void warn(const std::string& w) {
    for (const auto& x : warnings_)
      if (x == w) return;
    warnings_.push_back(w);
  }
  void warn_all(const std::vector<std::string>& ws) {
    for (const auto& w : ws) warn(w);
  }
  void check(CheckRecord c) { checks_.push_back(std::move(c)); }
  void truncation(const std::string& key, double value) { truncation_[key] = value; }
  void result(const std::string& key, nlohmann::json value) { results_[key] = std::move(value); }

  void write_table(const std::string& stem, const CsvTable& t, bool dat) {
    const std::string body = t.csv();
    atomic_write(out_ / (stem + ".csv"), body);
    files_.push_back({{"path", stem + ".csv"}, {"sha256", sha256_hex(body)}, {"rows", t.rows.size()}});
    if (dat) {
      const std::string d = t.dat();
      atomic_write(out_ / (stem + ".dat"), d);
      files_.push_back({{"path", stem + ".dat"}, {"sha256", sha256_hex(d)}, {"rows", t.rows.size()}});
    }
  }

  bool all_pass() const {
    for (const auto& c : checks_)
      if (!c.pass) return false;
    return true;
  }
  const std::vector<CheckRecord>& checks() const { return checks_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Hash over the values that determine outputs; output location and thread
  // count are excluded.
  std::string config_hash() const {
    nlohmann::json j = config_;
    j.erase("output");
    j["run"].erase("threads");
    return sha256_hex(j.dump());
  }

  nlohmann::json json(std::string_view error = {}) const {
    nlohmann::json j;
    j["tool"] = "toralmix";
    j["version"] = TORALMIX_VERSION;
    j["command"] = command_;
    j["config"] = config_;
    j["config_hash"] = config_hash();
    j["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    j["truncation"] = truncation_.empty() ? nlohmann::json::object() : truncation_;
    j["warnings"] = warnings_;
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : checks_)
      cs.push_back({{"name", c.name}, {"measured", c.measured}, {"tolerance", c.tolerance}, {"pass", c.pass}, {"detail", c.detail}});
    j["checks"] = cs;
    j["all_pass"] = all_pass();
    j["results"] = results_.empty() ? nlohmann::json::object() : results_;
    j["files"] = files_.empty() ? nlohmann::json::array() : files_;
    if (!error.empty()) j["error"] = std::string(error);
    return j;
  }

  void write(std::string_view error = {}) const { atomic_write(out_ / "manifest.json", json(error).dump(2) + "\n"); }

 private:
  std::string command_;
  nlohmann::json config_;
  std::filesystem::path out_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> warnings_;
  std::vector<CheckRecord> checks_;
  nlohmann::json truncation_ = nlohmann::json::object();
  nlohmann::json results_ = nlohmann::json::object();
  nlohmann::json files_ = nlohmann::json::array();
};

}  // namespace toralmix
