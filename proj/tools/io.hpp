#pragma once

// output directory, CSV / JSON writers and the run manifest

#include "config.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <fftw3.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>

namespace qdcli {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* qdlab_version = "0.1.0";

inline std::string num_str(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  template <class... T>
  void add(const T&... cells) {
    rows.push_back({cell(cells)...});
  }
  static std::string cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  static std::string cell(const char* s) { return cell(std::string(s)); }
  static std::string cell(bool b) { return b ? "true" : "false"; }
  template <class N, class = std::enable_if_t<std::is_arithmetic_v<N>>>
  static std::string cell(N x) {
    if constexpr (std::is_integral_v<N>) return std::to_string(x);
    else return num_str(static_cast<double>(x));
  }
  std::string str() const {
    std::string s;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
      s += "\n";
    };
    line(header);
    for (auto& r : rows) line(r);
    return s;
  }
};

inline json versions() {
  return {{"qdlab", qdlab_version},
          {"compiler", __VERSION__},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"fftw", std::string(fftw_version)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cxx_standard", static_cast<long>(__cplusplus)}};
}

// collects files under --out and writes manifest.json last
class RunOutput {
 public:
  RunOutput(fs::path dir, std::string subcommand, std::vector<std::string> argv)
      : dir_(std::move(dir)), sub_(std::move(subcommand)), argv_(std::move(argv)),
        t0_(std::chrono::steady_clock::now()) {}

  const fs::path& dir() const { return dir_; }

  void write_text(const std::string& name, const std::string& text) {
    ensure_dir();
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    f << text;
    files_.push_back(name);
  }
  void write_csv(const std::string& name, const Csv& c) { write_text(name, c.str()); }
  void write_json(const std::string& name, const json& j) { write_text(name, j.dump(2) + "\n"); }
  template <class T>
  void write_binary(const std::string& name, const std::vector<T>& data) {
    ensure_dir();
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(T)));
    files_.push_back(name);
  }

  json manifest(const RunConfig* cfg, int exit_code, const std::string& status,
                const std::vector<Diagnostic>& diags) const {
    json m;
    m["subcommand"] = sub_;
    m["argv"] = argv_;
    if (cfg) {
      json c = json::object();
      for (auto& [k, v] : cfg->values) c[k] = v;
      m["config"] = c;
      m["seed"] = cfg->str("seed");
      m["budget"] = cfg->str("budget");
    }
    m["versions"] = versions();
    m["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    m["status"] = status;
    m["exit_code"] = exit_code;
    json d = json::array();
    for (auto& x : diags) d.push_back({{"level", x.level}, {"key", x.key}, {"line", x.line}, {"message", x.message}});
    m["diagnostics"] = d;
    m["files"] = files_;
    return m;
  }

  // best effort: a manifest is attempted even when the run failed
  void finish(const RunConfig* cfg, int exit_code, const std::string& status, const std::vector<Diagnostic>& diags) {
    try {
      ensure_dir();
      std::ofstream f(dir_ / "manifest.json");
      f << manifest(cfg, exit_code, status, diags).dump(2) << "\n";
    } catch (const std::exception&) {
    }
  }

 private:
  void ensure_dir() {
    if (!fs::exists(dir_)) fs::create_directories(dir_);
  }
  fs::path dir_;
  std::string sub_;
  std::vector<std::string> argv_;
  std::chrono::steady_clock::time_point t0_;
  std::vector<std::string> files_;
};

}  // namespace qdcli
