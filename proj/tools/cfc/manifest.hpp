#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace cfc::cli {

/// Provenance record written next to the outputs of one invocation.
class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> argv);

  void add_config(const std::filesystem::path& path) { configs_.push_back(path.string()); }
  void add_input(const std::filesystem::path& path) { inputs_.push_back(path.string()); }
  void add_output(const std::filesystem::path& path) { outputs_.push_back(path.string()); }
  void set_seed(const std::string& name, std::uint64_t seed) { seeds_[name] = seed; }

  bool has_outputs() const { return !outputs_.empty(); }
  /// Explicit path, or "<first output>.manifest.json".
  std::filesystem::path default_path() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::vector<std::string> configs_, inputs_, outputs_;
  std::map<std::string, std::uint64_t> seeds_;
  std::chrono::steady_clock::time_point started_;
  std::chrono::system_clock::time_point started_wall_;
};

}  // namespace cfc::cli
