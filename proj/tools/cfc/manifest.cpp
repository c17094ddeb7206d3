#include "manifest.hpp"

#include <ctime>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cfc::cli {

Manifest::Manifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)),
      argv_(std::move(argv)),
      started_(std::chrono::steady_clock::now()),
      started_wall_(std::chrono::system_clock::now()) {}

std::filesystem::path Manifest::default_path() const {
  if (outputs_.empty()) throw std::logic_error("manifest without outputs");
  return outputs_.front() + ".manifest.json";
}

void Manifest::write(const std::filesystem::path& path) const {
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  const std::time_t t = std::chrono::system_clock::to_time_t(started_wall_);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  const nlohmann::json doc = {{"command", command_},
                              {"argv", argv_},
                              {"config_files", configs_},
                              {"inputs", inputs_},
                              {"outputs", outputs_},
                              {"seeds", seeds_},
                              {"version", CFC_VERSION},
                              {"git_rev", CFC_GIT_REV},
                              {"started_at", stamp},
                              {"wall_clock_seconds", elapsed}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace cfc::cli
