#include <fstream>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <spdlog/version.h>

#include "trojanrec/harness.hpp"

#ifndef TROJANREC_VERSION
#define TROJANREC_VERSION "0.0.0"
#endif

namespace trojanrec::harness {

void write_atomic(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  try {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    body(out);
    out.flush();
    if (!out) throw Error("write failed: " + tmp.string());
  } catch (...) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw;
  }
  std::filesystem::rename(tmp, path);
}

void write_manifest(const RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& outputs) {
  nlohmann::json stage_seeds = nlohmann::json::object();
  for (const char* stage : {"synthetic", "targets", "attack", "substitute", "victim"}) {
    stage_seeds[stage] = cfg.stage_seed(stage);
  }
  nlohmann::json manifest = {
      {"command", command},
      {"config_hash", sha256_hex(cfg.canonical)},
      {"config", cfg.canonical},
      {"seed", cfg.seed},
      {"stage_seeds", stage_seeds},
      {"outputs", outputs},
      {"versions",
       {{"trojanrec", TROJANREC_VERSION},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                      "." + std::to_string(EIGEN_MINOR_VERSION)},
        {"boost", BOOST_LIB_VERSION},
        {"spdlog", std::to_string(SPDLOG_VER_MAJOR) + "." + std::to_string(SPDLOG_VER_MINOR) + "." +
                       std::to_string(SPDLOG_VER_PATCH)},
        {"compiler", __VERSION__}}}};
  write_atomic(cfg.out_dir / ("manifest_" + command + ".json"),
               [&](std::ostream& out) { out << manifest.dump(2) << '\n'; });
}

void configure_logging(const char* level) {
  static bool installed = false;
  if (!installed) {
    spdlog::set_default_logger(spdlog::stderr_color_st("trojanrec"));
    installed = true;
  }
  spdlog::level::level_enum parsed = spdlog::level::warn;
  if (level != nullptr && *level != '\0') {
    parsed = spdlog::level::from_str(level);
    // from_str maps unknown names to off; keep the default instead.
    if (parsed == spdlog::level::off && std::string_view(level) != "off") parsed = spdlog::level::warn;
  }
  spdlog::set_level(parsed);
}

}  // namespace trojanrec::harness
